/*
 * Copyright 2026 The TEMN Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "temn/memnet.hpp"

#include <algorithm>
#include <cmath>

#include "temn/errors.hpp"

namespace temn {

MemNetParams MemNetParams::init(std::size_t num_pois, std::size_t dim, std::size_t slots,
                                Rng& rng, double bound) {
  MemNetParams p{Matrix(num_pois, dim), Matrix(dim, slots), Matrix(slots, dim)};
  std::uniform_real_distribution<double> u(-bound, bound);
  for (Matrix* m : {&p.poi_embeddings, &p.keys, &p.memory}) {
    for (double& x : m->data()) x = u(rng);
  }
  return p;
}

Vector user_memory_embedding(std::span<const std::size_t> visited, const MemNetParams& params) {
  if (visited.empty()) throw DomainError("memory embedding of an empty visited set");
  Vector p(params.dim(), 0.0);
  for (std::size_t i : visited) axpy(1.0, params.poi_embeddings.row(i), p);
  const double inv = 1.0 / static_cast<double>(visited.size());
  for (double& x : p) x *= inv;
  return p;
}

Vector joint_embedding(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw DomainError("joint embedding of vectors of different length");
  Vector e(p.size());
  for (std::size_t k = 0; k < p.size(); ++k) e[k] = p[k] * q[k];
  return e;
}

Vector attention(std::span<const double> e, const Matrix& keys) {
  if (e.size() != keys.rows()) throw DomainError("attention: key length differs from d");
  const std::size_t h = keys.cols();
  Vector w(h, 0.0);
  for (std::size_t k = 0; k < e.size(); ++k) {
    if (!std::isfinite(e[k])) throw DomainError("attention: non-finite joint embedding");
    auto key_row = keys.row(k);
    for (std::size_t i = 0; i < h; ++i) w[i] += e[k] * key_row[i];
  }
  double hi = -INFINITY;
  for (double a : w) {
    if (!std::isfinite(a)) throw DomainError("attention: non-finite logit");
    hi = std::max(hi, a);
  }
  double sum = 0.0;
  for (double& a : w) sum += (a = std::exp(a - hi));
  for (double& a : w) a /= sum;
  return w;
}

Vector relation_vector(std::span<const double> w, const Matrix& memory) {
  if (w.size() != memory.rows()) throw DomainError("relation vector: weight length differs from h");
  Vector r(memory.cols(), 0.0);
  for (std::size_t i = 0; i < w.size(); ++i) axpy(w[i], memory.row(i), r);
  return r;
}

double mn_score(std::span<const double> p, std::span<const double> r,
                std::span<const double> q) {
  if (p.size() != r.size() || p.size() != q.size()) {
    throw DomainError("score of vectors of different length");
  }
  double s = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double d = p[k] + r[k] - q[k];
    s += d * d;
  }
  return -s;
}

double mn_pair_loss(double s_pos, double s_neg, double margin) {
  return std::max(0.0, s_neg - s_pos + margin);
}

TripleForward mn_forward(std::span<const double> p, std::size_t pos, std::size_t neg,
                         const MemNetParams& params, double margin) {
  TripleForward f;
  auto q_pos = params.poi_embeddings.row(pos);
  f.e = joint_embedding(p, q_pos);
  f.w = attention(f.e, params.keys);
  f.r = relation_vector(f.w, params.memory);
  f.s_pos = mn_score(p, f.r, q_pos);
  f.s_neg = mn_score(p, f.r, params.poi_embeddings.row(neg));
  f.loss = mn_pair_loss(f.s_pos, f.s_neg, margin);
  return f;
}

double mn_score_for(std::span<const double> p, std::size_t poi, const MemNetParams& params) {
  auto q = params.poi_embeddings.row(poi);
  Vector w = attention(joint_embedding(p, q), params.keys);
  Vector r = relation_vector(w, params.memory);
  return mn_score(p, r, q);
}

MemNetGradients MemNetGradients::zeros_like(const MemNetParams& params) {
  return {Matrix(params.poi_embeddings.rows(), params.poi_embeddings.cols()),
          Matrix(params.keys.rows(), params.keys.cols()),
          Matrix(params.memory.rows(), params.memory.cols())};
}

void MemNetGradients::clear() {
  poi_embeddings.fill(0.0);
  keys.fill(0.0);
  memory.fill(0.0);
}

double mn_backward(std::span<const double> p, std::size_t pos, std::size_t neg,
                   const MemNetParams& params, double margin, double weight,
                   MemNetGradients& grads, std::span<double> grad_p) {
  const TripleForward f = mn_forward(p, pos, neg, params, margin);
  if (f.loss <= 0.0) return f.loss;

  const std::size_t d = params.dim();
  const std::size_t h = params.slots();
  auto q_pos = params.poi_embeddings.row(pos);
  auto q_neg = params.poi_embeddings.row(neg);
  auto g_pos = grads.poi_embeddings.row(pos);
  auto g_neg = grads.poi_embeddings.row(neg);

  // loss = ||p + r - q_pos||^2 - ||p + r - q_neg||^2 + margin
  Vector g_r(d);
  for (std::size_t k = 0; k < d; ++k) {
    const double dv = p[k] + f.r[k] - q_pos[k];
    const double dj = p[k] + f.r[k] - q_neg[k];
    g_r[k] = 2.0 * weight * (dv - dj);
    g_pos[k] -= 2.0 * weight * dv;
    g_neg[k] += 2.0 * weight * dj;
    grad_p[k] += g_r[k];
  }

  // r = sum_i w_i m_i
  Vector g_w(h);
  double mean_gw = 0.0;
  for (std::size_t i = 0; i < h; ++i) {
    axpy(f.w[i], g_r, grads.memory.row(i));
    g_w[i] = dot(params.memory.row(i), g_r);
    mean_gw += f.w[i] * g_w[i];
  }
  // softmax backward: da_i = w_i (g_w_i - sum_j w_j g_w_j)
  Vector g_a(h);
  for (std::size_t i = 0; i < h; ++i) g_a[i] = f.w[i] * (g_w[i] - mean_gw);

  // a_i = e . k_i, e = p * q_pos
  for (std::size_t k = 0; k < d; ++k) {
    auto key_row = params.keys.row(k);
    auto g_key_row = grads.keys.row(k);
    double g_e = 0.0;
    for (std::size_t i = 0; i < h; ++i) {
      g_key_row[i] += g_a[i] * f.e[k];
      g_e += g_a[i] * key_row[i];
    }
    grad_p[k] += g_e * q_pos[k];
    g_pos[k] += g_e * p[k];
  }
  return f.loss;
}

void distribute_memory_gradient(std::span<const std::size_t> visited,
                                std::span<const double> grad_p, MemNetGradients& grads) {
  if (visited.empty()) return;
  const double inv = 1.0 / static_cast<double>(visited.size());
  for (std::size_t i : visited) axpy(inv, grad_p, grads.poi_embeddings.row(i));
}

double mn_batch_loss(std::span<const MemNetTriple> batch, const MemNetParams& params,
                     double margin) {
  double total = 0.0;
  for (const MemNetTriple& t : batch) {
    Vector p = user_memory_embedding(t.visited, params);
    total += mn_forward(p, t.pos, t.neg, params, margin).loss;
  }
  return total;
}

MemNetGradients mn_gradients(std::span<const MemNetTriple> batch, const MemNetParams& params,
                             double margin) {
  MemNetGradients grads = MemNetGradients::zeros_like(params);
  Vector grad_p(params.dim());
  for (const MemNetTriple& t : batch) {
    Vector p = user_memory_embedding(t.visited, params);
    std::fill(grad_p.begin(), grad_p.end(), 0.0);
    if (mn_backward(p, t.pos, t.neg, params, margin, 1.0, grads, grad_p) > 0.0) {
      distribute_memory_gradient(t.visited, grad_p, grads);
    }
  }
  return grads;
}

}  // namespace temn
