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

#include "temn/fusion.hpp"

#include <algorithm>
#include <cmath>

#include "temn/errors.hpp"

namespace temn {

namespace {

Vector pre_activation(std::span<const double> p, const FusionParams& params) {
  if (p.size() != params.dim() || params.bias.size() != params.num_patterns()) {
    throw DomainError("fusion: inconsistent dimensions");
  }
  Vector o(params.num_patterns());
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = dot(params.weight.row(i), p) + params.bias[i];
  return o;
}

Vector softmax_of_relu(std::span<const double> o) {
  Vector y(o.size());
  double hi = 0.0;  // ReLU outputs are >= 0
  for (std::size_t i = 0; i < o.size(); ++i) hi = std::max(hi, std::max(0.0, o[i]));
  double sum = 0.0;
  for (std::size_t i = 0; i < o.size(); ++i) sum += (y[i] = std::exp(std::max(0.0, o[i]) - hi));
  for (double& x : y) x /= sum;
  return y;
}

}  // namespace

Vector fusion_forward(std::span<const double> p, const FusionParams& params) {
  return softmax_of_relu(pre_activation(p, params));
}

double fusion_ce_loss(std::span<const double> target, std::span<const double> predicted) {
  if (target.size() != predicted.size()) throw DomainError("cross-entropy length mismatch");
  double loss = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    if (target[i] != 0.0) loss -= target[i] * std::log(std::max(predicted[i], kLogFloor));
  }
  return loss;
}

FusionGradients FusionGradients::zeros_like(const FusionParams& params) {
  return {Matrix(params.weight.rows(), params.weight.cols()),
          Vector(params.bias.size(), 0.0)};
}

double fusion_backward(std::span<const double> p, std::span<const double> target,
                       const FusionParams& params, double weight, FusionGradients& grads,
                       std::span<double> grad_p) {
  const Vector o = pre_activation(p, params);
  const Vector y = softmax_of_relu(o);
  const double loss = fusion_ce_loss(target, y);
  double target_mass = 0.0;
  for (double t : target) target_mass += t;
  for (std::size_t i = 0; i < o.size(); ++i) {
    // d/da_i of -sum_k t_k log softmax(a)_k is y_i sum_k t_k - t_i. When the
    // floor is active the loss is flat in that coordinate.
    double g = y[i] * target_mass - target[i];
    if (y[i] < kLogFloor && target[i] != 0.0) g = y[i] * target_mass;
    if (o[i] <= 0.0) continue;
    g *= weight;
    axpy(g, p, grads.weight.row(i));
    grads.bias[i] += g;
    axpy(g, params.weight.row(i), grad_p);
  }
  return loss;
}

double fusion_batch_loss(std::span<const FusionExample> batch, const FusionParams& params) {
  double total = 0.0;
  for (const FusionExample& ex : batch) {
    total += fusion_ce_loss(ex.target, fusion_forward(ex.p, params));
  }
  return total;
}

FusionBatchGradients fusion_gradients(std::span<const FusionExample> batch,
                                      const FusionParams& params) {
  FusionBatchGradients out{FusionGradients::zeros_like(params), {}};
  for (const FusionExample& ex : batch) {
    Vector gp(ex.p.size(), 0.0);
    fusion_backward(ex.p, ex.target, params, 1.0, out.params, gp);
    out.inputs.push_back(std::move(gp));
  }
  return out;
}

}  // namespace temn
