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

// Memory-network scorer.
//
// A user is represented by the mean embedding of the POIs in their history
// (the memory embedding p). For a candidate POI v the joint embedding
// e = p * q_v (elementwise) addresses a shared key matrix by softmax
// attention; the attention-weighted read of the memory matrix is a relation
// vector r that translates p towards q_v. The score is -||p + r - q_v||^2.
//
// Pairwise training reads r from the positive pair and reuses it for the
// negative POI, then applies the hinge max(0, s_neg - s_pos + margin).

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "temn/matrix.hpp"
#include "temn/random.hpp"

namespace temn {

struct MemNetParams {
  Matrix poi_embeddings;  // |V| x d, row v is q_v
  Matrix keys;            // d x h, column i is k_i
  Matrix memory;          // h x d, row i is m_i

  std::size_t dim() const { return poi_embeddings.cols(); }
  std::size_t slots() const { return memory.rows(); }
  std::size_t num_pois() const { return poi_embeddings.rows(); }

  /// Uniform initialization in [-bound, bound].
  static MemNetParams init(std::size_t num_pois, std::size_t dim, std::size_t slots, Rng& rng,
                           double bound = 0.05);

  bool operator==(const MemNetParams&) const = default;
};

/// Mean of q_i over the visited POIs. Throws DomainError when empty.
Vector user_memory_embedding(std::span<const std::size_t> visited, const MemNetParams& params);

/// Elementwise product. Throws DomainError on a length mismatch.
Vector joint_embedding(std::span<const double> p, std::span<const double> q);

/// softmax_i(e . k_i), max-shifted. Throws DomainError on non-finite input or
/// inconsistent dimensions.
Vector attention(std::span<const double> e, const Matrix& keys);

/// sum_i w_i m_i
Vector relation_vector(std::span<const double> w, const Matrix& memory);

/// -||p + r - q||^2
double mn_score(std::span<const double> p, std::span<const double> r,
                std::span<const double> q);

/// max(0, s_neg - s_pos + margin)
double mn_pair_loss(double s_pos, double s_neg, double margin);

/// Everything the forward pass of one (user, positive, negative) triple
/// produces. The relation vector is computed once from the positive pair.
struct TripleForward {
  Vector e;  // joint embedding of (user, positive)
  Vector w;  // attention over memory slots
  Vector r;  // relation vector shared by both scores
  double s_pos = 0.0;
  double s_neg = 0.0;
  double loss = 0.0;
};

TripleForward mn_forward(std::span<const double> p, std::size_t pos, std::size_t neg,
                         const MemNetParams& params, double margin);

/// Score of (p, v) with its own relation vector; used at inference time.
double mn_score_for(std::span<const double> p, std::size_t poi, const MemNetParams& params);

struct MemNetGradients {
  Matrix poi_embeddings;
  Matrix keys;
  Matrix memory;

  static MemNetGradients zeros_like(const MemNetParams& params);
  void clear();
};

/// Adds the gradient of one triple's hinge loss, times `weight`, into `grads`
/// (rows pos/neg, keys, memory) and into `grad_p`, the gradient with respect
/// to the memory embedding p. Returns the unweighted loss. Inactive triples
/// add nothing.
double mn_backward(std::span<const double> p, std::size_t pos, std::size_t neg,
                   const MemNetParams& params, double margin, double weight,
                   MemNetGradients& grads, std::span<double> grad_p);

/// Pushes a gradient on p = mean(q_i, i in visited) back to each q_i.
void distribute_memory_gradient(std::span<const std::size_t> visited,
                                std::span<const double> grad_p, MemNetGradients& grads);

struct MemNetTriple {
  std::span<const std::size_t> visited;  // history defining p
  std::size_t pos = 0;
  std::size_t neg = 0;
};

/// Total hinge loss of a batch.
double mn_batch_loss(std::span<const MemNetTriple> batch, const MemNetParams& params,
                     double margin);

/// Gradient of mn_batch_loss with respect to embeddings, keys and memory.
MemNetGradients mn_gradients(std::span<const MemNetTriple> batch, const MemNetParams& params,
                             double margin);

}  // namespace temn
