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

// Single-layer map from a memory embedding to a pattern distribution,
// softmax(ReLU(W p + b)), trained by cross-entropy against the topic model's
// user mixture. Its gradient on p is what couples topics to the memory
// network's POI embeddings.

#pragma once

#include <span>
#include <vector>

#include "temn/matrix.hpp"

namespace temn {

struct FusionParams {
  Matrix weight;  // pi x d
  Vector bias;    // pi

  std::size_t num_patterns() const { return weight.rows(); }
  std::size_t dim() const { return weight.cols(); }

  bool operator==(const FusionParams&) const = default;
};

/// Log floor inside the cross-entropy.
inline constexpr double kLogFloor = 1e-12;

Vector fusion_forward(std::span<const double> p, const FusionParams& params);

/// -sum_i target_i log(max(predicted_i, kLogFloor))
double fusion_ce_loss(std::span<const double> target, std::span<const double> predicted);

struct FusionGradients {
  Matrix weight;
  Vector bias;

  static FusionGradients zeros_like(const FusionParams& params);
};

/// Adds weight * d(CE)/d(W, b) into `grads` and weight * d(CE)/dp into
/// `grad_p`. Returns the unweighted loss. The ReLU subgradient at 0 is 0.
double fusion_backward(std::span<const double> p, std::span<const double> target,
                       const FusionParams& params, double weight, FusionGradients& grads,
                       std::span<double> grad_p);

struct FusionExample {
  std::span<const double> p;
  std::span<const double> target;
};

struct FusionBatchGradients {
  FusionGradients params;
  std::vector<Vector> inputs;  // d(loss)/dp per example
};

double fusion_batch_loss(std::span<const FusionExample> batch, const FusionParams& params);
FusionBatchGradients fusion_gradients(std::span<const FusionExample> batch,
                                      const FusionParams& params);

}  // namespace temn
