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

// Joint model and its training loop.
//
// The objective of a mini-batch of (user, positive, negative) triples is
//
//   L = L_m + weight_tau * L_tau + weight_geo_loss * L_geo + l2_lambda * |params|^2
//
// with L_m and L_geo summed over triples and L_tau summed over the distinct
// users of the batch. The recommendation score is s_m + weight_geo_score * s_geo.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "temn/corpus.hpp"
#include "temn/eval.hpp"
#include "temn/fusion.hpp"
#include "temn/geo.hpp"
#include "temn/memnet.hpp"
#include "temn/tlda.hpp"

namespace temn {

enum class Scenario : std::uint8_t { kGpr = 0, kCpr = 1, kSpr = 2 };

const char* to_string(Scenario scenario);
/// Case-insensitive "gpr", "cpr" or "spr". Throws ConfigError otherwise.
Scenario parse_scenario(std::string_view text);

/// Which parameters the L2 term covers in a mini-batch step.
enum class Regularization : std::uint8_t {
  kTouched = 0,  // rows read by the batch, plus the shared matrices
  kGlobal = 1,   // every trainable parameter
};

struct TrainConfig {
  double learning_rate = 0.005;
  double l2_lambda = 1e-4;
  double margin_m = 0.2;
  double margin_g = 0.2;
  double weight_tau = 0.2;
  double weight_geo_loss = 0.1;
  double weight_geo_score = 0.4;
  std::size_t dim_d = 50;
  std::size_t slots_h = 10;
  std::size_t patterns_pi = 10;
  std::size_t epochs = 30;
  std::size_t batch_size = 128;
  std::uint64_t seed = 1;
  Scenario scenario = Scenario::kGpr;
  DistanceMode distance_mode = DistanceMode::kEuclideanDegrees;
  Regularization regularization = Regularization::kTouched;
  double init_bound = 0.05;
  std::int64_t segment_gap_seconds = 86400;  // sequential scenario only
  std::size_t segment_min_len = 5;

  /// Defaults with the loss and score weights of the scenario.
  static TrainConfig for_scenario(Scenario scenario);

  bool operator==(const TrainConfig&) const = default;
};

/// Throws ConfigError on a violated constraint.
void validate(const TrainConfig& config);

/// Flat `key = value` view using the field names above.
std::map<std::string, std::string> to_key_values(const TrainConfig& config);

/// Starts from the defaults of the scenario named by `scenario` (or by a
/// `scenario` key, or GPR) and applies the remaining keys. Throws ConfigError
/// on an unknown key or unparsable value.
TrainConfig resolve_config(const std::map<std::string, std::string>& overrides,
                           std::optional<Scenario> scenario = std::nullopt);

struct Model {
  TrainConfig config;
  Dictionary users;  // users with training records
  Dictionary pois;   // every POI of the split
  MemNetParams memnet;
  FusionParams fusion;
  GeoParams geo;
  TldaPosterior topics;
  Matrix user_topics;                        // |U| x pi, topics.theta aligned with users
  std::vector<UserCentroid> centroids;       // per user, frozen
  std::vector<Coordinates> poi_coordinates;  // per POI
  std::vector<std::vector<std::size_t>> histories;  // distinct training POIs, sorted

  std::size_t num_users() const { return users.size(); }
  std::size_t num_pois() const { return pois.size(); }

  bool operator==(const Model&) const = default;
};

/// Randomly initialized model over the split's users and POIs. Throws
/// ConfigError if the posterior lacks a training user or has a different
/// pattern count than the config.
Model init_model(const DatasetSplit& split, const TldaPosterior& topics,
                 const TrainConfig& config);

Vector memory_embedding(const Model& model, std::size_t user);

struct ScoreParts {
  double memory = 0.0;
  double geo = 0.0;
  double total = 0.0;
};

/// s = s_m + weight_geo_score * s_geo.
ScoreParts score_parts(const Model& model, std::span<const double> p, std::size_t user,
                       std::size_t poi);
double total_score(const Model& model, std::size_t user, std::size_t poi);
/// Throws LookupError for an unknown user or POI.
double total_score(const Model& model, const UserId& user, const PoiId& poi);

/// Scores many POIs for one user, computing the memory embedding once.
void score_pois(const Model& model, std::size_t user, std::span<const std::size_t> pois,
                std::span<double> out);

double total_loss(double loss_m, double loss_tau, double loss_geo, double squared_norm,
                  const TrainConfig& config);

/// Squared L2 norm of every trainable parameter.
double parameter_squared_norm(const Model& model);

class ModelScorer final : public Scorer {
 public:
  explicit ModelScorer(const Model& model) : model_(model) {}
  void score(std::size_t user, std::span<const std::size_t> pois,
             std::span<double> out) const override {
    score_pois(model_, user, pois, out);
  }

 private:
  const Model& model_;
};

/// Positive examples in index space. memories[m] is the POI set whose mean
/// is the memory embedding of an example; the first num_users entries are
/// the users' training histories.
struct TrainingData {
  struct Positive {
    std::size_t user = 0;
    std::size_t memory = 0;
    std::size_t poi = 0;
  };
  std::vector<std::vector<std::size_t>> memories;
  std::vector<Positive> positives;
  IndexedInteractions train;  // negatives are drawn outside these sets
};

/// One example per distinct training (user, POI) pair.
TrainingData interaction_examples(const Model& model, const CheckInLog& train);

/// For each segment position t >= 1, the distinct POIs before t form the
/// memory and the POI at t is the positive.
TrainingData sequence_examples(const Model& model, const SequenceSet& sequences,
                               const CheckInLog& train);

struct Triple {
  std::size_t example = 0;  // index into TrainingData::positives
  std::size_t negative = 0;
};

struct ModelGradients {
  MemNetGradients memnet;
  FusionGradients fusion;
  Vector user_pref;
  Vector poi_infl;

  static ModelGradients zeros_like(const Model& model);
};

struct ObjectiveTerms {
  double memnet = 0.0;
  double topic = 0.0;
  double geo = 0.0;
  double squared_norm = 0.0;  // of the regularized parameters
  double total = 0.0;
};

/// Objective of one mini-batch and, if `grads` is non-null, its gradient
/// (accumulated into `grads`).
ObjectiveTerms batch_objective(const Model& model, const TrainingData& data,
                               std::span<const Triple> batch, ModelGradients* grads);

/// params -= learning_rate * grads
void apply_gradients(Model& model, const ModelGradients& grads, double learning_rate);

struct EpochReport {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;  // mean objective per triple over the epoch
  double validation_ndcg10 = 0.0;
};

struct FitResult {
  Model model;  // parameters of the best validation epoch
  std::vector<EpochReport> epochs;
  std::size_t best_epoch = 0;  // 0 when no epoch ran
  /// Mean objective per triple over the training examples with one fixed
  /// negative each, before the first and after the last epoch.
  double initial_loss = 0.0;
  double final_loss = 0.0;
};

/// Trains on the split; the sequential scenario segments the training part
/// with the config's gap and minimum length. Throws DivergenceError on a
/// non-finite loss.
FitResult fit(const DatasetSplit& split, const TldaPosterior& topics, const TrainConfig& config);
FitResult fit(const DatasetSplit& split, const SequenceSet& sequences,
              const TldaPosterior& topics, const TrainConfig& config);

/// Validation NDCG@10 under the evaluation protocol with a fixed seed.
double validation_ndcg10(const Model& model, const DatasetSplit& split);

inline constexpr std::uint32_t kModelFormatVersion = 1;

void save_model(const Model& model, const std::filesystem::path& path);
/// Throws LoadError on a missing, truncated, corrupted or foreign file, or on
/// a version other than kModelFormatVersion.
Model load_model(const std::filesystem::path& path);

}  // namespace temn
