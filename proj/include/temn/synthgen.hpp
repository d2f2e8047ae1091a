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

// Synthetic check-in corpora with planted pattern, time-of-week and
// geographic structure.
//
// Generative story: every POI belongs to exactly one pattern and lies in a
// disc around that pattern's cluster center. Each user draws a pattern
// mixture from a symmetric Dirichlet; each check-in draws a pattern from the
// mixture, an hour-of-week slot from the pattern's time profile and a POI
// uniformly from the pattern's venues. With probability noise_fraction a
// check-in instead picks a uniform POI and a uniform slot.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <vector>

#include "temn/corpus.hpp"
#include "temn/matrix.hpp"

namespace temn {

struct SynthConfig {
  std::size_t num_users = 500;
  std::size_t num_pois = 200;
  std::size_t num_patterns = 3;
  std::size_t min_checkins = 50;  // per user, inclusive
  std::size_t max_checkins = 90;
  double pattern_user_concentration = 0.5;
  /// One distribution over time slots per pattern. Empty selects the built-in
  /// hour-of-week profiles (168 slots).
  std::vector<Vector> pattern_time_profiles;
  double geo_cluster_radius = 0.05;  // degrees
  double noise_fraction = 0.0;
  std::uint64_t seed = 7;
  std::size_t num_weeks = 8;
  std::int64_t start_timestamp = 1514764800;  // Monday 2018-01-01 00:00 UTC
  double area_lat = 39.9;
  double area_lon = 116.4;
  double area_span = 0.3;  // cluster centers within +-span degrees
};

/// Throws ConfigError describing the first violated constraint.
void validate(const SynthConfig& config);

/// Smooth daily peaks at distinct hours; even patterns favour weekdays, odd
/// ones weekends. Rows sum to 1.
std::vector<Vector> default_time_profiles(std::size_t num_patterns, std::size_t slots = 168);

struct SynthGroundTruth {
  std::map<UserId, Vector> user_mixture;
  std::map<PoiId, std::size_t> poi_pattern;
  std::vector<Coordinates> cluster_centers;
  std::vector<Vector> time_profiles;
  /// Pattern that generated each log record, or kNoise.
  std::vector<std::size_t> record_pattern;
  std::vector<std::size_t> record_slot;

  static constexpr std::size_t kNoise = static_cast<std::size_t>(-1);
};

struct SynthCorpus {
  CheckInLog log;
  SynthGroundTruth truth;
};

SynthCorpus generate(const SynthConfig& config);

/// Writes ground_truth_users.csv (`user_id,mixture...`) and
/// ground_truth_pois.csv (`poi_id,pattern_id`).
void save_ground_truth(const std::filesystem::path& dir, const SynthGroundTruth& truth);

}  // namespace temn
