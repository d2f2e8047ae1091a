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

#include "temn/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>

#include "temn/errors.hpp"
#include "temn/random.hpp"
#include "temn/text_io.hpp"

namespace temn {

namespace {

std::string padded(char prefix, std::size_t i, std::size_t count) {
  std::size_t width = std::to_string(count > 0 ? count - 1 : 0).size();
  std::string digits = std::to_string(i);
  return prefix + std::string(width - std::min(width, digits.size()), '0') + digits;
}

Vector sample_dirichlet(std::size_t k, double concentration, Rng& rng) {
  std::gamma_distribution<double> g(concentration, 1.0);
  Vector v(k);
  double sum = 0.0;
  for (double& x : v) sum += (x = g(rng));
  if (sum <= 0.0) {
    // All draws underflowed; fall back to a uniform vertex.
    std::uniform_int_distribution<std::size_t> pick(0, k - 1);
    std::fill(v.begin(), v.end(), 0.0);
    v[pick(rng)] = 1.0;
    return v;
  }
  for (double& x : v) x /= sum;
  return v;
}

}  // namespace

void validate(const SynthConfig& c) {
  if (c.num_users < 1 || c.num_pois < 1 || c.num_patterns < 1 || c.num_weeks < 1) {
    throw ConfigError("synth counts must be at least 1");
  }
  if (c.min_checkins < 1 || c.max_checkins < c.min_checkins) {
    throw ConfigError("synth check-in range must satisfy 1 <= min <= max");
  }
  if (c.num_patterns > c.num_pois) {
    throw ConfigError("num_patterns (" + std::to_string(c.num_patterns) +
                      ") exceeds num_pois (" + std::to_string(c.num_pois) + ")");
  }
  if (!(c.noise_fraction >= 0.0 && c.noise_fraction < 1.0)) {
    throw ConfigError("noise_fraction must lie in [0, 1)");
  }
  if (!(c.pattern_user_concentration > 0.0)) {
    throw ConfigError("pattern_user_concentration must be positive");
  }
  if (!(c.geo_cluster_radius >= 0.0)) throw ConfigError("geo_cluster_radius must be >= 0");
  if (!c.pattern_time_profiles.empty()) {
    if (c.pattern_time_profiles.size() != c.num_patterns) {
      throw ConfigError("need one time profile per pattern");
    }
    const std::size_t slots = c.pattern_time_profiles.front().size();
    if (slots < 1 || slots > 168) throw ConfigError("time profiles need 1..168 slots");
    for (const Vector& p : c.pattern_time_profiles) {
      if (p.size() != slots) throw ConfigError("time profiles differ in length");
      double sum = 0.0;
      for (double x : p) {
        if (!(x >= 0.0)) throw ConfigError("time profile entries must be >= 0");
        sum += x;
      }
      if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("time profile does not sum to 1");
    }
  }
}

std::vector<Vector> default_time_profiles(std::size_t num_patterns, std::size_t slots) {
  std::vector<Vector> out(num_patterns, Vector(slots));
  for (std::size_t k = 0; k < num_patterns; ++k) {
    const double peak =
        num_patterns == 1 ? 12.0 : 7.0 + 15.0 * static_cast<double>(k) / (num_patterns - 1);
    double sum = 0.0;
    for (std::size_t s = 0; s < slots; ++s) {
      const double hour = static_cast<double>(s % 24);
      const bool weekend = (s / 24) % 7 >= 5;
      double d = std::abs(hour - peak);
      d = std::min(d, 24.0 - d);
      const double day = (k % 2 == 0) == weekend ? 0.3 : 1.0;
      out[k][s] = std::exp(-d * d / 8.0) * day + 1e-3;
      sum += out[k][s];
    }
    for (double& x : out[k]) x /= sum;
  }
  return out;
}

SynthCorpus generate(const SynthConfig& config) {
  validate(config);
  Rng rng(config.seed);
  SynthCorpus out;
  SynthGroundTruth& truth = out.truth;
  const std::size_t P = config.num_patterns;

  truth.time_profiles = config.pattern_time_profiles.empty()
                            ? default_time_profiles(P)
                            : config.pattern_time_profiles;
  const std::size_t slots = truth.time_profiles.front().size();

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t k = 0; k < P; ++k) {
    truth.cluster_centers.push_back(
        {config.area_lat + config.area_span * (2.0 * unit(rng) - 1.0),
         config.area_lon + config.area_span * (2.0 * unit(rng) - 1.0)});
  }

  // Balanced hard assignment of POIs to patterns.
  std::vector<std::size_t> order(config.num_pois);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::size_t> poi_pattern(config.num_pois);
  std::vector<std::vector<std::size_t>> venues(P);
  for (std::size_t r = 0; r < order.size(); ++r) {
    poi_pattern[order[r]] = r % P;
    venues[r % P].push_back(order[r]);
  }
  for (auto& v : venues) std::sort(v.begin(), v.end());

  std::vector<PoiId> poi_names(config.num_pois);
  std::vector<Coordinates> poi_coords(config.num_pois);
  for (std::size_t i = 0; i < config.num_pois; ++i) {
    poi_names[i] = padded('p', i, config.num_pois);
    const Coordinates& c = truth.cluster_centers[poi_pattern[i]];
    const double r = config.geo_cluster_radius * std::sqrt(unit(rng));
    const double a = 2.0 * std::numbers::pi * unit(rng);
    poi_coords[i] = {std::clamp(c.lat + r * std::sin(a), -90.0, 90.0),
                     std::clamp(c.lon + r * std::cos(a), -180.0, 180.0)};
    truth.poi_pattern[poi_names[i]] = poi_pattern[i];
  }

  std::vector<std::discrete_distribution<std::size_t>> slot_dists;
  for (const Vector& p : truth.time_profiles) slot_dists.emplace_back(p.begin(), p.end());
  std::uniform_int_distribution<std::size_t> n_checkins(config.min_checkins,
                                                        config.max_checkins);
  std::uniform_int_distribution<std::size_t> week(0, config.num_weeks - 1);
  std::uniform_int_distribution<std::size_t> any_poi(0, config.num_pois - 1);
  std::uniform_int_distribution<std::size_t> any_slot(0, slots - 1);
  std::uniform_int_distribution<std::int64_t> second(0, 3599);

  std::vector<CheckIn> records;
  for (std::size_t u = 0; u < config.num_users; ++u) {
    const UserId name = padded('u', u, config.num_users);
    Vector mixture = P == 1 ? Vector{1.0}
                            : sample_dirichlet(P, config.pattern_user_concentration, rng);
    std::discrete_distribution<std::size_t> pick_pattern(mixture.begin(), mixture.end());
    truth.user_mixture[name] = mixture;
    const std::size_t n = n_checkins(rng);
    for (std::size_t k = 0; k < n; ++k) {
      std::size_t pattern, slot, poi;
      if (config.noise_fraction > 0.0 && unit(rng) < config.noise_fraction) {
        pattern = SynthGroundTruth::kNoise;
        slot = any_slot(rng);
        poi = any_poi(rng);
      } else {
        pattern = pick_pattern(rng);
        slot = slot_dists[pattern](rng);
        const auto& vs = venues[pattern];
        poi = vs[std::uniform_int_distribution<std::size_t>(0, vs.size() - 1)(rng)];
      }
      CheckIn c;
      c.user = name;
      c.poi = poi_names[poi];
      c.timestamp = config.start_timestamp +
                    static_cast<std::int64_t>(week(rng)) * 7 * 86400 +
                    static_cast<std::int64_t>(slot) * 3600 + second(rng);
      c.lat = poi_coords[poi].lat;
      c.lon = poi_coords[poi].lon;
      records.push_back(std::move(c));
      truth.record_pattern.push_back(pattern);
      truth.record_slot.push_back(slot);
    }
  }
  out.log = CheckInLog(std::move(records));
  return out;
}

void save_ground_truth(const std::filesystem::path& dir, const SynthGroundTruth& truth) {
  std::filesystem::create_directories(dir);
  std::ofstream users(dir / "ground_truth_users.csv");
  std::ofstream pois(dir / "ground_truth_pois.csv");
  if (!users || !pois) throw InputError("cannot write ground truth in " + dir.string());
  for (const auto& [u, mixture] : truth.user_mixture) {
    users << u;
    for (double x : mixture) users << ',' << format_double(x);
    users << '\n';
  }
  for (const auto& [v, pattern] : truth.poi_pattern) pois << v << ',' << pattern << '\n';
}

}  // namespace temn
