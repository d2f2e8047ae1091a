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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <boost/math/distributions/chi_squared.hpp>

#include "doctest.h"
#include "temn/errors.hpp"
#include "temn/synthgen.hpp"

using namespace temn;

TEST_CASE("single pattern gives every user the mixture [1]") {
  SynthConfig c;
  c.num_users = 20;
  c.num_patterns = 1;
  SynthCorpus s = generate(c);
  for (const auto& [u, m] : s.truth.user_mixture) CHECK(m == Vector{1.0});
}

TEST_CASE("without noise every check-in visits a POI of its pattern") {
  SynthConfig c;
  c.num_users = 100;
  c.pattern_user_concentration = 1e-3;  // mostly one-hot mixtures
  SynthCorpus s = generate(c);
  const auto& recs = s.log.records();
  for (std::size_t i = 0; i < recs.size(); ++i) {
    CHECK(s.truth.poi_pattern.at(recs[i].poi) == s.truth.record_pattern[i]);
  }
  int one_hot_users = 0;
  for (const auto& [u, m] : s.truth.user_mixture) {
    auto it = std::max_element(m.begin(), m.end());
    if (*it != 1.0) continue;
    ++one_hot_users;
    const std::size_t k = static_cast<std::size_t>(it - m.begin());
    for (auto p : s.log.user_records(u)) CHECK(s.truth.poi_pattern.at(recs[p].poi) == k);
  }
  CHECK(one_hot_users > 0);
}

TEST_CASE("empirical pattern frequencies track planted mixtures") {
  SynthConfig c;
  c.min_checkins = c.max_checkins = 200;
  SynthCorpus s = generate(c);
  std::map<UserId, Vector> freq;
  for (const auto& [u, m] : s.truth.user_mixture) freq[u] = Vector(m.size(), 0.0);
  const auto& recs = s.log.records();
  for (std::size_t i = 0; i < recs.size(); ++i) {
    freq[recs[i].user][s.truth.record_pattern[i]] += 1.0 / 200.0;
  }
  std::vector<double> tvs;
  for (const auto& [u, m] : s.truth.user_mixture) {
    double tv = 0.0;
    for (std::size_t k = 0; k < m.size(); ++k) tv += 0.5 * std::abs(freq[u][k] - m[k]);
    tvs.push_back(tv);
  }
  std::sort(tvs.begin(), tvs.end());
  const double mean = std::accumulate(tvs.begin(), tvs.end(), 0.0) / tvs.size();
  const double p99 = tvs[tvs.size() * 99 / 100];
  MESSAGE("mean TV " << mean << ", p99 TV " << p99 << ", worst TV " << tvs.back());
  CHECK(mean <= 0.1);
  CHECK(p99 <= 0.1);
}

TEST_CASE("generation is byte-identical for identical config and seed") {
  SynthConfig c;
  c.num_users = 50;
  c.noise_fraction = 0.2;
  std::ostringstream a, b;
  write_checkins(a, generate(c).log);
  write_checkins(b, generate(c).log);
  CHECK(a.str() == b.str());
  c.seed = 8;
  std::ostringstream other;
  write_checkins(other, generate(c).log);
  CHECK(other.str() != a.str());
}

TEST_CASE("POIs of a pattern lie within the cluster radius") {
  SynthConfig c;
  c.num_users = 200;
  SynthCorpus s = generate(c);
  for (const CheckIn& r : s.log.records()) {
    const auto& center = s.truth.cluster_centers[s.truth.poi_pattern.at(r.poi)];
    CHECK(std::hypot(r.lat - center.lat, r.lon - center.lon) <= c.geo_cluster_radius + 1e-12);
  }
}

TEST_CASE("time-slot frequencies fit the pattern profiles (chi-square)") {
  SynthConfig c;
  c.num_users = 600;
  SynthCorpus s = generate(c);
  const std::size_t samples = 10000;
  for (std::size_t k = 0; k < c.num_patterns; ++k) {
    std::vector<double> observed(168, 0.0);
    std::size_t taken = 0;
    for (std::size_t i = 0; i < s.truth.record_slot.size() && taken < samples; ++i) {
      if (s.truth.record_pattern[i] != k) continue;
      observed[s.truth.record_slot[i]] += 1.0;
      ++taken;
    }
    REQUIRE(taken == samples);
    // Merge low-expectation slots so every bin expects at least 5 draws.
    double chi2 = 0.0, pooled_obs = 0.0, pooled_exp = 0.0;
    std::size_t bins = 0;
    for (std::size_t t = 0; t < 168; ++t) {
      const double expected = s.truth.time_profiles[k][t] * samples;
      if (expected < 5.0) {
        pooled_obs += observed[t];
        pooled_exp += expected;
        continue;
      }
      chi2 += (observed[t] - expected) * (observed[t] - expected) / expected;
      ++bins;
    }
    if (pooled_exp > 0.0) {
      chi2 += (pooled_obs - pooled_exp) * (pooled_obs - pooled_exp) / pooled_exp;
      ++bins;
    }
    boost::math::chi_squared dist(static_cast<double>(bins - 1));
    const double p = boost::math::cdf(boost::math::complement(dist, chi2));
    MESSAGE("pattern " << k << ": chi2 " << chi2 << " on " << bins - 1 << " dof, p " << p);
    CHECK(p > 0.01);
  }
}

TEST_CASE("invalid synth configs are rejected") {
  SynthConfig c;
  c.num_patterns = 300;
  CHECK_THROWS_AS(generate(c), ConfigError);
  c = {};
  c.noise_fraction = 1.0;
  CHECK_THROWS_AS(generate(c), ConfigError);
  c = {};
  c.num_users = 0;
  CHECK_THROWS_AS(generate(c), ConfigError);
  c = {};
  c.pattern_time_profiles = {Vector{0.5, 0.4}, Vector{1.0, 0.0}, Vector{0.0, 1.0}};
  CHECK_THROWS_AS(generate(c), ConfigError);
}

TEST_CASE("default time profiles are distributions") {
  for (std::size_t p : {1u, 3u, 10u}) {
    for (const Vector& row : default_time_profiles(p)) {
      double sum = 0.0;
      for (double x : row) sum += x;
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}
