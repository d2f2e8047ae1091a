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

// Shared generators for property-style tests.

#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "temn/corpus.hpp"
#include "temn/matrix.hpp"
#include "temn/random.hpp"

namespace temn::testing {

inline CheckIn make_checkin(std::string user, std::string poi, std::int64_t ts,
                            double lat = 0.0, double lon = 0.0) {
  CheckIn c;
  c.user = std::move(user);
  c.poi = std::move(poi);
  c.timestamp = ts;
  c.lat = lat;
  c.lon = lon;
  return c;
}

/// Random log; timestamps may collide to exercise tie handling.
inline CheckInLog random_log(Rng& rng, int users, int pois, int min_records,
                             int max_records) {
  std::uniform_int_distribution<int> count(min_records, max_records);
  std::uniform_int_distribution<int> poi(0, pois - 1);
  std::uniform_int_distribution<std::int64_t> ts(0, 40 * 86400);
  std::uniform_real_distribution<double> lat(-10, 10), lon(-20, 20);
  std::vector<CheckIn> records;
  for (int u = 0; u < users; ++u) {
    int n = count(rng);
    for (int k = 0; k < n; ++k) {
      records.push_back(make_checkin("u" + std::to_string(u),
                                     "p" + std::to_string(poi(rng)), ts(rng) / 3600 * 3600,
                                     lat(rng), lon(rng)));
    }
  }
  std::shuffle(records.begin(), records.end(), rng);
  return CheckInLog(std::move(records));
}

inline void randomize(std::span<double> xs, Rng& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> d(-scale, scale);
  for (double& x : xs) x = d(rng);
}

inline Vector random_vector(std::size_t n, Rng& rng, double scale = 1.0) {
  Vector v(n);
  randomize(v, rng, scale);
  return v;
}

inline Vector random_simplex(std::size_t n, Rng& rng) {
  std::exponential_distribution<double> e(1.0);
  Vector v(n);
  double s = 0;
  for (double& x : v) s += (x = e(rng) + 1e-3);
  for (double& x : v) x /= s;
  return v;
}

/// |a - n| / max(|a|, |n|), with the denominator floored at 1e-6 so that
/// exactly-zero gradients compare by absolute difference.
inline double relative_error(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return std::abs(analytic - numeric) / scale;
}

}  // namespace temn::testing
