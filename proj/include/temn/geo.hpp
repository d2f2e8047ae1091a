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

// Geographical scoring: activity centroids, user-POI distances and the
// learned distance sensitivities rho_u (per user) and rho_v (per POI).

#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string_view>

#include "temn/corpus.hpp"
#include "temn/matrix.hpp"

namespace temn {

using UserCentroid = Coordinates;

enum class DistanceMode : std::uint8_t {
  kEuclideanDegrees = 0,
  kHaversineKm = 1,
};

/// "euclidean" or "haversine"; parse throws ConfigError on anything else.
const char* to_string(DistanceMode mode);
DistanceMode parse_distance_mode(std::string_view text);

struct GeoParams {
  Vector user_pref;  // rho_u, indexed by user
  Vector poi_infl;   // rho_v, indexed by POI
  double bias = 0.0;

  bool operator==(const GeoParams&) const = default;
};

/// Mean latitude and longitude of the given distinct POI locations.
/// Throws DomainError on empty input.
UserCentroid user_centroid(std::span<const Coordinates> distinct_pois);

/// Location of every POI in `log`, taken from its first record.
std::map<PoiId, Coordinates> poi_locations(const CheckInLog& log);

/// Centroid over the distinct POIs `user` visited in `log`.
UserCentroid user_centroid(const CheckInLog& log, const UserId& user);

double geo_distance(const Coordinates& a, const Coordinates& b,
                    DistanceMode mode = DistanceMode::kEuclideanDegrees);

inline double geo_score(double rho_u, double rho_v, double l, double bias) {
  return (rho_u + rho_v) * l + bias;
}

inline double geo_pair_loss(double s_pos, double s_neg, double margin) {
  const double v = s_neg - s_pos + margin;
  return v > 0.0 ? v : 0.0;
}

/// d(loss)/d(rho) for one (user, positive, negative) triple. The bias has no
/// gradient: it cancels in s_neg - s_pos.
struct GeoTripleGradient {
  double rho_u = 0.0;
  double rho_pos = 0.0;
  double rho_neg = 0.0;
};

struct GeoTriple {
  double rho_u = 0.0;
  double rho_pos = 0.0;
  double rho_neg = 0.0;
  double l_pos = 0.0;  // distance from the user's centroid
  double l_neg = 0.0;
};

/// Loss of the triple and its gradient, zero when the hinge is inactive.
double geo_backward(const GeoTriple& t, double margin, GeoTripleGradient& grad);

}  // namespace temn
