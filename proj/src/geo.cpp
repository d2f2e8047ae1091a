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

#include "temn/geo.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "temn/errors.hpp"

namespace temn {

const char* to_string(DistanceMode mode) {
  return mode == DistanceMode::kHaversineKm ? "haversine" : "euclidean";
}

DistanceMode parse_distance_mode(std::string_view text) {
  if (text == "euclidean") return DistanceMode::kEuclideanDegrees;
  if (text == "haversine") return DistanceMode::kHaversineKm;
  throw ConfigError("unknown distance mode '" + std::string(text) +
                    "' (expected euclidean or haversine)");
}

UserCentroid user_centroid(std::span<const Coordinates> distinct_pois) {
  if (distinct_pois.empty()) throw DomainError("centroid of an empty POI set");
  double lat = 0.0, lon = 0.0;
  for (const Coordinates& c : distinct_pois) {
    lat += c.lat;
    lon += c.lon;
  }
  const double n = static_cast<double>(distinct_pois.size());
  return {lat / n, lon / n};
}

std::map<PoiId, Coordinates> poi_locations(const CheckInLog& log) {
  std::map<PoiId, Coordinates> out;
  for (const auto& [poi, positions] : log.poi_index()) {
    const CheckIn& c = log.records()[positions.front()];
    out.emplace(poi, Coordinates{c.lat, c.lon});
  }
  return out;
}

UserCentroid user_centroid(const CheckInLog& log, const UserId& user) {
  std::map<PoiId, Coordinates> seen;
  for (std::size_t i : log.user_records(user)) {
    const CheckIn& c = log.records()[i];
    seen.emplace(c.poi, Coordinates{c.lat, c.lon});
  }
  std::vector<Coordinates> points;
  points.reserve(seen.size());
  for (const auto& [poi, c] : seen) points.push_back(c);
  return user_centroid(points);
}

double geo_distance(const Coordinates& a, const Coordinates& b, DistanceMode mode) {
  if (mode == DistanceMode::kEuclideanDegrees) return std::hypot(a.lat - b.lat, a.lon - b.lon);
  constexpr double kEarthRadiusKm = 6371.0088;
  constexpr double kRad = std::numbers::pi / 180.0;
  const double dlat = (b.lat - a.lat) * kRad, dlon = (b.lon - a.lon) * kRad;
  const double s = std::sin(dlat / 2), t = std::sin(dlon / 2);
  const double h = s * s + std::cos(a.lat * kRad) * std::cos(b.lat * kRad) * t * t;
  return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(h)));
}

double geo_backward(const GeoTriple& t, double margin, GeoTripleGradient& grad) {
  const double s_pos = geo_score(t.rho_u, t.rho_pos, t.l_pos, 0.0);
  const double s_neg = geo_score(t.rho_u, t.rho_neg, t.l_neg, 0.0);
  const double loss = geo_pair_loss(s_pos, s_neg, margin);
  if (loss > 0.0) {
    grad.rho_u = t.l_neg - t.l_pos;
    grad.rho_pos = -t.l_pos;
    grad.rho_neg = t.l_neg;
  } else {
    grad = {};
  }
  return loss;
}

}  // namespace temn
