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

// Read-only exports of a trained model: attention per pattern, learned geo
// parameters and the venues that characterize each pattern.

#pragma once

#include <iosfwd>
#include <optional>
#include <vector>

#include "temn/trainer.hpp"

namespace temn {

/// argmax_z theta_u (first on ties).
std::size_t dominant_pattern(const Model& model, std::size_t user);
/// argmax_z varphi(z, poi), or nullopt for a POI the topic model never saw.
std::optional<std::size_t> poi_pattern(const Model& model, std::size_t poi);

struct PatternAttention {
  Matrix mean;  // pi x h
  std::vector<std::size_t> users;  // per pattern
};

/// Each user's attention vectors over their positive pairs (u, v in history)
/// are averaged; user averages are then averaged within their dominant
/// pattern. Rows of patterns without users are zero.
PatternAttention attention_by_pattern(const Model& model);

struct PatternGeo {
  Vector mean_user_pref;  // per pattern
  Vector mean_poi_infl;
  std::vector<std::size_t> users;
  std::vector<std::size_t> pois;
};

PatternGeo geo_by_pattern(const Model& model);

/// Tab-separated text tables with a header row.
void write_attention(std::ostream& out, const PatternAttention& a);
void write_user_geo(std::ostream& out, const Model& model);
void write_poi_geo(std::ostream& out, const Model& model);
void write_pattern_geo(std::ostream& out, const PatternGeo& g);
/// The n most probable venues of every pattern.
void write_pattern_venues(std::ostream& out, const TldaPosterior& topics, std::size_t n);

}  // namespace temn
