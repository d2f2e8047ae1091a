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

#include "temn/inspect.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>

#include "temn/text_io.hpp"

namespace temn {

std::size_t dominant_pattern(const Model& model, std::size_t user) {
  auto row = model.user_topics.row(user);
  return static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
}

std::optional<std::size_t> poi_pattern(const Model& model, std::size_t poi) {
  auto v = model.topics.venues.find(model.pois.name(poi));
  if (!v) return std::nullopt;
  std::size_t best = 0;
  for (std::size_t z = 1; z < model.topics.varphi.rows(); ++z) {
    if (model.topics.varphi(z, *v) > model.topics.varphi(best, *v)) best = z;
  }
  return best;
}

PatternAttention attention_by_pattern(const Model& model) {
  const std::size_t pi = model.config.patterns_pi, h = model.config.slots_h;
  PatternAttention out{Matrix(pi, h), std::vector<std::size_t>(pi, 0)};
  for (std::size_t u = 0; u < model.num_users(); ++u) {
    const auto& hist = model.histories[u];
    if (hist.empty()) continue;
    const Vector p = memory_embedding(model, u);
    Vector mean(h, 0.0);
    for (std::size_t v : hist) {
      axpy(1.0, attention(joint_embedding(p, model.memnet.poi_embeddings.row(v)), model.memnet.keys),
           mean);
    }
    const std::size_t z = dominant_pattern(model, u);
    axpy(1.0 / static_cast<double>(hist.size()), mean, out.mean.row(z));
    ++out.users[z];
  }
  for (std::size_t z = 0; z < pi; ++z) {
    if (out.users[z] == 0) continue;
    for (double& x : out.mean.row(z)) x /= static_cast<double>(out.users[z]);
  }
  return out;
}

PatternGeo geo_by_pattern(const Model& model) {
  const std::size_t pi = model.config.patterns_pi;
  PatternGeo g{Vector(pi, 0.0), Vector(pi, 0.0), std::vector<std::size_t>(pi, 0),
               std::vector<std::size_t>(pi, 0)};
  for (std::size_t u = 0; u < model.num_users(); ++u) {
    const std::size_t z = dominant_pattern(model, u);
    g.mean_user_pref[z] += model.geo.user_pref[u];
    ++g.users[z];
  }
  for (std::size_t v = 0; v < model.num_pois(); ++v) {
    if (auto z = poi_pattern(model, v)) {
      g.mean_poi_infl[*z] += model.geo.poi_infl[v];
      ++g.pois[*z];
    }
  }
  for (std::size_t z = 0; z < pi; ++z) {
    if (g.users[z]) g.mean_user_pref[z] /= static_cast<double>(g.users[z]);
    if (g.pois[z]) g.mean_poi_infl[z] /= static_cast<double>(g.pois[z]);
  }
  return g;
}

void write_attention(std::ostream& out, const PatternAttention& a) {
  out << "pattern\tusers";
  for (std::size_t i = 0; i < a.mean.cols(); ++i) out << "\tslot" << i;
  out << '\n';
  for (std::size_t z = 0; z < a.mean.rows(); ++z) {
    out << z << '\t' << a.users[z];
    for (double x : a.mean.row(z)) out << '\t' << format_double(x);
    out << '\n';
  }
}

void write_user_geo(std::ostream& out, const Model& model) {
  out << "user\trho\tpattern\tcentroid_lat\tcentroid_lon\n";
  for (std::size_t u = 0; u < model.num_users(); ++u) {
    out << model.users.name(u) << '\t' << format_double(model.geo.user_pref[u]) << '\t'
        << dominant_pattern(model, u) << '\t' << format_double(model.centroids[u].lat) << '\t'
        << format_double(model.centroids[u].lon) << '\n';
  }
}

void write_poi_geo(std::ostream& out, const Model& model) {
  out << "poi\trho\tpattern\n";
  for (std::size_t v = 0; v < model.num_pois(); ++v) {
    auto z = poi_pattern(model, v);
    out << model.pois.name(v) << '\t' << format_double(model.geo.poi_infl[v]) << '\t'
        << (z ? std::to_string(*z) : "-") << '\n';
  }
}

void write_pattern_geo(std::ostream& out, const PatternGeo& g) {
  out << "pattern\tusers\tmean_user_rho\tpois\tmean_poi_rho\n";
  for (std::size_t z = 0; z < g.users.size(); ++z) {
    out << z << '\t' << g.users[z] << '\t' << format_double(g.mean_user_pref[z]) << '\t'
        << g.pois[z] << '\t' << format_double(g.mean_poi_infl[z]) << '\n';
  }
}

void write_pattern_venues(std::ostream& out, const TldaPosterior& topics, std::size_t n) {
  out << "pattern\trank\tpoi\tprobability\n";
  std::vector<std::size_t> order(topics.varphi.cols());
  for (std::size_t z = 0; z < topics.varphi.rows(); ++z) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto row = topics.varphi.row(z);
    const std::size_t k = std::min(n, order.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                      [&](std::size_t a, std::size_t b) {
                        return row[a] != row[b] ? row[a] > row[b] : a < b;
                      });
    for (std::size_t r = 0; r < k; ++r) {
      out << z << '\t' << r + 1 << '\t' << topics.venues.name(order[r]) << '\t'
          << format_double(row[order[r]]) << '\n';
    }
  }
}

}  // namespace temn
