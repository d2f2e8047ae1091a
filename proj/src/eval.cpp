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

#include "temn/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <set>

#include <spdlog/spdlog.h>

#include "temn/errors.hpp"
#include "temn/random.hpp"
#include "temn/text_io.hpp"

namespace temn {

std::size_t rank_candidates(double test_score, std::span<const double> negative_scores) {
  if (!std::isfinite(test_score)) throw DomainError("non-finite test score");
  std::size_t rank = 1;
  for (double s : negative_scores) {
    if (!std::isfinite(s)) throw DomainError("non-finite candidate score");
    rank += s >= test_score;
  }
  return rank;
}

double ndcg(std::size_t rank, std::size_t n) {
  if (rank > n) return 0.0;
  return 1.0 / std::log2(static_cast<double>(rank) + 1.0);
}

EvalUniverse make_universe(const DatasetSplit& split) {
  EvalUniverse u;
  for (const UserId& id : split.train.users()) u.users.add(id);
  std::set<PoiId> pois;
  for (const CheckInLog* log : {&split.train, &split.validation, &split.test}) {
    for (const auto& [poi, _] : log->poi_index()) pois.insert(poi);
  }
  for (const PoiId& id : pois) u.pois.add(id);
  u.known.num_pois = u.pois.size();
  u.known.visited.assign(u.users.size(), {});
  for (const CheckInLog* log : {&split.train, &split.validation, &split.test}) {
    IndexedInteractions part = index_interactions(*log, u.users, u.pois);
    for (std::size_t i = 0; i < part.visited.size(); ++i) {
      auto& dst = u.known.visited[i];
      dst.insert(dst.end(), part.visited[i].begin(), part.visited[i].end());
    }
  }
  for (auto& v : u.known.visited) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  }
  return u;
}

std::vector<EvalEvent> make_events(const CheckInLog& log, const EvalUniverse& universe,
                                   std::size_t* unknown) {
  std::vector<EvalEvent> events;
  std::size_t skipped = 0;
  for (const auto& [user, positions] : log.user_index()) {
    auto u = universe.users.find(user);
    std::size_t ordinal = 0;
    for (std::size_t i : positions) {
      auto v = universe.pois.find(log.records()[i].poi);
      if (!u || !v) {
        ++skipped;
        continue;
      }
      events.push_back({*u, *v, ordinal++});
    }
  }
  if (unknown) *unknown = skipped;
  return events;
}

double MetricsReport::hr_at(std::size_t n) const {
  auto it = std::find(cutoffs.begin(), cutoffs.end(), n);
  if (it == cutoffs.end()) throw LookupError("cutoff " + std::to_string(n) + " not evaluated");
  return hit_ratio[static_cast<std::size_t>(it - cutoffs.begin())];
}

double MetricsReport::ndcg_at(std::size_t n) const {
  auto it = std::find(cutoffs.begin(), cutoffs.end(), n);
  if (it == cutoffs.end()) throw LookupError("cutoff " + std::to_string(n) + " not evaluated");
  return ndcg[static_cast<std::size_t>(it - cutoffs.begin())];
}

std::vector<std::size_t> event_negatives(const EvalEvent& event, const EvalUniverse& universe,
                                         std::size_t count, std::uint64_t seed) {
  const auto& seen = universe.known.visited.at(event.user);
  std::vector<std::size_t> pool;
  pool.reserve(universe.pois.size() - std::min(seen.size(), universe.pois.size()));
  for (std::size_t v = 0; v < universe.pois.size(); ++v) {
    if (v != event.poi && !std::binary_search(seen.begin(), seen.end(), v)) pool.push_back(v);
  }
  if (pool.size() < count) return {};
  Rng rng(derive_seed(seed, event.user, event.ordinal));
  // Partial Fisher-Yates: the first `count` slots become a uniform sample.
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(count);
  return pool;
}

MetricsReport evaluate(const Scorer& scorer, std::span<const EvalEvent> events,
                       const EvalUniverse& universe, const EvalOptions& options) {
  if (events.empty()) throw ProtocolError("no test events to evaluate");
  if (options.negatives == 0) throw ConfigError("negatives per test must be positive");
  MetricsReport report;
  report.cutoffs = options.cutoffs;
  report.hit_ratio.assign(options.cutoffs.size(), 0.0);
  report.ndcg.assign(options.cutoffs.size(), 0.0);
  report.seed = options.seed;
  report.negatives_per_test = options.negatives;
  for (std::size_t n : options.cutoffs) {
    if (n == 0) throw ConfigError("cutoffs must be >= 1");
  }

  std::set<std::size_t> users;
  std::vector<std::size_t> candidates(options.negatives + 1);
  std::vector<double> scores(options.negatives + 1);
  for (const EvalEvent& event : events) {
    std::vector<std::size_t> negatives =
        event_negatives(event, universe, options.negatives, options.seed);
    if (negatives.empty()) {
      ++report.num_skipped_events;
      continue;
    }
    candidates[0] = event.poi;
    std::copy(negatives.begin(), negatives.end(), candidates.begin() + 1);
    scorer.score(event.user, candidates, scores);
    const std::size_t rank = rank_candidates(scores[0], std::span(scores).subspan(1));
    for (std::size_t k = 0; k < options.cutoffs.size(); ++k) {
      report.hit_ratio[k] += hit_ratio(rank, options.cutoffs[k]);
      report.ndcg[k] += ndcg(rank, options.cutoffs[k]);
    }
    if (options.keep_ranks) report.ranks.push_back(rank);
    users.insert(event.user);
    ++report.num_test_events;
  }
  if (report.num_skipped_events > 0) {
    spdlog::warn("{} test events skipped: fewer than {} eligible negatives",
                 report.num_skipped_events, options.negatives);
  }
  if (report.num_test_events == 0) throw ProtocolError("no test event has enough negatives");
  const double n = static_cast<double>(report.num_test_events);
  for (double& x : report.hit_ratio) x /= n;
  for (double& x : report.ndcg) x /= n;
  report.num_users_evaluated = users.size();
  return report;
}

void write_report(std::ostream& out, const MetricsReport& r) {
  out << std::left << std::setw(8) << "cutoff" << std::setw(12) << "HR" << "NDCG\n";
  out << std::fixed << std::setprecision(6);
  for (std::size_t k = 0; k < r.cutoffs.size(); ++k) {
    out << std::setw(8) << r.cutoffs[k] << std::setw(12) << r.hit_ratio[k] << r.ndcg[k] << '\n';
  }
  out.unsetf(std::ios::floatfield);
  out << '\n';
  for (std::size_t k = 0; k < r.cutoffs.size(); ++k) {
    out << "hr@" << r.cutoffs[k] << " = " << format_double(r.hit_ratio[k]) << '\n';
    out << "ndcg@" << r.cutoffs[k] << " = " << format_double(r.ndcg[k]) << '\n';
  }
  out << "num_users_evaluated = " << r.num_users_evaluated << '\n'
      << "num_test_events = " << r.num_test_events << '\n'
      << "num_skipped_events = " << r.num_skipped_events << '\n'
      << "seed = " << r.seed << '\n'
      << "negatives_per_test = " << r.negatives_per_test << '\n';
}

PopularityScorer::PopularityScorer(const CheckInLog& train, const EvalUniverse& universe)
    : counts_(universe.pois.size(), 0.0) {
  for (const auto& [poi, positions] : train.poi_index()) {
    if (auto v = universe.pois.find(poi)) counts_[*v] = static_cast<double>(positions.size());
  }
}

void PopularityScorer::score(std::size_t, std::span<const std::size_t> pois,
                             std::span<double> out) const {
  for (std::size_t i = 0; i < pois.size(); ++i) out[i] = counts_.at(pois[i]);
}

void RandomScorer::score(std::size_t user, std::span<const std::size_t> pois,
                         std::span<double> out) const {
  for (std::size_t i = 0; i < pois.size(); ++i) {
    out[i] = hash_to_unit(derive_seed(seed_, user, pois[i]));
  }
}

OracleScorer::OracleScorer(const CheckInLog& truth, const EvalUniverse& universe)
    : truth_(index_interactions(truth, universe.users, universe.pois)) {}

void OracleScorer::score(std::size_t user, std::span<const std::size_t> pois,
                         std::span<double> out) const {
  for (std::size_t i = 0; i < pois.size(); ++i) out[i] = truth_.contains(user, pois[i]) ? 1.0 : 0.0;
}

}  // namespace temn
