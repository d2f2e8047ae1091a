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

// Sampled-negative ranking evaluation. Every held-out check-in is one event:
// its POI is ranked against 100 POIs the user never interacted with, and
// HR@N / NDCG@N are averaged over events.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

#include "temn/corpus.hpp"

namespace temn {

/// 1-based position of the test item among itself and the negatives under
/// descending score. Ties go against the test item. Throws DomainError on a
/// non-finite score.
std::size_t rank_candidates(double test_score, std::span<const double> negative_scores);

inline double hit_ratio(std::size_t rank, std::size_t n) { return rank <= n ? 1.0 : 0.0; }
double ndcg(std::size_t rank, std::size_t n);

/// Scores candidate POIs for one user; all indices are in the evaluation
/// universe's dictionaries.
class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual void score(std::size_t user, std::span<const std::size_t> pois,
                     std::span<double> out) const = 0;
};

/// Users and POIs of a split, with every interaction that disqualifies a
/// POI as a negative for a user.
struct EvalUniverse {
  Dictionary users;  // users with training records, sorted by id
  Dictionary pois;   // every POI in any part of the split, sorted by id
  IndexedInteractions known;  // train, validation and test interactions
};

EvalUniverse make_universe(const DatasetSplit& split);

struct EvalEvent {
  std::size_t user = 0;
  std::size_t poi = 0;
  std::size_t ordinal = 0;  // position among the user's events
};

/// Events of `log` in chronological order per user. Records of users or POIs
/// outside the universe are skipped and counted in `unknown`.
std::vector<EvalEvent> make_events(const CheckInLog& log, const EvalUniverse& universe,
                                   std::size_t* unknown = nullptr);

struct EvalOptions {
  std::vector<std::size_t> cutoffs{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  std::size_t negatives = 100;
  std::uint64_t seed = 1;
  bool keep_ranks = false;
};

struct MetricsReport {
  std::vector<std::size_t> cutoffs;
  std::vector<double> hit_ratio;  // per cutoff
  std::vector<double> ndcg;
  std::size_t num_users_evaluated = 0;
  std::size_t num_test_events = 0;
  std::size_t num_skipped_events = 0;  // fewer eligible negatives than requested
  std::uint64_t seed = 0;
  std::size_t negatives_per_test = 0;
  std::vector<std::size_t> ranks;  // per evaluated event, when requested

  double hr_at(std::size_t n) const;
  double ndcg_at(std::size_t n) const;

  bool operator==(const MetricsReport&) const = default;
};

/// The negatives drawn for one event: distinct, uniformly chosen POIs the
/// user never interacted with. Empty when fewer than `count` exist.
std::vector<std::size_t> event_negatives(const EvalEvent& event, const EvalUniverse& universe,
                                         std::size_t count, std::uint64_t seed);

/// Throws ProtocolError if there are no events or none can be evaluated.
MetricsReport evaluate(const Scorer& scorer, std::span<const EvalEvent> events,
                       const EvalUniverse& universe, const EvalOptions& options = {});

/// Aligned table of cutoff, HR and NDCG followed by a `key = value` block.
void write_report(std::ostream& out, const MetricsReport& report);

/// Training check-in count per POI.
class PopularityScorer final : public Scorer {
 public:
  PopularityScorer(const CheckInLog& train, const EvalUniverse& universe);
  void score(std::size_t user, std::span<const std::size_t> pois,
             std::span<double> out) const override;

 private:
  std::vector<double> counts_;
};

/// Seeded hash of (user, poi); independent of the data.
class RandomScorer final : public Scorer {
 public:
  explicit RandomScorer(std::uint64_t seed) : seed_(seed) {}
  void score(std::size_t user, std::span<const std::size_t> pois,
             std::span<double> out) const override;

 private:
  std::uint64_t seed_;
};

/// 1 for POIs the user checks into in `truth`, 0 otherwise. Ranks every
/// test POI first; used to validate the harness.
class OracleScorer final : public Scorer {
 public:
  OracleScorer(const CheckInLog& truth, const EvalUniverse& universe);
  void score(std::size_t user, std::span<const std::size_t> pois,
             std::span<double> out) const override;

 private:
  IndexedInteractions truth_;
};

}  // namespace temn
