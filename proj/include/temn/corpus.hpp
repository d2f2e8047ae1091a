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

// Check-in ingestion, user filtering, implicit-feedback interactions,
// chronological splits, time-gap segmentation and negative sampling.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "temn/random.hpp"

namespace temn {

using UserId = std::string;
using PoiId = std::string;

struct CheckIn {
  UserId user;
  PoiId poi;
  std::int64_t timestamp = 0;  // Unix seconds
  double lat = 0.0;
  double lon = 0.0;
  std::optional<std::string> category;

  bool operator==(const CheckIn&) const = default;
};

struct Coordinates {
  double lat = 0.0;
  double lon = 0.0;

  bool operator==(const Coordinates&) const = default;
};

/// True when the coordinates and timestamp are within their valid ranges.
bool is_valid(const CheckIn& c);

/// Immutable, indexed collection of check-ins. Per-user positions are
/// ordered by (timestamp, input order).
class CheckInLog {
 public:
  CheckInLog() = default;
  /// Throws DomainError if any record is out of range.
  explicit CheckInLog(std::vector<CheckIn> records);

  const std::vector<CheckIn>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }

  const std::map<UserId, std::vector<std::size_t>>& user_index() const {
    return user_index_;
  }
  const std::map<PoiId, std::vector<std::size_t>>& poi_index() const {
    return poi_index_;
  }

  /// Chronological record positions of one user; empty if unknown.
  std::span<const std::size_t> user_records(const UserId& user) const;

  std::vector<UserId> users() const;
  std::vector<PoiId> pois() const;

 private:
  std::vector<CheckIn> records_;
  std::map<UserId, std::vector<std::size_t>> user_index_;
  std::map<PoiId, std::vector<std::size_t>> poi_index_;
};

struct ParseResult {
  CheckInLog log;
  std::size_t rejected = 0;
  /// One message per rejected line, "line N: reason".
  std::vector<std::string> diagnostics;
};

/// Reads `user_id,poi_id,timestamp,lat,lon[,category]` lines. A leading
/// header line is skipped. Malformed or out-of-range lines are rejected and
/// counted. Throws InputError on an unreadable stream.
ParseResult parse_checkins(std::istream& in);
ParseResult load_checkins(const std::filesystem::path& path);

/// Writes a header line followed by one record per line, round-trip exact.
void write_checkins(std::ostream& out, const CheckInLog& log);
void save_checkins(const std::filesystem::path& path, const CheckInLog& log);

/// Keeps the records of users with at least `min_unique_pois` distinct POIs.
CheckInLog filter_users(const CheckInLog& log, std::size_t min_unique_pois = 10);

/// Merges several logs into one (records appended in argument order).
CheckInLog concat(std::span<const CheckInLog* const> logs);

/// Implicit feedback: y_uv = 1 iff v is in visited[u].
struct InteractionSet {
  std::map<UserId, std::set<PoiId>> visited;
  std::vector<PoiId> universe;  // sorted, distinct

  bool contains(const UserId& user, const PoiId& poi) const;
};

InteractionSet build_interactions(const CheckInLog& log);

struct SplitFractions {
  double train = 0.70;
  double validation = 0.15;
  double test = 0.15;
};

/// What to do with a user whose history is too short to give every part at
/// least one record.
enum class ShortUserPolicy { kThrow, kDrop };

struct DatasetSplit {
  CheckInLog train;
  CheckInLog validation;
  CheckInLog test;
  SplitFractions fractions;
  std::vector<UserId> dropped_users;
};

/// Per-user chronological holdout. The latest ceil(test * n) records go to
/// test, the next ceil(validation * n) to validation, the rest to train.
DatasetSplit chronological_split(const CheckInLog& log,
                                 const SplitFractions& fractions = {},
                                 ShortUserPolicy policy = ShortUserPolicy::kThrow);

/// Number of (train, validation, test) records for a user with n records.
struct SplitCounts {
  std::size_t train = 0;
  std::size_t validation = 0;
  std::size_t test = 0;
};
SplitCounts split_counts(std::size_t n, const SplitFractions& fractions);

/// Writes train.csv, validation.csv, test.csv and manifest.txt into `dir`.
void save_split(const std::filesystem::path& dir, const DatasetSplit& split,
                std::uint64_t seed);
/// Reads a directory written by save_split. Throws InputError on rejects.
DatasetSplit load_split(const std::filesystem::path& dir);

struct SequenceSet {
  std::map<UserId, std::vector<std::vector<CheckIn>>> sequences;
  std::int64_t delta_t = 86400;
  std::size_t min_len = 5;

  std::size_t num_segments() const;
};

/// Cuts each user's chronological records wherever consecutive timestamps
/// are more than `delta_t` apart, keeping segments of at least `min_len`.
SequenceSet segment_sequences(const CheckInLog& log, std::int64_t delta_t = 86400,
                              std::size_t min_len = 5);

void save_sequences(const std::filesystem::path& path, const SequenceSet& seqs);

/// Uniform draw from universe \ visited[user]. Throws SamplingError when the
/// user has visited every POI.
PoiId sample_negative(const UserId& user, const InteractionSet& interactions,
                      Rng& rng);

/// Bidirectional string <-> dense index map. Indices follow insertion order.
class Dictionary {
 public:
  Dictionary() = default;
  explicit Dictionary(std::vector<std::string> names);

  std::size_t add(const std::string& name);
  std::optional<std::size_t> find(const std::string& name) const;
  /// Throws LookupError if absent.
  std::size_t index_of(const std::string& name) const;
  const std::string& name(std::size_t index) const { return names_.at(index); }
  const std::vector<std::string>& names() const { return names_; }
  std::size_t size() const { return names_.size(); }

  bool operator==(const Dictionary& other) const { return names_ == other.names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Interaction sets over dense indices. Visited lists are sorted.
struct IndexedInteractions {
  std::vector<std::vector<std::size_t>> visited;
  std::size_t num_pois = 0;

  bool contains(std::size_t user, std::size_t poi) const;
};

/// Indexes `log` through the dictionaries; records with unknown ids are
/// skipped.
IndexedInteractions index_interactions(const CheckInLog& log, const Dictionary& users,
                                       const Dictionary& pois);

/// Index-space counterpart of sample_negative.
std::size_t sample_negative(std::size_t user, const IndexedInteractions& interactions,
                            Rng& rng);

}  // namespace temn
