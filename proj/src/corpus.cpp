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

#include "temn/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>

#include <spdlog/spdlog.h>

#include "temn/errors.hpp"
#include "temn/text_io.hpp"

namespace temn {

bool is_valid(const CheckIn& c) {
  return std::isfinite(c.lat) && std::isfinite(c.lon) && c.lat >= -90.0 &&
         c.lat <= 90.0 && c.lon >= -180.0 && c.lon <= 180.0 && c.timestamp >= 0;
}

CheckInLog::CheckInLog(std::vector<CheckIn> records) : records_(std::move(records)) {
  for (std::size_t i = 0; i < records_.size(); ++i) {
    const CheckIn& c = records_[i];
    if (!is_valid(c)) {
      throw DomainError("check-in " + std::to_string(i) + " of user '" + c.user +
                        "' has out-of-range coordinates or timestamp");
    }
    user_index_[c.user].push_back(i);
    poi_index_[c.poi].push_back(i);
  }
  for (auto& [user, positions] : user_index_) {
    std::stable_sort(positions.begin(), positions.end(),
                     [this](std::size_t a, std::size_t b) {
                       return records_[a].timestamp < records_[b].timestamp;
                     });
  }
}

std::span<const std::size_t> CheckInLog::user_records(const UserId& user) const {
  auto it = user_index_.find(user);
  if (it == user_index_.end()) return {};
  return it->second;
}

std::vector<UserId> CheckInLog::users() const {
  std::vector<UserId> out;
  out.reserve(user_index_.size());
  for (const auto& [u, _] : user_index_) out.push_back(u);
  return out;
}

std::vector<PoiId> CheckInLog::pois() const {
  std::vector<PoiId> out;
  out.reserve(poi_index_.size());
  for (const auto& [v, _] : poi_index_) out.push_back(v);
  return out;
}

namespace {

bool looks_like_header(const std::vector<std::string_view>& fields) {
  std::int64_t ts = 0;
  return fields.size() >= 3 && !parse_number(fields[2], ts);
}

}  // namespace

ParseResult parse_checkins(std::istream& in) {
  if (!in) throw InputError("check-in stream is not readable");
  ParseResult result;
  std::vector<CheckIn> records;
  std::string line;
  std::size_t line_no = 0;
  bool first_content_line = true;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = trim(line);
    if (view.empty()) continue;
    auto fields = split_fields(view, ',', 6);
    if (first_content_line) {
      first_content_line = false;
      if (looks_like_header(fields)) continue;
    }
    auto reject = [&](const std::string& why) {
      ++result.rejected;
      result.diagnostics.push_back("line " + std::to_string(line_no) + ": " + why);
    };
    if (fields.size() < 5) {
      reject("expected at least 5 fields");
      continue;
    }
    CheckIn c;
    c.user = std::string(trim(fields[0]));
    c.poi = std::string(trim(fields[1]));
    if (c.user.empty() || c.poi.empty()) {
      reject("empty user or poi id");
      continue;
    }
    if (!parse_number(trim(fields[2]), c.timestamp) ||
        !parse_number(trim(fields[3]), c.lat) || !parse_number(trim(fields[4]), c.lon)) {
      reject("non-numeric timestamp or coordinate");
      continue;
    }
    if (!is_valid(c)) {
      reject("coordinate or timestamp out of range");
      continue;
    }
    if (fields.size() == 6) {
      auto cat = trim(fields[5]);
      if (!cat.empty()) c.category = std::string(cat);
    }
    records.push_back(std::move(c));
  }
  if (in.bad()) throw InputError("error while reading check-in stream");
  result.log = CheckInLog(std::move(records));
  return result;
}

ParseResult load_checkins(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open check-in file " + path.string());
  return parse_checkins(in);
}

void write_checkins(std::ostream& out, const CheckInLog& log) {
  out << "user_id,poi_id,timestamp,lat,lon,category\n";
  for (const CheckIn& c : log.records()) {
    out << c.user << ',' << c.poi << ',' << c.timestamp << ',' << format_double(c.lat)
        << ',' << format_double(c.lon);
    if (c.category) out << ',' << *c.category;
    out << '\n';
  }
}

void save_checkins(const std::filesystem::path& path, const CheckInLog& log) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  write_checkins(out, log);
}

CheckInLog filter_users(const CheckInLog& log, std::size_t min_unique_pois) {
  if (min_unique_pois < 1) throw ConfigError("min_unique_pois must be at least 1");
  std::set<UserId> keep;
  for (const auto& [user, positions] : log.user_index()) {
    std::set<std::string_view> distinct;
    for (std::size_t p : positions) distinct.insert(log.records()[p].poi);
    if (distinct.size() >= min_unique_pois) keep.insert(user);
  }
  std::vector<CheckIn> records;
  for (const CheckIn& c : log.records()) {
    if (keep.contains(c.user)) records.push_back(c);
  }
  return CheckInLog(std::move(records));
}

CheckInLog concat(std::span<const CheckInLog* const> logs) {
  std::vector<CheckIn> records;
  for (const CheckInLog* log : logs) {
    records.insert(records.end(), log->records().begin(), log->records().end());
  }
  return CheckInLog(std::move(records));
}

bool InteractionSet::contains(const UserId& user, const PoiId& poi) const {
  auto it = visited.find(user);
  return it != visited.end() && it->second.contains(poi);
}

InteractionSet build_interactions(const CheckInLog& log) {
  InteractionSet out;
  for (const CheckIn& c : log.records()) out.visited[c.user].insert(c.poi);
  out.universe = log.pois();
  return out;
}

SplitCounts split_counts(std::size_t n, const SplitFractions& f) {
  // The small slack keeps products such as 0.15 * 20 from rounding up to 4.
  auto part = [n](double fraction) {
    return static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-9));
  };
  SplitCounts counts;
  counts.test = part(f.test);
  counts.validation = part(f.validation);
  const std::size_t held = counts.test + counts.validation;
  counts.train = held < n ? n - held : 0;
  return counts;
}

DatasetSplit chronological_split(const CheckInLog& log, const SplitFractions& fractions,
                                 ShortUserPolicy policy) {
  const double sum = fractions.train + fractions.validation + fractions.test;
  if (!(fractions.train > 0.0 && fractions.validation > 0.0 && fractions.test > 0.0) ||
      std::abs(sum - 1.0) > 1e-9) {
    throw ConfigError("split fractions must be positive and sum to 1");
  }
  DatasetSplit split;
  split.fractions = fractions;
  std::vector<CheckIn> train, validation, test;
  for (const auto& [user, positions] : log.user_index()) {
    const std::size_t n = positions.size();
    const SplitCounts counts = split_counts(n, fractions);
    if (counts.train < 1 || counts.validation < 1 || counts.test < 1) {
      if (policy == ShortUserPolicy::kThrow) {
        throw ConfigError("user '" + user + "' has " + std::to_string(n) +
                          " records, too few for a train/validation/test split");
      }
      spdlog::warn("dropping user '{}' with {} records from the split", user, n);
      split.dropped_users.push_back(user);
      continue;
    }
    for (std::size_t k = 0; k < n; ++k) {
      const CheckIn& c = log.records()[positions[k]];
      if (k < counts.train) {
        train.push_back(c);
      } else if (k < counts.train + counts.validation) {
        validation.push_back(c);
      } else {
        test.push_back(c);
      }
    }
  }
  split.train = CheckInLog(std::move(train));
  split.validation = CheckInLog(std::move(validation));
  split.test = CheckInLog(std::move(test));
  return split;
}

void save_split(const std::filesystem::path& dir, const DatasetSplit& split,
                std::uint64_t seed) {
  std::filesystem::create_directories(dir);
  save_checkins(dir / "train.csv", split.train);
  save_checkins(dir / "validation.csv", split.validation);
  save_checkins(dir / "test.csv", split.test);
  std::ofstream m(dir / "manifest.txt");
  if (!m) throw InputError("cannot write split manifest in " + dir.string());
  m << "seed=" << seed << '\n'
    << "fractions=" << format_double(split.fractions.train) << ','
    << format_double(split.fractions.validation) << ','
    << format_double(split.fractions.test) << '\n'
    << "train_records=" << split.train.size() << '\n'
    << "validation_records=" << split.validation.size() << '\n'
    << "test_records=" << split.test.size() << '\n'
    << "dropped_users=" << split.dropped_users.size() << '\n'
    << "\n# user_id,train,validation,test\n";
  std::set<UserId> users;
  for (const auto* part : {&split.train, &split.validation, &split.test}) {
    for (const auto& [u, _] : part->user_index()) users.insert(u);
  }
  for (const UserId& u : users) {
    m << u << ',' << split.train.user_records(u).size() << ','
      << split.validation.user_records(u).size() << ','
      << split.test.user_records(u).size() << '\n';
  }
}

DatasetSplit load_split(const std::filesystem::path& dir) {
  auto load = [&](const char* name) {
    ParseResult r = load_checkins(dir / name);
    if (r.rejected > 0) {
      throw InputError(std::string(name) + ": " + r.diagnostics.front());
    }
    return std::move(r.log);
  };
  DatasetSplit split;
  split.train = load("train.csv");
  split.validation = load("validation.csv");
  split.test = load("test.csv");
  return split;
}

std::size_t SequenceSet::num_segments() const {
  std::size_t n = 0;
  for (const auto& [_, segs] : sequences) n += segs.size();
  return n;
}

SequenceSet segment_sequences(const CheckInLog& log, std::int64_t delta_t,
                              std::size_t min_len) {
  if (delta_t <= 0) throw ConfigError("delta_t must be positive");
  if (min_len < 2) throw ConfigError("min_len must be at least 2");
  SequenceSet out;
  out.delta_t = delta_t;
  out.min_len = min_len;
  for (const auto& [user, positions] : log.user_index()) {
    std::vector<std::vector<CheckIn>> kept;
    std::vector<CheckIn> current;
    auto flush = [&] {
      if (current.size() >= min_len) kept.push_back(std::move(current));
      current.clear();
    };
    for (std::size_t p : positions) {
      const CheckIn& c = log.records()[p];
      if (!current.empty() && c.timestamp - current.back().timestamp > delta_t) flush();
      current.push_back(c);
    }
    flush();
    if (!kept.empty()) out.sequences.emplace(user, std::move(kept));
  }
  return out;
}

void save_sequences(const std::filesystem::path& path, const SequenceSet& seqs) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << "user_id,segment,poi_id,timestamp,lat,lon\n";
  for (const auto& [user, segs] : seqs.sequences) {
    for (std::size_t s = 0; s < segs.size(); ++s) {
      for (const CheckIn& c : segs[s]) {
        out << user << ',' << s << ',' << c.poi << ',' << c.timestamp << ','
            << format_double(c.lat) << ',' << format_double(c.lon) << '\n';
      }
    }
  }
}

namespace {

// Rejection sampling while most of the universe is unvisited; otherwise the
// complement is enumerated so heavy users do not loop for long.
template <typename IsVisited>
std::size_t draw_unvisited(std::size_t universe, std::size_t visited, IsVisited is_visited,
                           Rng& rng) {
  if (visited >= universe) throw SamplingError("user has visited every POI");
  const std::size_t free = universe - visited;
  if (free * 4 >= universe) {
    std::uniform_int_distribution<std::size_t> pick(0, universe - 1);
    for (;;) {
      std::size_t j = pick(rng);
      if (!is_visited(j)) return j;
    }
  }
  std::uniform_int_distribution<std::size_t> pick(0, free - 1);
  std::size_t target = pick(rng);
  for (std::size_t j = 0; j < universe; ++j) {
    if (is_visited(j)) continue;
    if (target-- == 0) return j;
  }
  throw SamplingError("inconsistent visited set");
}

}  // namespace

PoiId sample_negative(const UserId& user, const InteractionSet& interactions, Rng& rng) {
  static const std::set<PoiId> kNone;
  auto it = interactions.visited.find(user);
  const std::set<PoiId>& seen = it == interactions.visited.end() ? kNone : it->second;
  std::size_t in_universe = 0;
  for (const PoiId& v : seen) {
    in_universe += std::binary_search(interactions.universe.begin(),
                                      interactions.universe.end(), v);
  }
  std::size_t j = draw_unvisited(
      interactions.universe.size(), in_universe,
      [&](std::size_t k) { return seen.contains(interactions.universe[k]); }, rng);
  return interactions.universe[j];
}

Dictionary::Dictionary(std::vector<std::string> names) {
  for (auto& n : names) add(n);
}

std::size_t Dictionary::add(const std::string& name) {
  auto [it, inserted] = index_.emplace(name, names_.size());
  if (inserted) names_.push_back(name);
  return it->second;
}

std::optional<std::size_t> Dictionary::find(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t Dictionary::index_of(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw LookupError("unknown id '" + name + "'");
  return it->second;
}

bool IndexedInteractions::contains(std::size_t user, std::size_t poi) const {
  const auto& v = visited.at(user);
  return std::binary_search(v.begin(), v.end(), poi);
}

IndexedInteractions index_interactions(const CheckInLog& log, const Dictionary& users,
                                       const Dictionary& pois) {
  IndexedInteractions out;
  out.visited.resize(users.size());
  out.num_pois = pois.size();
  for (const CheckIn& c : log.records()) {
    auto u = users.find(c.user);
    auto v = pois.find(c.poi);
    if (u && v) out.visited[*u].push_back(*v);
  }
  for (auto& v : out.visited) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  }
  return out;
}

std::size_t sample_negative(std::size_t user, const IndexedInteractions& interactions,
                            Rng& rng) {
  const auto& seen = interactions.visited.at(user);
  return draw_unvisited(
      interactions.num_pois, seen.size(),
      [&](std::size_t k) { return std::binary_search(seen.begin(), seen.end(), k); }, rng);
}

}  // namespace temn
