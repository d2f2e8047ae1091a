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

#include "temn/tlda.hpp"

#include <fstream>
#include <sstream>

#include "temn/errors.hpp"
#include "temn/text_io.hpp"

namespace temn {

TldaConfig TldaConfig::with_patterns(std::size_t num_patterns) {
  TldaConfig c;
  c.num_patterns = num_patterns;
  c.alpha = 50.0 / static_cast<double>(std::max<std::size_t>(num_patterns, 1));
  return c;
}

void validate(const TldaConfig& c) {
  if (c.num_patterns < 1) throw ConfigError("TLDA needs at least one pattern");
  if (!(c.alpha > 0.0 && c.beta > 0.0 && c.gamma > 0.0)) {
    throw ConfigError("TLDA priors alpha, beta, gamma must be positive");
  }
  if (c.time_slots < 1) throw ConfigError("TLDA needs at least one time slot");
  if (c.slot_seconds < 1) throw ConfigError("slot_seconds must be positive");
  if (c.samples < 1 || c.lag < 1) throw ConfigError("TLDA samples and lag must be >= 1");
}

std::size_t discretize_time(std::int64_t timestamp, const TldaConfig& config) {
  // 1970-01-01 was a Thursday; shift so that slot 0 starts on Monday.
  constexpr std::int64_t kMondayShift = 3 * 86400;
  const std::int64_t t = timestamp + config.utc_offset_seconds + kMondayShift;
  std::int64_t slot = t / config.slot_seconds;
  if (t % config.slot_seconds < 0) --slot;  // floor for negative local times
  const auto n = static_cast<std::int64_t>(config.time_slots);
  return static_cast<std::size_t>(((slot % n) + n) % n);
}

TldaCorpus make_tlda_corpus(const CheckInLog& log, const TldaConfig& config) {
  TldaCorpus c;
  c.users = Dictionary(log.users());
  c.venues = Dictionary(log.pois());
  for (const CheckIn& r : log.records()) {
    c.token_user.push_back(c.users.index_of(r.user));
    c.token_venue.push_back(c.venues.index_of(r.poi));
    c.token_slot.push_back(discretize_time(r.timestamp, config));
  }
  return c;
}

namespace {

void add_token(TldaState& s, std::size_t i, std::size_t z, std::int64_t delta) {
  const std::size_t P = s.config.num_patterns;
  const std::size_t V = s.corpus.venues.size();
  s.n_user_pattern[s.corpus.token_user[i] * P + z] += delta;
  s.n_slot_pattern[s.corpus.token_slot[i] * P + z] += delta;
  s.n_pattern_venue[z * V + s.corpus.token_venue[i]] += delta;
  s.n_pattern[z] += delta;
}

}  // namespace

TldaState gibbs_init(TldaCorpus corpus, const TldaConfig& config) {
  validate(config);
  if (corpus.num_tokens() == 0) throw DomainError("TLDA needs a non-empty log");
  for (std::size_t t : corpus.token_slot) {
    if (t >= config.time_slots) throw DomainError("token slot outside the configured range");
  }
  TldaState s{config, std::move(corpus), {}, {}, {}, {}, {}, Rng(config.seed)};
  const std::size_t P = config.num_patterns;
  s.n_user_pattern.assign(s.corpus.users.size() * P, 0);
  s.n_slot_pattern.assign(config.time_slots * P, 0);
  s.n_pattern_venue.assign(P * s.corpus.venues.size(), 0);
  s.n_pattern.assign(P, 0);
  s.assignments.resize(s.corpus.num_tokens());
  std::uniform_int_distribution<std::size_t> pick(0, P - 1);
  for (std::size_t i = 0; i < s.assignments.size(); ++i) {
    s.assignments[i] = pick(s.rng);
    add_token(s, i, s.assignments[i], +1);
  }
  return s;
}

TldaState gibbs_init(const CheckInLog& log, const TldaConfig& config) {
  validate(config);
  return gibbs_init(make_tlda_corpus(log, config), config);
}

void gibbs_sweep(TldaState& s) {
  const std::size_t P = s.config.num_patterns;
  const std::size_t V = s.corpus.venues.size();
  const double alpha = s.config.alpha, beta = s.config.beta, gamma = s.config.gamma;
  const double v_beta = static_cast<double>(V) * beta;
  std::vector<double> cumulative(P);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t i = 0; i < s.assignments.size(); ++i) {
    add_token(s, i, s.assignments[i], -1);
    const std::int64_t* nu = &s.n_user_pattern[s.corpus.token_user[i] * P];
    const std::int64_t* nt = &s.n_slot_pattern[s.corpus.token_slot[i] * P];
    const std::size_t v = s.corpus.token_venue[i];
    double total = 0.0;
    for (std::size_t z = 0; z < P; ++z) {
      total += (static_cast<double>(nu[z]) + alpha) * (static_cast<double>(nt[z]) + gamma) *
               (static_cast<double>(s.n_pattern_venue[z * V + v]) + beta) /
               (static_cast<double>(s.n_pattern[z]) + v_beta);
      cumulative[z] = total;
    }
    const double target = unit(s.rng) * total;
    std::size_t z = 0;
    while (z + 1 < P && cumulative[z] <= target) ++z;
    s.assignments[i] = z;
    add_token(s, i, z, +1);
  }
}

bool counts_consistent(const TldaState& s) {
  TldaState fresh{s.config, {}, {}, {}, {}, {}, {}, Rng()};
  fresh.corpus = s.corpus;
  const std::size_t P = s.config.num_patterns;
  fresh.n_user_pattern.assign(s.n_user_pattern.size(), 0);
  fresh.n_slot_pattern.assign(s.n_slot_pattern.size(), 0);
  fresh.n_pattern_venue.assign(s.n_pattern_venue.size(), 0);
  fresh.n_pattern.assign(P, 0);
  for (std::size_t i = 0; i < s.assignments.size(); ++i) {
    if (s.assignments[i] >= P) return false;
    add_token(fresh, i, s.assignments[i], +1);
  }
  return fresh.n_user_pattern == s.n_user_pattern &&
         fresh.n_slot_pattern == s.n_slot_pattern &&
         fresh.n_pattern_venue == s.n_pattern_venue && fresh.n_pattern == s.n_pattern;
}

std::span<const double> TldaPosterior::user_mixture(const UserId& user) const {
  return theta.row(users.index_of(user));
}

TldaPosterior posterior_estimates(const TldaState& s) {
  const std::size_t P = s.config.num_patterns;
  const std::size_t U = s.corpus.users.size();
  const std::size_t V = s.corpus.venues.size();
  const std::size_t T = s.config.time_slots;
  const double alpha = s.config.alpha, beta = s.config.beta, gamma = s.config.gamma;
  TldaPosterior post{s.corpus.users, s.corpus.venues, Matrix(U, P), Matrix(P, V), Matrix(T, P)};
  auto smooth_rows = [P](const std::vector<std::int64_t>& counts, std::size_t rows,
                         double prior, Matrix& out) {
    for (std::size_t r = 0; r < rows; ++r) {
      double total = 0.0;
      for (std::size_t z = 0; z < P; ++z) total += static_cast<double>(counts[r * P + z]);
      const double denom = total + static_cast<double>(P) * prior;
      for (std::size_t z = 0; z < P; ++z) {
        out(r, z) = (static_cast<double>(counts[r * P + z]) + prior) / denom;
      }
    }
  };
  smooth_rows(s.n_user_pattern, U, alpha, post.theta);
  smooth_rows(s.n_slot_pattern, T, gamma, post.phi);
  for (std::size_t z = 0; z < P; ++z) {
    const double denom = static_cast<double>(s.n_pattern[z]) + static_cast<double>(V) * beta;
    for (std::size_t v = 0; v < V; ++v) {
      post.varphi(z, v) = (static_cast<double>(s.n_pattern_venue[z * V + v]) + beta) / denom;
    }
  }
  return post;
}

TldaPosterior fit_tlda(const CheckInLog& log, const TldaConfig& config) {
  TldaState state = gibbs_init(log, config);
  for (std::size_t k = 0; k < config.burn_in; ++k) gibbs_sweep(state);
  TldaPosterior mean = posterior_estimates(state);
  if (config.samples == 1) return mean;
  for (std::size_t s = 1; s < config.samples; ++s) {
    for (std::size_t k = 0; k < config.lag; ++k) gibbs_sweep(state);
    TldaPosterior next = posterior_estimates(state);
    using Pair = std::pair<Matrix*, const Matrix*>;
    for (auto [acc, add] : {Pair{&mean.theta, &next.theta}, Pair{&mean.varphi, &next.varphi},
                            Pair{&mean.phi, &next.phi}}) {
      for (std::size_t i = 0; i < acc->size(); ++i) acc->data()[i] += add->data()[i];
    }
  }
  const double inv = 1.0 / static_cast<double>(config.samples);
  for (Matrix* m : {&mean.theta, &mean.varphi, &mean.phi}) {
    for (double& x : m->data()) x *= inv;
  }
  return mean;
}

namespace {

void write_table(const std::filesystem::path& path, const std::string& corner,
                 const std::vector<std::string>& columns, const std::vector<std::string>& rows,
                 const Matrix& m) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << corner;
  for (const auto& c : columns) out << '\t' << c;
  out << '\n';
  for (std::size_t r = 0; r < m.rows(); ++r) {
    out << rows[r];
    for (double x : m.row(r)) out << '\t' << format_double(x);
    out << '\n';
  }
}

struct Table {
  std::vector<std::string> columns;
  std::vector<std::string> rows;
  Matrix values;
};

Table read_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  Table t;
  std::string line;
  if (!std::getline(in, line)) throw InputError(path.string() + ": missing header");
  auto header = split_fields(trim(line), '\t');
  for (std::size_t i = 1; i < header.size(); ++i) t.columns.emplace_back(header[i]);
  std::vector<double> values;
  while (std::getline(in, line)) {
    auto view = trim(line);
    if (view.empty()) continue;
    auto fields = split_fields(view, '\t');
    if (fields.size() != t.columns.size() + 1) {
      throw InputError(path.string() + ": row '" + std::string(fields[0]) +
                       "' has the wrong number of columns");
    }
    t.rows.emplace_back(fields[0]);
    for (std::size_t i = 1; i < fields.size(); ++i) {
      double x = 0.0;
      if (!parse_number(fields[i], x)) throw InputError(path.string() + ": bad number");
      values.push_back(x);
    }
  }
  t.values = Matrix(t.rows.size(), t.columns.size());
  std::copy(values.begin(), values.end(), t.values.data().begin());
  return t;
}

std::vector<std::string> numbered(const char* prefix, std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

}  // namespace

void save_posterior(const std::filesystem::path& dir, const TldaPosterior& post) {
  std::filesystem::create_directories(dir);
  const auto patterns = numbered("z", post.num_patterns());
  write_table(dir / "theta.tsv", "user", patterns, post.users.names(), post.theta);
  write_table(dir / "varphi.tsv", "pattern", post.venues.names(), patterns, post.varphi);
  write_table(dir / "phi.tsv", "slot", patterns, numbered("", post.phi.rows()), post.phi);
}

TldaPosterior load_posterior(const std::filesystem::path& dir) {
  Table theta = read_table(dir / "theta.tsv");
  Table varphi = read_table(dir / "varphi.tsv");
  Table phi = read_table(dir / "phi.tsv");
  const std::size_t P = theta.columns.size();
  if (varphi.rows.size() != P || phi.columns.size() != P) {
    throw InputError("posterior tables in " + dir.string() + " disagree on the pattern count");
  }
  return {Dictionary(theta.rows), Dictionary(varphi.columns), std::move(theta.values),
          std::move(varphi.values), std::move(phi.values)};
}

}  // namespace temn
