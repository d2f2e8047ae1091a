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

// Temporal LDA. Each check-in is a token carrying a venue and a time slot;
// a user's check-ins form one document. A token's pattern z is tied to both
// the user's pattern mixture theta_u and the slot's pattern mixture phi_t,
// and z emits the venue through varphi_z. Inference is collapsed Gibbs
// sampling with the conditional
//
//   P(z_i = z | rest) ∝ (n_uz + alpha) (n_tz + gamma) (n_zv + beta)
//                       / (n_z + |V| beta)
//
// where all counts exclude token i.

#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "temn/corpus.hpp"
#include "temn/matrix.hpp"
#include "temn/random.hpp"

namespace temn {

struct TldaConfig {
  std::size_t num_patterns = 10;
  double alpha = 5.0;  // 50 / num_patterns
  double beta = 0.01;
  double gamma = 0.1;
  std::size_t time_slots = 168;
  std::int64_t slot_seconds = 3600;
  std::int64_t utc_offset_seconds = 0;
  std::size_t burn_in = 500;
  std::size_t samples = 10;
  std::size_t lag = 10;
  std::uint64_t seed = 1;

  /// Default priors for a pattern count: alpha = 50 / num_patterns.
  static TldaConfig with_patterns(std::size_t num_patterns);
};

/// Throws ConfigError on a violated constraint.
void validate(const TldaConfig& config);

/// Slot of a timestamp: ((t + offset) / slot_seconds) counted from Monday
/// 00:00, modulo time_slots. With the defaults this is the hour of the week.
std::size_t discretize_time(std::int64_t timestamp, const TldaConfig& config);

struct TldaCorpus {
  Dictionary users;
  Dictionary venues;
  std::vector<std::size_t> token_user;
  std::vector<std::size_t> token_venue;
  std::vector<std::size_t> token_slot;

  std::size_t num_tokens() const { return token_user.size(); }
};

/// Tokens in log record order. Dictionaries are ordered by id.
TldaCorpus make_tlda_corpus(const CheckInLog& log, const TldaConfig& config);

struct TldaState {
  TldaConfig config;
  TldaCorpus corpus;
  std::vector<std::size_t> assignments;  // z per token
  std::vector<std::int64_t> n_user_pattern;    // |U| x pi
  std::vector<std::int64_t> n_slot_pattern;    // T x pi
  std::vector<std::int64_t> n_pattern_venue;   // pi x |V|
  std::vector<std::int64_t> n_pattern;         // pi
  Rng rng;

  std::size_t num_patterns() const { return config.num_patterns; }
};

/// Uniform random (seeded) assignment of every token. Throws ConfigError for
/// an invalid config and DomainError for an empty log.
TldaState gibbs_init(const CheckInLog& log, const TldaConfig& config);
TldaState gibbs_init(TldaCorpus corpus, const TldaConfig& config);

/// Resamples every token once, in token order.
void gibbs_sweep(TldaState& state);

/// True when every count table equals the tally of the assignments.
bool counts_consistent(const TldaState& state);

struct TldaPosterior {
  Dictionary users;
  Dictionary venues;
  Matrix theta;   // |U| x pi, row u is the user's pattern mixture
  Matrix varphi;  // pi x |V|, row z is the venue distribution of pattern z
  Matrix phi;     // T x pi, row t is the pattern distribution of slot t

  std::size_t num_patterns() const { return theta.cols(); }
  /// Row of theta for a user id; throws LookupError if absent.
  std::span<const double> user_mixture(const UserId& user) const;

  bool operator==(const TldaPosterior& o) const {
    return users == o.users && venues == o.venues && theta == o.theta && varphi == o.varphi &&
           phi == o.phi;
  }
};

/// Smoothed point estimates from the current counts.
TldaPosterior posterior_estimates(const TldaState& state);

/// Full schedule: init, burn_in sweeps, then `samples` estimates `lag`
/// sweeps apart, averaged.
TldaPosterior fit_tlda(const CheckInLog& log, const TldaConfig& config);

/// theta.tsv, varphi.tsv and phi.tsv with header rows naming users, POIs
/// and slots.
void save_posterior(const std::filesystem::path& dir, const TldaPosterior& posterior);
TldaPosterior load_posterior(const std::filesystem::path& dir);

}  // namespace temn
