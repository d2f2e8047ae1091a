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

// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits nonzero if any criterion fails.

#include <spdlog/spdlog.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>

#include "model_fixtures.hpp"
#include "temn/eval.hpp"
#include "temn/geo.hpp"
#include "temn/synthgen.hpp"
#include "temn/trainer.hpp"
#include "tlda_oracle.hpp"

using namespace temn;
using namespace temn::testing;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

class Checklist {
 public:
  void run(int id, const std::string& title, double budget_seconds,
           const std::function<Outcome()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = body();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = budget_seconds <= 0 || secs <= budget_seconds;
    const bool pass = o.pass && in_time;
    failures_ += pass ? 0 : 1;
    std::cout << (pass ? "PASS" : "FAIL") << "  [" << id << "] " << title << " (" << std::fixed
              << std::setprecision(1) << secs << " s";
    if (budget_seconds > 0) std::cout << " of " << budget_seconds << " s";
    std::cout << ")  " << o.detail << std::defaultfloat << std::endl;
  }
  int failures() const { return failures_; }

 private:
  int failures_ = 0;
};

std::string fmt(double x, int digits = 4) {
  std::ostringstream s;
  s << std::setprecision(digits) << x;
  return s.str();
}

// ---- 1 ----------------------------------------------------------------------

struct TinyCase {
  Model model;
  TrainingData data;
  std::vector<Triple> batch;
};

TinyCase tiny_case(std::uint64_t seed) {
  Rng rng(seed);
  TinyCase t;
  DatasetSplit split = tiny_split(3, 6, rng);
  TrainConfig c;
  c.dim_d = 4;
  c.slots_h = 3;
  c.patterns_pi = 2;
  c.seed = seed;
  c.l2_lambda = 0.01;
  c.regularization = seed % 2 ? Regularization::kTouched : Regularization::kGlobal;
  t.model = init_model(split, random_posterior(split.train.users(), 2, rng), c);
  randomize_parameters(t.model, rng, 0.5);
  t.data = interaction_examples(t.model, split.train);
  for (std::size_t i = 0; i < t.data.positives.size(); ++i) {
    t.batch.push_back({i, sample_negative(t.data.positives[i].user, t.data.train, rng)});
  }
  return t;
}

ModelGradients gradient_of(const Model& m, const TinyCase& t) {
  ModelGradients g = ModelGradients::zeros_like(m);
  batch_objective(m, t.data, t.batch, &g);
  return g;
}

ModelGradients minus(ModelGradients a, const ModelGradients& b) {
  std::vector<double> rhs;
  for_each_parameter(b, [&](const double& x) { rhs.push_back(x); });
  std::size_t i = 0;
  for_each_parameter(a, [&](double& x) { x -= rhs[i++]; });
  return a;
}

Outcome gradient_suite() {
  const char* names[] = {"Lm", "Ltau", "Lsigma", "full"};
  double worst[4] = {0, 0, 0, 0};
  std::size_t checked = 0, kinks = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    TinyCase t = tiny_case(seed);
    Model base = t.model;
    base.config.l2_lambda = 0.0;
    base.config.weight_tau = 0.0;
    base.config.weight_geo_loss = 0.0;
    const ModelGradients g_m = gradient_of(base, t);
    Model tau = base, geo = base;
    tau.config.weight_tau = 1.0;
    geo.config.weight_geo_loss = 1.0;
    const GradCheck r[4] = {
        check_gradient(base, t.data, t.batch, g_m, [](const ObjectiveTerms& o) { return o.memnet; }),
        check_gradient(tau, t.data, t.batch, minus(gradient_of(tau, t), g_m),
                       [](const ObjectiveTerms& o) { return o.topic; }),
        check_gradient(geo, t.data, t.batch, minus(gradient_of(geo, t), g_m),
                       [](const ObjectiveTerms& o) { return o.geo; }),
        check_gradient(t.model, t.data, t.batch, gradient_of(t.model, t),
                       [](const ObjectiveTerms& o) { return o.total; })};
    for (int k = 0; k < 4; ++k) {
      worst[k] = std::max(worst[k], r[k].worst);
      checked += r[k].checked;
      kinks += r[k].kinks;
    }
  }
  Outcome o{true, ""};
  for (int k = 0; k < 4; ++k) {
    o.pass = o.pass && worst[k] < 1e-4;
    o.detail += std::string(names[k]) + " " + fmt(worst[k], 2) + ", ";
  }
  // A kink skip must stay rare or the check would be vacuous.
  o.pass = o.pass && kinks * 100 < checked;
  o.detail += "kinks " + std::to_string(kinks) + "/" + std::to_string(checked + kinks) +
              " (limit rel. error 1e-4)";
  return o;
}

// ---- 2 ----------------------------------------------------------------------

TldaCorpus token_corpus(std::vector<std::array<std::size_t, 3>> tokens) {
  TldaCorpus c;
  std::size_t users = 0, venues = 0;
  for (auto [u, v, t] : tokens) {
    c.token_user.push_back(u);
    c.token_venue.push_back(v);
    c.token_slot.push_back(t);
    users = std::max(users, u + 1);
    venues = std::max(venues, v + 1);
  }
  for (std::size_t u = 0; u < users; ++u) c.users.add("u" + std::to_string(u));
  for (std::size_t v = 0; v < venues; ++v) c.venues.add("v" + std::to_string(v));
  return c;
}

double sampler_tv(const TldaCorpus& corpus, std::size_t patterns, std::size_t slots) {
  TldaConfig c;
  c.num_patterns = patterns;
  c.alpha = 0.5;
  c.beta = 0.3;
  c.gamma = 0.7;
  c.time_slots = slots;
  c.seed = 99;
  const std::vector<double> exact = enumerate_posterior(corpus, c);
  TldaState s = gibbs_init(corpus, c);
  for (int k = 0; k < 200; ++k) gibbs_sweep(s);
  std::vector<double> empirical(exact.size(), 0.0);
  constexpr std::size_t kSamples = 100000;
  for (std::size_t k = 0; k < kSamples; ++k) {
    gibbs_sweep(s);
    empirical[encode_assignment(s.assignments, patterns)] += 1.0 / kSamples;
  }
  return total_variation(exact, empirical);
}

Outcome gibbs_oracle() {
  const double tv[] = {
      sampler_tv(token_corpus({{0, 0, 0}, {0, 1, 1}, {1, 0, 1}, {1, 1, 0}}), 2, 2),
      sampler_tv(token_corpus({{0, 0, 0}, {0, 0, 1}, {1, 1, 1}, {1, 2, 0}, {2, 2, 2}, {2, 0, 2}}), 2, 3),
      sampler_tv(token_corpus({{0, 0, 0}, {0, 1, 1}, {1, 1, 0}, {1, 0, 1}}), 3, 2)};
  const double worst = *std::max_element(std::begin(tv), std::end(tv));
  return {worst <= 0.02, "TV " + fmt(tv[0], 3) + " / " + fmt(tv[1], 3) + " / " + fmt(tv[2], 3) +
                             " over 1e5 samples (limit 0.02)"};
}

// ---- 3 ----------------------------------------------------------------------

Outcome pattern_recovery(const SynthCorpus& synth) {
  // The flat prior alpha = 1 gates the check; the 50/pi default shrinks
  // theta toward uniform on ~70-token users and is reported alongside.
  TldaConfig flat = TldaConfig::with_patterns(3);
  flat.alpha = 1.0;
  const TldaPosterior post = fit_tlda(synth.log, flat);
  const double purity = pattern_purity(post, synth.truth);
  const double tv = mixture_tv(post, synth.truth);
  const TldaPosterior heuristic = fit_tlda(synth.log, TldaConfig::with_patterns(3));
  return {purity >= 0.9 && tv <= 0.15,
          "alpha 1: purity " + fmt(purity) + " (>= 0.9), theta TV " + fmt(tv) +
              " (<= 0.15); alpha 50/3: purity " + fmt(pattern_purity(heuristic, synth.truth)) +
              ", theta TV " + fmt(mixture_tv(heuristic, synth.truth))};
}

// ---- 4, 5, 8 ----------------------------------------------------------------

struct Pipeline {
  DatasetSplit split;
  TldaPosterior topics;
  EvalUniverse universe;
  std::vector<EvalEvent> events;
  EvalOptions options;
};

TrainConfig synthetic_config() {
  TrainConfig c;
  c.dim_d = 16;
  c.patterns_pi = 3;
  return c;
}

MetricsReport score(const Pipeline& p, const Scorer& s) {
  return evaluate(s, p.events, p.universe, p.options);
}

Outcome learning_signal(const Pipeline& p, const MetricsReport& model) {
  const MetricsReport pop = score(p, PopularityScorer(p.split.train, p.universe));
  const MetricsReport rnd = score(p, RandomScorer(5));
  const double hr = model.hr_at(10), ng = model.ndcg_at(10);
  const bool pass = hr > pop.hr_at(10) && hr > rnd.hr_at(10) && ng > pop.ndcg_at(10) &&
                    ng > rnd.ndcg_at(10) &&
                    hr - std::max(pop.hr_at(10), rnd.hr_at(10)) >= 0.05;
  return {pass, "HR@10/NDCG@10 model " + fmt(hr) + "/" + fmt(ng) + ", popularity " +
                    fmt(pop.hr_at(10)) + "/" + fmt(pop.ndcg_at(10)) + ", random " +
                    fmt(rnd.hr_at(10)) + "/" + fmt(rnd.ndcg_at(10)) + " over " +
                    std::to_string(model.num_test_events) + " events (HR margin >= 0.05)"};
}

Outcome ablations(const Pipeline& p, const MetricsReport& full) {
  TrainConfig no_topic = synthetic_config();
  no_topic.weight_tau = 0.0;
  TrainConfig no_geo = synthetic_config();
  no_geo.weight_geo_loss = 0.0;
  no_geo.weight_geo_score = 0.0;
  const double a = score(p, ModelScorer(fit(p.split, p.topics, no_topic).model)).ndcg_at(10);
  const double b = score(p, ModelScorer(fit(p.split, p.topics, no_geo).model)).ndcg_at(10);
  const double f = full.ndcg_at(10);
  return {a <= f + 0.01 && b <= f + 0.01,
          "NDCG@10 full " + fmt(f) + ", tau weight 0: " + fmt(a) + ", geo weights 0: " + fmt(b) +
              " (ablation <= full + 0.01)"};
}

Outcome determinism(const Pipeline& p, const Model& trained) {
  // A second full fit under the same seed must reproduce every bit.
  const FitResult again = fit(p.split, p.topics, synthetic_config());
  const bool same_fit = again.model == trained;
  const MetricsReport r1 = score(p, ModelScorer(trained));
  const MetricsReport r2 = score(p, ModelScorer(again.model));
  const bool same_eval = r1 == r2;

  const auto dir = std::filesystem::temp_directory_path() / "temn_acceptance";
  std::filesystem::create_directories(dir);
  save_model(trained, dir / "model.bin");
  const Model back = load_model(dir / "model.bin");
  std::filesystem::remove_all(dir);
  std::size_t mismatches = 0;
  for (std::size_t u = 0; u < trained.num_users(); ++u) {
    for (std::size_t v = 0; v < trained.num_pois(); ++v) {
      mismatches += total_score(back, u, v) != total_score(trained, u, v);
    }
  }
  return {same_fit && same_eval && back == trained && mismatches == 0,
          std::string("refit identical: ") + (same_fit ? "yes" : "no") +
              ", evaluation identical: " + (same_eval ? "yes" : "no") +
              ", reloaded score mismatches: " + std::to_string(mismatches) + " of " +
              std::to_string(trained.num_users() * trained.num_pois())};
}

// ---- 6, 7 -------------------------------------------------------------------

Outcome metric_oracle() {
  std::size_t bad = 0;
  for (std::size_t rank = 1; rank <= 101; ++rank) {
    for (std::size_t n = 1; n <= 10; ++n) {
      const double hr = rank <= n ? 1.0 : 0.0;
      const double g = rank <= n ? 1.0 / std::log2(static_cast<double>(rank + 1)) : 0.0;
      bad += hit_ratio(rank, n) != hr;
      bad += std::abs(ndcg(rank, n) - g) > 1e-15;
    }
  }
  return {bad == 0, std::to_string(bad) + " mismatches over ranks 1..101, cutoffs 1..10"};
}

Outcome random_calibration() {
  Rng rng(6);
  std::vector<CheckIn> train, val, test;
  for (int u = 0; u < 1000; ++u) {
    std::vector<int> order(300);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    const std::string id = "u" + std::to_string(u);
    int k = 0;
    for (; k < 40; ++k) train.push_back(make_checkin(id, "p" + std::to_string(order[k]), k));
    val.push_back(make_checkin(id, "p" + std::to_string(order[k++]), 1000));
    for (int e = 0; e < 10; ++e, ++k) {
      test.push_back(make_checkin(id, "p" + std::to_string(order[k]), 2000 + e));
    }
  }
  DatasetSplit s;
  s.train = CheckInLog(train);
  s.validation = CheckInLog(val);
  s.test = CheckInLog(test);
  const EvalUniverse u = make_universe(s);
  const std::vector<EvalEvent> ev = make_events(s.test, u);
  const MetricsReport r = evaluate(RandomScorer(13), ev, u);
  Outcome o{ev.size() == 10000, ""};
  for (std::size_t n : {1, 5, 10}) {
    const double expected = static_cast<double>(n) / 101.0;
    o.pass = o.pass && std::abs(r.hr_at(n) - expected) <= 0.01;
    o.detail += "HR@" + std::to_string(n) + " " + fmt(r.hr_at(n)) + " vs " + fmt(expected) + ", ";
  }
  o.detail += std::to_string(ev.size()) + " events (tolerance 0.01)";
  return o;
}

// ---- 9 ----------------------------------------------------------------------

Outcome invariant_suites() {
  std::vector<std::string> broken;
  Rng rng(2026);

  // Attention is a probability vector.
  for (int trial = 0; trial < 1000; ++trial) {
    const Vector e = random_vector(6, rng, 20.0);
    Matrix keys(6, 5);
    randomize(keys.data(), rng, 3.0);
    const Vector w = attention(e, keys);
    double sum = 0.0;
    for (double x : w) sum += x;
    if (std::abs(sum - 1.0) > 1e-9 || *std::min_element(w.begin(), w.end()) < 0.0) {
      broken.push_back("attention normalization");
      break;
    }
  }

  // Gibbs sweeps conserve counts; posterior rows are distributions.
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    CheckInLog log = random_log(rng, 6, 12, 3, 25);
    TldaConfig c = TldaConfig::with_patterns(4);
    c.seed = seed;
    TldaState s = gibbs_init(log, c);
    bool ok = true;
    for (int k = 0; k < 20; ++k) {
      gibbs_sweep(s);
      ok = ok && counts_consistent(s);
    }
    if (!ok) broken.push_back("count conservation");
    const TldaPosterior post = posterior_estimates(s);
    for (const Matrix* m : {&post.theta, &post.varphi, &post.phi}) {
      for (std::size_t r = 0; r < m->rows(); ++r) {
        double sum = 0.0;
        for (double x : m->row(r)) sum += x;
        if (std::abs(sum - 1.0) > 1e-9) ok = false;
      }
    }
    if (!ok) {
      broken.push_back("posterior row sums");
      break;
    }
  }

  // The geo bias cancels out of every pairwise difference.
  std::uniform_real_distribution<double> d(-5, 5);
  for (int trial = 0; trial < 1000; ++trial) {
    const double ru = d(rng), rp = d(rng), rn = d(rng), lp = std::abs(d(rng)), ln = std::abs(d(rng));
    const double b = d(rng);
    const double with = geo_score(ru, rp, lp, b) - geo_score(ru, rn, ln, b);
    const double without = geo_score(ru, rp, lp, 0.0) - geo_score(ru, rn, ln, 0.0);
    if (std::abs(with - without) > 1e-12 * (1.0 + std::abs(b))) {
      broken.push_back("bias cancellation");
      break;
    }
  }

  // Split monotonicity, partition, and segmentation soundness.
  for (int trial = 0; trial < 50; ++trial) {
    const CheckInLog log = random_log(rng, 8, 30, 3, 60);
    const DatasetSplit s = chronological_split(log);
    bool ok = s.train.size() + s.validation.size() + s.test.size() == log.size();
    for (const UserId& u : log.users()) {
      auto last = [&](const CheckInLog& part) {
        std::int64_t t = INT64_MIN;
        for (std::size_t i : part.user_records(u)) t = std::max(t, part.records()[i].timestamp);
        return t;
      };
      auto first = [&](const CheckInLog& part) {
        std::int64_t t = INT64_MAX;
        for (std::size_t i : part.user_records(u)) t = std::min(t, part.records()[i].timestamp);
        return t;
      };
      ok = ok && last(s.train) <= first(s.validation) && last(s.validation) <= first(s.test);
    }
    if (!ok) {
      broken.push_back("split monotonicity");
      break;
    }
    const SequenceSet seq = segment_sequences(log, 3 * 86400, 3);
    for (const auto& [user, segments] : seq.sequences) {
      std::int64_t previous_end = INT64_MIN;
      for (const auto& segment : segments) {
        ok = ok && segment.size() >= 3 && segment.front().timestamp >= previous_end;
        for (std::size_t i = 1; i < segment.size(); ++i) {
          const std::int64_t gap = segment[i].timestamp - segment[i - 1].timestamp;
          ok = ok && gap >= 0 && gap <= 3 * 86400;
        }
        previous_end = segment.back().timestamp;
      }
    }
    if (!ok) {
      broken.push_back("segmentation soundness");
      break;
    }
  }

  std::string detail = "attention normalization, count conservation, posterior row sums, bias "
                       "cancellation, split monotonicity, segmentation soundness";
  if (!broken.empty()) {
    detail = "broken:";
    for (const auto& b : broken) detail += " " + b;
  }
  return {broken.empty(), detail};
}

}  // namespace

int main() {
  spdlog::set_level(spdlog::level::err);
  Checklist list;
  list.run(1, "gradient suite, 100 seeds", 30, gradient_suite);
  list.run(2, "Gibbs sampler vs exact enumeration", 120, gibbs_oracle);

  const SynthCorpus synth = generate(SynthConfig{});
  list.run(3, "pattern recovery on the default synthetic corpus", 180,
           [&] { return pattern_recovery(synth); });

  Pipeline p;
  p.split = chronological_split(synth.log);
  p.universe = make_universe(p.split);
  p.events = make_events(p.split.test, p.universe);
  p.options.seed = 99;
  std::optional<Model> trained;
  std::optional<MetricsReport> full;
  list.run(4, "learning signal over popularity and random", 300, [&] {
    p.topics = fit_tlda(p.split.train, TldaConfig::with_patterns(3));
    trained = fit(p.split, p.topics, synthetic_config()).model;
    full = score(p, ModelScorer(*trained));
    return learning_signal(p, *full);
  });
  list.run(5, "ablation direction", 0, [&] {
    if (!full) return Outcome{false, "no full model"};
    return ablations(p, *full);
  });
  list.run(6, "metric oracle", 0, metric_oracle);
  list.run(7, "random scorer calibration", 0, random_calibration);
  list.run(8, "determinism and persistence", 0, [&] {
    if (!trained) return Outcome{false, "no trained model"};
    return determinism(p, *trained);
  });
  list.run(9, "module invariant suites", 0, invariant_suites);

  if (list.failures() == 0) {
    std::cout << "all criteria passed" << std::endl;
  } else {
    std::cout << list.failures() << " criteria failed" << std::endl;
  }
  return list.failures() == 0 ? 0 : 1;
}
