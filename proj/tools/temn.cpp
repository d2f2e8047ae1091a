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

// Command-line front end. Every artifact-producing command writes
// run_manifest.txt next to its outputs with the fully resolved settings.

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "temn/corpus.hpp"
#include "temn/errors.hpp"
#include "temn/eval.hpp"
#include "temn/inspect.hpp"
#include "temn/synthgen.hpp"
#include "temn/text_io.hpp"
#include "temn/tlda.hpp"
#include "temn/trainer.hpp"

namespace fs = std::filesystem;
using namespace temn;

namespace {

using KeyValues = std::map<std::string, std::string>;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string scenario;
  std::string out = ".";
};

void add_common(CLI::App* cmd, Common& c, bool with_scenario = false) {
  cmd->add_option("--config", c.config, "key = value file overriding defaults")
      ->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "random seed (overrides the config file)");
  if (with_scenario) {
    cmd->add_option("--scenario", c.scenario, "gpr, cpr or spr")
        ->check(CLI::IsMember({"gpr", "cpr", "spr", "GPR", "CPR", "SPR"}));
  }
  cmd->add_option("--out", c.out, "output directory")->capture_default_str();
}

KeyValues config_file(const Common& c) {
  return c.config.empty() ? KeyValues{} : read_key_values(c.config);
}

void write_manifest(const fs::path& dir, const std::string& command, const KeyValues& kv) {
  std::ofstream out(dir / "run_manifest.txt");
  out << "command = " << command << '\n';
  for (const auto& [k, v] : kv) out << k << " = " << v << '\n';
  if (!out) throw InputError("cannot write " + (dir / "run_manifest.txt").string());
}

// Applies `kv` through typed setters; unknown keys are errors.
template <typename Config>
class Overrides {
 public:
  template <typename T>
  Overrides& number(const std::string& key, T Config::*field) {
    setters_[key] = [key, field](Config& c, const std::string& v) {
      if (!parse_number(trim(v), c.*field)) {
        throw ConfigError("config key '" + key + "': cannot parse '" + v + "'");
      }
    };
    getters_[key] = [field](const Config& c) {
      if constexpr (std::is_floating_point_v<T>) {
        return format_double(c.*field);
      } else {
        return std::to_string(c.*field);
      }
    };
    return *this;
  }
  void apply(Config& c, const KeyValues& kv) const {
    for (const auto& [k, v] : kv) {
      auto it = setters_.find(k);
      if (it == setters_.end()) throw ConfigError("unknown config key '" + k + "'");
      it->second(c, v);
    }
  }
  KeyValues dump(const Config& c) const {
    KeyValues out;
    for (const auto& [k, get] : getters_) out[k] = get(c);
    return out;
  }

 private:
  std::map<std::string, std::function<void(Config&, const std::string&)>> setters_;
  std::map<std::string, std::function<std::string(const Config&)>> getters_;
};

const Overrides<SynthConfig>& synth_keys() {
  static const auto keys = [] {
    Overrides<SynthConfig> o;
    o.number("num_users", &SynthConfig::num_users)
        .number("num_pois", &SynthConfig::num_pois)
        .number("num_patterns", &SynthConfig::num_patterns)
        .number("min_checkins", &SynthConfig::min_checkins)
        .number("max_checkins", &SynthConfig::max_checkins)
        .number("pattern_user_concentration", &SynthConfig::pattern_user_concentration)
        .number("geo_cluster_radius", &SynthConfig::geo_cluster_radius)
        .number("noise_fraction", &SynthConfig::noise_fraction)
        .number("seed", &SynthConfig::seed)
        .number("num_weeks", &SynthConfig::num_weeks)
        .number("start_timestamp", &SynthConfig::start_timestamp)
        .number("area_lat", &SynthConfig::area_lat)
        .number("area_lon", &SynthConfig::area_lon)
        .number("area_span", &SynthConfig::area_span);
    return o;
  }();
  return keys;
}

const Overrides<TldaConfig>& tlda_keys() {
  static const auto keys = [] {
    Overrides<TldaConfig> o;
    o.number("num_patterns", &TldaConfig::num_patterns)
        .number("alpha", &TldaConfig::alpha)
        .number("beta", &TldaConfig::beta)
        .number("gamma", &TldaConfig::gamma)
        .number("time_slots", &TldaConfig::time_slots)
        .number("slot_seconds", &TldaConfig::slot_seconds)
        .number("utc_offset_seconds", &TldaConfig::utc_offset_seconds)
        .number("burn_in", &TldaConfig::burn_in)
        .number("samples", &TldaConfig::samples)
        .number("lag", &TldaConfig::lag)
        .number("seed", &TldaConfig::seed);
    return o;
  }();
  return keys;
}

fs::path prepare_out(const Common& c) {
  fs::create_directories(c.out);
  return c.out;
}

// ---- prepare ----------------------------------------------------------------

struct PrepareArgs {
  Common common;
  std::string input;
  std::size_t min_pois = 10;
  double train = 0.70, validation = 0.15, test = 0.15;
  std::int64_t delta_t = 86400;
  std::size_t min_len = 5;
};

void run_prepare(const PrepareArgs& a) {
  KeyValues kv = config_file(a.common);
  PrepareArgs r = a;
  auto take = [&](const char* key, auto& field) {
    if (auto it = kv.find(key); it != kv.end()) {
      if (!parse_number(trim(it->second), field)) {
        throw ConfigError(std::string("config key '") + key + "': cannot parse");
      }
      kv.erase(it);
    }
  };
  take("min_unique_pois", r.min_pois);
  take("train_fraction", r.train);
  take("validation_fraction", r.validation);
  take("test_fraction", r.test);
  take("delta_t", r.delta_t);
  take("min_len", r.min_len);
  if (!kv.empty()) throw ConfigError("unknown config key '" + kv.begin()->first + "'");
  const std::uint64_t seed = a.common.seed.value_or(0);

  ParseResult parsed = load_checkins(r.input);
  if (parsed.rejected > 0) {
    spdlog::warn("{} malformed lines rejected, first: {}", parsed.rejected,
                 parsed.diagnostics.front());
  }
  CheckInLog filtered = filter_users(parsed.log, r.min_pois);
  DatasetSplit split = chronological_split(filtered, {r.train, r.validation, r.test},
                                           ShortUserPolicy::kDrop);
  const fs::path out = prepare_out(a.common);
  save_split(out, split, seed);
  save_sequences(out / "sequences_train.csv", segment_sequences(split.train, r.delta_t, r.min_len));
  save_sequences(out / "sequences_all.csv", segment_sequences(filtered, r.delta_t, r.min_len));
  write_manifest(out, "prepare",
                 {{"input", fs::absolute(r.input).string()},
                  {"min_unique_pois", std::to_string(r.min_pois)},
                  {"train_fraction", format_double(r.train)},
                  {"validation_fraction", format_double(r.validation)},
                  {"test_fraction", format_double(r.test)},
                  {"delta_t", std::to_string(r.delta_t)},
                  {"min_len", std::to_string(r.min_len)},
                  {"seed", std::to_string(seed)},
                  {"rejected_lines", std::to_string(parsed.rejected)},
                  {"users_kept", std::to_string(split.train.users().size())},
                  {"users_dropped_short", std::to_string(split.dropped_users.size())}});
  std::cout << "prepared " << split.train.size() << "/" << split.validation.size() << "/"
            << split.test.size() << " train/validation/test check-ins in " << out.string() << '\n';
}

// ---- synth ------------------------------------------------------------------

struct SynthArgs {
  Common common;
  std::optional<std::size_t> users, pois, patterns;
  std::optional<double> noise;
};

void run_synth(const SynthArgs& a) {
  SynthConfig c;
  synth_keys().apply(c, config_file(a.common));
  if (a.common.seed) c.seed = *a.common.seed;
  if (a.users) c.num_users = *a.users;
  if (a.pois) c.num_pois = *a.pois;
  if (a.patterns) c.num_patterns = *a.patterns;
  if (a.noise) c.noise_fraction = *a.noise;
  SynthCorpus corpus = generate(c);
  const fs::path out = prepare_out(a.common);
  save_checkins(out / "checkins.csv", corpus.log);
  save_ground_truth(out, corpus.truth);
  write_manifest(out, "synth", synth_keys().dump(c));
  std::cout << "generated " << corpus.log.size() << " check-ins in " << out.string() << '\n';
}

// ---- tlda -------------------------------------------------------------------

struct TldaArgs {
  Common common;
  std::string split_dir;
  std::string input;
  std::optional<std::size_t> patterns;
};

CheckInLog training_log(const std::string& split_dir, const std::string& input) {
  if (!split_dir.empty()) return load_split(split_dir).train;
  ParseResult parsed = load_checkins(input);
  if (parsed.rejected > 0) throw InputError(input + ": " + parsed.diagnostics.front());
  return parsed.log;
}

void run_tlda(const TldaArgs& a) {
  const KeyValues kv = config_file(a.common);
  std::size_t patterns = a.patterns.value_or(10);
  if (!a.patterns) {
    if (auto it = kv.find("num_patterns"); it != kv.end()) parse_number(trim(it->second), patterns);
  }
  TldaConfig c = TldaConfig::with_patterns(patterns);
  tlda_keys().apply(c, kv);
  c.num_patterns = patterns;
  if (a.common.seed) c.seed = *a.common.seed;
  const CheckInLog log = training_log(a.split_dir, a.input);
  TldaPosterior post = fit_tlda(log, c);
  const fs::path out = prepare_out(a.common);
  save_posterior(out, post);
  KeyValues manifest = tlda_keys().dump(c);
  manifest["source"] = a.split_dir.empty() ? fs::absolute(a.input).string()
                                           : (fs::absolute(a.split_dir) / "train.csv").string();
  write_manifest(out, "tlda", manifest);
  std::cout << "fitted " << c.num_patterns << " patterns over " << log.size() << " check-ins\n";
}

// ---- train ------------------------------------------------------------------

struct TrainArgs {
  Common common;
  std::string split_dir;
  std::string topics_dir;
  std::optional<std::size_t> epochs;
};

void run_train(const TrainArgs& a) {
  std::optional<Scenario> scenario;
  if (!a.common.scenario.empty()) scenario = parse_scenario(a.common.scenario);
  TrainConfig c = resolve_config(config_file(a.common), scenario);
  if (a.common.seed) c.seed = *a.common.seed;
  if (a.epochs) c.epochs = *a.epochs;
  const DatasetSplit split = load_split(a.split_dir);
  const TldaPosterior topics = load_posterior(a.topics_dir);
  if (topics.num_patterns() != c.patterns_pi) {
    spdlog::info("patterns_pi set to {} to match the topic posterior", topics.num_patterns());
    c.patterns_pi = topics.num_patterns();
  }
  FitResult r = fit(split, topics, c);
  const fs::path out = prepare_out(a.common);
  save_model(r.model, out / "model.bin");
  {
    std::ofstream log(out / "training_log.tsv");
    log << "epoch\ttrain_loss\tvalidation_ndcg10\n";
    for (const EpochReport& e : r.epochs) {
      log << e.epoch << '\t' << format_double(e.train_loss) << '\t'
          << format_double(e.validation_ndcg10) << '\n';
    }
  }
  KeyValues manifest = to_key_values(c);
  manifest["split"] = fs::absolute(a.split_dir).string();
  manifest["topics"] = fs::absolute(a.topics_dir).string();
  manifest["best_epoch"] = std::to_string(r.best_epoch);
  manifest["initial_loss"] = format_double(r.initial_loss);
  manifest["final_loss"] = format_double(r.final_loss);
  write_manifest(out, "train", manifest);
  std::cout << "trained " << r.epochs.size() << " epochs, best epoch " << r.best_epoch
            << ", model in " << (out / "model.bin").string() << '\n';
}

// ---- evaluate ---------------------------------------------------------------

struct EvaluateArgs {
  Common common;
  std::string model_path;
  std::string split_dir;
  std::string scorer = "model";
  std::size_t negatives = 100;
  std::size_t max_cutoff = 10;
};

void run_evaluate(const EvaluateArgs& a) {
  if (!a.common.config.empty()) throw ConfigError("evaluate takes no --config");
  const DatasetSplit split = load_split(a.split_dir);
  const EvalUniverse universe = make_universe(split);
  std::optional<Model> model;
  std::unique_ptr<Scorer> scorer;
  if (a.scorer == "model") {
    if (a.model_path.empty()) throw ConfigError("--scorer model requires --model");
    model = load_model(a.model_path);
    if (!(model->users == universe.users) || !(model->pois == universe.pois)) {
      throw ConfigError("model was trained on a different split than " + a.split_dir);
    }
    scorer = std::make_unique<ModelScorer>(*model);
  } else if (a.scorer == "popularity") {
    scorer = std::make_unique<PopularityScorer>(split.train, universe);
  } else if (a.scorer == "random") {
    scorer = std::make_unique<RandomScorer>(a.common.seed.value_or(1));
  } else {
    scorer = std::make_unique<OracleScorer>(split.test, universe);
  }
  EvalOptions o;
  o.seed = a.common.seed.value_or(1);
  o.negatives = a.negatives;
  o.cutoffs.clear();
  for (std::size_t n = 1; n <= a.max_cutoff; ++n) o.cutoffs.push_back(n);
  std::size_t unknown = 0;
  const std::vector<EvalEvent> events = make_events(split.test, universe, &unknown);
  if (unknown > 0) spdlog::warn("{} test check-ins of users without training data skipped", unknown);
  const MetricsReport report = evaluate(*scorer, events, universe, o);

  const fs::path out = prepare_out(a.common);
  std::ofstream file(out / "report.txt");
  write_report(file, report);
  write_report(std::cout, report);
  write_manifest(out, "evaluate",
                 {{"model", a.model_path.empty() ? "-" : fs::absolute(a.model_path).string()},
                  {"split", fs::absolute(a.split_dir).string()},
                  {"scorer", a.scorer},
                  {"seed", std::to_string(o.seed)},
                  {"negatives", std::to_string(o.negatives)},
                  {"max_cutoff", std::to_string(a.max_cutoff)}});
}

// ---- recommend --------------------------------------------------------------

struct RecommendArgs {
  std::string model_path;
  std::vector<std::string> users;
  std::size_t n = 10;
};

void run_recommend(const RecommendArgs& a) {
  const Model model = load_model(a.model_path);
  std::cout << "user\trank\tpoi\tscore\n";
  for (const std::string& id : a.users) {
    const std::size_t u = model.users.index_of(id);
    const auto& visited = model.histories[u];
    std::vector<std::size_t> candidates;
    for (std::size_t v = 0; v < model.num_pois(); ++v) {
      if (!std::binary_search(visited.begin(), visited.end(), v)) candidates.push_back(v);
    }
    std::vector<double> scores(candidates.size());
    score_pois(model, u, candidates, scores);
    std::vector<std::size_t> order(candidates.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const std::size_t k = std::min(a.n, order.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                      [&](std::size_t x, std::size_t y) {
                        return scores[x] != scores[y] ? scores[x] > scores[y] : x < y;
                      });
    for (std::size_t r = 0; r < k; ++r) {
      std::cout << id << '\t' << r + 1 << '\t' << model.pois.name(candidates[order[r]]) << '\t'
                << format_double(scores[order[r]]) << '\n';
    }
  }
}

// ---- inspect ----------------------------------------------------------------

struct InspectArgs {
  Common common;
  std::string model_path;
  std::size_t top = 10;
};

void run_inspect(const InspectArgs& a) {
  const Model model = load_model(a.model_path);
  const fs::path out = prepare_out(a.common);
  auto open = [&](const char* name) {
    std::ofstream f(out / name);
    if (!f) throw InputError("cannot write " + (out / name).string());
    return f;
  };
  {
    auto f = open("attention_by_pattern.tsv");
    write_attention(f, attention_by_pattern(model));
  }
  {
    auto f = open("user_geo.tsv");
    write_user_geo(f, model);
  }
  {
    auto f = open("poi_geo.tsv");
    write_poi_geo(f, model);
  }
  {
    auto f = open("pattern_geo.tsv");
    write_pattern_geo(f, geo_by_pattern(model));
  }
  {
    auto f = open("pattern_venues.tsv");
    write_pattern_venues(f, model.topics, a.top);
  }
  write_manifest(out, "inspect",
                 {{"model", fs::absolute(a.model_path).string()}, {"top", std::to_string(a.top)}});
  std::cout << "wrote inspection tables to " << out.string() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Topic-enhanced memory network for POI recommendation"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "log progress");

  PrepareArgs prepare;
  auto* p = app.add_subcommand("prepare", "filter users, split chronologically, segment sequences");
  add_common(p, prepare.common);
  p->add_option("--input", prepare.input, "check-in CSV")->required()->check(CLI::ExistingFile);
  p->add_option("--min-pois", prepare.min_pois, "minimum distinct POIs per user")
      ->capture_default_str();
  p->add_option("--train", prepare.train, "train fraction")->capture_default_str();
  p->add_option("--validation", prepare.validation, "validation fraction")->capture_default_str();
  p->add_option("--test", prepare.test, "test fraction")->capture_default_str();
  p->add_option("--delta-t", prepare.delta_t, "segmentation gap in seconds")->capture_default_str();
  p->add_option("--min-len", prepare.min_len, "minimum segment length")->capture_default_str();

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "generate a synthetic corpus with planted patterns");
  add_common(s, synth.common);
  s->add_option("--users", synth.users, "number of users (default 500)");
  s->add_option("--pois", synth.pois, "number of POIs (default 200)");
  s->add_option("--patterns", synth.patterns, "planted patterns (default 3)");
  s->add_option("--noise", synth.noise, "fraction of uniform check-ins (default 0)");

  TldaArgs tlda;
  auto* t = app.add_subcommand("tlda", "fit the temporal topic model");
  add_common(t, tlda.common);
  auto* split_opt = t->add_option("--split", tlda.split_dir, "split directory (uses train.csv)");
  auto* input_opt = t->add_option("--input", tlda.input, "check-in CSV");
  split_opt->excludes(input_opt);
  t->add_option("--patterns", tlda.patterns, "number of patterns (default 10)");

  TrainArgs train;
  auto* tr = app.add_subcommand("train", "train the joint model");
  add_common(tr, train.common, true);
  tr->add_option("--split", train.split_dir, "split directory")->required();
  tr->add_option("--topics", train.topics_dir, "posterior directory from tlda")->required();
  tr->add_option("--epochs", train.epochs, "training epochs (default 30)");

  EvaluateArgs evaluate_args;
  auto* e = app.add_subcommand("evaluate", "rank test check-ins against 100 sampled negatives");
  add_common(e, evaluate_args.common);
  e->add_option("--model", evaluate_args.model_path, "model file");
  e->add_option("--split", evaluate_args.split_dir, "split directory")->required();
  e->add_option("--scorer", evaluate_args.scorer, "model, popularity, random or oracle")
      ->check(CLI::IsMember({"model", "popularity", "random", "oracle"}))
      ->capture_default_str();
  e->add_option("--negatives", evaluate_args.negatives, "negatives per test event")
      ->capture_default_str();
  e->add_option("--max-cutoff", evaluate_args.max_cutoff, "largest N of HR@N and NDCG@N")
      ->capture_default_str();

  RecommendArgs recommend;
  auto* r = app.add_subcommand("recommend", "top-N unvisited POIs for users");
  r->add_option("--model", recommend.model_path, "model file")->required();
  r->add_option("--user", recommend.users, "user id (repeatable)")->required();
  r->add_option("--n", recommend.n, "list length")->capture_default_str();

  InspectArgs inspect;
  auto* in = app.add_subcommand("inspect", "export attention, geo and pattern tables");
  add_common(in, inspect.common);
  in->add_option("--model", inspect.model_path, "model file")->required();
  in->add_option("--top", inspect.top, "venues listed per pattern")->capture_default_str();

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(verbose ? spdlog::level::info : spdlog::level::warn);

  try {
    if (*p) run_prepare(prepare);
    if (*s) run_synth(synth);
    if (*t) {
      if (tlda.split_dir.empty() && tlda.input.empty()) {
        throw ConfigError("tlda requires --split or --input");
      }
      run_tlda(tlda);
    }
    if (*tr) run_train(train);
    if (*e) run_evaluate(evaluate_args);
    if (*r) run_recommend(recommend);
    if (*in) run_inspect(inspect);
  } catch (const std::exception& ex) {
    std::cerr << "temn: error: " << ex.what() << '\n';
    return 1;
  }
  return 0;
}
