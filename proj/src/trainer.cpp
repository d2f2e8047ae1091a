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

#include "temn/trainer.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>

#include <spdlog/spdlog.h>

#include "temn/errors.hpp"
#include "temn/text_io.hpp"

namespace temn {

namespace {

// Stream tags for derive_seed.
constexpr std::uint64_t kInitStream = 0x696e6974;
constexpr std::uint64_t kEpochStream = 0x65706f6368;
constexpr std::uint64_t kLossStream = 0x6c6f7373;
constexpr std::uint64_t kValidationStream = 0x76616c;

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

void sort_unique(std::vector<std::size_t>& v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
}

}  // namespace

const char* to_string(Scenario scenario) {
  switch (scenario) {
    case Scenario::kGpr: return "gpr";
    case Scenario::kCpr: return "cpr";
    case Scenario::kSpr: return "spr";
  }
  return "?";
}

Scenario parse_scenario(std::string_view text) {
  const std::string s = lower(text);
  if (s == "gpr") return Scenario::kGpr;
  if (s == "cpr") return Scenario::kCpr;
  if (s == "spr") return Scenario::kSpr;
  throw ConfigError("unknown scenario '" + std::string(text) + "' (expected gpr, cpr or spr)");
}

TrainConfig TrainConfig::for_scenario(Scenario scenario) {
  TrainConfig c;
  c.scenario = scenario;
  if (scenario == Scenario::kSpr) {
    c.weight_tau = 0.1;
    c.weight_geo_loss = 0.4;
    c.weight_geo_score = 1.6;
  }
  return c;
}

void validate(const TrainConfig& c) {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(std::string("invalid training config: ") + what);
  };
  require(c.learning_rate > 0 && std::isfinite(c.learning_rate), "learning_rate must be > 0");
  require(c.l2_lambda >= 0, "l2_lambda must be >= 0");
  require(c.margin_m >= 0 && c.margin_g >= 0, "margins must be >= 0");
  require(c.weight_tau >= 0 && c.weight_geo_loss >= 0 && c.weight_geo_score >= 0,
          "loss and score weights must be >= 0");
  require(c.dim_d >= 1 && c.slots_h >= 1 && c.patterns_pi >= 1,
          "dim_d, slots_h and patterns_pi must be >= 1");
  require(c.batch_size >= 1, "batch_size must be >= 1");
  require(c.init_bound > 0, "init_bound must be > 0");
  require(c.segment_gap_seconds > 0 && c.segment_min_len >= 2,
          "segment_gap_seconds must be > 0 and segment_min_len >= 2");
}

std::map<std::string, std::string> to_key_values(const TrainConfig& c) {
  return {
      {"learning_rate", format_double(c.learning_rate)},
      {"l2_lambda", format_double(c.l2_lambda)},
      {"margin_m", format_double(c.margin_m)},
      {"margin_g", format_double(c.margin_g)},
      {"weight_tau", format_double(c.weight_tau)},
      {"weight_geo_loss", format_double(c.weight_geo_loss)},
      {"weight_geo_score", format_double(c.weight_geo_score)},
      {"dim_d", std::to_string(c.dim_d)},
      {"slots_h", std::to_string(c.slots_h)},
      {"patterns_pi", std::to_string(c.patterns_pi)},
      {"epochs", std::to_string(c.epochs)},
      {"batch_size", std::to_string(c.batch_size)},
      {"seed", std::to_string(c.seed)},
      {"scenario", to_string(c.scenario)},
      {"distance_mode", to_string(c.distance_mode)},
      {"regularization", c.regularization == Regularization::kGlobal ? "global" : "touched"},
      {"init_bound", format_double(c.init_bound)},
      {"segment_gap_seconds", std::to_string(c.segment_gap_seconds)},
      {"segment_min_len", std::to_string(c.segment_min_len)},
  };
}

TrainConfig resolve_config(const std::map<std::string, std::string>& overrides,
                           std::optional<Scenario> scenario) {
  if (!scenario) {
    auto it = overrides.find("scenario");
    scenario = it == overrides.end() ? Scenario::kGpr : parse_scenario(it->second);
  }
  TrainConfig c = TrainConfig::for_scenario(*scenario);

  auto number = [](auto& field) {
    return [&field](const std::string& key, const std::string& text) {
      if (!parse_number(trim(text), field)) {
        throw ConfigError("config key '" + key + "': cannot parse '" + text + "'");
      }
    };
  };
  using Setter = std::function<void(const std::string&, const std::string&)>;
  const std::map<std::string, Setter> setters = {
      {"learning_rate", number(c.learning_rate)},
      {"l2_lambda", number(c.l2_lambda)},
      {"margin_m", number(c.margin_m)},
      {"margin_g", number(c.margin_g)},
      {"weight_tau", number(c.weight_tau)},
      {"weight_geo_loss", number(c.weight_geo_loss)},
      {"weight_geo_score", number(c.weight_geo_score)},
      {"dim_d", number(c.dim_d)},
      {"slots_h", number(c.slots_h)},
      {"patterns_pi", number(c.patterns_pi)},
      {"epochs", number(c.epochs)},
      {"batch_size", number(c.batch_size)},
      {"seed", number(c.seed)},
      {"init_bound", number(c.init_bound)},
      {"segment_gap_seconds", number(c.segment_gap_seconds)},
      {"segment_min_len", number(c.segment_min_len)},
      {"scenario", [](const std::string&, const std::string&) {}},
      {"distance_mode",
       [&c](const std::string&, const std::string& v) { c.distance_mode = parse_distance_mode(v); }},
      {"regularization",
       [&c](const std::string&, const std::string& v) {
         if (v == "touched") {
           c.regularization = Regularization::kTouched;
         } else if (v == "global") {
           c.regularization = Regularization::kGlobal;
         } else {
           throw ConfigError("config key 'regularization': expected touched or global");
         }
       }},
  };
  for (const auto& [key, value] : overrides) {
    auto it = setters.find(key);
    if (it == setters.end()) throw ConfigError("unknown config key '" + key + "'");
    it->second(key, value);
  }
  validate(c);
  return c;
}

Model init_model(const DatasetSplit& split, const TldaPosterior& topics,
                 const TrainConfig& config) {
  validate(config);
  if (split.train.empty()) throw ConfigError("training split is empty");
  if (topics.num_patterns() != config.patterns_pi) {
    throw ConfigError("topic posterior has " + std::to_string(topics.num_patterns()) +
                      " patterns but patterns_pi = " + std::to_string(config.patterns_pi));
  }
  EvalUniverse universe = make_universe(split);
  Model m;
  m.config = config;
  m.users = std::move(universe.users);
  m.pois = std::move(universe.pois);
  m.topics = topics;

  m.user_topics = Matrix(m.num_users(), config.patterns_pi);
  for (std::size_t u = 0; u < m.num_users(); ++u) {
    auto row = topics.users.find(m.users.name(u));
    if (!row) {
      throw ConfigError("topic posterior has no mixture for training user '" + m.users.name(u) + "'");
    }
    std::ranges::copy(topics.theta.row(*row), m.user_topics.row(u).begin());
  }

  m.histories = index_interactions(split.train, m.users, m.pois).visited;
  m.centroids.reserve(m.num_users());
  for (std::size_t u = 0; u < m.num_users(); ++u) {
    m.centroids.push_back(user_centroid(split.train, m.users.name(u)));
  }
  std::map<PoiId, Coordinates> where;
  for (const CheckInLog* log : {&split.train, &split.validation, &split.test}) {
    where.merge(poi_locations(*log));  // keeps the earlier part's entry
  }
  m.poi_coordinates.reserve(m.num_pois());
  for (const PoiId& id : m.pois.names()) m.poi_coordinates.push_back(where.at(id));

  Rng rng(derive_seed(config.seed, kInitStream));
  m.memnet = MemNetParams::init(m.num_pois(), config.dim_d, config.slots_h, rng,
                                config.init_bound);
  m.fusion = {Matrix(config.patterns_pi, config.dim_d), Vector(config.patterns_pi, 0.0)};
  std::uniform_real_distribution<double> init(-config.init_bound, config.init_bound);
  for (double& w : m.fusion.weight.data()) w = init(rng);
  m.geo = {Vector(m.num_users(), 0.0), Vector(m.num_pois(), 0.0), 0.0};
  return m;
}

Vector memory_embedding(const Model& model, std::size_t user) {
  return user_memory_embedding(model.histories.at(user), model.memnet);
}

ScoreParts score_parts(const Model& model, std::span<const double> p, std::size_t user,
                       std::size_t poi) {
  ScoreParts s;
  s.memory = mn_score_for(p, poi, model.memnet);
  const double l = geo_distance(model.centroids[user], model.poi_coordinates[poi],
                                model.config.distance_mode);
  s.geo = geo_score(model.geo.user_pref[user], model.geo.poi_infl[poi], l, model.geo.bias);
  s.total = s.memory + model.config.weight_geo_score * s.geo;
  return s;
}

double total_score(const Model& model, std::size_t user, std::size_t poi) {
  return score_parts(model, memory_embedding(model, user), user, poi).total;
}

double total_score(const Model& model, const UserId& user, const PoiId& poi) {
  return total_score(model, model.users.index_of(user), model.pois.index_of(poi));
}

void score_pois(const Model& model, std::size_t user, std::span<const std::size_t> pois,
                std::span<double> out) {
  const Vector p = memory_embedding(model, user);
  for (std::size_t i = 0; i < pois.size(); ++i) out[i] = score_parts(model, p, user, pois[i]).total;
}

double total_loss(double loss_m, double loss_tau, double loss_geo, double squared_norm,
                  const TrainConfig& config) {
  return loss_m + config.weight_tau * loss_tau + config.weight_geo_loss * loss_geo +
         config.l2_lambda * squared_norm;
}

double parameter_squared_norm(const Model& m) {
  return squared_norm(m.memnet.poi_embeddings.data()) + squared_norm(m.memnet.keys.data()) +
         squared_norm(m.memnet.memory.data()) + squared_norm(m.fusion.weight.data()) +
         squared_norm(m.fusion.bias) + squared_norm(m.geo.user_pref) +
         squared_norm(m.geo.poi_infl);
}

TrainingData interaction_examples(const Model& model, const CheckInLog& train) {
  TrainingData data;
  data.memories = model.histories;
  data.train = index_interactions(train, model.users, model.pois);
  for (std::size_t u = 0; u < model.num_users(); ++u) {
    for (std::size_t v : model.histories[u]) data.positives.push_back({u, u, v});
  }
  return data;
}

TrainingData sequence_examples(const Model& model, const SequenceSet& sequences,
                               const CheckInLog& train) {
  TrainingData data;
  data.memories = model.histories;
  data.train = index_interactions(train, model.users, model.pois);
  for (const auto& [user, segments] : sequences.sequences) {
    auto u = model.users.find(user);
    if (!u) continue;
    for (const auto& segment : segments) {
      std::vector<std::size_t> prefix;
      for (const CheckIn& c : segment) {
        auto v = model.pois.find(c.poi);
        if (!v) continue;
        if (!prefix.empty()) {
          data.memories.push_back(prefix);
          data.positives.push_back({*u, data.memories.size() - 1, *v});
        }
        auto at = std::lower_bound(prefix.begin(), prefix.end(), *v);
        if (at == prefix.end() || *at != *v) prefix.insert(at, *v);
      }
    }
  }
  return data;
}

ModelGradients ModelGradients::zeros_like(const Model& model) {
  return {MemNetGradients::zeros_like(model.memnet), FusionGradients::zeros_like(model.fusion),
          Vector(model.num_users(), 0.0), Vector(model.num_pois(), 0.0)};
}

namespace {

void clear(ModelGradients& g) {
  g.memnet.clear();
  g.fusion.weight.fill(0.0);
  std::ranges::fill(g.fusion.bias, 0.0);
  std::ranges::fill(g.user_pref, 0.0);
  std::ranges::fill(g.poi_infl, 0.0);
}

// lambda * |x|^2 over the chosen coordinates; adds 2 lambda x to the gradient.
class Regularizer {
 public:
  Regularizer(double lambda, ModelGradients* grads) : lambda_(lambda), grads_(grads) {}

  void add(std::span<const double> x, std::span<double> g) {
    sum_ += squared_norm(x);
    if (grads_) axpy(2.0 * lambda_, x, g);
  }
  void add(double x, double& g) {
    sum_ += x * x;
    if (grads_) g += 2.0 * lambda_ * x;
  }
  double sum() const { return sum_; }

 private:
  double lambda_;
  ModelGradients* grads_;
  double sum_ = 0.0;
};

}  // namespace

ObjectiveTerms batch_objective(const Model& model, const TrainingData& data,
                               std::span<const Triple> batch, ModelGradients* grads) {
  const TrainConfig& cfg = model.config;
  ObjectiveTerms t;
  Vector grad_p(cfg.dim_d);
  std::vector<std::size_t> users, rows, rho_pois;

  for (const Triple& triple : batch) {
    const auto& ex = data.positives.at(triple.example);
    const auto& memory = data.memories.at(ex.memory);
    const std::size_t u = ex.user, pos = ex.poi, neg = triple.negative;
    const Vector p = user_memory_embedding(memory, model.memnet);
    if (grads) {
      std::ranges::fill(grad_p, 0.0);
      t.memnet += mn_backward(p, pos, neg, model.memnet, cfg.margin_m, 1.0, grads->memnet, grad_p);
      distribute_memory_gradient(memory, grad_p, grads->memnet);
    } else {
      t.memnet += mn_forward(p, pos, neg, model.memnet, cfg.margin_m).loss;
    }

    const GeoTriple g{
        model.geo.user_pref[u], model.geo.poi_infl[pos], model.geo.poi_infl[neg],
        geo_distance(model.centroids[u], model.poi_coordinates[pos], cfg.distance_mode),
        geo_distance(model.centroids[u], model.poi_coordinates[neg], cfg.distance_mode)};
    GeoTripleGradient gg;
    t.geo += geo_backward(g, cfg.margin_g, gg);
    if (grads) {
      grads->user_pref[u] += cfg.weight_geo_loss * gg.rho_u;
      grads->poi_infl[pos] += cfg.weight_geo_loss * gg.rho_pos;
      grads->poi_infl[neg] += cfg.weight_geo_loss * gg.rho_neg;
    }

    users.push_back(u);
    rows.insert(rows.end(), memory.begin(), memory.end());
    rows.push_back(pos);
    rows.push_back(neg);
    rho_pois.push_back(pos);
    rho_pois.push_back(neg);
  }

  sort_unique(users);
  for (std::size_t u : users) {
    const Vector p = memory_embedding(model, u);
    if (grads) {
      std::ranges::fill(grad_p, 0.0);
      t.topic += fusion_backward(p, model.user_topics.row(u), model.fusion, cfg.weight_tau,
                                 grads->fusion, grad_p);
      distribute_memory_gradient(model.histories[u], grad_p, grads->memnet);
    } else {
      t.topic += fusion_ce_loss(model.user_topics.row(u), fusion_forward(p, model.fusion));
    }
    rows.insert(rows.end(), model.histories[u].begin(), model.histories[u].end());
  }

  Regularizer reg(cfg.l2_lambda, grads);
  ModelGradients dummy;
  ModelGradients& g = grads ? *grads : dummy;
  const bool all = cfg.regularization == Regularization::kGlobal;
  auto memnet_rows = [&](std::size_t v) {
    reg.add(model.memnet.poi_embeddings.row(v),
            grads ? g.memnet.poi_embeddings.row(v) : std::span<double>{});
  };
  if (all) {
    for (std::size_t v = 0; v < model.num_pois(); ++v) memnet_rows(v);
  } else {
    sort_unique(rows);
    for (std::size_t v : rows) memnet_rows(v);
  }
  reg.add(model.memnet.keys.data(), grads ? g.memnet.keys.data() : std::span<double>{});
  reg.add(model.memnet.memory.data(), grads ? g.memnet.memory.data() : std::span<double>{});
  reg.add(model.fusion.weight.data(), grads ? g.fusion.weight.data() : std::span<double>{});
  reg.add(model.fusion.bias, grads ? std::span<double>(g.fusion.bias) : std::span<double>{});
  double sink = 0.0;
  auto rho = [&](const Vector& x, Vector& gx, std::size_t i) {
    reg.add(x[i], grads ? gx[i] : sink);
  };
  if (all) {
    for (std::size_t u = 0; u < model.num_users(); ++u) rho(model.geo.user_pref, g.user_pref, u);
    for (std::size_t v = 0; v < model.num_pois(); ++v) rho(model.geo.poi_infl, g.poi_infl, v);
  } else {
    sort_unique(rho_pois);
    for (std::size_t u : users) rho(model.geo.user_pref, g.user_pref, u);
    for (std::size_t v : rho_pois) rho(model.geo.poi_infl, g.poi_infl, v);
  }
  t.squared_norm = reg.sum();
  t.total = total_loss(t.memnet, t.topic, t.geo, t.squared_norm, cfg);
  return t;
}

void apply_gradients(Model& model, const ModelGradients& grads, double lr) {
  axpy(-lr, grads.memnet.poi_embeddings.data(), model.memnet.poi_embeddings.data());
  axpy(-lr, grads.memnet.keys.data(), model.memnet.keys.data());
  axpy(-lr, grads.memnet.memory.data(), model.memnet.memory.data());
  axpy(-lr, grads.fusion.weight.data(), model.fusion.weight.data());
  axpy(-lr, grads.fusion.bias, model.fusion.bias);
  axpy(-lr, grads.user_pref, model.geo.user_pref);
  axpy(-lr, grads.poi_infl, model.geo.poi_infl);
}

namespace {

std::vector<Triple> fixed_triples(const TrainingData& data, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Triple> out;
  out.reserve(data.positives.size());
  for (std::size_t i = 0; i < data.positives.size(); ++i) {
    out.push_back({i, sample_negative(data.positives[i].user, data.train, rng)});
  }
  return out;
}

double mean_objective(const Model& model, const TrainingData& data,
                      std::span<const Triple> triples) {
  double total = 0.0;
  const std::size_t b = model.config.batch_size;
  for (std::size_t i = 0; i < triples.size(); i += b) {
    total += batch_objective(model, data, triples.subspan(i, std::min(b, triples.size() - i)),
                             nullptr).total;
  }
  return total / static_cast<double>(triples.size());
}

struct Validation {
  EvalUniverse universe;
  std::vector<EvalEvent> events;
  EvalOptions options;

  Validation(const DatasetSplit& split, std::uint64_t seed) : universe(make_universe(split)) {
    options.cutoffs = {10};
    options.seed = derive_seed(seed, kValidationStream);
    // Events without enough negatives are dropped once here instead of
    // being reported as skipped after every epoch.
    std::size_t dropped = 0;
    for (const EvalEvent& e : make_events(split.validation, universe)) {
      if (event_negatives(e, universe, options.negatives, options.seed).empty()) {
        ++dropped;
      } else {
        events.push_back(e);
      }
    }
    if (dropped > 0) {
      spdlog::warn("{} validation events have fewer than {} negatives and are not used", dropped,
                   options.negatives);
    }
  }

  bool enabled() const { return !events.empty(); }

  double ndcg10(const Model& model) const {
    if (events.empty()) return 0.0;
    return evaluate(ModelScorer(model), events, universe, options).ndcg[0];
  }
};

FitResult run_fit(const DatasetSplit& split, Model model, const TrainingData& data) {
  const TrainConfig& cfg = model.config;
  if (data.positives.empty()) throw ConfigError("no training examples");
  const Validation validation(split, cfg.seed);
  const std::vector<Triple> probe = fixed_triples(data, derive_seed(cfg.seed, kLossStream));

  FitResult result;
  result.initial_loss = mean_objective(model, data, probe);
  result.model = model;
  double best = -std::numeric_limits<double>::infinity();

  ModelGradients grads = ModelGradients::zeros_like(model);
  std::vector<std::size_t> order(data.positives.size());
  std::vector<Triple> batch;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Rng rng(derive_seed(cfg.seed, kEpochStream, epoch));
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    double sum = 0.0;
    for (std::size_t start = 0, b = 0; start < order.size(); start += cfg.batch_size, ++b) {
      batch.clear();
      for (std::size_t k = start; k < std::min(order.size(), start + cfg.batch_size); ++k) {
        const std::size_t user = data.positives[order[k]].user;
        batch.push_back({order[k], sample_negative(user, data.train, rng)});
      }
      clear(grads);
      const std::string where = "epoch " + std::to_string(epoch) + ", batch " + std::to_string(b + 1);
      ObjectiveTerms terms;
      try {
        terms = batch_objective(model, data, batch, &grads);
      } catch (const DomainError& e) {
        throw DivergenceError("training diverged at " + where + ": " + e.what());
      }
      if (!std::isfinite(terms.total)) throw DivergenceError("non-finite loss at " + where);
      apply_gradients(model, grads, cfg.learning_rate);
      sum += terms.total;
    }
    EpochReport report{epoch, sum / static_cast<double>(order.size()), validation.ndcg10(model)};
    spdlog::info("epoch {:>3}  loss {:.6f}  validation ndcg@10 {:.4f}", epoch, report.train_loss,
                 report.validation_ndcg10);
    result.epochs.push_back(report);
    // Without validation events the last epoch is kept.
    if (!validation.enabled() || report.validation_ndcg10 > best) {
      best = report.validation_ndcg10;
      result.model = model;
      result.best_epoch = epoch;
    }
  }
  result.final_loss = mean_objective(model, data, probe);
  return result;
}

}  // namespace

FitResult fit(const DatasetSplit& split, const TldaPosterior& topics, const TrainConfig& config) {
  Model model = init_model(split, topics, config);
  if (config.scenario == Scenario::kSpr) {
    SequenceSet seqs =
        segment_sequences(split.train, config.segment_gap_seconds, config.segment_min_len);
    TrainingData data = sequence_examples(model, seqs, split.train);
    return run_fit(split, std::move(model), data);
  }
  TrainingData data = interaction_examples(model, split.train);
  return run_fit(split, std::move(model), data);
}

FitResult fit(const DatasetSplit& split, const SequenceSet& sequences,
              const TldaPosterior& topics, const TrainConfig& config) {
  Model model = init_model(split, topics, config);
  TrainingData data = sequence_examples(model, sequences, split.train);
  return run_fit(split, std::move(model), data);
}

double validation_ndcg10(const Model& model, const DatasetSplit& split) {
  return Validation(split, model.config.seed).ndcg10(model);
}

}  // namespace temn
