// Copyright 2026 The FedFair Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "config.hpp"

#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "fedfair/error.hpp"

namespace fedfair::tools {

namespace {

using nlohmann::json;

std::string type_name(const json& j) { return j.type_name(); }

/// Reads one JSON object, remembering which keys were consumed so that
/// leftovers can be reported.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail("", "expected an object, got " + type_name(j_));
  }

  std::string field(std::string_view key) const { return path_ + "/" + std::string(key); }

  [[noreturn]] void fail(std::string_view key, const std::string& what) const {
    throw ConfigError(key.empty() ? (path_.empty() ? "/" : path_) : field(key), what);
  }

  const json* find(std::string_view key) {
    const auto it = j_.find(std::string(key));
    if (it == j_.end()) return nullptr;
    used_.insert(std::string(key));
    return &*it;
  }

  bool has(std::string_view key) const { return j_.contains(std::string(key)); }

  void read(std::string_view key, double& out) {
    if (const json* v = find(key)) {
      if (!v->is_number()) fail(key, "expected a number, got " + type_name(*v));
      out = v->get<double>();
    }
  }

  void read(std::string_view key, std::size_t& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_unsigned()) fail(key, "expected a non-negative integer");
      out = v->get<std::size_t>();
    }
  }

  void read(std::string_view key, int& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer() || v->get<long long>() > std::numeric_limits<int>::max() ||
          v->get<long long>() < std::numeric_limits<int>::min()) {
        fail(key, "expected an integer");
      }
      out = v->get<int>();
    }
  }

  void read(std::string_view key, bool& out) {
    if (const json* v = find(key)) {
      if (!v->is_boolean()) fail(key, "expected true or false");
      out = v->get<bool>();
    }
  }

  std::optional<std::string> string(std::string_view key) {
    const json* v = find(key);
    if (!v) return std::nullopt;
    if (!v->is_string()) fail(key, "expected a string, got " + type_name(*v));
    return v->get<std::string>();
  }

  std::optional<std::filesystem::path> path(std::string_view key,
                                            const std::filesystem::path& base) {
    auto s = string(key);
    if (!s) return std::nullopt;
    std::filesystem::path p(*s);
    return p.is_relative() && !base.empty() ? base / p : p;
  }

  /// Parses a named enum via `parse`, turning its ContractError into a
  /// ConfigError on this key.
  template <typename T, typename Parse>
  void read_enum(std::string_view key, T& out, Parse parse) {
    if (auto s = string(key)) {
      try {
        out = parse(*s);
      } catch (const ContractError& e) {
        fail(key, e.what());
      }
    }
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!used_.count(key)) fail(key, "unknown key");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

/// Runs `check` and reports its ContractError under `field`.
template <typename F>
void check_at(const std::string& field, F check) {
  try {
    check();
  } catch (const ContractError& e) {
    throw ConfigError(field, e.what());
  }
}

void read_group(Section& parent, std::string_view key, data::GroupBias& g) {
  const json* v = parent.find(key);
  if (!v) return;
  Section s(*v, parent.field(key));
  s.read("proportion", g.proportion);
  s.read("flip_rate", g.flip_rate);
  s.read("shift", g.shift);
  s.finish();
}

DataSource read_data(Section& root, const std::filesystem::path& base) {
  const json* v = root.find("data");
  if (!v) root.fail("data", "missing required section");
  Section s(*v, "/data");
  const int kinds = s.has("generator") + s.has("idx") + s.has("csv");
  if (kinds != 1) s.fail("", "exactly one of generator, idx or csv is required");

  DataSource out;
  if (const json* g = s.find("generator")) {
    GeneratorSource src;
    Section gs(*g, "/data/generator");
    gs.read("samples", src.spec.samples);
    gs.read("features", src.spec.features);
    gs.read("separation", src.spec.separation);
    read_group(gs, "group_a", src.spec.group_a);
    read_group(gs, "group_b", src.spec.group_b);
    gs.read("group_feature", src.spec.group_feature);
    gs.read("test_fraction", src.test_fraction);
    gs.finish();
    check_at("/data/generator", [&] { src.spec.validate(); });
    if (!(src.test_fraction > 0.0 && src.test_fraction < 1.0)) {
      gs.fail("test_fraction", "must be in (0, 1)");
    }
    out = src;
  } else if (const json* i = s.find("idx")) {
    IdxSource src;
    Section is(*i, "/data/idx");
    const char* keys[] = {"train_images", "train_labels", "test_images", "test_labels"};
    std::filesystem::path* dst[] = {&src.train_images, &src.train_labels, &src.test_images,
                                    &src.test_labels};
    for (int k = 0; k < 4; ++k) {
      auto p = is.path(keys[k], base);
      if (!p) is.fail(keys[k], "missing required path");
      *dst[k] = *p;
    }
    is.read("positive_from_digit", src.options.positive_from_digit);
    if (src.options.positive_from_digit < 0 || src.options.positive_from_digit > 9) {
      is.fail("positive_from_digit", "must be in [0, 9]");
    }
    is.finish();
    out = src;
  } else {
    CsvSource src;
    Section cs(*s.find("csv"), "/data/csv");
    auto train = cs.path("train", base);
    auto test = cs.path("test", base);
    if (!train) cs.fail("train", "missing required path");
    if (!test) cs.fail("test", "missing required path");
    src.train = *train;
    src.test = *test;
    if (cs.has("group_feature")) {
      std::size_t g = 0;
      cs.read("group_feature", g);
      src.group_feature = g;
    }
    cs.finish();
    out = src;
  }
  s.finish();
  return out;
}

void read_clients(Section& root, ClientsConfig& c) {
  const json* v = root.find("clients");
  if (!v) return;
  Section s(*v, "/clients");
  s.read("count", c.count);
  if (const json* p = s.find("partition")) {
    if (p->is_string() && p->get<std::string>() == "iid") {
      c.partition = data::Iid{};
    } else if (p->is_object()) {
      Section ps(*p, "/clients/partition");
      data::LabelShard shard;
      if (!ps.has("label_shard")) ps.fail("", "expected \"iid\" or {\"label_shard\": k}");
      ps.read("label_shard", shard.labels_per_client);
      ps.finish();
      if (shard.labels_per_client == 0) ps.fail("label_shard", "must be >= 1");
      c.partition = shard;
    } else {
      s.fail("partition", "expected \"iid\" or {\"label_shard\": k}");
    }
  }
  s.read("batch_size", c.batch_size);
  s.read("l2", c.l2);
  if (const json* d = s.find("dp"); d && !d->is_null()) {
    Section ds(*d, "/clients/dp");
    federation::DpNoiseConfig dp;
    ds.read("clip_norm", dp.clip_norm);
    ds.read("sigma", dp.sigma);
    ds.finish();
    check_at("/clients/dp", [&] { dp.validate(); });
    c.dp = dp;
  }
  s.finish();
  if (c.count == 0) s.fail("count", "must be >= 1");
  if (c.batch_size == 0) s.fail("batch_size", "must be >= 1");
  if (!(c.l2 >= 0.0)) s.fail("l2", "must be >= 0");
}

void read_model(Section& root, ModelConfig& m) {
  const json* v = root.find("model");
  if (!v) return;
  Section s(*v, "/model");
  if (const json* h = s.find("hidden_dims")) {
    if (!h->is_array()) s.fail("hidden_dims", "expected an array of positive integers");
    m.hidden_dims.clear();
    for (const auto& d : *h) {
      if (!d.is_number_unsigned() || d.get<std::size_t>() == 0) {
        s.fail("hidden_dims", "expected an array of positive integers");
      }
      m.hidden_dims.push_back(d.get<std::size_t>());
    }
  }
  s.read_enum("activation", m.activation, parse_activation);
  if (s.has("server_activation")) {
    Activation a = m.activation;
    s.read_enum("server_activation", a, parse_activation);
    m.server_activation = a;
  }
  s.finish();
}

aggregation::AggregatorKind read_aggregator(const json& j, const std::string& field) {
  if (j.is_string()) {
    const auto name = j.get<std::string>();
    if (name == "fedavg") return aggregation::FedAvg{};
    if (name == "median") return aggregation::Median{};
    if (name == "trimmed_mean") return aggregation::TrimmedMean{};
    if (name == "multi_krum") return aggregation::MultiKrum{};
    throw ConfigError(field, "unknown aggregator '" + name + "'");
  }
  Section s(j, field);
  const auto kind = s.string("kind");
  if (!kind) s.fail("kind", "missing aggregator kind");
  aggregation::AggregatorKind out;
  if (*kind == "fedavg") {
    aggregation::FedAvg a;
    if (const json* w = s.find("weights")) {
      if (!w->is_array()) s.fail("weights", "expected an array of numbers");
      for (const auto& x : *w) {
        if (!x.is_number()) s.fail("weights", "expected an array of numbers");
        a.weights.push_back(x.get<double>());
      }
    }
    out = a;
  } else if (*kind == "median") {
    out = aggregation::Median{};
  } else if (*kind == "trimmed_mean") {
    aggregation::TrimmedMean a;
    s.read("trim", a.trim);
    out = a;
  } else if (*kind == "multi_krum") {
    aggregation::MultiKrum a;
    s.read("faulty", a.faulty);
    if (s.has("select")) {
      std::size_t sel = 0;
      s.read("select", sel);
      a.select = sel;
    }
    out = a;
  } else {
    s.fail("kind", "unknown aggregator '" + *kind + "'");
  }
  s.finish();
  return out;
}

void read_plan(Section& root, federation::RoundPlan& p) {
  const json* v = root.find("plan");
  bool explicit_s = false;
  if (v) {
    Section s(*v, "/plan");
    s.read("rounds", p.rounds);
    explicit_s = s.has("checkpoint_rounds");
    s.read("checkpoint_rounds", p.checkpoint_rounds);
    if (const json* a = s.find("aggregator")) p.aggregator = read_aggregator(*a, "/plan/aggregator");
    s.read_enum("metric", p.metric, fairness::parse_metric);
    s.read_enum("calibrator", p.calibrator, federation::parse_calibrator);
    s.read("noise_scale", p.noise_scale);
    s.read_enum("collection", p.collection, federation::parse_collection);
    s.read("neighbors", p.neighbors);
    s.finish();
  }
  if (!explicit_s) p.checkpoint_rounds = p.rounds / 2;
  check_at(explicit_s ? "/plan/checkpoint_rounds" : "/plan/rounds", [&] { p.validate(); });
}

federation::Schedule read_schedule(const json& j, const std::string& field) {
  Section s(j, field);
  if (s.has("constant") == s.has("decaying")) s.fail("", "expected {\"constant\": v} or {\"decaying\": {...}}");
  federation::Schedule out;
  if (const json* c = s.find("constant")) {
    if (!c->is_number()) s.fail("constant", "expected a number");
    out = federation::ConstantRate{c->get<double>()};
  } else {
    Section d(*s.find("decaying"), field + "/decaying");
    federation::DecayingRate r;
    d.read("scale", r.scale);
    d.read("offset", r.offset);
    d.finish();
    out = r;
  }
  s.finish();
  return out;
}

void read_schedules(Section& root, federation::Schedules& sch) {
  const json* v = root.find("schedules");
  if (!v) return;
  Section s(*v, "/schedules");
  if (const json* e = s.find("eta")) sch.eta = read_schedule(*e, "/schedules/eta");
  if (const json* g = s.find("gamma")) sch.gamma = read_schedule(*g, "/schedules/gamma");
  s.finish();
  check_at("/schedules/eta", [&] { federation::Schedules{sch.eta, {}}.validate(); });
  check_at("/schedules/gamma", [&] { federation::Schedules{{}, sch.gamma}.validate(); });
}

void read_condensation(Section& root, condensation::CondensationConfig& c) {
  const json* v = root.find("condensation");
  if (!v) return;
  Section s(*v, "/condensation");
  s.read("samples", c.samples);
  s.read("iterations", c.iterations);
  s.read("inner_steps", c.inner_steps);
  s.read("inner_lr", c.inner_lr);
  s.read("data_lr", c.data_lr);
  s.read("group_count", c.group_count);
  if (const json* r = s.find("feature_ranges")) {
    if (!r->is_array()) s.fail("feature_ranges", "expected an array of [lo, hi] pairs");
    for (const auto& pair : *r) {
      if (!pair.is_array() || pair.size() != 2 || !pair[0].is_number() || !pair[1].is_number()) {
        s.fail("feature_ranges", "expected an array of [lo, hi] pairs");
      }
      c.feature_ranges.push_back({pair[0].get<double>(), pair[1].get<double>()});
    }
  }
  s.finish();
  if (c.samples == 0) s.fail("samples", "must be >= 1");
  if (c.inner_steps == 0) s.fail("inner_steps", "must be >= 1");
  if (!(c.inner_lr >= 0.0)) s.fail("inner_lr", "must be >= 0");
  if (!(c.data_lr >= 0.0)) s.fail("data_lr", "must be >= 0");
  if (c.group_count < 1) s.fail("group_count", "must be >= 1");
}

std::optional<std::size_t> input_dim_of(const DataSource& source) {
  if (const auto* g = std::get_if<GeneratorSource>(&source)) return g->spec.input_dim();
  return std::nullopt;
}

}  // namespace

ExperimentConfig parse_config(std::string_view text, const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("", std::string("invalid JSON: ") + e.what());
  }
  ExperimentConfig c;
  Section root(j, "");
  std::size_t seed = c.seed;
  root.read("seed", seed);
  c.seed = seed;
  c.data = read_data(root, base_dir);
  read_clients(root, c.clients);
  read_model(root, c.model);
  read_plan(root, c.plan);
  read_schedules(root, c.schedules);
  read_condensation(root, c.condensation);
  root.read("threads", c.threads);
  root.finish();
  validate_config(c);
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.parent_path());
}

void validate_config(const ExperimentConfig& c) {
  check_at("/plan", [&] { c.plan.validate(); });
  check_at("/schedules", [&] { c.schedules.validate(); });
  if (c.clients.dp) check_at("/clients/dp", [&] { c.clients.dp->validate(); });
  if (const auto* g = std::get_if<GeneratorSource>(&c.data)) {
    check_at("/data/generator", [&] { g->spec.validate(); });
  }
  const bool equfl = c.plan.calibrator == federation::Calibrator::kEquFL;
  if (equfl && c.condensation.inner_steps >= c.plan.checkpoint_rounds) {
    throw ConfigError("/condensation/inner_steps",
                      "must be smaller than checkpoint_rounds (" +
                          std::to_string(c.plan.checkpoint_rounds) + ")");
  }
  if (equfl && c.plan.metric == fairness::MetricKind::kCON &&
      c.plan.neighbors >= c.condensation.samples) {
    throw ConfigError("/plan/neighbors", "must be smaller than condensation samples");
  }
  if (const auto dim = input_dim_of(c.data); dim && !c.condensation.feature_ranges.empty() &&
                                             c.condensation.feature_ranges.size() != *dim) {
    throw ConfigError("/condensation/feature_ranges",
                      "expected " + std::to_string(*dim) + " ranges, one per input feature");
  }
  if (const auto* a = std::get_if<aggregation::FedAvg>(&c.plan.aggregator);
      a && !a->weights.empty() && a->weights.size() != c.clients.count) {
    throw ConfigError("/plan/aggregator/weights", "expected one weight per client (" +
                                                      std::to_string(c.clients.count) + ")");
  }
  if (const auto* t = std::get_if<aggregation::TrimmedMean>(&c.plan.aggregator);
      t && 2 * t->trim >= c.clients.count) {
    throw ConfigError("/plan/aggregator/trim", "need 2 * trim < client count");
  }
  if (const auto* k = std::get_if<aggregation::MultiKrum>(&c.plan.aggregator)) {
    if (k->faulty + 2 >= c.clients.count) {
      throw ConfigError("/plan/aggregator/faulty", "need faulty + 2 < client count");
    }
    if (k->select && (*k->select == 0 || *k->select > c.clients.count - k->faulty)) {
      throw ConfigError("/plan/aggregator/select", "must be in [1, client count - faulty]");
    }
  }
}

void apply_seed(ExperimentConfig& config, std::uint64_t seed) { config.seed = seed; }

PreparedExperiment prepare(const ExperimentConfig& c) {
  validate_config(c);
  TabularDataset train, test;
  std::optional<std::size_t> group_feature;
  try {
    if (const auto* g = std::get_if<GeneratorSource>(&c.data)) {
      auto spec = g->spec;
      spec.seed = c.seed;
      auto split = data::train_test_split(data::generate_biased_tabular(spec), g->test_fraction,
                                          c.seed);
      train = std::move(split.train);
      test = std::move(split.test);
      if (spec.group_feature) group_feature = spec.features;
    } else if (const auto* i = std::get_if<IdxSource>(&c.data)) {
      train = data::load_idx(i->train_images, i->train_labels, i->options);
      test = data::load_idx(i->test_images, i->test_labels, i->options);
    } else {
      const auto& s = std::get<CsvSource>(c.data);
      for (auto [path, dst] : {std::pair{&s.train, &train}, std::pair{&s.test, &test}}) {
        std::ifstream in(*path);
        if (!in) throw ConfigError("/data/csv", "cannot open " + path->string());
        *dst = data::read_dataset_csv(in);
      }
      group_feature = s.group_feature;
    }
  } catch (const ParseError& e) {
    throw ConfigError("/data", e.what());
  } catch (const ContractError& e) {
    throw ConfigError("/data", e.what());
  }
  if (train.empty()) throw ConfigError("/data", "training set is empty");
  if (test.empty()) throw ConfigError("/data", "evaluation set is empty");
  const std::size_t dim = train.features.cols();
  if (test.features.cols() != dim) {
    throw ConfigError("/data", "train has " + std::to_string(dim) + " features, test has " +
                                   std::to_string(test.features.cols()));
  }
  if (group_feature && *group_feature >= dim) {
    throw ConfigError("/data/csv/group_feature", "column " + std::to_string(*group_feature) +
                                                     " outside " + std::to_string(dim) +
                                                     " features");
  }

  PreparedExperiment out;
  std::vector<TabularDataset> parts;
  check_at("/clients/partition", [&] {
    parts = data::partition(train, c.clients.count, c.clients.partition, c.seed);
  });
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (parts[i].size() < c.clients.batch_size) {
      throw ConfigError("/clients/batch_size",
                        std::to_string(c.clients.batch_size) + " exceeds the " +
                            std::to_string(parts[i].size()) + " rows of client " +
                            std::to_string(i));
    }
    federation::ClientState client;
    client.id = i;
    client.data = std::move(parts[i]);
    client.batch_size = c.clients.batch_size;
    client.seed = c.seed * 1000 + i;
    client.dp = c.clients.dp;
    client.l2 = c.clients.l2;
    out.clients.push_back(std::move(client));
  }

  const ModelShape shape{dim, c.model.hidden_dims, c.model.activation};
  auto& setup = out.setup;
  setup.plan = c.plan;
  setup.plan.seed = c.seed;
  setup.schedules = c.schedules;
  setup.condensation = c.condensation;
  setup.condensation.seed = c.seed;
  setup.condensation.group_feature = group_feature;
  if (c.model.server_activation) {
    setup.condensation.server_shape = ModelShape{dim, c.model.hidden_dims, *c.model.server_activation};
  }
  check_at("/condensation", [&] { setup.condensation.validate(dim); });
  setup.initial = ModelParams::xavier(shape, c.seed);
  setup.threads = c.threads;
  out.eval = std::move(test);
  return out;
}

federation::Simulation make_simulation(PreparedExperiment prepared) {
  try {
    return federation::Simulation(std::move(prepared.setup), std::move(prepared.clients),
                                  std::move(prepared.eval));
  } catch (const ContractError& e) {
    throw ConfigError("/", e.what());
  }
}

}  // namespace fedfair::tools
