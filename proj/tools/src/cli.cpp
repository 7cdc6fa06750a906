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

#include "cli.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <mutex>
#include <optional>
#include <ostream>
#include <thread>

#include <CLI11.hpp>

#include "fedfair/error.hpp"
#include "fedfair/fairness.hpp"
#include "fedfair/serialization.hpp"
#include "fedfair/detail/text_util.hpp"

namespace fedfair::tools {

namespace fs = std::filesystem;

namespace {

/// Tracks files and directories a command creates and deletes them unless
/// the command commits.
class OutputGuard {
 public:
  OutputGuard() = default;
  OutputGuard(const OutputGuard&) = delete;
  OutputGuard& operator=(const OutputGuard&) = delete;
  ~OutputGuard() {
    if (committed_) return;
    std::error_code ec;
    for (auto it = files_.rbegin(); it != files_.rend(); ++it) fs::remove(*it, ec);
    for (auto it = dirs_.rbegin(); it != dirs_.rend(); ++it) fs::remove(*it, ec);
  }

  void ensure_dir(const fs::path& dir) {
    std::vector<fs::path> missing;
    for (fs::path p = dir; !p.empty() && !fs::exists(p); p = p.parent_path()) {
      missing.push_back(p);
      if (p == p.parent_path()) break;
    }
    fs::create_directories(dir);
    for (auto it = missing.rbegin(); it != missing.rend(); ++it) dirs_.push_back(*it);
  }

  std::ofstream open(const fs::path& path) {
    {
      std::lock_guard lock(mu_);
      files_.push_back(path);
    }
    std::ofstream out(path);
    if (!out) throw ContractError("cannot open " + path.string() + " for writing");
    return out;
  }

  void commit() { committed_ = true; }

 private:
  std::mutex mu_;
  std::vector<fs::path> files_;
  std::vector<fs::path> dirs_;
  bool committed_ = false;
};

struct CommonOptions {
  std::string config;
  std::string out_dir = "out";
  std::optional<std::uint64_t> seed;
  std::string format = "csv";
};

TraceFormat parse_format(const std::string& s) {
  if (s == "csv") return TraceFormat::kCsv;
  if (s == "jsonl") return TraceFormat::kJsonl;
  throw ConfigError("--format", "expected csv or jsonl, got '" + s + "'");
}

std::string_view extension(TraceFormat f) { return f == TraceFormat::kCsv ? ".csv" : ".jsonl"; }

ExperimentConfig load(const CommonOptions& o) {
  ExperimentConfig c = load_config(o.config);
  if (o.seed) apply_seed(c, *o.seed);
  return c;
}

void write_trace(OutputGuard& guard, const fs::path& path, TraceFormat format,
                 const MetricTrace& trace) {
  auto out = guard.open(path);
  if (format == TraceFormat::kCsv) {
    write_trace_csv(out, trace);
  } else {
    write_trace_jsonl(out, trace);
  }
  if (!out) throw ContractError("failed writing " + path.string());
}

std::vector<double> parse_values(const std::string& list) {
  std::vector<double> values;
  for (auto cell : detail::split_csv_line(list)) {
    const auto v = detail::parse_double(cell);
    if (!v || !std::isfinite(*v)) {
      throw ConfigError("values", "cannot parse '" + std::string(cell) + "' as a number");
    }
    values.push_back(*v);
  }
  return values;
}

std::string value_tag(double v) {
  std::string s = detail::format_double(v);
  std::replace(s.begin(), s.end(), '-', 'm');
  return s;
}

std::size_t whole(double v, std::string_view knob) {
  if (!(v >= 1.0) || v != std::floor(v)) {
    throw ConfigError(std::string(knob), "expected a positive integer, got " + detail::format_double(v));
  }
  return static_cast<std::size_t>(v);
}

int cmd_run(const CommonOptions& o, std::ostream& out) {
  const TraceFormat format = parse_format(o.format);
  auto sim = make_simulation(prepare(load(o)));
  OutputGuard guard;
  guard.ensure_dir(o.out_dir);
  const MetricTrace trace = sim.run();
  const fs::path trace_path = fs::path(o.out_dir) / ("trace" + std::string(extension(format)));
  write_trace(guard, trace_path, format, trace);
  {
    auto model = guard.open(fs::path(o.out_dir) / "model.json");
    write_model_json(model, sim.state().global);
  }
  guard.commit();
  const auto& last = trace.back();
  out << "rounds " << trace.size() << " eo " << last.eo << " dp " << last.dp << " accuracy "
      << last.test_accuracy << '\n'
      << "wrote " << trace_path.string() << '\n';
  return 0;
}

int cmd_sweep(const CommonOptions& o, const std::string& knob_name, const std::string& list,
              std::ostream& out) {
  const TraceFormat format = parse_format(o.format);
  const SweepKnob knob = parse_knob(knob_name);
  const auto values = parse_values(list);
  const ExperimentConfig base = load(o);

  std::vector<PreparedExperiment> points;
  for (double v : values) points.push_back(prepare(with_knob(base, knob, v)));
  std::vector<std::optional<federation::Simulation>> sims;
  for (auto& p : points) sims.emplace_back(make_simulation(std::move(p)));

  OutputGuard guard;
  guard.ensure_dir(o.out_dir);
  std::vector<MetricTrace> traces(values.size());
  std::vector<std::exception_ptr> errors(values.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < values.size();) {
      try {
        traces[i] = sims[i]->run();
        sims[i].reset();
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    const std::size_t n = sweep_threads(values.size());
    for (std::size_t t = 1; t < n; ++t) pool.emplace_back(worker);
    worker();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  std::vector<SummaryRow> rows;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const std::string name = "trace_" + std::string(to_string(knob)) + "_" + value_tag(values[i]) +
                             std::string(extension(format));
    write_trace(guard, fs::path(o.out_dir) / name, format, traces[i]);
    rows.push_back(summarize(to_string(knob), values[i], name, traces[i]));
  }
  {
    auto s = guard.open(fs::path(o.out_dir) / "summary.csv");
    write_summary_csv(s, rows);
  }
  guard.commit();
  out << "wrote " << rows.size() << " traces and summary.csv to " << o.out_dir << '\n';
  return 0;
}

int cmd_datasyn(const CommonOptions& o, std::ostream& out) {
  ExperimentConfig c = load(o);
  if (c.plan.calibrator != federation::Calibrator::kEquFL) {
    throw ConfigError("/plan/calibrator", "datasyn needs the equfl calibrator");
  }
  auto sim = make_simulation(prepare(c));
  while (!sim.state().synthetic) sim.run_round();
  OutputGuard guard;
  guard.ensure_dir(o.out_dir);
  const fs::path path = fs::path(o.out_dir) / "synthetic.csv";
  {
    auto f = guard.open(path);
    data::write_dataset_csv(f, *sim.state().synthetic_data);
  }
  guard.commit();
  out << "wrote " << sim.state().synthetic->size() << " synthetic rows to " << path.string()
      << '\n';
  return 0;
}

int cmd_metrics(const std::string& model_path, const std::string& data_path,
                std::size_t neighbors, double threshold, std::ostream& out) {
  ModelParams model;
  TabularDataset data;
  try {
    model = load_model(model_path);
    std::ifstream in(data_path);
    if (!in) throw ConfigError("--data", "cannot open " + data_path);
    data = data::read_dataset_csv(in);
  } catch (const ParseError& e) {
    throw ConfigError("--model/--data", e.what());
  } catch (const ContractError& e) {
    throw ConfigError("--model/--data", e.what());
  }
  if (data.features.cols() != model.shape().input_dim) {
    throw ConfigError("--data", "dataset has " + std::to_string(data.features.cols()) +
                                    " features, model expects " +
                                    std::to_string(model.shape().input_dim));
  }
  if (data.size() < 2) throw ConfigError("--data", "need at least 2 rows");
  if (neighbors == 0) throw ConfigError("--neighbors", "must be >= 1");
  const fairness::NeighborGraph graph(data.features, std::min(neighbors, data.size() - 1));
  out << "metric,value\n";
  for (auto kind : fairness::kAllMetrics) {
    out << fairness::to_string(kind) << ','
        << detail::format_double(fairness::bias_score(kind, model, data, threshold, &graph))
        << '\n';
  }
  out << "accuracy," << detail::format_double(accuracy(model, data, threshold)) << '\n';
  return 0;
}

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config, "Experiment config (JSON)")->required();
  cmd->add_option("--out", o.out_dir, "Output directory");
  cmd->add_option_function<std::uint64_t>(
      "--seed", [&o](const std::uint64_t& s) { o.seed = s; }, "Master seed override");
  cmd->add_option("--format", o.format, "Trace format: csv or jsonl");
}

}  // namespace

std::string_view to_string(SweepKnob knob) {
  switch (knob) {
    case SweepKnob::kGamma: return "gamma";
    case SweepKnob::kRoundFraction: return "round_fraction";
    case SweepKnob::kSynSamples: return "syn_samples";
    case SweepKnob::kClients: return "clients";
    case SweepKnob::kSigma: return "sigma";
  }
  return "?";
}

SweepKnob parse_knob(std::string_view name) {
  for (auto k : {SweepKnob::kGamma, SweepKnob::kRoundFraction, SweepKnob::kSynSamples,
                 SweepKnob::kClients, SweepKnob::kSigma}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("knob", "unknown sweep knob '" + std::string(name) +
                                "' (gamma, round_fraction, syn_samples, clients, sigma)");
}

ExperimentConfig with_knob(const ExperimentConfig& base, SweepKnob knob, double value) {
  ExperimentConfig c = base;
  const std::string name(to_string(knob));
  switch (knob) {
    case SweepKnob::kGamma:
      if (!(value >= 0.0)) throw ConfigError(name, "must be >= 0");
      c.schedules.gamma = federation::ConstantRate{value};
      break;
    case SweepKnob::kRoundFraction: {
      if (!(value > 0.0 && value < 1.0)) throw ConfigError(name, "must be in (0, 1)");
      const auto s = static_cast<std::size_t>(std::llround(value * static_cast<double>(c.plan.rounds)));
      if (s < 1 || s >= c.plan.rounds) {
        throw ConfigError(name, detail::format_double(value) + " of " +
                                    std::to_string(c.plan.rounds) + " rounds leaves no valid s");
      }
      c.plan.checkpoint_rounds = s;
      break;
    }
    case SweepKnob::kSynSamples:
      c.condensation.samples = whole(value, name);
      break;
    case SweepKnob::kClients:
      c.clients.count = whole(value, name);
      break;
    case SweepKnob::kSigma: {
      if (!(value >= 0.0)) throw ConfigError(name, "must be >= 0");
      federation::DpNoiseConfig dp = c.clients.dp.value_or(federation::DpNoiseConfig{});
      dp.sigma = value;
      c.clients.dp = dp;
      break;
    }
  }
  validate_config(c);
  return c;
}

SummaryRow summarize(std::string_view knob, double value, std::string_view trace_file,
                     const MetricTrace& trace) {
  if (trace.empty()) throw ContractError("summarize: empty trace");
  const RoundRecord& last = trace.back();
  return SummaryRow{std::string(knob), value, std::string(trace_file), trace.size(), last.eo,
                    last.dp, last.cal, last.con, last.test_accuracy, last.train_loss};
}

void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows) {
  using detail::format_double;
  out << kSummaryHeader << '\n';
  for (const auto& r : rows) {
    out << r.knob << ',' << format_double(r.value) << ',' << r.trace_file << ',' << r.rounds << ','
        << format_double(r.eo) << ',' << format_double(r.dp) << ',' << format_double(r.cal) << ','
        << format_double(r.con) << ',' << format_double(r.test_accuracy) << ','
        << format_double(r.train_loss) << '\n';
  }
}

std::size_t sweep_threads(std::size_t points) {
  std::size_t n = std::max<std::size_t>(1, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("FEDFAIR_THREADS")) {
    if (const auto v = detail::parse_double(env); v && *v >= 1.0 && *v == std::floor(*v)) {
      n = static_cast<std::size_t>(*v);
    }
  }
  return std::max<std::size_t>(1, std::min(n, points));
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Federated learning with server-side fairness calibration", "fedfair"};
  app.require_subcommand(1);

  CommonOptions run_opts, sweep_opts, syn_opts;
  auto* run = app.add_subcommand("run", "Run one experiment and write its trace");
  add_common(run, run_opts);

  std::string knob, values;
  auto* sweep = app.add_subcommand("sweep", "Vary one knob and write a trace per value");
  sweep->add_option("knob", knob, "gamma, round_fraction, syn_samples, clients or sigma")
      ->required();
  sweep->add_option("values", values, "Comma-separated values")->required();
  add_common(sweep, sweep_opts);

  auto* syn = app.add_subcommand("datasyn", "Build the synthetic set and write it as CSV");
  add_common(syn, syn_opts);

  std::string model_path, data_path;
  std::size_t neighbors = 5;
  double threshold = 0.5;
  auto* metrics = app.add_subcommand("metrics", "Score a saved model on a dataset CSV");
  metrics->add_option("--model", model_path, "Model JSON")->required();
  metrics->add_option("--data", data_path, "Dataset CSV")->required();
  metrics->add_option("--neighbors", neighbors, "k of the consistency neighbour graph");
  metrics->add_option("--threshold", threshold, "Decision threshold");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : 2;
  }

  try {
    if (*run) return cmd_run(run_opts, out);
    if (*sweep) return cmd_sweep(sweep_opts, knob, values, out);
    if (*syn) return cmd_datasyn(syn_opts, out);
    return cmd_metrics(model_path, data_path, neighbors, threshold, out);
  } catch (const ConfigError& e) {
    err << "fedfair: config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "fedfair: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace fedfair::tools
