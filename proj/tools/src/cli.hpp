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

// The fedfair command line: run, sweep, datasyn and metrics.

#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "config.hpp"
#include "fedfair/trace.hpp"

namespace fedfair::tools {

enum class TraceFormat { kCsv, kJsonl };

/// Knobs accepted by `sweep`.
enum class SweepKnob { kGamma, kRoundFraction, kSynSamples, kClients, kSigma };

std::string_view to_string(SweepKnob knob);
/// Throws ConfigError on an unknown name.
SweepKnob parse_knob(std::string_view name);

/// Copy of `base` with the knob set to `value`, validated. Throws ConfigError
/// naming the knob when the value is unusable.
ExperimentConfig with_knob(const ExperimentConfig& base, SweepKnob knob, double value);

/// One line of summary.csv, computed from the final record of a trace.
struct SummaryRow {
  std::string knob;
  double value = 0.0;
  std::string trace_file;
  std::size_t rounds = 0;
  double eo = 0.0;
  double dp = 0.0;
  double cal = 0.0;
  double con = 0.0;
  double test_accuracy = 0.0;
  double train_loss = 0.0;

  friend bool operator==(const SummaryRow&, const SummaryRow&) = default;
};

inline constexpr std::string_view kSummaryHeader =
    "knob,value,trace,rounds,eo,dp,cal,con,test_accuracy,train_loss";

/// Throws ContractError for an empty trace.
SummaryRow summarize(std::string_view knob, double value, std::string_view trace_file,
                     const MetricTrace& trace);
void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows);

/// Parallelism for sweep points: FEDFAIR_THREADS when set to a positive
/// integer, otherwise the hardware concurrency; never more than `points`.
std::size_t sweep_threads(std::size_t points);

/// Entry point. Returns 0 on success, 2 for usage and configuration errors
/// and 1 for failures during a run. Files written by a failed command are
/// removed.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fedfair::tools
