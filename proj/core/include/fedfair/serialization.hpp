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

// Stable text formats: metric traces as CSV or JSON lines, models as JSON.
//
// Trace CSV header:
//
//   round,phase,eta,gamma,train_loss,test_accuracy,eo,dp,cal,con,
//   syn_surrogate,counterfactual_surrogate,dominance
//
// `phase` is collect, plain or calibrate. Absent optional values are empty
// cells (CSV) or null (JSON); dominance is 0/1 in CSV and a boolean in JSON.
// Numbers use the shortest form that reads back to the same double.

#pragma once

#include <filesystem>
#include <iosfwd>
#include <string_view>

#include "fedfair/model.hpp"
#include "fedfair/trace.hpp"

namespace fedfair {

std::string_view to_string(RoundPhase phase);
/// Throws ContractError for an unknown name.
RoundPhase parse_phase(std::string_view name);

inline constexpr std::string_view kTraceCsvHeader =
    "round,phase,eta,gamma,train_loss,test_accuracy,eo,dp,cal,con,"
    "syn_surrogate,counterfactual_surrogate,dominance";

void write_trace_csv(std::ostream& out, const MetricTrace& trace);
/// Throws ParseError with a 1-based line number.
MetricTrace read_trace_csv(std::istream& in);

void write_trace_jsonl(std::ostream& out, const MetricTrace& trace);
/// Throws ParseError with a 1-based line number.
MetricTrace read_trace_jsonl(std::istream& in);

/// {"input_dim", "hidden_dims", "activation", "values"}
void write_model_json(std::ostream& out, const ModelParams& params);
/// Throws ParseError (offset 0) on malformed JSON or a bad layout.
ModelParams read_model_json(std::istream& in);

void save_model(const std::filesystem::path& path, const ModelParams& params);
/// Throws ParseError when the file is missing or malformed.
ModelParams load_model(const std::filesystem::path& path);

}  // namespace fedfair
