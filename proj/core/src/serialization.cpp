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

#include "fedfair/serialization.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include <nlohmann/json.hpp>

#include "fedfair/error.hpp"
#include "fedfair/detail/text_util.hpp"

namespace fedfair {

namespace {

using nlohmann::json;

constexpr std::size_t kColumns = 13;

std::string optional_cell(const std::optional<double>& v) {
  return v ? detail::format_double(*v) : std::string();
}

[[noreturn]] void bad_line(std::string_view what, std::size_t line) {
  throw ParseError("trace: " + std::string(what) + " on line " + std::to_string(line), line);
}

double number_cell(std::string_view cell, std::size_t line) {
  const auto v = detail::parse_double(cell);
  if (!v) bad_line("bad number '" + std::string(cell) + "'", line);
  return *v;
}

std::optional<double> optional_number_cell(std::string_view cell, std::size_t line) {
  if (cell.empty()) return std::nullopt;
  return number_cell(cell, line);
}

std::size_t round_cell(std::string_view cell, std::size_t line) {
  const double v = number_cell(cell, line);
  if (!(v >= 1.0) || v != std::floor(v)) bad_line("round must be a positive integer", line);
  return static_cast<std::size_t>(v);
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> optional_double(const json& j, const char* key) {
  const auto& v = j.at(key);
  if (v.is_null()) return std::nullopt;
  return v.get<double>();
}

}  // namespace

std::string_view to_string(RoundPhase phase) {
  switch (phase) {
    case RoundPhase::kCollect: return "collect";
    case RoundPhase::kPlain: return "plain";
    case RoundPhase::kCalibrate: return "calibrate";
  }
  return "unknown";
}

RoundPhase parse_phase(std::string_view name) {
  if (name == "collect") return RoundPhase::kCollect;
  if (name == "plain") return RoundPhase::kPlain;
  if (name == "calibrate") return RoundPhase::kCalibrate;
  throw ContractError("unknown round phase '" + std::string(name) + "'");
}

void write_trace_csv(std::ostream& out, const MetricTrace& trace) {
  out << kTraceCsvHeader << '\n';
  for (const auto& r : trace) {
    out << r.round << ',' << to_string(r.phase) << ',' << detail::format_double(r.eta) << ','
        << optional_cell(r.gamma) << ',' << detail::format_double(r.train_loss) << ','
        << detail::format_double(r.test_accuracy) << ',' << detail::format_double(r.eo) << ','
        << detail::format_double(r.dp) << ',' << detail::format_double(r.cal) << ','
        << detail::format_double(r.con) << ',' << optional_cell(r.syn_surrogate) << ','
        << optional_cell(r.counterfactual_surrogate) << ',';
    if (r.dominance) out << (*r.dominance ? '1' : '0');
    out << '\n';
  }
}

MetricTrace read_trace_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kTraceCsvHeader) {
    throw ParseError("trace: missing or unexpected CSV header", 1);
  }
  MetricTrace trace;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto c = detail::split_csv_line(line);
    if (c.size() != kColumns) {
      bad_line("expected " + std::to_string(kColumns) + " fields, got " + std::to_string(c.size()),
               line_no);
    }
    RoundRecord r;
    r.round = round_cell(c[0], line_no);
    try {
      r.phase = parse_phase(c[1]);
    } catch (const ContractError&) {
      bad_line("unknown phase '" + std::string(c[1]) + "'", line_no);
    }
    r.eta = number_cell(c[2], line_no);
    r.gamma = optional_number_cell(c[3], line_no);
    r.train_loss = number_cell(c[4], line_no);
    r.test_accuracy = number_cell(c[5], line_no);
    r.eo = number_cell(c[6], line_no);
    r.dp = number_cell(c[7], line_no);
    r.cal = number_cell(c[8], line_no);
    r.con = number_cell(c[9], line_no);
    r.syn_surrogate = optional_number_cell(c[10], line_no);
    r.counterfactual_surrogate = optional_number_cell(c[11], line_no);
    if (c[12] == "1") {
      r.dominance = true;
    } else if (c[12] == "0") {
      r.dominance = false;
    } else if (!c[12].empty()) {
      bad_line("dominance must be 0, 1 or empty", line_no);
    }
    trace.push_back(r);
  }
  return trace;
}

void write_trace_jsonl(std::ostream& out, const MetricTrace& trace) {
  for (const auto& r : trace) {
    json j;
    j["round"] = r.round;
    j["phase"] = to_string(r.phase);
    j["eta"] = r.eta;
    j["gamma"] = optional_json(r.gamma);
    j["train_loss"] = r.train_loss;
    j["test_accuracy"] = r.test_accuracy;
    j["eo"] = r.eo;
    j["dp"] = r.dp;
    j["cal"] = r.cal;
    j["con"] = r.con;
    j["syn_surrogate"] = optional_json(r.syn_surrogate);
    j["counterfactual_surrogate"] = optional_json(r.counterfactual_surrogate);
    j["dominance"] = r.dominance ? json(*r.dominance) : json(nullptr);
    out << j.dump() << '\n';
  }
}

MetricTrace read_trace_jsonl(std::istream& in) {
  MetricTrace trace;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      RoundRecord r;
      r.round = j.at("round").get<std::size_t>();
      r.phase = parse_phase(j.at("phase").get<std::string>());
      r.eta = j.at("eta").get<double>();
      r.gamma = optional_double(j, "gamma");
      r.train_loss = j.at("train_loss").get<double>();
      r.test_accuracy = j.at("test_accuracy").get<double>();
      r.eo = j.at("eo").get<double>();
      r.dp = j.at("dp").get<double>();
      r.cal = j.at("cal").get<double>();
      r.con = j.at("con").get<double>();
      r.syn_surrogate = optional_double(j, "syn_surrogate");
      r.counterfactual_surrogate = optional_double(j, "counterfactual_surrogate");
      if (const auto& d = j.at("dominance"); !d.is_null()) r.dominance = d.get<bool>();
      trace.push_back(r);
    } catch (const json::exception& e) {
      bad_line(e.what(), line_no);
    } catch (const ContractError& e) {
      bad_line(e.what(), line_no);
    }
  }
  return trace;
}

void write_model_json(std::ostream& out, const ModelParams& params) {
  const auto& shape = params.shape();
  json j;
  j["input_dim"] = shape.input_dim;
  j["hidden_dims"] = shape.hidden_dims;
  j["activation"] = to_string(shape.activation);
  j["values"] = std::vector<double>(params.values().begin(), params.values().end());
  out << j.dump() << '\n';
}

ModelParams read_model_json(std::istream& in) {
  try {
    const json j = json::parse(in);
    ModelShape shape;
    shape.input_dim = j.at("input_dim").get<std::size_t>();
    shape.hidden_dims = j.at("hidden_dims").get<std::vector<std::size_t>>();
    shape.activation = parse_activation(j.at("activation").get<std::string>());
    return ModelParams(shape, j.at("values").get<std::vector<double>>());
  } catch (const json::exception& e) {
    throw ParseError(std::string("model JSON: ") + e.what(), 0);
  } catch (const ContractError& e) {
    throw ParseError(std::string("model JSON: ") + e.what(), 0);
  }
}

void save_model(const std::filesystem::path& path, const ModelParams& params) {
  std::ofstream out(path);
  if (!out) throw ContractError("cannot open " + path.string() + " for writing");
  write_model_json(out, params);
  if (!out) throw ContractError("failed writing " + path.string());
}

ModelParams load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string(), 0);
  return read_model_json(in);
}

}  // namespace fedfair
