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

// Experiment configuration: a JSON document describing the data source,
// clients, model, round plan, schedules and condensation knobs.
//
// {
//   "seed": 1,
//   "data": {"generator": {...}} | {"idx": {...}} | {"csv": {...}},
//   "clients": {"count": 10, "partition": "iid", "batch_size": 32, "l2": 0,
//               "dp": {"clip_norm": 0.05, "sigma": 0}},
//   "model": {"hidden_dims": [16], "activation": "relu",
//             "server_activation": "relu"},
//   "plan": {"rounds": 60, "checkpoint_rounds": 30, "aggregator": "fedavg",
//            "metric": "eo", "calibrator": "equfl", "noise_scale": 2,
//            "collection": "continuous", "neighbors": 5},
//   "schedules": {"eta": {"constant": 0.1}, "gamma": {"decaying": {"offset": 10}}},
//   "condensation": {"samples": 1000, "iterations": 400, "inner_steps": 2,
//                    "inner_lr": 0.1, "data_lr": 1000},
//   "threads": 1
// }
//
// Every section and key is optional except "data". Unknown keys are errors.
// Relative paths are resolved against the config file's directory.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "fedfair/data.hpp"
#include "fedfair/federation.hpp"

namespace fedfair::tools {

struct GeneratorSource {
  data::BiasedTabularSpec spec;
  double test_fraction = 0.2;
};

struct IdxSource {
  std::filesystem::path train_images;
  std::filesystem::path train_labels;
  std::filesystem::path test_images;
  std::filesystem::path test_labels;
  data::IdxOptions options;
};

/// Dataset CSV files as written by data::write_dataset_csv.
struct CsvSource {
  std::filesystem::path train;
  std::filesystem::path test;
  /// Feature column holding the group id, if the model sees it.
  std::optional<std::size_t> group_feature;
};

using DataSource = std::variant<GeneratorSource, IdxSource, CsvSource>;

struct ClientsConfig {
  std::size_t count = 10;
  data::PartitionScheme partition = data::Iid{};
  std::size_t batch_size = 32;
  double l2 = 0.0;
  std::optional<federation::DpNoiseConfig> dp;
};

struct ModelConfig {
  std::vector<std::size_t> hidden_dims = {16};
  Activation activation = Activation::kRelu;
  std::optional<Activation> server_activation;
};

struct ExperimentConfig {
  std::uint64_t seed = 1;
  DataSource data = GeneratorSource{};
  ClientsConfig clients;
  ModelConfig model;
  federation::RoundPlan plan;
  federation::Schedules schedules;
  condensation::CondensationConfig condensation;
  std::size_t threads = 1;
};

/// Parses and validates. Throws ConfigError whose field is a JSON pointer
/// ("/plan/rounds"), or "" with the line and column for syntax errors.
ExperimentConfig parse_config(std::string_view text,
                              const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

/// Cross-field checks that do not need the data.
void validate_config(const ExperimentConfig& config);

/// Sets the master seed; every derived seed follows it.
void apply_seed(ExperimentConfig& config, std::uint64_t seed);

/// Everything a Simulation needs, loaded and partitioned.
struct PreparedExperiment {
  federation::ExperimentSetup setup;
  std::vector<federation::ClientState> clients;
  TabularDataset eval;
};

/// Loads the data, partitions it and builds clients and the initial model.
/// Data-dependent inconsistencies (a batch larger than a client's share, a
/// group column outside the features) are reported as ConfigError.
PreparedExperiment prepare(const ExperimentConfig& config);

/// Builds the Simulation, mapping its validation failures to ConfigError.
federation::Simulation make_simulation(PreparedExperiment prepared);

}  // namespace fedfair::tools
