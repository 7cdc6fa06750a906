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

// The federated round loop with server-side fairness calibration.
//
// Every round the server aggregates one mini-batch gradient per client. While
// collecting, it saves the global model before stepping. Right after the
// last collected round it condenses a synthetic set from the saved models,
// and from then on every step is
//
//   w <- w - eta_t * (gamma_t * g0 + GAR(g_1, ..., g_n))
//
// where g0 is the gradient of the fairness surrogate on the synthetic set.

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string_view>
#include <variant>
#include <vector>

#include "fedfair/aggregation.hpp"
#include "fedfair/condensation.hpp"
#include "fedfair/fairness.hpp"
#include "fedfair/model.hpp"
#include "fedfair/trace.hpp"

namespace fedfair::federation {

/// Per-client gradient clipping to norm C followed by N(0, sigma^2 C^2) noise.
struct DpNoiseConfig {
  double clip_norm = 0.05;
  double sigma = 0.0;

  void validate() const;
};

struct ClientState {
  std::size_t id = 0;
  TabularDataset data;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  std::optional<DpNoiseConfig> dp;
  /// L2 coefficient of the local objective.
  double l2 = 0.0;

  void validate() const;
};

/// g * min(1, C / ||g||), then noise drawn from `rng`.
Update privatize(Update g, const DpNoiseConfig& dp, std::mt19937_64& rng);

/// Mini-batch gradient at `global`. The batch is a shuffled prefix of the
/// client's rows; sampling and noise are seeded by (client seed, round).
Update client_update(const ClientState& client, const ModelParams& global, std::size_t round);

struct ConstantRate {
  double value = 0.1;
};

/// scale / (t + offset)
struct DecayingRate {
  double scale = 1.0;
  double offset = 1.0;
};

using Schedule = std::variant<ConstantRate, DecayingRate>;

double value_at(const Schedule& schedule, std::size_t round);

struct Schedules {
  Schedule eta = ConstantRate{0.1};
  Schedule gamma = ConstantRate{1.0};

  /// eta must be positive; gamma may be zero.
  void validate() const;
};

enum class Calibrator { kEquFL, kGaussian, kUniform, kNone };
std::string_view to_string(Calibrator calibrator);
Calibrator parse_calibrator(std::string_view name);

/// Continuous saves rounds 1..s. Discrete saves s distinct rounds drawn
/// uniformly from 1..T-1 and condenses after the last of them.
enum class Collection { kContinuous, kDiscrete };
std::string_view to_string(Collection collection);
Collection parse_collection(std::string_view name);

struct RoundPlan {
  std::size_t rounds = 60;
  std::size_t checkpoint_rounds = 30;
  aggregation::AggregatorKind aggregator = aggregation::FedAvg{};
  fairness::MetricKind metric = fairness::MetricKind::kEO;
  Calibrator calibrator = Calibrator::kEquFL;
  /// Standard deviation of the Gaussian calibrator, bound of the uniform one.
  double noise_scale = 2.0;
  Collection collection = Collection::kContinuous;
  /// k of the consistency neighbour graphs.
  std::size_t neighbors = 5;
  std::uint64_t seed = 0;

  void validate() const;
};

struct ExperimentSetup {
  RoundPlan plan;
  Schedules schedules;
  condensation::CondensationConfig condensation;
  ModelParams initial;
  /// Client updates computed concurrently; 0 or 1 means sequential.
  std::size_t threads = 1;
};

/// Mutable server side of a run.
struct ServerState {
  ModelParams global;
  condensation::CheckpointStore store{0};
  std::vector<std::size_t> collect_rounds;
  std::optional<condensation::SyntheticDataset> synthetic;
  std::optional<TabularDataset> synthetic_data;
  std::optional<fairness::NeighborGraph> synthetic_neighbors;
  std::size_t datasyn_runs = 0;
  std::size_t next_round = 1;
  std::mt19937_64 noise_rng;
};

/// Owns clients, evaluation data and server state; runs rounds in order.
class Simulation {
 public:
  /// Validates everything up front; throws ContractError or ConfigError.
  Simulation(ExperimentSetup setup, std::vector<ClientState> clients, TabularDataset eval);

  /// Runs the next round and returns its record.
  RoundRecord run_round();
  /// Runs all remaining rounds.
  MetricTrace run();

  bool finished() const noexcept { return state_.next_round > setup_.plan.rounds; }
  const ServerState& state() const noexcept { return state_; }
  const ExperimentSetup& setup() const noexcept { return setup_; }
  /// Rounds whose global model is saved, ascending.
  const std::vector<std::size_t>& collect_rounds() const noexcept {
    return state_.collect_rounds;
  }

  /// Data-weighted mean client objective at `params`.
  double train_loss(const ModelParams& params) const;
  /// Aggregation weights used by FedAvg when none are configured.
  const std::vector<double>& data_weights() const noexcept { return data_weights_; }

 private:
  std::vector<Update> collect_updates(std::size_t round) const;
  void build_synthetic();
  RoundRecord evaluate(std::size_t round, RoundPhase phase, double eta) const;

  ExperimentSetup setup_;
  std::vector<ClientState> clients_;
  TabularDataset eval_;
  fairness::NeighborGraph eval_neighbors_;
  aggregation::AggregatorKind aggregator_;
  std::vector<double> data_weights_;
  ServerState state_;
};

MetricTrace run_experiment(ExperimentSetup setup, std::vector<ClientState> clients,
                           TabularDataset eval);

}  // namespace fedfair::federation
