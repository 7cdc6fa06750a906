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

#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "fedfair/aggregation.hpp"
#include "fedfair/data.hpp"
#include "fedfair/fairness.hpp"
#include "fedfair/federation.hpp"
#include "fixtures.hpp"

namespace {

using namespace fedfair;
using testing::random_batch;
using testing::random_params;

void BM_LossAndGrad(benchmark::State& state) {
  const ModelShape shape{20, {static_cast<std::size_t>(state.range(1))}, Activation::kRelu};
  const auto w = random_params(shape, 1);
  const auto batch = random_batch(static_cast<std::size_t>(state.range(0)), 20, 2);
  for (auto _ : state) benchmark::DoNotOptimize(loss_and_grad(w, batch, 0.01));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_LossAndGrad)->Args({32, 16})->Args({1000, 16})->Args({1000, 64});

void BM_UnrolledGrad(benchmark::State& state) {
  const ModelShape shape{5, {16}, Activation::kRelu};
  const auto start = random_params(shape, 3);
  const auto target = random_params(shape, 4);
  const auto batch = random_batch(static_cast<std::size_t>(state.range(0)), 5, 5, 2, true);
  const auto steps = static_cast<std::size_t>(state.range(1));
  for (auto _ : state) {
    benchmark::DoNotOptimize(unrolled_grad_wrt_data(start, batch, 0.1, steps, target));
  }
}
BENCHMARK(BM_UnrolledGrad)->Args({1000, 2})->Args({1000, 5});

void BM_Aggregate(benchmark::State& state, aggregation::AggregatorKind kind) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g;
  std::vector<Update> updates(static_cast<std::size_t>(state.range(0)),
                              Update(static_cast<std::size_t>(state.range(1))));
  for (auto& u : updates) {
    for (double& v : u.values()) v = g(rng);
  }
  for (auto _ : state) benchmark::DoNotOptimize(aggregation::aggregate(kind, updates));
}
BENCHMARK_CAPTURE(BM_Aggregate, fedavg, aggregation::FedAvg{})->Args({10, 10000});
BENCHMARK_CAPTURE(BM_Aggregate, median, aggregation::Median{})->Args({10, 10000});
BENCHMARK_CAPTURE(BM_Aggregate, trimmed_mean, aggregation::TrimmedMean{1})->Args({10, 10000});
BENCHMARK_CAPTURE(BM_Aggregate, multi_krum, aggregation::MultiKrum{2, 5})->Args({10, 10000});

void BM_SurrogateGrad(benchmark::State& state, fairness::MetricKind kind) {
  const ModelShape shape{5, {16}, Activation::kRelu};
  const auto w = random_params(shape, 8);
  const auto data = random_batch(1000, 5, 9, 2, true);
  const fairness::NeighborGraph graph(data.features, 5);
  for (auto _ : state) benchmark::DoNotOptimize(fairness::surrogate_grad(kind, w, data, &graph));
}
BENCHMARK_CAPTURE(BM_SurrogateGrad, eo, fairness::MetricKind::kEO);
BENCHMARK_CAPTURE(BM_SurrogateGrad, dp, fairness::MetricKind::kDP);
BENCHMARK_CAPTURE(BM_SurrogateGrad, cal, fairness::MetricKind::kCAL);
BENCHMARK_CAPTURE(BM_SurrogateGrad, con, fairness::MetricKind::kCON);

void BM_PlainRound(benchmark::State& state) {
  data::BiasedTabularSpec spec;
  spec.seed = 1;
  const auto parts = data::partition(data::generate_biased_tabular(spec), 10, data::Iid{}, 1);
  std::vector<federation::ClientState> clients;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    clients.push_back({i, parts[i], 32, 1000 + i, std::nullopt, 0.0});
  }
  federation::ExperimentSetup setup;
  setup.plan.calibrator = federation::Calibrator::kNone;
  setup.plan.rounds = 1000000;
  setup.initial = ModelParams::xavier(ModelShape{spec.input_dim(), {16}, Activation::kRelu}, 1);
  federation::Simulation sim(setup, clients, random_batch(200, spec.input_dim(), 4));
  for (auto _ : state) benchmark::DoNotOptimize(sim.run_round());
}
BENCHMARK(BM_PlainRound);

}  // namespace

BENCHMARK_MAIN();
