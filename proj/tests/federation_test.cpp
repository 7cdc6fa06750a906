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

#include <algorithm>
#include <cmath>
#include <random>
#include <utility>
#include <vector>

#include <gtest/gtest.h>

#include "fedfair/aggregation.hpp"
#include "fedfair/data.hpp"
#include "fedfair/error.hpp"
#include "fedfair/federation.hpp"
#include "support.hpp"

namespace fedfair::federation {
namespace {

using fedfair::testing::random_batch;

std::vector<ClientState> make_clients(std::size_t count, std::size_t rows, std::size_t cols,
                                      std::size_t batch, std::uint64_t seed) {
  std::vector<ClientState> clients;
  for (std::size_t i = 0; i < count; ++i) {
    clients.push_back({i, random_batch(rows + i, cols, seed + i), batch, seed * 100 + i,
                       std::nullopt, 0.0});
  }
  return clients;
}

ExperimentSetup small_setup(std::size_t cols, Calibrator calibrator) {
  ExperimentSetup s;
  s.plan.rounds = 8;
  s.plan.checkpoint_rounds = 4;
  s.plan.calibrator = calibrator;
  s.plan.seed = 3;
  s.condensation.samples = 20;
  s.condensation.iterations = 5;
  s.condensation.data_lr = 1.0;
  s.initial = ModelParams::xavier(ModelShape{cols, {4}, Activation::kRelu}, 2);
  return s;
}

TEST(ClientUpdate, FullBatchWithoutNoiseIsTheExactGradient) {
  auto client = make_clients(1, 12, 3, 12, 1).front();
  const auto params = fedfair::testing::random_params(ModelShape{3, {2}, Activation::kSigmoid}, 4);
  client.l2 = 0.1;
  client.dp = DpNoiseConfig{1e6, 0.0};
  EXPECT_EQ(client_update(client, params, 7), loss_and_grad(params, client.data, 0.1).grad);
}

TEST(ClientUpdate, DeterministicPerRoundAndVariesAcrossRounds) {
  const auto client = make_clients(1, 40, 3, 5, 2).front();
  const auto params = ModelParams::xavier(ModelShape{3, {}, Activation::kRelu}, 1);
  EXPECT_EQ(client_update(client, params, 3), client_update(client, params, 3));
  EXPECT_NE(client_update(client, params, 3), client_update(client, params, 4));
}

TEST(Privatize, InsideTheBallIsIdentity) {
  std::mt19937_64 rng(1);
  const Update g(std::vector<double>{0.01, -0.02});
  EXPECT_EQ(privatize(g, DpNoiseConfig{0.05, 0.0}, rng), g);
}

TEST(Privatize, TwiceTheBoundClipsToTheBound) {
  std::mt19937_64 rng(1);
  const Update g(std::vector<double>{0.06, 0.08});
  const Update out = privatize(g, DpNoiseConfig{0.05, 0.0}, rng);
  EXPECT_NEAR(out.norm(), 0.05, 1e-15);
  EXPECT_NEAR(out[0] / out[1], 0.75, 1e-12);
}

TEST(Privatize, NoiseHasScaleSigmaTimesClip) {
  std::mt19937_64 rng(5);
  const Update out = privatize(Update(20000), DpNoiseConfig{0.05, 0.3}, rng);
  double sq = 0.0;
  for (double v : out.values()) sq += v * v;
  EXPECT_NEAR(std::sqrt(sq / 20000.0), 0.015, 0.0005);
}

TEST(Privatize, RejectsInvalidConfig) {
  EXPECT_THROW((DpNoiseConfig{0.0, 0.1}.validate()), ContractError);
  EXPECT_THROW((DpNoiseConfig{0.05, -0.1}.validate()), ContractError);
}

TEST(Schedules, ConstantAndDecaying) {
  EXPECT_EQ(value_at(ConstantRate{0.1}, 9), 0.1);
  EXPECT_EQ(value_at(DecayingRate{5.0, 10.0}, 10), 0.25);
  Schedules s;
  s.gamma = ConstantRate{0.0};
  EXPECT_NO_THROW(s.validate());
  s.eta = ConstantRate{0.0};
  EXPECT_THROW(s.validate(), ContractError);
  s.eta = DecayingRate{1.0, 0.0};
  EXPECT_THROW(s.validate(), ContractError);
}

TEST(RoundUpdate, HandComputedCalibratedStep) {
  const ModelParams w(ModelShape{0, {}, Activation::kRelu}, {0.0});
  Update direction(std::vector<double>{1.0});
  direction.axpy(1.0, Update(std::vector<double>{2.0}));
  EXPECT_NEAR(w.stepped(direction, 0.1).values()[0], -0.3, 1e-15);
}

TEST(RoundPlan, RejectsCheckpointCountOutsideRange) {
  RoundPlan plan;
  plan.rounds = 1;
  plan.checkpoint_rounds = 1;
  EXPECT_THROW(plan.validate(), ContractError);
  plan.rounds = 5;
  plan.checkpoint_rounds = 0;
  EXPECT_THROW(plan.validate(), ContractError);
  plan.checkpoint_rounds = 5;
  EXPECT_THROW(plan.validate(), ContractError);
}

TEST(Simulation, NoneCalibratorMatchesPlainLoopBitwise) {
  const auto clients = make_clients(4, 25, 3, 8, 11);
  const auto eval = random_batch(30, 3, 99);
  const auto setup = small_setup(3, Calibrator::kNone);
  Simulation sim(setup, clients, eval);

  ModelParams w = setup.initial;
  std::vector<double> weights;
  for (const auto& c : clients) weights.push_back(static_cast<double>(c.data.size()) / 106.0);
  for (std::size_t t = 1; t <= setup.plan.rounds; ++t) {
    std::vector<Update> updates;
    for (const auto& c : clients) updates.push_back(client_update(c, w, t));
    w = w.stepped(aggregation::aggregate(aggregation::FedAvg{weights}, updates), 0.1);
    const RoundRecord r = sim.run_round();
    EXPECT_NE(r.phase, RoundPhase::kCalibrate);
    EXPECT_FALSE(r.gamma.has_value());
    ASSERT_EQ(sim.state().global, w) << "round " << t;
  }
  EXPECT_EQ(sim.state().datasyn_runs, 0u);
}

TEST(Simulation, ZeroGammaStepEqualsPlainStep) {
  const auto clients = make_clients(3, 30, 3, 10, 21);
  const auto eval = random_batch(30, 3, 98);
  auto calibrated = small_setup(3, Calibrator::kEquFL);
  calibrated.schedules.gamma = ConstantRate{0.0};
  Simulation a(calibrated, clients, eval);
  Simulation b(small_setup(3, Calibrator::kNone), clients, eval);
  const auto ta = a.run();
  const auto tb = b.run();
  EXPECT_EQ(a.state().global, b.state().global);
  for (std::size_t i = 4; i < ta.size(); ++i) {
    EXPECT_EQ(ta[i].phase, RoundPhase::kCalibrate);
    EXPECT_EQ(ta[i].gamma, 0.0);
    EXPECT_EQ(ta[i].syn_surrogate, ta[i].counterfactual_surrogate);
    EXPECT_EQ(ta[i].dominance, false);
    EXPECT_EQ(ta[i].eo, tb[i].eo);
  }
}

TEST(Simulation, MinimalPlanCalibratesInSecondRound) {
  const auto clients = make_clients(2, 20, 2, 5, 31);
  auto setup = small_setup(2, Calibrator::kGaussian);
  setup.plan.rounds = 2;
  setup.plan.checkpoint_rounds = 1;
  const auto trace = run_experiment(setup, clients, random_batch(10, 2, 97));
  ASSERT_EQ(trace.size(), 2u);
  EXPECT_EQ(trace[0].phase, RoundPhase::kCollect);
  EXPECT_FALSE(trace[0].gamma.has_value());
  EXPECT_EQ(trace[1].phase, RoundPhase::kCalibrate);
  EXPECT_EQ(trace[1].gamma, 1.0);
  EXPECT_EQ(trace[1].round, 2u);
}

TEST(Simulation, CheckpointRoundsNeverCalibrateAndReuseOneSyntheticSet) {
  const auto clients = make_clients(3, 30, 3, 10, 41);
  Simulation sim(small_setup(3, Calibrator::kEquFL), clients, random_batch(20, 3, 96));
  std::optional<condensation::SyntheticDataset> first;
  while (!sim.finished()) {
    const RoundRecord r = sim.run_round();
    if (r.round <= 4) {
      EXPECT_EQ(r.phase, RoundPhase::kCollect);
      EXPECT_FALSE(r.gamma.has_value());
      EXPECT_FALSE(r.dominance.has_value());
      EXPECT_FALSE(sim.state().synthetic.has_value());
      EXPECT_EQ(sim.state().store.size(), r.round);
    } else {
      EXPECT_EQ(r.phase, RoundPhase::kCalibrate);
      EXPECT_TRUE(r.syn_surrogate.has_value());
      EXPECT_TRUE(sim.state().store.frozen());
      EXPECT_EQ(sim.state().datasyn_runs, 1u);
      if (!first) first = sim.state().synthetic;
      EXPECT_EQ(sim.state().synthetic->features, first->features);
      EXPECT_EQ(sim.state().synthetic->labels, first->labels);
    }
  }
  EXPECT_THROW(sim.run_round(), ContractError);
}

TEST(Simulation, DiscreteCollectionSavesDistinctEarlierRounds) {
  const auto clients = make_clients(2, 20, 2, 5, 51);
  auto setup = small_setup(2, Calibrator::kEquFL);
  setup.plan.rounds = 12;
  setup.plan.checkpoint_rounds = 4;
  setup.plan.collection = Collection::kDiscrete;
  Simulation sim(setup, clients, random_batch(10, 2, 95));
  const auto rounds = sim.collect_rounds();
  ASSERT_EQ(rounds.size(), 4u);
  EXPECT_TRUE(std::is_sorted(rounds.begin(), rounds.end()));
  EXPECT_EQ(std::adjacent_find(rounds.begin(), rounds.end()), rounds.end());
  EXPECT_GE(rounds.front(), 1u);
  EXPECT_LE(rounds.back(), 11u);
  const auto trace = sim.run();
  for (const auto& r : trace) {
    const bool saved = std::binary_search(rounds.begin(), rounds.end(), r.round);
    EXPECT_EQ(r.phase == RoundPhase::kCollect, saved);
    EXPECT_EQ(r.phase == RoundPhase::kCalibrate, r.round > rounds.back());
  }
}

TEST(Simulation, DeterministicTracesAcrossThreadCounts) {
  const auto clients = make_clients(5, 30, 3, 6, 61);
  const auto eval = random_batch(25, 3, 94);
  auto setup = small_setup(3, Calibrator::kEquFL);
  const auto once = run_experiment(setup, clients, eval);
  EXPECT_EQ(once, run_experiment(setup, clients, eval));
  setup.threads = 3;
  EXPECT_EQ(once, run_experiment(setup, clients, eval));
}

TEST(Simulation, RejectsInconsistentInputs) {
  auto clients = make_clients(2, 20, 3, 5, 71);
  const auto eval = random_batch(10, 3, 93);
  EXPECT_THROW(Simulation(small_setup(4, Calibrator::kNone), clients, eval), ContractError);
  EXPECT_THROW(Simulation(small_setup(3, Calibrator::kNone), {}, eval), ContractError);
  clients[1].batch_size = 100;
  EXPECT_THROW(Simulation(small_setup(3, Calibrator::kNone), clients, eval), ContractError);
  clients[1].batch_size = 5;
  auto setup = small_setup(3, Calibrator::kEquFL);
  setup.condensation.inner_steps = 4;
  EXPECT_THROW(Simulation(setup, clients, eval), ContractError);
  auto no_groups = eval;
  no_groups.groups.clear();
  EXPECT_THROW(Simulation(small_setup(3, Calibrator::kNone), clients, no_groups), ContractError);
}

TEST(Simulation, TrainLossIsDataWeightedMeanObjective) {
  auto clients = make_clients(2, 10, 2, 5, 81);
  clients[0].l2 = 0.2;
  Simulation sim(small_setup(2, Calibrator::kNone), clients, random_batch(10, 2, 92));
  const auto& w = sim.state().global;
  const double expected = (10.0 * mean_loss(w, clients[0].data, 0.2) +
                           11.0 * mean_loss(w, clients[1].data)) / 21.0;
  EXPECT_NEAR(sim.train_loss(w), expected, 1e-14);
}

std::pair<double, double> biased_task_eo(Calibrator calibrator) {
  data::BiasedTabularSpec spec;
  spec.seed = 7;
  spec.group_b = {0.5, 0.2, 1.0};
  const auto split = data::train_test_split(data::generate_biased_tabular(spec), 0.2, 7);
  const auto parts = data::partition(split.train, 10, data::Iid{}, 7);
  std::vector<ClientState> clients;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    clients.push_back({i, parts[i], 32, 7000 + i, std::nullopt, 0.0});
  }
  ExperimentSetup setup;
  setup.plan.calibrator = calibrator;
  setup.plan.seed = 7;
  setup.condensation.data_lr = 1000.0;
  setup.condensation.iterations = 400;
  setup.condensation.group_feature = spec.features;
  setup.condensation.seed = 7;
  setup.initial = ModelParams::xavier(ModelShape{spec.input_dim(), {16}, Activation::kRelu}, 7);
  const auto trace = run_experiment(setup, clients, split.test);
  return {trace.back().eo, trace.back().test_accuracy};
}

TEST(Simulation, CalibrationLowersEqualizedOddsOnBiasedTask) {
  const auto [none_eo, none_acc] = biased_task_eo(Calibrator::kNone);
  const auto [fair_eo, fair_acc] = biased_task_eo(Calibrator::kEquFL);
  EXPECT_LT(fair_eo, none_eo);
  EXPECT_GT(fair_acc, 0.6);
  EXPECT_GT(none_acc, 0.6);
}

}  // namespace
}  // namespace fedfair::federation
