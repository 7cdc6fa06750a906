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

#include "fedfair/federation.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>
#include <string>
#include <thread>

#include "fedfair/error.hpp"

namespace fedfair::federation {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void check_schedule(const Schedule& s, const char* name, bool allow_zero) {
  std::visit(Overloaded{
                 [&](const ConstantRate& c) {
                   const bool ok = std::isfinite(c.value) &&
                                   (allow_zero ? c.value >= 0.0 : c.value > 0.0);
                   if (!ok) {
                     throw ContractError(std::string("schedule ") + name +
                                         ": constant value out of range");
                   }
                 },
                 [&](const DecayingRate& d) {
                   if (!(d.scale > 0.0 && d.offset > 0.0) || !std::isfinite(d.scale) ||
                       !std::isfinite(d.offset)) {
                     throw ContractError(std::string("schedule ") + name +
                                         ": decaying scale and offset must be positive");
                   }
                 },
             },
             s);
}

std::vector<std::size_t> choose_collect_rounds(const RoundPlan& plan) {
  std::vector<std::size_t> rounds;
  if (plan.collection == Collection::kContinuous) {
    rounds.resize(plan.checkpoint_rounds);
    std::iota(rounds.begin(), rounds.end(), std::size_t{1});
    return rounds;
  }
  std::vector<std::size_t> pool(plan.rounds - 1);
  std::iota(pool.begin(), pool.end(), std::size_t{1});
  std::mt19937_64 rng(plan.seed ^ 0xc2b2ae3d27d4eb4fULL);
  std::shuffle(pool.begin(), pool.end(), rng);
  rounds.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(plan.checkpoint_rounds));
  std::sort(rounds.begin(), rounds.end());
  return rounds;
}

}  // namespace

void DpNoiseConfig::validate() const {
  if (!(clip_norm > 0.0) || !std::isfinite(clip_norm)) {
    throw ContractError("dp: clip_norm must be > 0");
  }
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ContractError("dp: sigma must be >= 0");
}

void ClientState::validate() const {
  data.validate();
  if (data.empty()) throw ContractError("client " + std::to_string(id) + ": empty dataset");
  if (batch_size == 0 || batch_size > data.size()) {
    throw ContractError("client " + std::to_string(id) + ": batch size " +
                        std::to_string(batch_size) + " not in [1, " +
                        std::to_string(data.size()) + "]");
  }
  if (!(l2 >= 0.0)) throw ContractError("client " + std::to_string(id) + ": l2 must be >= 0");
  if (dp) dp->validate();
}

Update privatize(Update g, const DpNoiseConfig& dp, std::mt19937_64& rng) {
  const double norm = g.norm();
  if (norm > dp.clip_norm) g *= dp.clip_norm / norm;
  if (dp.sigma > 0.0) {
    std::normal_distribution<double> noise(0.0, dp.sigma * dp.clip_norm);
    for (double& v : g.values()) v += noise(rng);
  }
  return g;
}

Update client_update(const ClientState& client, const ModelParams& global, std::size_t round) {
  std::seed_seq seq{static_cast<std::uint32_t>(client.seed),
                    static_cast<std::uint32_t>(client.seed >> 32),
                    static_cast<std::uint32_t>(round)};
  std::mt19937_64 rng(seq);
  LossAndGrad lg;
  if (client.batch_size >= client.data.size()) {
    lg = loss_and_grad(global, client.data, client.l2);
  } else {
    std::vector<std::size_t> idx(client.data.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(client.batch_size);
    lg = loss_and_grad(global, client.data.subset(idx), client.l2);
  }
  if (!client.dp) return std::move(lg.grad);
  return privatize(std::move(lg.grad), *client.dp, rng);
}

double value_at(const Schedule& schedule, std::size_t round) {
  return std::visit(Overloaded{
                        [](const ConstantRate& c) { return c.value; },
                        [&](const DecayingRate& d) {
                          return d.scale / (static_cast<double>(round) + d.offset);
                        },
                    },
                    schedule);
}

void Schedules::validate() const {
  check_schedule(eta, "eta", false);
  check_schedule(gamma, "gamma", true);
}

std::string_view to_string(Calibrator calibrator) {
  switch (calibrator) {
    case Calibrator::kEquFL: return "equfl";
    case Calibrator::kGaussian: return "gaussian";
    case Calibrator::kUniform: return "uniform";
    case Calibrator::kNone: return "none";
  }
  return "?";
}

Calibrator parse_calibrator(std::string_view name) {
  for (Calibrator c : {Calibrator::kEquFL, Calibrator::kGaussian, Calibrator::kUniform,
                       Calibrator::kNone}) {
    if (name == to_string(c)) return c;
  }
  throw ContractError("unknown calibrator '" + std::string(name) + "'");
}

std::string_view to_string(Collection collection) {
  return collection == Collection::kContinuous ? "continuous" : "discrete";
}

Collection parse_collection(std::string_view name) {
  if (name == "continuous") return Collection::kContinuous;
  if (name == "discrete") return Collection::kDiscrete;
  throw ContractError("unknown collection strategy '" + std::string(name) + "'");
}

void RoundPlan::validate() const {
  if (checkpoint_rounds < 1 || checkpoint_rounds >= rounds) {
    throw ContractError("round plan: need 1 <= s < T, got s=" + std::to_string(checkpoint_rounds) +
                        " T=" + std::to_string(rounds));
  }
  if (neighbors == 0) throw ContractError("round plan: neighbors must be >= 1");
  if (!(noise_scale >= 0.0)) throw ContractError("round plan: noise_scale must be >= 0");
}

Simulation::Simulation(ExperimentSetup setup, std::vector<ClientState> clients,
                       TabularDataset eval)
    : setup_(std::move(setup)),
      clients_(std::move(clients)),
      eval_(std::move(eval)),
      eval_neighbors_((eval_.validate(), setup_.plan.validate(), eval_.features),
                      std::min(setup_.plan.neighbors, eval_.size() > 0 ? eval_.size() - 1 : 0)) {
  const RoundPlan& plan = setup_.plan;
  setup_.schedules.validate();
  if (clients_.empty()) throw ContractError("simulation: no clients");
  const ModelShape& shape = setup_.initial.shape();
  std::size_t total = 0;
  for (const ClientState& c : clients_) {
    c.validate();
    if (c.data.features.cols() != shape.input_dim) {
      throw ContractError("client " + std::to_string(c.id) + ": feature width " +
                          std::to_string(c.data.features.cols()) + " != model input " +
                          std::to_string(shape.input_dim));
    }
    total += c.data.size();
  }
  if (eval_.groups.size() != eval_.size() || eval_.empty()) {
    throw ContractError("simulation: evaluation data must be non-empty and carry groups");
  }
  if (eval_.features.cols() != shape.input_dim) {
    throw ContractError("simulation: evaluation feature width mismatch");
  }
  if (plan.calibrator == Calibrator::kEquFL) {
    setup_.condensation.validate(shape.input_dim);
    if (setup_.condensation.inner_steps >= plan.checkpoint_rounds) {
      throw ContractError("simulation: need more saved rounds (s=" +
                          std::to_string(plan.checkpoint_rounds) + ") than inner_steps=" +
                          std::to_string(setup_.condensation.inner_steps));
    }
    if (plan.metric == fairness::MetricKind::kCON &&
        plan.neighbors >= setup_.condensation.samples) {
      throw ContractError("simulation: neighbors must be below the synthetic sample count");
    }
  }

  data_weights_.reserve(clients_.size());
  for (const ClientState& c : clients_) {
    data_weights_.push_back(static_cast<double>(c.data.size()) / static_cast<double>(total));
  }
  aggregator_ = plan.aggregator;
  if (auto* avg = std::get_if<aggregation::FedAvg>(&aggregator_); avg && avg->weights.empty()) {
    avg->weights = data_weights_;
  }
  // Rejects arity violations before any round runs.
  aggregation::aggregate(aggregator_,
                         std::vector<Update>(clients_.size(), Update(setup_.initial.dim())));

  state_.global = setup_.initial;
  state_.collect_rounds = choose_collect_rounds(plan);
  state_.store = condensation::CheckpointStore(plan.checkpoint_rounds);
  state_.noise_rng.seed(plan.seed ^ 0x94d049bb133111ebULL);
}

std::vector<Update> Simulation::collect_updates(std::size_t round) const {
  std::vector<Update> updates(clients_.size());
  const std::size_t workers = std::min(std::max<std::size_t>(setup_.threads, 1), clients_.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < clients_.size(); ++i) {
      updates[i] = client_update(clients_[i], state_.global, round);
    }
    return updates;
  }
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < clients_.size(); i += workers) {
            updates[i] = client_update(clients_[i], state_.global, round);
          }
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return updates;
}

void Simulation::build_synthetic() {
  state_.store.freeze();
  state_.synthetic = condensation::datasyn(state_.store, setup_.condensation);
  state_.synthetic_data = state_.synthetic->to_dataset();
  if (setup_.plan.metric == fairness::MetricKind::kCON) {
    state_.synthetic_neighbors.emplace(state_.synthetic_data->features, setup_.plan.neighbors);
  }
  ++state_.datasyn_runs;
}

double Simulation::train_loss(const ModelParams& params) const {
  const auto w = params.values();
  const double sq = std::inner_product(w.begin(), w.end(), w.begin(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < clients_.size(); ++i) {
    total += data_weights_[i] * (mean_loss(params, clients_[i].data) + 0.5 * clients_[i].l2 * sq);
  }
  return total;
}

RoundRecord Simulation::evaluate(std::size_t round, RoundPhase phase, double eta) const {
  RoundRecord r;
  r.round = round;
  r.phase = phase;
  r.eta = eta;
  r.train_loss = train_loss(state_.global);
  r.test_accuracy = accuracy(state_.global, eval_);
  const fairness::NeighborGraph* nb = eval_neighbors_.k() > 0 ? &eval_neighbors_ : nullptr;
  r.eo = fairness::bias_score(fairness::MetricKind::kEO, state_.global, eval_);
  r.dp = fairness::bias_score(fairness::MetricKind::kDP, state_.global, eval_);
  r.cal = fairness::bias_score(fairness::MetricKind::kCAL, state_.global, eval_);
  r.con = nb ? fairness::bias_score(fairness::MetricKind::kCON, state_.global, eval_, 0.5, nb)
             : 0.0;
  return r;
}

RoundRecord Simulation::run_round() {
  if (finished()) throw ContractError("simulation: all rounds already ran");
  const RoundPlan& plan = setup_.plan;
  const std::size_t t = state_.next_round;
  const double eta = value_at(setup_.schedules.eta, t);

  const std::vector<Update> updates = collect_updates(t);
  const Update gar = aggregation::aggregate(aggregator_, updates);
  if (!gar.all_finite()) throw NumericError("aggregate is not finite", t);

  const bool collect =
      std::binary_search(state_.collect_rounds.begin(), state_.collect_rounds.end(), t);
  const bool calibrate = plan.calibrator != Calibrator::kNone && t > state_.collect_rounds.back();
  if (collect) state_.store.append(t, state_.global);

  RoundPhase phase = collect ? RoundPhase::kCollect : RoundPhase::kPlain;
  std::optional<double> gamma;
  std::optional<ModelParams> counterfactual;
  try {
    if (!calibrate) {
      state_.global = state_.global.stepped(gar, eta);
    } else {
      phase = RoundPhase::kCalibrate;
      Update g0;
      switch (plan.calibrator) {
        case Calibrator::kEquFL:
          if (!state_.synthetic) build_synthetic();
          g0 = fairness::surrogate_grad(
              plan.metric, state_.global, *state_.synthetic_data,
              state_.synthetic_neighbors ? &*state_.synthetic_neighbors : nullptr);
          break;
        case Calibrator::kGaussian:
          g0 = aggregation::noise_update(aggregation::GaussianNoise{plan.noise_scale},
                                         state_.global.dim(), state_.noise_rng);
          break;
        case Calibrator::kUniform:
          g0 = aggregation::noise_update(aggregation::UniformNoise{plan.noise_scale},
                                         state_.global.dim(), state_.noise_rng);
          break;
        case Calibrator::kNone: break;
      }
      state_.store.freeze();
      gamma = value_at(setup_.schedules.gamma, t);
      Update direction = gar;
      direction.axpy(*gamma, g0);
      counterfactual = state_.global.stepped(gar, eta);
      state_.global = state_.global.stepped(direction, eta);
    }
  } catch (const NumericError& e) {
    throw NumericError(std::string("round update: ") + e.what(), t);
  }

  ++state_.next_round;
  RoundRecord r = evaluate(t, phase, eta);
  r.gamma = gamma;
  if (state_.synthetic_data && counterfactual) {
    const fairness::NeighborGraph* nb =
        state_.synthetic_neighbors ? &*state_.synthetic_neighbors : nullptr;
    r.syn_surrogate =
        fairness::surrogate_loss(plan.metric, state_.global, *state_.synthetic_data, nb);
    r.counterfactual_surrogate =
        fairness::surrogate_loss(plan.metric, *counterfactual, *state_.synthetic_data, nb);
    r.dominance = *r.syn_surrogate < *r.counterfactual_surrogate;
  }
  return r;
}

MetricTrace Simulation::run() {
  MetricTrace trace;
  while (!finished()) trace.push_back(run_round());
  return trace;
}

MetricTrace run_experiment(ExperimentSetup setup, std::vector<ClientState> clients,
                           TabularDataset eval) {
  Simulation sim(std::move(setup), std::move(clients), std::move(eval));
  return sim.run();
}

}  // namespace fedfair::federation
