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

#include "fedfair/condensation.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "fedfair/error.hpp"

namespace fedfair::condensation {

namespace {

struct Pair {
  const ModelParams* start;
  const ModelParams* target;
};

Pair checkpoint_pair(const CheckpointStore& store, std::size_t tau, std::size_t inner_steps) {
  const auto pos = store.position_of(tau);
  if (!pos) {
    throw ContractError("no checkpoint stored for round tau=" + std::to_string(tau));
  }
  if (*pos + inner_steps >= store.size()) {
    throw ContractError("no checkpoint " + std::to_string(inner_steps) +
                        " entries after round tau=" + std::to_string(tau));
  }
  const auto entries = store.entries();
  return {&entries[*pos].params, &entries[*pos + inner_steps].params};
}

ModelParams as_server_model(const ModelParams& checkpoint, const CondensationConfig& cfg) {
  if (!cfg.server_shape) return checkpoint;
  if (!cfg.server_shape->same_layout(checkpoint.shape())) {
    throw ContractError("server network layout differs from the checkpoints' layout");
  }
  return ModelParams(*cfg.server_shape,
                     std::vector<double>(checkpoint.values().begin(), checkpoint.values().end()));
}

}  // namespace

void CheckpointStore::append(std::size_t round, ModelParams params) {
  if (frozen_) throw ContractError("CheckpointStore: store is frozen");
  if (full()) {
    throw ContractError("CheckpointStore: capacity " + std::to_string(capacity_) + " reached");
  }
  if (!entries_.empty()) {
    if (round <= entries_.back().round) {
      throw ContractError("CheckpointStore: rounds must strictly increase");
    }
    if (!(params.shape() == entries_.front().params.shape())) {
      throw ContractError("CheckpointStore: checkpoint shape differs from earlier entries");
    }
  }
  entries_.push_back({round, std::move(params)});
}

std::optional<std::size_t> CheckpointStore::position_of(std::size_t round) const {
  const auto it = std::lower_bound(entries_.begin(), entries_.end(), round,
                                   [](const Entry& e, std::size_t r) { return e.round < r; });
  if (it == entries_.end() || it->round != round) return std::nullopt;
  return static_cast<std::size_t>(it - entries_.begin());
}

void CondensationConfig::validate(std::size_t input_dim) const {
  if (samples == 0) throw ContractError("condensation: samples must be >= 1");
  if (inner_steps == 0) throw ContractError("condensation: inner_steps must be >= 1");
  if (!(inner_lr >= 0.0)) throw ContractError("condensation: inner_lr must be >= 0");
  if (!(data_lr >= 0.0)) throw ContractError("condensation: data_lr must be >= 0");
  if (group_count < 1) throw ContractError("condensation: group_count must be >= 1");
  if (!feature_ranges.empty() && feature_ranges.size() != input_dim) {
    throw ContractError("condensation: " + std::to_string(feature_ranges.size()) +
                        " feature ranges for " + std::to_string(input_dim) + " features");
  }
  for (const FeatureRange& r : feature_ranges) {
    if (!(r.lo <= r.hi)) throw ContractError("condensation: feature range with lo > hi");
  }
  if (group_feature && *group_feature >= input_dim) {
    throw ContractError("condensation: group_feature out of range");
  }
  if (server_shape && server_shape->input_dim != input_dim) {
    throw ContractError("condensation: server network input width mismatch");
  }
}

SampleBatch SyntheticDataset::as_batch() const {
  SampleBatch b;
  b.features = features;
  b.labels = labels;
  return b;
}

TabularDataset SyntheticDataset::to_dataset() const {
  TabularDataset d = as_batch();
  d.groups.resize(size());
  for (std::size_t i = 0; i < size(); ++i) {
    if (group_feature) {
      const double g = std::round(features(i, *group_feature));
      d.groups[i] = static_cast<int>(std::clamp(g, 0.0, static_cast<double>(group_count - 1)));
    } else {
      d.groups[i] = fixed_groups.at(i);
    }
  }
  return d;
}

SyntheticDataset initialize_synthetic(const CondensationConfig& cfg, std::size_t input_dim) {
  cfg.validate(input_dim);
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  SyntheticDataset syn;
  syn.features = Matrix(cfg.samples, input_dim);
  for (double& v : syn.features.values()) v = normal(rng);

  for (std::size_t c = 0; c < input_dim; ++c) {
    FeatureRange range;
    if (!cfg.feature_ranges.empty()) {
      range = cfg.feature_ranges[c];
    } else if (cfg.group_feature && *cfg.group_feature == c) {
      range = {0.0, static_cast<double>(cfg.group_count - 1)};
    }
    double lo = syn.features(0, c), hi = lo;
    for (std::size_t r = 0; r < cfg.samples; ++r) {
      lo = std::min(lo, syn.features(r, c));
      hi = std::max(hi, syn.features(r, c));
    }
    const double span = hi - lo;
    for (std::size_t r = 0; r < cfg.samples; ++r) {
      const double unit = span > 0.0 ? (syn.features(r, c) - lo) / span : 0.5;
      syn.features(r, c) = range.lo + unit * (range.hi - range.lo);
    }
  }

  syn.labels.assign(cfg.samples, 0.5);
  syn.group_feature = cfg.group_feature;
  syn.group_count = cfg.group_count;
  if (!cfg.group_feature) {
    syn.fixed_groups.resize(cfg.samples);
    for (std::size_t i = 0; i < cfg.samples; ++i) {
      syn.fixed_groups[i] = static_cast<int>(i % static_cast<std::size_t>(cfg.group_count));
    }
  }
  return syn;
}

std::vector<std::size_t> valid_taus(const CheckpointStore& store, std::size_t inner_steps) {
  std::vector<std::size_t> taus;
  const auto entries = store.entries();
  for (std::size_t i = 0; i + inner_steps < entries.size(); ++i) taus.push_back(entries[i].round);
  return taus;
}

double trajectory_loss(const CheckpointStore& store, const SyntheticDataset& syn,
                       const CondensationConfig& cfg, std::size_t tau) {
  const Pair pair = checkpoint_pair(store, tau, cfg.inner_steps);
  const ModelParams start = as_server_model(*pair.start, cfg);
  const ModelParams end = sgd_steps(start, syn.as_batch(), cfg.inner_lr, cfg.inner_steps);
  return end.squared_distance(as_server_model(*pair.target, cfg));
}

double datasyn_step(const CheckpointStore& store, const CondensationConfig& cfg,
                    std::size_t tau, SyntheticDataset& syn) {
  const Pair pair = checkpoint_pair(store, tau, cfg.inner_steps);
  const ModelParams start = as_server_model(*pair.start, cfg);
  const ModelParams target = as_server_model(*pair.target, cfg);
  const SampleBatch batch = syn.as_batch();

  const double before =
      sgd_steps(start, batch, cfg.inner_lr, cfg.inner_steps).squared_distance(target);
  const DataGradient g =
      unrolled_grad_wrt_data(start, batch, cfg.inner_lr, cfg.inner_steps, target);

  auto x = syn.features.values();
  const auto gx = g.features.values();
  for (std::size_t i = 0; i < x.size(); ++i) x[i] -= cfg.data_lr * gx[i];
  if (syn.group_feature) {
    const double top = static_cast<double>(syn.group_count - 1);
    for (std::size_t r = 0; r < syn.size(); ++r) {
      double& g = syn.features(r, *syn.group_feature);
      g = std::clamp(g, 0.0, top);
    }
  }
  for (std::size_t i = 0; i < syn.labels.size(); ++i) {
    syn.labels[i] = std::clamp(syn.labels[i] - cfg.data_lr * g.labels[i], 0.0, 1.0);
  }
  return before;
}

SyntheticDataset datasyn(const CheckpointStore& store, const CondensationConfig& cfg,
                         SyntheticDataset syn) {
  if (!store.frozen()) throw ContractError("datasyn: checkpoint store must be frozen first");
  if (store.size() < cfg.inner_steps + 1) {
    throw ContractError("datasyn: need at least inner_steps + 1 = " +
                        std::to_string(cfg.inner_steps + 1) + " checkpoints, have " +
                        std::to_string(store.size()));
  }
  if (cfg.iterations == 0) return syn;
  const auto taus = valid_taus(store, cfg.inner_steps);
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_int_distribution<std::size_t> pick(0, taus.size() - 1);
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    const std::size_t tau = taus[pick(rng)];
    double pi = 0.0;
    try {
      pi = datasyn_step(store, cfg, tau, syn);
    } catch (const NumericError& e) {
      throw NumericError(std::string("datasyn: ") + e.what(), it + 1);
    }
    const auto x = syn.features.values();
    const bool ok = std::isfinite(pi) &&
                    std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); });
    if (!ok) throw NumericError("datasyn: non-finite trajectory loss or features", it + 1);
  }
  return syn;
}

SyntheticDataset datasyn(const CheckpointStore& store, const CondensationConfig& cfg) {
  if (store.size() == 0) throw ContractError("datasyn: checkpoint store is empty");
  return datasyn(store, cfg,
                 initialize_synthetic(cfg, store.entries().front().params.shape().input_dim));
}

}  // namespace fedfair::condensation
