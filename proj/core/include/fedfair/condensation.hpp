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

// Server-side dataset condensation by trajectory matching.
//
// The server keeps the global models of its first rounds. A synthetic set is
// then optimized so that a few gradient steps on it, started from one saved
// model, land on the model saved `inner_steps` checkpoints later:
//
//   Pi(X, Y) = || sgd_steps(w_tau, (X, Y), inner_lr, inner_steps) - w_{tau+inner_steps} ||^2
//
// and X, Y follow plain gradient descent on Pi with the exact unrolled
// gradient.

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "fedfair/model.hpp"

namespace fedfair::condensation {

/// Append-only list of (round, params), frozen once DataSyn runs.
class CheckpointStore {
 public:
  struct Entry {
    std::size_t round;
    ModelParams params;
  };

  explicit CheckpointStore(std::size_t capacity) : capacity_(capacity) {}

  /// Throws ContractError if frozen, full, the round does not increase, or
  /// the shape differs from earlier entries.
  void append(std::size_t round, ModelParams params);
  void freeze() noexcept { frozen_ = true; }

  bool frozen() const noexcept { return frozen_; }
  bool full() const noexcept { return entries_.size() >= capacity_; }
  std::size_t size() const noexcept { return entries_.size(); }
  std::size_t capacity() const noexcept { return capacity_; }
  std::span<const Entry> entries() const noexcept { return entries_; }

  /// Position of `round` in the store, if present.
  std::optional<std::size_t> position_of(std::size_t round) const;

 private:
  std::size_t capacity_;
  bool frozen_ = false;
  std::vector<Entry> entries_;
};

struct FeatureRange {
  double lo = -1.0;
  double hi = 1.0;
};

struct CondensationConfig {
  std::size_t samples = 1000;
  std::size_t iterations = 200;
  std::size_t inner_steps = 2;
  double inner_lr = 0.1;
  double data_lr = 10.0;
  std::uint64_t seed = 0;
  /// Network trained on the synthetic set. Must share the checkpoints'
  /// parameter layout; its activation may differ. Defaults to the
  /// checkpoints' shape.
  std::optional<ModelShape> server_shape;
  /// One range per input feature for the initial draw; empty means [-1, 1]
  /// everywhere except the group column, which spans [0, group_count - 1].
  std::vector<FeatureRange> feature_ranges;
  /// Feature column holding the sensitive attribute, if any.
  std::optional<std::size_t> group_feature;
  int group_count = 2;

  /// Throws ContractError for inconsistent values.
  void validate(std::size_t input_dim) const;
};

/// Learnable features and soft labels in [0,1].
struct SyntheticDataset {
  Matrix features;
  std::vector<double> labels;
  std::optional<std::size_t> group_feature;
  /// Groups used when there is no group feature column.
  std::vector<int> fixed_groups;
  int group_count = 2;

  std::size_t size() const noexcept { return labels.size(); }
  /// Features and soft labels, without groups; what the server network
  /// trains on.
  SampleBatch as_batch() const;
  /// Adds discrete groups: the group column rounded to the nearest valid id,
  /// or `fixed_groups`.
  TabularDataset to_dataset() const;
};

/// Standard-normal rows rescaled column-wise onto the configured ranges,
/// labels 0.5.
SyntheticDataset initialize_synthetic(const CondensationConfig& cfg, std::size_t input_dim);

/// Rounds tau whose partner checkpoint `inner_steps` entries later exists.
std::vector<std::size_t> valid_taus(const CheckpointStore& store, std::size_t inner_steps);

/// Pi for the checkpoint pair starting at round `tau`. Throws ContractError
/// naming tau if either checkpoint is missing.
double trajectory_loss(const CheckpointStore& store, const SyntheticDataset& syn,
                       const CondensationConfig& cfg, std::size_t tau);

/// One gradient-descent update of `syn` on the pair starting at `tau`.
/// Returns Pi before the update. Labels are clamped to [0,1] afterwards.
double datasyn_step(const CheckpointStore& store, const CondensationConfig& cfg,
                    std::size_t tau, SyntheticDataset& syn);

/// Runs cfg.iterations steps from `init`, sampling tau uniformly among
/// valid_taus with a generator seeded from cfg.seed. Throws NumericError with
/// the iteration index on non-finite values.
SyntheticDataset datasyn(const CheckpointStore& store, const CondensationConfig& cfg,
                         SyntheticDataset init);

/// As above, starting from initialize_synthetic.
SyntheticDataset datasyn(const CheckpointStore& store, const CondensationConfig& cfg);

}  // namespace fedfair::condensation
