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

// Group and individual fairness: thresholded bias scores used for
// evaluation, and their differentiable cross-entropy surrogates used to build
// the calibrated update.
//
//   EO   max over y, h, k of |P(Yhat=1 | A=h, Y=y) - P(Yhat=1 | A=k, Y=y)|
//   DP   max over h, k of |P(Yhat=1 | A=h) - P(Yhat=1 | A=k)|
//   CAL  max over h of |P(Y=1 | Yhat=1, A=h) - P(Y=1 | Yhat=1)|
//   CON  mean over z of |Yhat_z - mean of Yhat over the k neighbours of z|
//
// The surrogates replace each conditional rate by the mean per-sample
// cross-entropy over the same index set and sum (rather than max) the
// absolute differences. Group pairs are unordered. Conditioning sets that are
// empty contribute nothing.

#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "fedfair/model.hpp"

namespace fedfair::fairness {

enum class MetricKind { kEO, kDP, kCAL, kCON };

inline constexpr std::array<MetricKind, 4> kAllMetrics = {MetricKind::kEO, MetricKind::kDP,
                                                          MetricKind::kCAL, MetricKind::kCON};

std::string_view to_string(MetricKind kind);
MetricKind parse_metric(std::string_view name);

/// Hard label class of a (possibly soft) label.
inline int label_class(double y) { return y >= 0.5 ? 1 : 0; }

/// Row indices by (group, label), by group and by label. Immutable.
class GroupIndex {
 public:
  /// Requires `data.groups` to be populated.
  explicit GroupIndex(const TabularDataset& data);

  /// Sorted distinct group ids.
  const std::vector<int>& group_ids() const noexcept { return ids_; }
  std::span<const std::size_t> cell(int group, int label) const;
  std::span<const std::size_t> group(int group) const;
  std::span<const std::size_t> label(int label) const;

 private:
  std::vector<int> ids_;
  std::map<std::pair<int, int>, std::vector<std::size_t>> cells_;
  std::map<int, std::vector<std::size_t>> groups_;
  std::array<std::vector<std::size_t>, 2> labels_;
};

/// k nearest neighbours of every row under Euclidean distance on z-scored
/// features. Self is excluded; ties go to the lower row index.
class NeighborGraph {
 public:
  NeighborGraph(const Matrix& features, std::size_t k);

  std::size_t k() const noexcept { return k_; }
  std::size_t size() const noexcept { return k_ == 0 ? 0 : flat_.size() / k_; }
  std::span<const std::size_t> neighbors(std::size_t row) const {
    return {flat_.data() + row * k_, k_};
  }

 private:
  std::size_t k_;
  std::vector<std::size_t> flat_;
};

/// Bias score from 0/1 predictions. Lower is fairer; the result is in [0,1].
double bias_score_from_predictions(MetricKind kind, std::span<const int> predicted,
                                   const TabularDataset& data,
                                   const NeighborGraph* neighbors = nullptr);

/// Bias score of `params` with Yhat = 1[p >= threshold].
double bias_score(MetricKind kind, const ModelParams& params, const TabularDataset& data,
                  double threshold = 0.5, const NeighborGraph* neighbors = nullptr);

double surrogate_loss(MetricKind kind, const ModelParams& params, const TabularDataset& data,
                      const NeighborGraph* neighbors = nullptr);

/// Exact subgradient of surrogate_loss; |x| has slope 0 at x == 0.
Update surrogate_grad(MetricKind kind, const ModelParams& params, const TabularDataset& data,
                      const NeighborGraph* neighbors = nullptr);

}  // namespace fedfair::fairness
