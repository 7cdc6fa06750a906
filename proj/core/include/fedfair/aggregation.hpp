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

#pragma once

#include <cstddef>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "fedfair/model.hpp"

namespace fedfair::aggregation {

/// Weighted mean. Weights must be non-negative and sum to 1; an empty weight
/// list means uniform weights.
struct FedAvg {
  std::vector<double> weights;
};

/// Coordinate-wise median; the mean of the two middle values for even n.
struct Median {};

/// Coordinate-wise mean after dropping the `trim` largest and `trim` smallest
/// values. Requires 2 * trim < n.
struct TrimmedMean {
  std::size_t trim = 1;
};

/// Average of the `select` updates with the lowest Krum score, where the
/// score is the sum of squared distances to the n - faulty - 2 closest peers.
/// Ties go to the lower client index. `select` defaults to ceil(n / 2).
struct MultiKrum {
  std::size_t faulty = 0;
  std::optional<std::size_t> select;
};

using AggregatorKind = std::variant<FedAvg, Median, TrimmedMean, MultiKrum>;

std::string describe(const AggregatorKind& kind);

/// Applies the rule. Throws ContractError on an empty list, dimension
/// mismatch, or a violated arity constraint; the message names the rule.
Update aggregate(const AggregatorKind& kind, std::span<const Update> updates);

struct GaussianNoise {
  double sigma = 2.0;
};

struct UniformNoise {
  double bound = 2.0;
};

using NoiseKind = std::variant<GaussianNoise, UniformNoise>;

/// I.i.d. per-coordinate noise vector of length `dim` (>= 1).
Update noise_update(const NoiseKind& kind, std::size_t dim, std::mt19937_64& rng);

}  // namespace fedfair::aggregation
