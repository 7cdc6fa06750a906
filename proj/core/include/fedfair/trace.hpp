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
#include <vector>

namespace fedfair {

enum class RoundPhase { kCollect, kPlain, kCalibrate };

/// Everything measured after round `round` has produced w^{round+1}.
struct RoundRecord {
  std::size_t round = 0;
  RoundPhase phase = RoundPhase::kPlain;
  double eta = 0.0;
  /// Calibration weight; empty when the round did not calibrate.
  std::optional<double> gamma;
  /// Data-weighted mean client objective, including each client's L2 term.
  double train_loss = 0.0;
  double test_accuracy = 0.0;
  double eo = 0.0;
  double dp = 0.0;
  double cal = 0.0;
  double con = 0.0;
  /// F_syn at the new global model and at the uncalibrated counterfactual.
  /// Present once the synthetic set exists.
  std::optional<double> syn_surrogate;
  std::optional<double> counterfactual_surrogate;
  std::optional<bool> dominance;

  friend bool operator==(const RoundRecord&, const RoundRecord&) = default;
};

using MetricTrace = std::vector<RoundRecord>;

}  // namespace fedfair
