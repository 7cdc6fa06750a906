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

// Shared helpers: random fixtures and gradient comparison.

#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include <gtest/gtest.h>

#include "fedfair/model.hpp"
#include "fixtures.hpp"

namespace fedfair::testing {

/// Elementwise relative error bound; entries below `floor` in magnitude are
/// compared absolutely against `floor`.
inline ::testing::AssertionResult gradients_match(std::span<const double> analytic,
                                                  std::span<const double> numeric, double rel,
                                                  double floor = 1e-8) {
  if (analytic.size() != numeric.size()) {
    return ::testing::AssertionFailure() << "size " << analytic.size() << " vs " << numeric.size();
  }
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double a = analytic[i], n = numeric[i];
    const double scale = std::max(std::abs(a), std::abs(n));
    const double err = std::abs(a - n);
    const bool ok = scale < floor ? err <= floor : err <= rel * scale;
    if (!ok) {
      return ::testing::AssertionFailure()
             << "entry " << i << ": analytic " << a << " numeric " << n << " rel err "
             << err / scale;
    }
  }
  return ::testing::AssertionSuccess();
}

}  // namespace fedfair::testing
