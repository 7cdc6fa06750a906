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

// Random fixtures and a central finite-difference oracle. No test framework
// dependency, so the acceptance runner can share them.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "fedfair/model.hpp"

namespace fedfair::testing {

inline SampleBatch random_batch(std::size_t rows, std::size_t cols, std::uint64_t seed,
                                int groups = 2, bool soft = false) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> x(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  SampleBatch b;
  b.features = Matrix(rows, cols);
  for (double& v : b.features.values()) v = x(rng);
  for (std::size_t i = 0; i < rows; ++i) {
    b.labels.push_back(soft ? u(rng) : (u(rng) < 0.5 ? 0.0 : 1.0));
    b.groups.push_back(static_cast<int>(i % static_cast<std::size_t>(groups)));
  }
  return b;
}

inline ModelParams random_params(const ModelShape& shape, std::uint64_t seed, double scale = 0.5) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, scale);
  std::vector<double> v(shape.param_count());
  for (double& x : v) x = d(rng);
  return ModelParams(shape, v);
}

/// Central differences of `f` at `x` with step `h`.
inline std::vector<double> fd_gradient(const std::function<double(const std::vector<double>&)>& f,
                                       std::vector<double> x, double h = 1e-5) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = f(x);
    x[i] = keep - h;
    const double down = f(x);
    x[i] = keep;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}


inline std::vector<double> to_vector(std::span<const double> s) { return {s.begin(), s.end()}; }

}  // namespace fedfair::testing
