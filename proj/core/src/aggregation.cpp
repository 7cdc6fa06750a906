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

#include "fedfair/aggregation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fedfair/error.hpp"

namespace fedfair::aggregation {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::size_t common_dim(std::span<const Update> updates, const std::string& rule) {
  if (updates.empty()) throw ContractError(rule + ": no updates to aggregate");
  const std::size_t d = updates.front().dim();
  for (const Update& u : updates) {
    if (u.dim() != d) {
      throw ContractError(rule + ": update dimensions differ (" + std::to_string(d) + " vs " +
                          std::to_string(u.dim()) + ")");
    }
  }
  return d;
}

Update fedavg(const FedAvg& rule, std::span<const Update> updates) {
  const std::size_t d = common_dim(updates, "FedAvg");
  const std::size_t n = updates.size();
  std::vector<double> weights = rule.weights;
  if (weights.empty()) weights.assign(n, 1.0 / static_cast<double>(n));
  if (weights.size() != n) {
    throw ContractError("FedAvg: " + std::to_string(weights.size()) + " weights for " +
                        std::to_string(n) + " updates");
  }
  double total = 0.0;
  for (double a : weights) {
    if (!(a >= 0.0)) throw ContractError("FedAvg: negative weight");
    total += a;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw ContractError("FedAvg: weights sum to " + std::to_string(total) + ", expected 1");
  }
  // Identical inputs come back bit for bit.
  if (std::all_of(updates.begin(), updates.end(),
                  [&](const Update& u) { return u == updates.front(); })) {
    return updates.front();
  }
  Update out(d);
  for (std::size_t i = 0; i < n; ++i) out.axpy(weights[i], updates[i]);
  return out;
}

template <class Reduce>
Update coordinatewise(std::span<const Update> updates, std::size_t d, Reduce reduce) {
  Update out(d);
  std::vector<double> column(updates.size());
  for (std::size_t c = 0; c < d; ++c) {
    for (std::size_t i = 0; i < updates.size(); ++i) column[i] = updates[i][c];
    std::sort(column.begin(), column.end());
    out[c] = reduce(column);
  }
  return out;
}

Update median(std::span<const Update> updates) {
  const std::size_t d = common_dim(updates, "Median");
  return coordinatewise(updates, d, [](const std::vector<double>& s) {
    const std::size_t n = s.size();
    return n % 2 == 1 ? s[n / 2] : 0.5 * (s[n / 2 - 1] + s[n / 2]);
  });
}

Update trimmed_mean(const TrimmedMean& rule, std::span<const Update> updates) {
  const std::size_t d = common_dim(updates, "TrimmedMean");
  if (2 * rule.trim >= updates.size()) {
    throw ContractError("TrimmedMean: need 2*trim < n (trim=" + std::to_string(rule.trim) +
                        ", n=" + std::to_string(updates.size()) + ")");
  }
  const std::size_t k = rule.trim;
  return coordinatewise(updates, d, [k](const std::vector<double>& s) {
    const double sum = std::accumulate(s.begin() + static_cast<std::ptrdiff_t>(k),
                                       s.end() - static_cast<std::ptrdiff_t>(k), 0.0);
    return sum / static_cast<double>(s.size() - 2 * k);
  });
}

Update multi_krum(const MultiKrum& rule, std::span<const Update> updates) {
  const std::size_t d = common_dim(updates, "MultiKrum");
  const std::size_t n = updates.size();
  if (n < rule.faulty + 3) {
    throw ContractError("MultiKrum: need n - f - 2 >= 1 (n=" + std::to_string(n) +
                        ", f=" + std::to_string(rule.faulty) + ")");
  }
  const std::size_t select = rule.select.value_or((n + 1) / 2);
  if (select == 0 || select > n - rule.faulty) {
    throw ContractError("MultiKrum: need 1 <= m <= n - f (m=" + std::to_string(select) + ")");
  }
  const std::size_t peers = n - rule.faulty - 2;

  std::vector<std::vector<double>> dist(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        const double diff = updates[i][c] - updates[j][c];
        s += diff * diff;
      }
      dist[i][j] = dist[j][i] = s;
    }
  }
  std::vector<std::pair<double, std::size_t>> scores;
  std::vector<double> row;
  for (std::size_t i = 0; i < n; ++i) {
    row.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) row.push_back(dist[i][j]);
    }
    std::partial_sort(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(peers), row.end());
    scores.emplace_back(std::accumulate(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(peers), 0.0),
                        i);
  }
  std::sort(scores.begin(), scores.end());
  Update out(d);
  for (std::size_t m = 0; m < select; ++m) out += updates[scores[m].second];
  for (double& v : out.values()) v /= static_cast<double>(select);
  return out;
}

}  // namespace

std::string describe(const AggregatorKind& kind) {
  return std::visit(
      Overloaded{
          [](const FedAvg&) { return std::string("fedavg"); },
          [](const Median&) { return std::string("median"); },
          [](const TrimmedMean& t) { return "trimmed_mean(k=" + std::to_string(t.trim) + ")"; },
          [](const MultiKrum& k) {
            return "multi_krum(f=" + std::to_string(k.faulty) + ")";
          },
      },
      kind);
}

Update aggregate(const AggregatorKind& kind, std::span<const Update> updates) {
  return std::visit(Overloaded{
                        [&](const FedAvg& r) { return fedavg(r, updates); },
                        [&](const Median&) { return median(updates); },
                        [&](const TrimmedMean& r) { return trimmed_mean(r, updates); },
                        [&](const MultiKrum& r) { return multi_krum(r, updates); },
                    },
                    kind);
}

Update noise_update(const NoiseKind& kind, std::size_t dim, std::mt19937_64& rng) {
  if (dim == 0) throw ContractError("noise_update: dim must be >= 1");
  Update out(dim);
  std::visit(Overloaded{
                 [&](const GaussianNoise& g) {
                   if (!(g.sigma >= 0.0)) throw ContractError("Gaussian noise: sigma < 0");
                   if (g.sigma == 0.0) return;
                   std::normal_distribution<double> dist(0.0, g.sigma);
                   for (std::size_t i = 0; i < dim; ++i) out[i] = dist(rng);
                 },
                 [&](const UniformNoise& u) {
                   if (!(u.bound >= 0.0)) throw ContractError("Uniform noise: bound < 0");
                   if (u.bound == 0.0) return;
                   std::uniform_real_distribution<double> dist(-u.bound, u.bound);
                   for (std::size_t i = 0; i < dim; ++i) out[i] = dist(rng);
                 },
             },
             kind);
  return out;
}

}  // namespace fedfair::aggregation
