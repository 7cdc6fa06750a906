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

// Independent brute-force reimplementations used as test oracles. They share
// no code with the library beyond the data containers.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <utility>
#include <vector>

#include "fedfair/model.hpp"

namespace fedfair::oracle {

inline std::vector<int> group_ids(const SampleBatch& d) {
  std::set<int> s(d.groups.begin(), d.groups.end());
  return {s.begin(), s.end()};
}

inline int hard(double y) { return y >= 0.5 ? 1 : 0; }

/// P(Yhat = 1 | rows matching `keep`), or nullopt when no row matches.
template <typename Keep>
std::optional<double> rate(const SampleBatch& d, std::span<const int> pred, Keep keep) {
  int n = 0, pos = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (!keep(i)) continue;
    ++n;
    pos += pred[i];
  }
  if (n == 0) return std::nullopt;
  return static_cast<double>(pos) / n;
}

inline double eo(const SampleBatch& d, std::span<const int> pred) {
  double worst = 0.0;
  for (int y : {0, 1}) {
    for (int h : group_ids(d)) {
      for (int k : group_ids(d)) {
        const auto a = rate(d, pred, [&](std::size_t i) { return d.groups[i] == h && hard(d.labels[i]) == y; });
        const auto b = rate(d, pred, [&](std::size_t i) { return d.groups[i] == k && hard(d.labels[i]) == y; });
        if (a && b) worst = std::max(worst, std::abs(*a - *b));
      }
    }
  }
  return worst;
}

inline double dp(const SampleBatch& d, std::span<const int> pred) {
  double worst = 0.0;
  for (int h : group_ids(d)) {
    for (int k : group_ids(d)) {
      const auto a = rate(d, pred, [&](std::size_t i) { return d.groups[i] == h; });
      const auto b = rate(d, pred, [&](std::size_t i) { return d.groups[i] == k; });
      worst = std::max(worst, std::abs(*a - *b));
    }
  }
  return worst;
}

/// P(Y = 1 | Yhat = 1, rows matching `keep`).
template <typename Keep>
std::optional<double> precision(const SampleBatch& d, std::span<const int> pred, Keep keep) {
  int flagged = 0, hits = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (!keep(i) || pred[i] == 0) continue;
    ++flagged;
    hits += hard(d.labels[i]);
  }
  if (flagged == 0) return std::nullopt;
  return static_cast<double>(hits) / flagged;
}

inline double cal(const SampleBatch& d, std::span<const int> pred) {
  const auto overall = precision(d, pred, [](std::size_t) { return true; });
  if (!overall) return 0.0;
  double worst = 0.0;
  for (int h : group_ids(d)) {
    const auto ph = precision(d, pred, [&](std::size_t i) { return d.groups[i] == h; });
    if (ph) worst = std::max(worst, std::abs(*ph - *overall));
  }
  return worst;
}

/// k nearest rows under Euclidean distance on population z-scored columns,
/// self excluded, ties to the lower index.
inline std::vector<std::vector<std::size_t>> knn(const Matrix& x, std::size_t k) {
  const std::size_t n = x.rows(), p = x.cols();
  std::vector<double> mu(p, 0.0), sd(p, 0.0);
  for (std::size_t c = 0; c < p; ++c) {
    for (std::size_t r = 0; r < n; ++r) mu[c] += x(r, c) / static_cast<double>(n);
    for (std::size_t r = 0; r < n; ++r) sd[c] += (x(r, c) - mu[c]) * (x(r, c) - mu[c]);
    sd[c] = std::sqrt(sd[c] / static_cast<double>(n));
    if (sd[c] == 0.0) sd[c] = 1.0;
  }
  std::vector<std::vector<std::size_t>> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::pair<double, std::size_t>> all;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      double dist = 0.0;
      for (std::size_t c = 0; c < p; ++c) {
        const double a = (x(i, c) - mu[c]) / sd[c], b = (x(j, c) - mu[c]) / sd[c];
        dist += (a - b) * (a - b);
      }
      all.emplace_back(dist, j);
    }
    std::sort(all.begin(), all.end());
    for (std::size_t m = 0; m < k; ++m) out[i].push_back(all[m].second);
  }
  return out;
}

inline double con(const SampleBatch& d, std::span<const int> pred, std::size_t k) {
  const auto nb = knn(d.features, k);
  double total = 0.0;
  for (std::size_t z = 0; z < d.size(); ++z) {
    double mean = 0.0;
    for (std::size_t q : nb[z]) mean += pred[q];
    total += std::abs(pred[z] - mean / static_cast<double>(k));
  }
  return total / static_cast<double>(d.size());
}

/// Cross-entropy of a logistic model computed from scratch.
inline std::vector<double> logistic_losses(std::span<const double> w, const SampleBatch& d) {
  std::vector<double> out;
  for (std::size_t i = 0; i < d.size(); ++i) {
    double z = w.back();
    for (std::size_t c = 0; c < d.features.cols(); ++c) z += w[c] * d.features(i, c);
    const double p = std::clamp(1.0 / (1.0 + std::exp(-z)), 1e-12, 1.0 - 1e-12);
    out.push_back(-(d.labels[i] * std::log(p) + (1.0 - d.labels[i]) * std::log(1.0 - p)));
  }
  return out;
}

// Aggregation rules.

inline std::vector<double> fedavg(const std::vector<std::vector<double>>& u,
                                  std::vector<double> w) {
  if (w.empty()) w.assign(u.size(), 1.0 / static_cast<double>(u.size()));
  std::vector<double> out(u[0].size(), 0.0);
  for (std::size_t i = 0; i < u.size(); ++i) {
    for (std::size_t c = 0; c < out.size(); ++c) out[c] += w[i] * u[i][c];
  }
  return out;
}

inline std::vector<double> column(const std::vector<std::vector<double>>& u, std::size_t c) {
  std::vector<double> col;
  for (const auto& v : u) col.push_back(v[c]);
  std::sort(col.begin(), col.end());
  return col;
}

inline std::vector<double> median(const std::vector<std::vector<double>>& u) {
  std::vector<double> out;
  const std::size_t n = u.size();
  for (std::size_t c = 0; c < u[0].size(); ++c) {
    const auto col = column(u, c);
    out.push_back(n % 2 ? col[n / 2] : (col[n / 2 - 1] + col[n / 2]) / 2.0);
  }
  return out;
}

inline std::vector<double> trimmed_mean(const std::vector<std::vector<double>>& u,
                                        std::size_t trim) {
  std::vector<double> out;
  for (std::size_t c = 0; c < u[0].size(); ++c) {
    const auto col = column(u, c);
    double s = 0.0;
    for (std::size_t i = trim; i + trim < col.size(); ++i) s += col[i];
    out.push_back(s / static_cast<double>(col.size() - 2 * trim));
  }
  return out;
}

inline std::vector<double> multi_krum(const std::vector<std::vector<double>>& u,
                                      std::size_t faulty, std::size_t select) {
  const std::size_t n = u.size();
  std::vector<std::pair<double, std::size_t>> scores;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> dist;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      double s = 0.0;
      for (std::size_t c = 0; c < u[i].size(); ++c) s += (u[i][c] - u[j][c]) * (u[i][c] - u[j][c]);
      dist.push_back(s);
    }
    std::sort(dist.begin(), dist.end());
    scores.emplace_back(std::accumulate(dist.begin(), dist.begin() + static_cast<long>(n - faulty - 2), 0.0), i);
  }
  std::sort(scores.begin(), scores.end());
  std::vector<double> out(u[0].size(), 0.0);
  for (std::size_t m = 0; m < select; ++m) {
    for (std::size_t c = 0; c < out.size(); ++c) out[c] += u[scores[m].second][c];
  }
  for (double& v : out) v /= static_cast<double>(select);
  return out;
}

}  // namespace fedfair::oracle
