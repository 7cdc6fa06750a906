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

#include "fedfair/fairness.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fedfair/error.hpp"

namespace fedfair::fairness {

namespace {

const std::vector<std::size_t> kNoRows;

void require_groups(const TabularDataset& data, MetricKind kind) {
  if (data.groups.size() != data.size()) {
    throw ContractError(std::string(to_string(kind)) + ": dataset has no group column");
  }
}

void require_two_groups(const GroupIndex& index, MetricKind kind) {
  if (index.group_ids().size() < 2) {
    throw ContractError(std::string(to_string(kind)) + ": needs at least 2 groups, got " +
                        std::to_string(index.group_ids().size()));
  }
}

const NeighborGraph& require_neighbors(const NeighborGraph* neighbors,
                                       const TabularDataset& data) {
  if (neighbors == nullptr) throw ContractError("CON: a NeighborGraph is required");
  if (neighbors->size() != data.size()) {
    throw ContractError("CON: NeighborGraph built for " + std::to_string(neighbors->size()) +
                        " rows, dataset has " + std::to_string(data.size()));
  }
  return *neighbors;
}

double positive_rate(std::span<const std::size_t> rows, std::span<const int> predicted) {
  std::size_t pos = 0;
  for (std::size_t r : rows) pos += predicted[r] != 0 ? 1 : 0;
  return static_cast<double>(pos) / static_cast<double>(rows.size());
}

// One |sum_i coef_i * loss_i| term of a surrogate.
struct Term {
  std::vector<std::pair<std::size_t, double>> coef;
};

void add_mean(Term& term, std::span<const std::size_t> rows, double sign) {
  const double c = sign / static_cast<double>(rows.size());
  for (std::size_t r : rows) term.coef.emplace_back(r, c);
}

Term difference_of_means(std::span<const std::size_t> a, std::span<const std::size_t> b) {
  Term t;
  add_mean(t, a, 1.0);
  add_mean(t, b, -1.0);
  return t;
}

struct Surrogate {
  std::vector<Term> terms;
  double scale = 1.0;
};

Surrogate build_surrogate(MetricKind kind, const TabularDataset& data,
                          const NeighborGraph* neighbors) {
  Surrogate s;
  if (kind == MetricKind::kCON) {
    const NeighborGraph& nb = require_neighbors(neighbors, data);
    if (data.empty()) throw ContractError("CON: empty dataset");
    for (std::size_t z = 0; z < data.size(); ++z) {
      Term t;
      t.coef.emplace_back(z, 1.0);
      add_mean(t, nb.neighbors(z), -1.0);
      s.terms.push_back(std::move(t));
    }
    s.scale = 1.0 / static_cast<double>(data.size());
    return s;
  }

  require_groups(data, kind);
  const GroupIndex index(data);
  const auto& ids = index.group_ids();
  switch (kind) {
    case MetricKind::kEO:
      require_two_groups(index, kind);
      for (int y : {0, 1}) {
        for (std::size_t a = 0; a < ids.size(); ++a) {
          for (std::size_t b = a + 1; b < ids.size(); ++b) {
            const auto ca = index.cell(ids[a], y);
            const auto cb = index.cell(ids[b], y);
            if (ca.empty() || cb.empty()) continue;
            s.terms.push_back(difference_of_means(ca, cb));
          }
        }
      }
      break;
    case MetricKind::kDP:
      require_two_groups(index, kind);
      for (std::size_t a = 0; a < ids.size(); ++a) {
        for (std::size_t b = a + 1; b < ids.size(); ++b) {
          s.terms.push_back(difference_of_means(index.group(ids[a]), index.group(ids[b])));
        }
      }
      break;
    case MetricKind::kCAL: {
      const auto positives = index.label(1);
      if (positives.empty()) break;
      for (int h : ids) {
        const auto cell = index.cell(h, 1);
        if (cell.empty()) continue;
        s.terms.push_back(difference_of_means(positives, cell));
      }
      break;
    }
    case MetricKind::kCON:
      break;
  }
  if (s.terms.empty()) {
    throw ContractError(std::string(to_string(kind)) +
                        ": every index set used by the surrogate is empty");
  }
  return s;
}

double term_value(const Term& t, std::span<const double> losses) {
  double v = 0.0;
  for (const auto& [row, c] : t.coef) v += c * losses[row];
  return v;
}

}  // namespace

std::string_view to_string(MetricKind kind) {
  switch (kind) {
    case MetricKind::kEO: return "eo";
    case MetricKind::kDP: return "dp";
    case MetricKind::kCAL: return "cal";
    case MetricKind::kCON: return "con";
  }
  return "?";
}

MetricKind parse_metric(std::string_view name) {
  for (MetricKind k : kAllMetrics) {
    if (name == to_string(k)) return k;
  }
  throw ContractError("unknown fairness metric '" + std::string(name) + "'");
}

GroupIndex::GroupIndex(const TabularDataset& data) {
  if (data.groups.size() != data.size()) {
    throw ContractError("GroupIndex: dataset has no group column");
  }
  for (std::size_t i = 0; i < data.size(); ++i) {
    const int g = data.groups[i];
    const int y = label_class(data.labels[i]);
    cells_[{g, y}].push_back(i);
    groups_[g].push_back(i);
    labels_[y].push_back(i);
  }
  for (const auto& [g, rows] : groups_) ids_.push_back(g);
}

std::span<const std::size_t> GroupIndex::cell(int group, int label) const {
  const auto it = cells_.find({group, label});
  return it == cells_.end() ? std::span<const std::size_t>(kNoRows) : it->second;
}

std::span<const std::size_t> GroupIndex::group(int group) const {
  const auto it = groups_.find(group);
  return it == groups_.end() ? std::span<const std::size_t>(kNoRows) : it->second;
}

std::span<const std::size_t> GroupIndex::label(int label) const {
  if (label != 0 && label != 1) return kNoRows;
  return labels_[static_cast<std::size_t>(label)];
}

NeighborGraph::NeighborGraph(const Matrix& features, std::size_t k) : k_(k) {
  const std::size_t n = features.rows();
  const std::size_t p = features.cols();
  if (k == 0 || k >= n) {
    throw ContractError("NeighborGraph: k must satisfy 0 < k < rows (k=" + std::to_string(k) +
                        ", rows=" + std::to_string(n) + ")");
  }
  Matrix z = features;
  for (std::size_t c = 0; c < p; ++c) {
    double mean = 0.0;
    for (std::size_t r = 0; r < n; ++r) mean += z(r, c);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t r = 0; r < n; ++r) var += (z(r, c) - mean) * (z(r, c) - mean);
    const double sd = std::sqrt(var / static_cast<double>(n));
    const double inv = sd > 0.0 ? 1.0 / sd : 1.0;
    for (std::size_t r = 0; r < n; ++r) z(r, c) = (z(r, c) - mean) * inv;
  }

  flat_.reserve(n * k);
  std::vector<std::pair<double, std::size_t>> dist;
  dist.reserve(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    dist.clear();
    const auto zi = z.row(i);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const auto zj = z.row(j);
      double d = 0.0;
      for (std::size_t c = 0; c < p; ++c) d += (zi[c] - zj[c]) * (zi[c] - zj[c]);
      dist.emplace_back(d, j);
    }
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
    for (std::size_t m = 0; m < k; ++m) flat_.push_back(dist[m].second);
  }
}

double bias_score_from_predictions(MetricKind kind, std::span<const int> predicted,
                                   const TabularDataset& data, const NeighborGraph* neighbors) {
  if (predicted.size() != data.size()) {
    throw ContractError("bias_score: prediction count != dataset size");
  }
  if (kind == MetricKind::kCON) {
    const NeighborGraph& nb = require_neighbors(neighbors, data);
    if (data.empty()) return 0.0;
    double total = 0.0;
    for (std::size_t z = 0; z < data.size(); ++z) {
      double mean = 0.0;
      for (std::size_t q : nb.neighbors(z)) mean += predicted[q];
      mean /= static_cast<double>(nb.k());
      total += std::abs(static_cast<double>(predicted[z]) - mean);
    }
    return total / static_cast<double>(data.size());
  }

  require_groups(data, kind);
  const GroupIndex index(data);
  const auto& ids = index.group_ids();
  double worst = 0.0;
  switch (kind) {
    case MetricKind::kEO:
      require_two_groups(index, kind);
      for (int y : {0, 1}) {
        for (std::size_t a = 0; a < ids.size(); ++a) {
          for (std::size_t b = a + 1; b < ids.size(); ++b) {
            const auto ca = index.cell(ids[a], y);
            const auto cb = index.cell(ids[b], y);
            if (ca.empty() || cb.empty()) continue;
            worst = std::max(worst,
                             std::abs(positive_rate(ca, predicted) - positive_rate(cb, predicted)));
          }
        }
      }
      break;
    case MetricKind::kDP:
      require_two_groups(index, kind);
      for (std::size_t a = 0; a < ids.size(); ++a) {
        for (std::size_t b = a + 1; b < ids.size(); ++b) {
          worst = std::max(worst, std::abs(positive_rate(index.group(ids[a]), predicted) -
                                           positive_rate(index.group(ids[b]), predicted)));
        }
      }
      break;
    case MetricKind::kCAL: {
      auto precision = [&](std::span<const std::size_t> rows, bool& defined) {
        std::size_t flagged = 0, hits = 0;
        for (std::size_t r : rows) {
          if (predicted[r] == 0) continue;
          ++flagged;
          hits += static_cast<std::size_t>(label_class(data.labels[r]));
        }
        defined = flagged > 0;
        return defined ? static_cast<double>(hits) / static_cast<double>(flagged) : 0.0;
      };
      std::vector<std::size_t> all(data.size());
      for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
      bool defined = false;
      const double overall = precision(all, defined);
      if (!defined) break;
      for (int h : ids) {
        const double ph = precision(index.group(h), defined);
        if (defined) worst = std::max(worst, std::abs(ph - overall));
      }
      break;
    }
    case MetricKind::kCON:
      break;
  }
  return worst;
}

double bias_score(MetricKind kind, const ModelParams& params, const TabularDataset& data,
                  double threshold, const NeighborGraph* neighbors) {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw ContractError("bias_score: threshold must lie in (0,1)");
  }
  const std::vector<double> p = predict_prob(params, data.features);
  std::vector<int> predicted(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) predicted[i] = p[i] >= threshold ? 1 : 0;
  return bias_score_from_predictions(kind, predicted, data, neighbors);
}

double surrogate_loss(MetricKind kind, const ModelParams& params, const TabularDataset& data,
                      const NeighborGraph* neighbors) {
  const Surrogate s = build_surrogate(kind, data, neighbors);
  const std::vector<double> losses = per_sample_loss(params, data);
  double total = 0.0;
  for (const Term& t : s.terms) total += std::abs(term_value(t, losses));
  return s.scale * total;
}

Update surrogate_grad(MetricKind kind, const ModelParams& params, const TabularDataset& data,
                      const NeighborGraph* neighbors) {
  const Surrogate s = build_surrogate(kind, data, neighbors);
  const std::vector<double> losses = per_sample_loss(params, data);
  std::vector<double> weights(data.size(), 0.0);
  for (const Term& t : s.terms) {
    const double v = term_value(t, losses);
    const double sign = v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
    if (sign == 0.0) continue;
    for (const auto& [row, c] : t.coef) weights[row] += s.scale * sign * c;
  }
  return weighted_loss_grad(params, data, weights);
}

}  // namespace fedfair::fairness
