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

#include "fedfair/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <iterator>
#include <numeric>
#include <ostream>
#include <random>
#include <set>
#include <string>

#include "fedfair/error.hpp"
#include "fedfair/fairness.hpp"
#include "fedfair/detail/text_util.hpp"

namespace fedfair::data {

namespace {

constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset,
                        const char* what) {
  if (offset + 4 > bytes.size()) {
    throw ParseError(std::string(what) + ": truncated header at byte " + std::to_string(offset) +
                         " (missing " + std::to_string(offset + 4 - bytes.size()) + " bytes)",
                     bytes.size());
  }
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

std::vector<std::uint8_t> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string(), 0);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  return idx;
}

void check_bias(const GroupBias& g, const char* name) {
  if (!(g.flip_rate >= 0.0 && g.flip_rate < 0.5)) {
    throw ContractError(std::string("BiasedTabularSpec: ") + name + " flip rate must be in [0, 0.5)");
  }
  if (!(g.proportion >= 0.0 && g.proportion <= 1.0)) {
    throw ContractError(std::string("BiasedTabularSpec: ") + name + " proportion outside [0,1]");
  }
  if (!std::isfinite(g.shift)) throw ContractError("BiasedTabularSpec: non-finite shift");
}

}  // namespace

void BiasedTabularSpec::validate() const {
  if (samples == 0) throw ContractError("BiasedTabularSpec: samples must be >= 1");
  if (features == 0) throw ContractError("BiasedTabularSpec: features must be >= 1");
  check_bias(group_a, "group A");
  check_bias(group_b, "group B");
  if (std::abs(group_a.proportion + group_b.proportion - 1.0) > 1e-9) {
    throw ContractError("BiasedTabularSpec: group proportions must sum to 1");
  }
}

TabularDataset generate_biased_tabular(const BiasedTabularSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double along = 1.0 / std::sqrt(static_cast<double>(spec.features));
  const double half = 0.5 * spec.separation;

  TabularDataset d;
  d.features = Matrix(spec.samples, spec.input_dim());
  d.labels.resize(spec.samples);
  d.groups.resize(spec.samples);
  for (std::size_t i = 0; i < spec.samples; ++i) {
    const int group = unit(rng) < spec.group_b.proportion ? 1 : 0;
    const GroupBias& bias = group == 1 ? spec.group_b : spec.group_a;
    const int truth = unit(rng) < 0.5 ? 1 : 0;
    const double centre = (truth == 1 ? half : -half) - bias.shift;
    for (std::size_t j = 0; j < spec.features; ++j) {
      d.features(i, j) = centre * along + noise(rng);
    }
    if (spec.group_feature) d.features(i, spec.features) = group;
    const bool flipped = truth == 1 && unit(rng) < bias.flip_rate;
    d.labels[i] = flipped ? 0.0 : static_cast<double>(truth);
    d.groups[i] = group;
  }
  return d;
}

TabularDataset load_idx_bytes(std::span<const std::uint8_t> images,
                              std::span<const std::uint8_t> labels, const IdxOptions& options) {
  const std::uint32_t img_magic = read_be32(images, 0, "IDX images");
  if (img_magic != kIdxImagesMagic) {
    throw ParseError("IDX images: bad magic number at byte 0", 0);
  }
  const std::uint32_t count = read_be32(images, 4, "IDX images");
  const std::uint32_t rows = read_be32(images, 8, "IDX images");
  const std::uint32_t cols = read_be32(images, 12, "IDX images");
  const std::uint32_t lbl_magic = read_be32(labels, 0, "IDX labels");
  if (lbl_magic != kIdxLabelsMagic) {
    throw ParseError("IDX labels: bad magic number at byte 0", 0);
  }
  const std::uint32_t label_count = read_be32(labels, 4, "IDX labels");
  if (label_count != count) {
    throw ParseError("IDX: image count " + std::to_string(count) + " != label count " +
                         std::to_string(label_count) + " (byte 4)",
                     4);
  }

  const std::size_t pixels = std::size_t{rows} * cols;
  const std::size_t img_need = 16 + std::size_t{count} * pixels;
  if (images.size() < img_need) {
    throw ParseError("IDX images: truncated payload at byte " + std::to_string(images.size()) +
                         " (missing " + std::to_string(img_need - images.size()) + " bytes)",
                     images.size());
  }
  const std::size_t lbl_need = 8 + std::size_t{count};
  if (labels.size() < lbl_need) {
    throw ParseError("IDX labels: truncated payload at byte " + std::to_string(labels.size()) +
                         " (missing " + std::to_string(lbl_need - labels.size()) + " bytes)",
                     labels.size());
  }

  TabularDataset d;
  d.features = Matrix(count, pixels);
  d.labels.resize(count);
  d.groups.resize(count);
  d.classes.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint8_t* px = images.data() + 16 + i * pixels;
    for (std::size_t j = 0; j < pixels; ++j) d.features(i, j) = px[j] / 255.0;
    const int digit = labels[8 + i];
    if (digit > 9) {
      throw ParseError("IDX labels: label " + std::to_string(digit) + " out of range at byte " +
                           std::to_string(8 + i),
                       8 + i);
    }
    d.classes[i] = digit;
    d.labels[i] = digit >= options.positive_from_digit ? 1.0 : 0.0;
    d.groups[i] = digit % 2;
  }
  return d;
}

TabularDataset load_idx(const std::filesystem::path& images,
                        const std::filesystem::path& labels, const IdxOptions& options) {
  const auto img = slurp(images);
  const auto lbl = slurp(labels);
  return load_idx_bytes(img, lbl, options);
}

std::vector<std::vector<std::size_t>> partition_indices(const TabularDataset& data,
                                                        std::size_t clients,
                                                        const PartitionScheme& scheme,
                                                        std::uint64_t seed) {
  const std::size_t n = data.size();
  if (clients == 0) throw ContractError("partition: need at least one client");
  std::vector<std::vector<std::size_t>> out(clients);

  if (std::holds_alternative<Iid>(scheme)) {
    if (clients > n) {
      throw ContractError("partition: " + std::to_string(clients) + " clients for " +
                          std::to_string(n) + " rows");
    }
    const auto idx = shuffled_indices(n, seed);
    for (std::size_t c = 0; c < clients; ++c) {
      const std::size_t lo = c * n / clients;
      const std::size_t hi = (c + 1) * n / clients;
      out[c].assign(idx.begin() + static_cast<std::ptrdiff_t>(lo),
                    idx.begin() + static_cast<std::ptrdiff_t>(hi));
      std::sort(out[c].begin(), out[c].end());
    }
    return out;
  }

  const std::size_t per = std::get<LabelShard>(scheme).labels_per_client;
  auto class_of = [&](std::size_t i) {
    return data.classes.empty() ? fairness::label_class(data.labels[i]) : data.classes[i];
  };
  std::set<int> distinct;
  for (std::size_t i = 0; i < n; ++i) distinct.insert(class_of(i));
  const std::vector<int> classes(distinct.begin(), distinct.end());
  if (per == 0 || per > classes.size()) {
    throw ContractError("partition: labels_per_client=" + std::to_string(per) + " infeasible with " +
                        std::to_string(classes.size()) + " label values");
  }
  if (clients * per < classes.size()) {
    throw ContractError("partition: " + std::to_string(clients) + " clients x " +
                        std::to_string(per) + " labels cannot cover " +
                        std::to_string(classes.size()) + " label values");
  }

  std::vector<std::vector<std::size_t>> holders(classes.size());
  for (std::size_t c = 0; c < clients; ++c) {
    for (std::size_t j = 0; j < per; ++j) holders[(c * per + j) % classes.size()].push_back(c);
  }
  std::mt19937_64 rng(seed);
  for (std::size_t k = 0; k < classes.size(); ++k) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < n; ++i) {
      if (class_of(i) == classes[k]) rows.push_back(i);
    }
    const std::size_t h = holders[k].size();
    if (rows.size() < h) {
      throw ContractError("partition: label value " + std::to_string(classes[k]) + " has " +
                          std::to_string(rows.size()) + " rows for " + std::to_string(h) +
                          " clients");
    }
    std::shuffle(rows.begin(), rows.end(), rng);
    for (std::size_t s = 0; s < h; ++s) {
      const std::size_t lo = s * rows.size() / h;
      const std::size_t hi = (s + 1) * rows.size() / h;
      auto& dst = out[holders[k][s]];
      dst.insert(dst.end(), rows.begin() + static_cast<std::ptrdiff_t>(lo),
                 rows.begin() + static_cast<std::ptrdiff_t>(hi));
    }
  }
  for (auto& rows : out) std::sort(rows.begin(), rows.end());
  return out;
}

std::vector<TabularDataset> partition(const TabularDataset& data, std::size_t clients,
                                      const PartitionScheme& scheme, std::uint64_t seed) {
  std::vector<TabularDataset> out;
  for (const auto& rows : partition_indices(data, clients, scheme, seed)) {
    out.push_back(data.subset(rows));
  }
  return out;
}

Split train_test_split(const TabularDataset& data, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ContractError("train_test_split: test_fraction must lie in (0,1)");
  }
  auto idx = shuffled_indices(data.size(), seed);
  const auto test_n = static_cast<std::size_t>(
      std::llround(test_fraction * static_cast<double>(data.size())));
  std::vector<std::size_t> test(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(test_n));
  std::vector<std::size_t> train(idx.begin() + static_cast<std::ptrdiff_t>(test_n), idx.end());
  std::sort(test.begin(), test.end());
  std::sort(train.begin(), train.end());
  return {data.subset(train), data.subset(test)};
}

void write_dataset_csv(std::ostream& out, const TabularDataset& data) {
  data.validate();
  if (data.groups.size() != data.size()) {
    throw ContractError("write_dataset_csv: dataset has no group column");
  }
  const std::size_t p = data.features.cols();
  for (std::size_t j = 0; j < p; ++j) out << 'f' << j << ',';
  out << "group,label\n";
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (std::size_t j = 0; j < p; ++j) out << detail::format_double(data.features(i, j)) << ',';
    out << data.groups[i] << ',' << detail::format_double(data.labels[i]) << '\n';
  }
}

TabularDataset read_dataset_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("dataset CSV: missing header", 1);
  const auto header = detail::split_csv_line(line);
  if (header.size() < 2 || header[header.size() - 2] != "group" || header.back() != "label") {
    throw ParseError("dataset CSV: header must end with group,label", 1);
  }
  const std::size_t p = header.size() - 2;
  for (std::size_t j = 0; j < p; ++j) {
    if (header[j] != "f" + std::to_string(j)) {
      throw ParseError("dataset CSV: expected column f" + std::to_string(j), 1);
    }
  }
  TabularDataset d;
  std::vector<double> row(p);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != p + 2) {
      throw ParseError("dataset CSV: expected " + std::to_string(p + 2) + " fields on line " +
                           std::to_string(line_no),
                       line_no);
    }
    for (std::size_t j = 0; j < p; ++j) {
      const auto v = detail::parse_double(cells[j]);
      if (!v) throw ParseError("dataset CSV: bad number on line " + std::to_string(line_no), line_no);
      row[j] = *v;
    }
    const auto g = detail::parse_double(cells[p]);
    const auto y = detail::parse_double(cells[p + 1]);
    if (!g || !y || *g != std::floor(*g)) {
      throw ParseError("dataset CSV: bad group/label on line " + std::to_string(line_no), line_no);
    }
    if (p == 0) {
      d.features = Matrix(d.features.rows() + 1, 0);
    } else {
      d.features.push_row(row);
    }
    d.groups.push_back(static_cast<int>(*g));
    d.labels.push_back(*y);
  }
  if (p > 0 && d.features.cols() == 0) d.features = Matrix(0, p);
  d.validate();
  return d;
}

}  // namespace fedfair::data
