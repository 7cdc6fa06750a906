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

// Dataset sources and plumbing: the biased tabular generator, the MNIST IDX
// reader, client partitioning and the dataset CSV format.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <variant>
#include <vector>

#include "fedfair/model.hpp"

namespace fedfair::data {

/// Per-group knobs of the generator.
struct GroupBias {
  double proportion = 0.5;
  /// Probability that a positive label is recorded as negative, in [0, 0.5).
  double flip_rate = 0.0;
  /// Mean shift of the group's features towards the negative class.
  double shift = 0.0;
};

/// Two-group binary classification data with controllable injected bias.
/// Features are Gaussian around +-separation/2 along the all-ones direction,
/// then shifted per group; labels of each group are flipped 1 -> 0 at that
/// group's rate. Group A has id 0 and group B id 1.
struct BiasedTabularSpec {
  std::size_t samples = 10000;
  std::size_t features = 4;
  double separation = 2.0;
  GroupBias group_a{0.5, 0.0, 0.0};
  GroupBias group_b{0.5, 0.0, 0.0};
  /// Append the group id as the last feature column.
  bool group_feature = true;
  std::uint64_t seed = 0;

  /// Throws ContractError on an invalid spec.
  void validate() const;
  std::size_t input_dim() const noexcept { return features + (group_feature ? 1 : 0); }
};

TabularDataset generate_biased_tabular(const BiasedTabularSpec& spec);

struct IdxOptions {
  /// label = 1[digit >= positive_from_digit]
  int positive_from_digit = 5;
};

/// Reads an IDX3 image file and an IDX1 label file. Pixels are scaled to
/// [0,1], the group is the digit's parity (odd = 1) and `classes` keeps the
/// digit. Throws ParseError with the byte offset of the first problem.
TabularDataset load_idx(const std::filesystem::path& images,
                        const std::filesystem::path& labels, const IdxOptions& options = {});
TabularDataset load_idx_bytes(std::span<const std::uint8_t> images,
                              std::span<const std::uint8_t> labels,
                              const IdxOptions& options = {});

struct Iid {};
/// Each client receives rows from exactly `labels_per_client` class values
/// (the `classes` column when present, the binary label otherwise).
struct LabelShard {
  std::size_t labels_per_client = 1;
};
using PartitionScheme = std::variant<Iid, LabelShard>;

/// Disjoint covering partition into `clients` datasets. Rows keep their
/// original relative order inside each client. Throws ContractError when the
/// request cannot be satisfied.
std::vector<TabularDataset> partition(const TabularDataset& data, std::size_t clients,
                                      const PartitionScheme& scheme, std::uint64_t seed);

/// Row indices of each client, the index form of partition().
std::vector<std::vector<std::size_t>> partition_indices(const TabularDataset& data,
                                                        std::size_t clients,
                                                        const PartitionScheme& scheme,
                                                        std::uint64_t seed);

struct Split {
  TabularDataset train;
  TabularDataset test;
};
Split train_test_split(const TabularDataset& data, double test_fraction, std::uint64_t seed);

/// CSV with header `f0,...,f{p-1},group,label`, '.' decimals, '\n' endings.
void write_dataset_csv(std::ostream& out, const TabularDataset& data);
/// Throws ParseError with a 1-based line number.
TabularDataset read_dataset_csv(std::istream& in);

}  // namespace fedfair::data
