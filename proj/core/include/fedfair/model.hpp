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

// Binary classifiers (logistic regression and fully connected MLPs with a
// single logit) with exact analytic first and second order derivatives.
//
// Every function here is pure. Parameters are stored flat, layer by layer:
// the weight matrix of a layer (out x in, row-major) followed by its bias.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "fedfair/matrix.hpp"

namespace fedfair {

/// Probabilities are clamped to [kProbabilityClamp, 1 - kProbabilityClamp]
/// before taking logs.
inline constexpr double kProbabilityClamp = 1e-12;

enum class Activation { kRelu, kSigmoid };

std::string_view to_string(Activation activation);
/// Throws ContractError for anything other than "relu" / "sigmoid".
Activation parse_activation(std::string_view name);

/// Layer sizes and hidden activation. An empty `hidden_dims` is logistic
/// regression. The output is always a single logit.
struct ModelShape {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden_dims;
  Activation activation = Activation::kRelu;

  std::size_t param_count() const;
  bool is_logistic() const noexcept { return hidden_dims.empty(); }
  /// True when both shapes lay out parameters identically; the activation
  /// may differ.
  bool same_layout(const ModelShape& other) const noexcept;

  friend bool operator==(const ModelShape&, const ModelShape&) = default;
};

/// A gradient-shaped vector: client updates, calibrated updates, aggregates.
class Update {
 public:
  Update() = default;
  explicit Update(std::size_t dim) : values_(dim, 0.0) {}
  explicit Update(std::vector<double> values) : values_(std::move(values)) {}

  std::size_t dim() const noexcept { return values_.size(); }
  std::span<const double> values() const noexcept { return values_; }
  std::span<double> values() noexcept { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }

  Update& operator+=(const Update& other);
  Update& operator*=(double scale);
  /// this += scale * other
  Update& axpy(double scale, const Update& other);

  double dot(const Update& other) const;
  double norm() const;
  bool all_finite() const noexcept;

  friend bool operator==(const Update&, const Update&) = default;

 private:
  std::vector<double> values_;
};

/// Flat parameter vector of a classifier. All entries are finite; every
/// mutating operation checks that and throws NumericError otherwise.
class ModelParams {
 public:
  ModelParams() = default;
  /// All-zero parameters.
  explicit ModelParams(ModelShape shape);
  ModelParams(ModelShape shape, std::vector<double> values);

  /// Xavier-uniform weights, zero biases.
  static ModelParams xavier(ModelShape shape, std::uint64_t seed);

  const ModelShape& shape() const noexcept { return shape_; }
  std::size_t dim() const noexcept { return values_.size(); }
  std::span<const double> values() const noexcept { return values_; }

  /// this - lr * direction
  ModelParams stepped(const Update& direction, double lr) const;
  /// this - other, as an update-shaped vector.
  Update minus(const ModelParams& other) const;
  double squared_distance(const ModelParams& other) const;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;

 private:
  ModelShape shape_;
  std::vector<double> values_;
};

/// Rows of features with labels in [0, 1] (hard 0/1 for real data, soft for
/// synthetic data). `groups` holds the sensitive attribute per row and may be
/// empty when no fairness evaluation is needed. `classes` optionally keeps a
/// finer-grained class id (e.g. the original digit) used for label sharding.
struct SampleBatch {
  Matrix features;
  std::vector<double> labels;
  std::vector<int> groups;
  std::vector<int> classes;

  std::size_t size() const noexcept { return labels.size(); }
  bool empty() const noexcept { return labels.empty(); }
  /// Throws ContractError when column lengths disagree or labels leave [0,1].
  void validate() const;
  SampleBatch subset(std::span<const std::size_t> rows) const;

  friend bool operator==(const SampleBatch&, const SampleBatch&) = default;
};

/// The unit held by clients, the server's synthetic set, and test sets.
using TabularDataset = SampleBatch;

std::vector<double> logits(const ModelParams& params, const Matrix& features);
/// Sigmoid of the logits, clamped like the loss so it stays inside (0, 1).
std::vector<double> predict_prob(const ModelParams& params, const Matrix& features);

/// Elementwise binary cross-entropy with clamped probabilities.
std::vector<double> per_sample_loss(const ModelParams& params, const SampleBatch& batch);

struct LossAndGrad {
  double loss = 0.0;
  Update grad;
};

/// Mean cross-entropy plus `l2 / 2 * ||w||^2` and its exact gradient.
LossAndGrad loss_and_grad(const ModelParams& params, const SampleBatch& batch,
                          double l2 = 0.0);

/// Mean cross-entropy plus the L2 term, without the gradient.
double mean_loss(const ModelParams& params, const SampleBatch& batch, double l2 = 0.0);

/// sum_i weights[i] * grad l_i(params). The building block for fairness
/// surrogates, which are signed combinations of per-sample losses.
Update weighted_loss_grad(const ModelParams& params, const SampleBatch& batch,
                          std::span<const double> weights);

/// Hessian of loss_and_grad's objective applied to `direction`.
Update hessian_vector_product(const ModelParams& params, const SampleBatch& batch,
                              const Update& direction, double l2 = 0.0);

/// `steps` full-batch gradient-descent steps. lr >= 0, steps >= 1.
ModelParams sgd_steps(ModelParams params, const SampleBatch& batch, double lr,
                      std::size_t steps, double l2 = 0.0);

struct DataGradient {
  Matrix features;
  std::vector<double> labels;
};

/// Exact gradient of ||sgd_steps(start, batch, lr, steps) - target||^2 with
/// respect to the batch features and (soft) labels, by reverse-mode
/// differentiation through the unrolled steps, second-order terms included.
/// Throws NumericError naming the step if the unroll diverges.
DataGradient unrolled_grad_wrt_data(const ModelParams& start, const SampleBatch& batch,
                                    double lr, std::size_t steps,
                                    const ModelParams& target, double l2 = 0.0);

/// Fraction of rows where 1[p >= threshold] equals 1[label >= 0.5].
double accuracy(const ModelParams& params, const SampleBatch& batch,
                double threshold = 0.5);

}  // namespace fedfair
