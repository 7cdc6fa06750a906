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

#include "fedfair/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "fedfair/error.hpp"
#include "mlp_kernel.hpp"

namespace fedfair {

namespace {

bool finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

void require_width(const ModelShape& shape, const Matrix& features, const char* where) {
  if (features.cols() != shape.input_dim && features.rows() > 0) {
    throw ContractError(std::string(where) + ": feature width " +
                        std::to_string(features.cols()) + " != input_dim " +
                        std::to_string(shape.input_dim));
  }
}

void require_batch(const ModelParams& params, const SampleBatch& batch, const char* where) {
  require_width(params.shape(), batch.features, where);
  if (batch.features.rows() != batch.labels.size()) {
    throw ContractError(std::string(where) + ": features/labels row mismatch");
  }
}

std::vector<double> uniform_weights(std::size_t n) {
  return std::vector<double>(n, n == 0 ? 0.0 : 1.0 / static_cast<double>(n));
}

detail::KernelResult<double> run_first_order(const ModelParams& params,
                                             const SampleBatch& batch,
                                             std::span<const double> weights) {
  const detail::Layout layout(params.shape());
  return detail::backprop<double>(params.shape(), layout, params.values(), batch.features,
                                  batch.labels, weights, false);
}

}  // namespace

std::string_view to_string(Activation activation) {
  return activation == Activation::kRelu ? "relu" : "sigmoid";
}

Activation parse_activation(std::string_view name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "sigmoid") return Activation::kSigmoid;
  throw ContractError("unknown activation '" + std::string(name) + "'");
}

std::size_t ModelShape::param_count() const { return detail::Layout(*this).total; }

bool ModelShape::same_layout(const ModelShape& other) const noexcept {
  return input_dim == other.input_dim && hidden_dims == other.hidden_dims;
}

Update& Update::operator+=(const Update& other) { return axpy(1.0, other); }

Update& Update::operator*=(double scale) {
  for (double& v : values_) v *= scale;
  return *this;
}

Update& Update::axpy(double scale, const Update& other) {
  if (other.dim() != dim()) {
    throw ContractError("Update: dimension mismatch " + std::to_string(dim()) + " vs " +
                        std::to_string(other.dim()));
  }
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += scale * other.values_[i];
  return *this;
}

double Update::dot(const Update& other) const {
  if (other.dim() != dim()) throw ContractError("Update::dot: dimension mismatch");
  return std::inner_product(values_.begin(), values_.end(), other.values_.begin(), 0.0);
}

double Update::norm() const { return std::sqrt(dot(*this)); }

bool Update::all_finite() const noexcept { return finite(values_); }

ModelParams::ModelParams(ModelShape shape)
    : shape_(std::move(shape)), values_(shape_.param_count(), 0.0) {}

ModelParams::ModelParams(ModelShape shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  if (values_.size() != shape_.param_count()) {
    throw ContractError("ModelParams: " + std::to_string(values_.size()) +
                        " values for a shape with " +
                        std::to_string(shape_.param_count()) + " parameters");
  }
  if (!finite(values_)) throw NumericError("ModelParams: non-finite value", 0);
}

ModelParams ModelParams::xavier(ModelShape shape, std::uint64_t seed) {
  const detail::Layout layout(shape);
  std::vector<double> values(layout.total, 0.0);
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l < layout.layers(); ++l) {
    const double fan_in = static_cast<double>(layout.dims[l]);
    const double fan_out = static_cast<double>(layout.dims[l + 1]);
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (std::size_t i = layout.weight_offset[l]; i < layout.bias_offset[l]; ++i) {
      values[i] = dist(rng);
    }
  }
  return ModelParams(std::move(shape), std::move(values));
}

ModelParams ModelParams::stepped(const Update& direction, double lr) const {
  if (direction.dim() != dim()) {
    throw ContractError("ModelParams::stepped: update dimension " +
                        std::to_string(direction.dim()) + " != " + std::to_string(dim()));
  }
  std::vector<double> next(values_);
  for (std::size_t i = 0; i < next.size(); ++i) next[i] -= lr * direction[i];
  return ModelParams(shape_, std::move(next));
}

Update ModelParams::minus(const ModelParams& other) const {
  if (other.dim() != dim()) throw ContractError("ModelParams::minus: dimension mismatch");
  std::vector<double> d(values_.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = values_[i] - other.values_[i];
  return Update(std::move(d));
}

double ModelParams::squared_distance(const ModelParams& other) const {
  const Update d = minus(other);
  return d.dot(d);
}

void SampleBatch::validate() const {
  if (features.rows() != labels.size()) {
    throw ContractError("SampleBatch: " + std::to_string(features.rows()) +
                        " feature rows but " + std::to_string(labels.size()) + " labels");
  }
  if (!groups.empty() && groups.size() != labels.size()) {
    throw ContractError("SampleBatch: group column length mismatch");
  }
  if (!classes.empty() && classes.size() != labels.size()) {
    throw ContractError("SampleBatch: class column length mismatch");
  }
  for (double y : labels) {
    if (!(y >= 0.0 && y <= 1.0)) throw ContractError("SampleBatch: label outside [0,1]");
  }
}

SampleBatch SampleBatch::subset(std::span<const std::size_t> rows) const {
  SampleBatch out;
  out.features = features.select_rows(rows);
  out.labels.reserve(rows.size());
  for (std::size_t r : rows) out.labels.push_back(labels.at(r));
  if (!groups.empty()) {
    for (std::size_t r : rows) out.groups.push_back(groups.at(r));
  }
  if (!classes.empty()) {
    for (std::size_t r : rows) out.classes.push_back(classes.at(r));
  }
  return out;
}

std::vector<double> logits(const ModelParams& params, const Matrix& features) {
  require_width(params.shape(), features, "logits");
  const std::vector<double> zeros(features.rows(), 0.0);
  const detail::Layout layout(params.shape());
  return detail::backprop<double>(params.shape(), layout, params.values(), features, zeros,
                                  zeros, false)
      .logits;
}

std::vector<double> predict_prob(const ModelParams& params, const Matrix& features) {
  std::vector<double> z = logits(params, features);
  for (double& v : z) v = std::clamp(detail::sigmoid(v), kProbabilityClamp, 1.0 - kProbabilityClamp);
  return z;
}

std::vector<double> per_sample_loss(const ModelParams& params, const SampleBatch& batch) {
  require_batch(params, batch, "per_sample_loss");
  const std::vector<double> p = predict_prob(params, batch.features);
  std::vector<double> loss(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) loss[i] = detail::clamped_bce(p[i], batch.labels[i]);
  return loss;
}

LossAndGrad loss_and_grad(const ModelParams& params, const SampleBatch& batch, double l2) {
  require_batch(params, batch, "loss_and_grad");
  if (batch.empty()) throw ContractError("loss_and_grad: empty batch");
  const auto weights = uniform_weights(batch.size());
  auto result = run_first_order(params, batch, weights);
  const auto w = params.values();
  double reg = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    result.param_grad[i] += l2 * w[i];
    reg += w[i] * w[i];
  }
  return {result.weighted_loss + 0.5 * l2 * reg, Update(std::move(result.param_grad))};
}

double mean_loss(const ModelParams& params, const SampleBatch& batch, double l2) {
  const std::vector<double> losses = per_sample_loss(params, batch);
  if (losses.empty()) throw ContractError("mean_loss: empty batch");
  const double sum = std::accumulate(losses.begin(), losses.end(), 0.0);
  const auto w = params.values();
  const double reg = std::inner_product(w.begin(), w.end(), w.begin(), 0.0);
  return sum / static_cast<double>(losses.size()) + 0.5 * l2 * reg;
}

Update weighted_loss_grad(const ModelParams& params, const SampleBatch& batch,
                          std::span<const double> weights) {
  require_batch(params, batch, "weighted_loss_grad");
  if (weights.size() != batch.size()) {
    throw ContractError("weighted_loss_grad: weight count != batch size");
  }
  return Update(run_first_order(params, batch, weights).param_grad);
}

Update hessian_vector_product(const ModelParams& params, const SampleBatch& batch,
                              const Update& direction, double l2) {
  require_batch(params, batch, "hessian_vector_product");
  if (direction.dim() != params.dim()) {
    throw ContractError("hessian_vector_product: direction dimension mismatch");
  }
  if (batch.empty()) throw ContractError("hessian_vector_product: empty batch");
  const detail::Layout layout(params.shape());
  std::vector<detail::Dual> wd(params.dim());
  for (std::size_t i = 0; i < wd.size(); ++i) wd[i] = {params.values()[i], direction[i]};
  const auto weights = uniform_weights(batch.size());
  const auto res = detail::backprop<detail::Dual>(params.shape(), layout, wd, batch.features,
                                                  batch.labels, weights, false);
  std::vector<double> hv(params.dim());
  for (std::size_t i = 0; i < hv.size(); ++i) hv[i] = res.param_grad[i].d + l2 * direction[i];
  return Update(std::move(hv));
}

ModelParams sgd_steps(ModelParams params, const SampleBatch& batch, double lr,
                      std::size_t steps, double l2) {
  if (steps == 0) throw ContractError("sgd_steps: steps must be >= 1");
  if (!(lr >= 0.0)) throw ContractError("sgd_steps: lr must be >= 0");
  for (std::size_t s = 0; s < steps; ++s) {
    const Update g = loss_and_grad(params, batch, l2).grad;
    if (!g.all_finite()) throw NumericError("sgd_steps: non-finite gradient", s + 1);
    params = params.stepped(g, lr);
  }
  return params;
}

DataGradient unrolled_grad_wrt_data(const ModelParams& start, const SampleBatch& batch,
                                    double lr, std::size_t steps,
                                    const ModelParams& target, double l2) {
  require_batch(start, batch, "unrolled_grad_wrt_data");
  if (!start.shape().same_layout(target.shape())) {
    throw ContractError("unrolled_grad_wrt_data: start/target shape mismatch");
  }
  if (steps == 0) throw ContractError("unrolled_grad_wrt_data: steps must be >= 1");
  if (batch.empty()) throw ContractError("unrolled_grad_wrt_data: empty batch");

  const ModelShape& shape = start.shape();
  const detail::Layout layout(shape);
  const std::size_t d = start.dim();
  const std::size_t n = batch.size();
  const auto weights = uniform_weights(n);

  // Forward: keep every iterate; the reverse sweep linearizes around each.
  std::vector<std::vector<double>> iterates;
  iterates.reserve(steps + 1);
  iterates.emplace_back(start.values().begin(), start.values().end());
  for (std::size_t s = 0; s < steps; ++s) {
    const auto& w = iterates.back();
    auto res = detail::backprop<double>(shape, layout, std::span<const double>(w),
                                        batch.features, batch.labels, weights, false);
    std::vector<double> next(d);
    for (std::size_t i = 0; i < d; ++i) {
      next[i] = w[i] - lr * (res.param_grad[i] + l2 * w[i]);
      if (!std::isfinite(next[i])) {
        throw NumericError("unrolled_grad_wrt_data: iterate diverged", s + 1);
      }
    }
    iterates.push_back(std::move(next));
  }

  std::vector<double> adjoint(d);
  const auto target_values = target.values();
  for (std::size_t i = 0; i < d; ++i) adjoint[i] = 2.0 * (iterates.back()[i] - target_values[i]);

  DataGradient out{Matrix(n, shape.input_dim), std::vector<double>(n, 0.0)};
  std::vector<detail::Dual> wd(d);
  for (std::size_t s = steps; s-- > 0;) {
    for (std::size_t i = 0; i < d; ++i) wd[i] = {iterates[s][i], adjoint[i]};
    const auto res = detail::backprop<detail::Dual>(shape, layout, wd, batch.features,
                                                    batch.labels, weights, true);
    auto gx = out.features.values();
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] -= lr * res.input_grad[i].d;
    for (std::size_t i = 0; i < n; ++i) out.labels[i] -= lr * res.label_grad[i].d;
    for (std::size_t i = 0; i < d; ++i) {
      adjoint[i] -= lr * (res.param_grad[i].d + l2 * adjoint[i]);
    }
    if (!std::all_of(adjoint.begin(), adjoint.end(), [](double v) { return std::isfinite(v); })) {
      throw NumericError("unrolled_grad_wrt_data: adjoint diverged", s + 1);
    }
  }
  return out;
}

double accuracy(const ModelParams& params, const SampleBatch& batch, double threshold) {
  require_batch(params, batch, "accuracy");
  if (batch.empty()) return 0.0;
  const std::vector<double> p = predict_prob(params, batch.features);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const bool predicted = p[i] >= threshold;
    const bool actual = batch.labels[i] >= 0.5;
    hits += predicted == actual ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(p.size());
}

}  // namespace fedfair
