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

// Backpropagation kernel shared by the first- and second-order paths.
//
// The kernel is written once over a scalar type T. With T = double it
// produces gradients. With T = Dual, seeding the parameter tangents with a
// direction v, the tangent of every produced gradient is its directional
// derivative along v: the tangent of the parameter gradient is H v, and the
// tangents of the input/label gradients are d(v . grad_w)/dX and
// d(v . grad_w)/dy by symmetry of second derivatives. That is exactly what
// reverse-mode differentiation through an unrolled gradient step needs.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "fedfair/matrix.hpp"
#include "fedfair/model.hpp"

namespace fedfair::detail {

struct Dual {
  double v = 0.0;
  double d = 0.0;
};

inline Dual operator+(Dual a, Dual b) { return {a.v + b.v, a.d + b.d}; }
inline Dual operator-(Dual a, Dual b) { return {a.v - b.v, a.d - b.d}; }
inline Dual operator*(Dual a, Dual b) { return {a.v * b.v, a.d * b.v + a.v * b.d}; }
inline Dual operator+(Dual a, double b) { return {a.v + b, a.d}; }
inline Dual operator-(double a, Dual b) { return {a - b.v, -b.d}; }
inline Dual operator-(Dual a, double b) { return {a.v - b, a.d}; }
inline Dual operator*(Dual a, double b) { return {a.v * b, a.d * b}; }
inline Dual operator*(double a, Dual b) { return {a * b.v, a * b.d}; }
inline Dual operator-(Dual a) { return {-a.v, -a.d}; }
inline Dual& operator+=(Dual& a, Dual b) { a.v += b.v; a.d += b.d; return a; }

inline double value_of(double x) { return x; }
inline double value_of(Dual x) { return x.v; }

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}
inline Dual sigmoid(Dual z) {
  const double s = sigmoid(z.v);
  return {s, s * (1.0 - s) * z.d};
}

template <class T>
T activate(Activation act, T pre) {
  if (act == Activation::kSigmoid) return sigmoid(pre);
  return value_of(pre) > 0.0 ? pre : T{};
}

template <class T>
T activation_slope(Activation act, T pre, T post) {
  if (act == Activation::kSigmoid) return post * (1.0 - post);
  return T{value_of(pre) > 0.0 ? 1.0 : 0.0};
}

/// Offsets of each layer's weights and biases inside the flat vector.
struct Layout {
  std::vector<std::size_t> dims;  // input, hidden..., 1
  std::vector<std::size_t> weight_offset;
  std::vector<std::size_t> bias_offset;
  std::size_t total = 0;

  explicit Layout(const ModelShape& shape) {
    dims.push_back(shape.input_dim);
    dims.insert(dims.end(), shape.hidden_dims.begin(), shape.hidden_dims.end());
    dims.push_back(1);
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
      weight_offset.push_back(total);
      total += dims[l + 1] * dims[l];
      bias_offset.push_back(total);
      total += dims[l + 1];
    }
  }
  std::size_t layers() const { return weight_offset.size(); }
};

template <class T>
struct KernelResult {
  std::vector<T> param_grad;
  std::vector<T> input_grad;  // rows x input_dim, filled when requested
  std::vector<T> label_grad;  // rows, filled when requested
  std::vector<double> logits;
  double weighted_loss = 0.0;
};

inline double clamped_bce(double p, double y) {
  const double q = std::clamp(p, kProbabilityClamp, 1.0 - kProbabilityClamp);
  return -y * std::log(q) - (1.0 - y) * std::log(1.0 - q);
}

/// Accumulates sum_i weight[i] * grad l_i, where l_i is the cross-entropy of
/// row i. When `data_grads` is set also fills the gradients with respect to
/// the inputs and labels; the label derivative is the unclamped -weight * z.
template <class T>
KernelResult<T> backprop(const ModelShape& shape, const Layout& layout,
                         std::span<const T> w, const Matrix& x,
                         std::span<const double> y, std::span<const double> weight,
                         bool data_grads) {
  const std::size_t n = x.rows();
  const std::size_t layers = layout.layers();
  KernelResult<T> out;
  out.param_grad.assign(layout.total, T{});
  out.logits.resize(n);
  if (data_grads) {
    out.input_grad.assign(n * shape.input_dim, T{});
    out.label_grad.assign(n, T{});
  }

  std::vector<std::vector<T>> pre(layers + 1);
  std::vector<std::vector<T>> act(layers + 1);
  for (std::size_t l = 0; l <= layers; ++l) {
    pre[l].resize(layout.dims[l]);
    act[l].resize(layout.dims[l]);
  }
  std::vector<T> delta;
  std::vector<T> prev;

  for (std::size_t i = 0; i < n; ++i) {
    const auto row = x.row(i);
    for (std::size_t k = 0; k < layout.dims[0]; ++k) act[0][k] = T{row[k]};

    for (std::size_t l = 0; l < layers; ++l) {
      const std::size_t in = layout.dims[l];
      const std::size_t outd = layout.dims[l + 1];
      const T* wl = w.data() + layout.weight_offset[l];
      const T* bl = w.data() + layout.bias_offset[l];
      for (std::size_t j = 0; j < outd; ++j) {
        T s = bl[j];
        const T* wr = wl + j * in;
        for (std::size_t k = 0; k < in; ++k) s += wr[k] * act[l][k];
        pre[l + 1][j] = s;
        act[l + 1][j] = (l + 1 < layers) ? activate(shape.activation, s) : s;
      }
    }

    const T z = act[layers][0];
    const T p = sigmoid(z);
    out.logits[i] = value_of(z);
    out.weighted_loss += weight[i] * clamped_bce(value_of(p), y[i]);

    delta.assign(1, (p - y[i]) * weight[i]);
    for (std::size_t l = layers; l-- > 0;) {
      const std::size_t in = layout.dims[l];
      const std::size_t outd = layout.dims[l + 1];
      const T* wl = w.data() + layout.weight_offset[l];
      T* gw = out.param_grad.data() + layout.weight_offset[l];
      T* gb = out.param_grad.data() + layout.bias_offset[l];
      for (std::size_t j = 0; j < outd; ++j) {
        gb[j] += delta[j];
        T* gr = gw + j * in;
        for (std::size_t k = 0; k < in; ++k) gr[k] += delta[j] * act[l][k];
      }
      if (l == 0 && !data_grads) break;
      prev.assign(in, T{});
      for (std::size_t j = 0; j < outd; ++j) {
        const T* wr = wl + j * in;
        for (std::size_t k = 0; k < in; ++k) prev[k] += wr[k] * delta[j];
      }
      if (l > 0) {
        for (std::size_t k = 0; k < in; ++k) {
          prev[k] = prev[k] * activation_slope(shape.activation, pre[l][k], act[l][k]);
        }
      }
      delta.swap(prev);
    }
    if (data_grads) {
      for (std::size_t k = 0; k < shape.input_dim; ++k) {
        out.input_grad[i * shape.input_dim + k] = delta[k];
      }
      out.label_grad[i] = z * (-weight[i]);
    }
  }
  return out;
}

}  // namespace fedfair::detail
