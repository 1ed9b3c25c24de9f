/*
 * Copyright 2026 sbfprune Contributors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#ifndef SBFPRUNE_NN_LAYERS_HPP
#define SBFPRUNE_NN_LAYERS_HPP

#include <Eigen/Dense>
#include <cmath>

#include "sbfprune/core/rng.hpp"
#include "sbfprune/core/tensor.hpp"
#include "sbfprune/nn/conv2d.hpp"

namespace sbf::nn {

template <typename T>
inline void relu(const Tensor<T>& x, Tensor<T>& y) {
  y.resize(x.shape());
  const std::size_t n = x.numel();
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
}

/// dx = dy where the forward OUTPUT was positive.
template <typename T>
inline void relu_backward(const Tensor<T>& y, const Tensor<T>& gy, Tensor<T>& gx) {
  gx.resize(y.shape());
  const std::size_t n = y.numel();
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < n; ++i) gx[i] = y[i] > T(0) ? gy[i] : T(0);
}

/// [N, C, H, W] -> [N, C]
template <typename T>
inline void global_avg_pool(const Tensor<T>& x, Tensor<T>& y) {
  const int n = x.dim(0), c = x.dim(1);
  const std::size_t hw = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
  y.resize({n, c});
#pragma omp parallel for schedule(static)
  for (int b = 0; b < n; ++b)
    for (int j = 0; j < c; ++j) {
      const T* p = x.data() + (static_cast<std::size_t>(b) * c + j) * hw;
      double s = 0.0;
      for (std::size_t i = 0; i < hw; ++i) s += static_cast<double>(p[i]);
      y(b, j) = static_cast<T>(s / static_cast<double>(hw));
    }
}

template <typename T>
inline void global_avg_pool_backward(const std::vector<int>& x_shape, const Tensor<T>& gy,
                                     Tensor<T>& gx) {
  gx.resize(x_shape);
  const int n = x_shape[0], c = x_shape[1];
  const std::size_t hw = static_cast<std::size_t>(x_shape[2]) * x_shape[3];
  const T scale = T(1) / static_cast<T>(hw);
#pragma omp parallel for schedule(static)
  for (int b = 0; b < n; ++b)
    for (int j = 0; j < c; ++j) {
      T* p = gx.data() + (static_cast<std::size_t>(b) * c + j) * hw;
      const T v = gy(b, j) * scale;
      for (std::size_t i = 0; i < hw; ++i) p[i] = v;
    }
}

/// Fully connected layer, y = x W^T + b with W stored [out, in].
template <typename T>
class Linear {
public:
  Linear() = default;
  Linear(int in, int out)
      : in_(in), out_(out), weight_({out, in}), bias_({out}), grad_weight_({out, in}),
        grad_bias_({out}) {}

  void init(Rng& rng) {
    const T bound = static_cast<T>(1.0 / std::sqrt(static_cast<double>(in_)));
    weight_.fill_uniform(rng, -bound, bound);
    bias_.fill_uniform(rng, -bound, bound);
  }

  int in_features() const { return in_; }
  int out_features() const { return out_; }
  Tensor<T>& weight() { return weight_; }
  Tensor<T>& bias() { return bias_; }
  const Tensor<T>& weight() const { return weight_; }
  const Tensor<T>& bias() const { return bias_; }
  Tensor<T>& grad_weight() { return grad_weight_; }
  Tensor<T>& grad_bias() { return grad_bias_; }

  void forward(const Tensor<T>& x, Tensor<T>& y) const {
    const int n = x.dim(0);
    y.resize({n, out_});
    if (in_ == 0) {
      for (int b = 0; b < n; ++b)
        for (int j = 0; j < out_; ++j) y(b, j) = bias_(j);
      return;
    }
    ConstMatMap<T> xm(x.data(), n, in_);
    ConstMatMap<T> wm(weight_.data(), out_, in_);
    MatMap<T> ym(y.data(), n, out_);
    ym.noalias() = xm * wm.transpose();
    for (int b = 0; b < n; ++b)
      for (int j = 0; j < out_; ++j) y(b, j) += bias_(j);
  }

  void backward(const Tensor<T>& x, const Tensor<T>& gy, Tensor<T>* gx, bool want_gw) {
    const int n = x.dim(0);
    if (want_gw) {
      if (in_ > 0) {
        ConstMatMap<T> xm(x.data(), n, in_);
        ConstMatMap<T> gym(gy.data(), n, out_);
        MatMap<T> gwm(grad_weight_.data(), out_, in_);
        gwm.noalias() += gym.transpose() * xm;
      }
      for (int b = 0; b < n; ++b)
        for (int j = 0; j < out_; ++j) grad_bias_(j) += gy(b, j);
    }
    if (gx != nullptr) {
      gx->resize({n, in_});
      if (in_ > 0) {
        ConstMatMap<T> gym(gy.data(), n, out_);
        ConstMatMap<T> wm(weight_.data(), out_, in_);
        MatMap<T> gxm(gx->data(), n, in_);
        gxm.noalias() = gym * wm;
      }
    }
  }

private:
  int in_ = 0, out_ = 0;
  Tensor<T> weight_, bias_, grad_weight_, grad_bias_;
};

/// Mean softmax cross entropy over the batch. Returns the loss; fills
/// glogits with d(loss)/d(logits) when non-null.
template <typename T>
inline double softmax_cross_entropy(const Tensor<T>& logits, const std::vector<int>& labels,
                                    Tensor<T>* glogits, int* correct = nullptr) {
  const int n = logits.dim(0), k = logits.dim(1);
  if (glogits != nullptr) glogits->resize({n, k});
  double loss = 0.0;
  int hits = 0;
  for (int b = 0; b < n; ++b) {
    const T* row = logits.data() + static_cast<std::size_t>(b) * k;
    T mx = row[0];
    int arg = 0;
    for (int j = 1; j < k; ++j)
      if (row[j] > mx) {
        mx = row[j];
        arg = j;
      }
    double z = 0.0;
    for (int j = 0; j < k; ++j) z += std::exp(static_cast<double>(row[j] - mx));
    const double logz = std::log(z) + static_cast<double>(mx);
    loss += logz - static_cast<double>(row[labels[static_cast<std::size_t>(b)]]);
    if (arg == labels[static_cast<std::size_t>(b)]) ++hits;
    if (glogits != nullptr) {
      for (int j = 0; j < k; ++j) {
        const double p = std::exp(static_cast<double>(row[j]) - logz);
        (*glogits)(b, j) = static_cast<T>(
            (p - (j == labels[static_cast<std::size_t>(b)] ? 1.0 : 0.0)) / n);
      }
    }
  }
  if (correct != nullptr) *correct = hits;
  return loss / n;
}

} // namespace sbf::nn

#endif
