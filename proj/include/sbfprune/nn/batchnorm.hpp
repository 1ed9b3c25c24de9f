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
#ifndef SBFPRUNE_NN_BATCHNORM_HPP
#define SBFPRUNE_NN_BATCHNORM_HPP

#include <cmath>
#include <vector>

#include "sbfprune/core/tensor.hpp"

namespace sbf::nn {

/// Per-channel batch normalization over [N, C, H, W]. Channel statistics are
/// accumulated sequentially per channel (one owner per channel), so training
/// is bitwise reproducible for any thread count.
template <typename T>
class BatchNorm2d {
public:
  BatchNorm2d() = default;

  explicit BatchNorm2d(int channels, T momentum = T(0.1), T eps = T(1e-5))
      : ch_(channels), momentum_(momentum), eps_(eps), gamma_({channels}),
        beta_({channels}), grad_gamma_({channels}), grad_beta_({channels}),
        running_mean_({channels}), running_var_({channels}), batch_mean_({channels}),
        batch_invstd_({channels}) {
    gamma_.fill(T(1));
    running_var_.fill(T(1));
  }

  int channels() const { return ch_; }
  Tensor<T>& gamma() { return gamma_; }
  Tensor<T>& beta() { return beta_; }
  const Tensor<T>& gamma() const { return gamma_; }
  const Tensor<T>& beta() const { return beta_; }
  Tensor<T>& grad_gamma() { return grad_gamma_; }
  Tensor<T>& grad_beta() { return grad_beta_; }
  Tensor<T>& running_mean() { return running_mean_; }
  Tensor<T>& running_var() { return running_var_; }
  const Tensor<T>& running_mean() const { return running_mean_; }
  const Tensor<T>& running_var() const { return running_var_; }

  /// training=true uses batch statistics and updates running stats;
  /// training=false normalizes with running statistics and leaves all state
  /// untouched (the mode used in score phases, where network state is frozen).
  void forward(const Tensor<T>& x, Tensor<T>& y, bool training) {
    const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
    y.resize(x.shape());
    if (ch_ == 0) return;
    const std::size_t hw = static_cast<std::size_t>(h) * w;
    const std::size_t chw = static_cast<std::size_t>(ch_) * hw;
    last_training_ = training;
#pragma omp parallel for schedule(static)
    for (int c = 0; c < ch_; ++c) {
      T mean, invstd;
      if (training) {
        double sum = 0.0, sq = 0.0;
        for (int b = 0; b < n; ++b) {
          const T* xc = x.data() + b * chw + c * hw;
          for (std::size_t i = 0; i < hw; ++i) {
            const double v = static_cast<double>(xc[i]);
            sum += v;
            sq += v * v;
          }
        }
        const double cnt = static_cast<double>(n) * static_cast<double>(hw);
        const double m = sum / cnt;
        const double var = sq / cnt - m * m;
        mean = static_cast<T>(m);
        invstd = static_cast<T>(1.0 / std::sqrt(var + static_cast<double>(eps_)));
        batch_mean_(c) = mean;
        batch_invstd_(c) = invstd;
        // unbiased variance for the running estimate, as is conventional
        const double unbiased = cnt > 1.0 ? var * cnt / (cnt - 1.0) : var;
        running_mean_(c) = (T(1) - momentum_) * running_mean_(c) + momentum_ * static_cast<T>(m);
        running_var_(c) = (T(1) - momentum_) * running_var_(c) + momentum_ * static_cast<T>(unbiased);
      } else {
        mean = running_mean_(c);
        invstd = T(1) / std::sqrt(running_var_(c) + eps_);
        batch_mean_(c) = mean;
        batch_invstd_(c) = invstd;
      }
      const T g = gamma_(c), bt = beta_(c);
      for (int b = 0; b < n; ++b) {
        const T* xc = x.data() + b * chw + c * hw;
        T* yc = y.data() + b * chw + c * hw;
        for (std::size_t i = 0; i < hw; ++i) yc[i] = g * (xc[i] - mean) * invstd + bt;
      }
    }
  }

  /// Backward through the mode used in the last forward. Parameter gradients
  /// are accumulated only when want_param_grads.
  void backward(const Tensor<T>& x, const Tensor<T>& gy, Tensor<T>& gx,
                bool want_param_grads) {
    const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
    gx.resize(x.shape());
    if (ch_ == 0) return;
    const std::size_t hw = static_cast<std::size_t>(h) * w;
    const std::size_t chw = static_cast<std::size_t>(ch_) * hw;
    const double cnt = static_cast<double>(n) * static_cast<double>(hw);
#pragma omp parallel for schedule(static)
    for (int c = 0; c < ch_; ++c) {
      const T mean = batch_mean_(c), invstd = batch_invstd_(c), g = gamma_(c);
      double sum_gy = 0.0, sum_gy_xhat = 0.0;
      for (int b = 0; b < n; ++b) {
        const T* xc = x.data() + b * chw + c * hw;
        const T* gc = gy.data() + b * chw + c * hw;
        for (std::size_t i = 0; i < hw; ++i) {
          const double xhat = static_cast<double>((xc[i] - mean) * invstd);
          sum_gy += static_cast<double>(gc[i]);
          sum_gy_xhat += static_cast<double>(gc[i]) * xhat;
        }
      }
      if (want_param_grads) {
        grad_gamma_(c) += static_cast<T>(sum_gy_xhat);
        grad_beta_(c) += static_cast<T>(sum_gy);
      }
      if (last_training_) {
        const double k = static_cast<double>(g) * static_cast<double>(invstd) / cnt;
        for (int b = 0; b < n; ++b) {
          const T* xc = x.data() + b * chw + c * hw;
          const T* gc = gy.data() + b * chw + c * hw;
          T* oc = gx.data() + b * chw + c * hw;
          for (std::size_t i = 0; i < hw; ++i) {
            const double xhat = static_cast<double>((xc[i] - mean) * invstd);
            oc[i] = static_cast<T>(k * (cnt * static_cast<double>(gc[i]) - sum_gy -
                                        xhat * sum_gy_xhat));
          }
        }
      } else {
        const T k = g * invstd;
        for (int b = 0; b < n; ++b) {
          const T* gc = gy.data() + b * chw + c * hw;
          T* oc = gx.data() + b * chw + c * hw;
          for (std::size_t i = 0; i < hw; ++i) oc[i] = k * gc[i];
        }
      }
    }
  }

private:
  int ch_ = 0;
  T momentum_ = T(0.1), eps_ = T(1e-5);
  Tensor<T> gamma_, beta_, grad_gamma_, grad_beta_;
  Tensor<T> running_mean_, running_var_;
  Tensor<T> batch_mean_, batch_invstd_; // stats of the last forward
  bool last_training_ = true;
};

} // namespace sbf::nn

#endif
