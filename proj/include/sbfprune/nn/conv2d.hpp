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
#ifndef SBFPRUNE_NN_CONV2D_HPP
#define SBFPRUNE_NN_CONV2D_HPP

#include <Eigen/Dense>
#include <cassert>
#include <vector>

#include "sbfprune/core/rng.hpp"
#include "sbfprune/core/tensor.hpp"

namespace sbf::nn {

template <typename T>
using MatMap = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <typename T>
using ConstMatMap =
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

/// 2-D convolution without bias (batch norm follows every conv in this
/// library). Forward and both backward passes run im2col + GEMM per sample,
/// parallelized over the batch. Weight-gradient accumulation is chunked with
/// a fixed chunk size and reduced in chunk order, so results are bitwise
/// reproducible for any thread count.
template <typename T>
class Conv2d {
public:
  Conv2d() = default;

  Conv2d(int in_ch, int out_ch, int kernel, int stride, int pad)
      : in_ch_(in_ch), out_ch_(out_ch), k_(kernel), stride_(stride), pad_(pad),
        weight_({out_ch, in_ch, kernel, kernel}),
        grad_weight_({out_ch, in_ch, kernel, kernel}) {}

  /// He initialization (fan-out), the usual choice for conv+BN+ReLU stacks.
  void init_he(Rng& rng) {
    const double fan_out = static_cast<double>(out_ch_) * k_ * k_;
    weight_.fill_normal(rng, T(0), static_cast<T>(std::sqrt(2.0 / fan_out)));
  }

  int in_channels() const { return in_ch_; }
  int out_channels() const { return out_ch_; }
  int kernel() const { return k_; }
  int stride() const { return stride_; }
  int padding() const { return pad_; }

  Tensor<T>& weight() { return weight_; }
  const Tensor<T>& weight() const { return weight_; }
  Tensor<T>& grad_weight() { return grad_weight_; }

  int out_size(int in_size) const { return (in_size + 2 * pad_ - k_) / stride_ + 1; }

  void forward(const Tensor<T>& x, Tensor<T>& y) const {
    const int batch = x.dim(0), h = x.dim(2), w = x.dim(3);
    assert(x.dim(1) == in_ch_);
    const int oh = out_size(h), ow = out_size(w);
    y.resize({batch, out_ch_, oh, ow});
    if (weight_.empty() || y.empty()) {
      y.zero();
      return;
    }
    const std::size_t ckk = static_cast<std::size_t>(in_ch_) * k_ * k_;
    const std::size_t hw = static_cast<std::size_t>(oh) * ow;
    ConstMatMap<T> wmat(weight_.data(), out_ch_, static_cast<Eigen::Index>(ckk));
#pragma omp parallel
    {
      std::vector<T> col(ckk * hw);
#pragma omp for schedule(static)
      for (int b = 0; b < batch; ++b) {
        im2col(x, b, col.data());
        ConstMatMap<T> cmat(col.data(), static_cast<Eigen::Index>(ckk),
                            static_cast<Eigen::Index>(hw));
        MatMap<T> ymat(y.data() + static_cast<std::size_t>(b) * out_ch_ * hw, out_ch_,
                       static_cast<Eigen::Index>(hw));
        ymat.noalias() = wmat * cmat;
      }
    }
  }

  /// Accumulates into grad_weight_ when want_gw, writes input gradient to gx
  /// when gx != nullptr.
  void backward(const Tensor<T>& x, const Tensor<T>& gy, Tensor<T>* gx, bool want_gw) {
    const int batch = x.dim(0), h = x.dim(2), w = x.dim(3);
    const int oh = out_size(h), ow = out_size(w);
    const std::size_t ckk = static_cast<std::size_t>(in_ch_) * k_ * k_;
    const std::size_t hw = static_cast<std::size_t>(oh) * ow;
    if (gx != nullptr) gx->resize({batch, in_ch_, h, w});
    if (weight_.empty()) return;

    if (gx != nullptr) {
      ConstMatMap<T> wmat(weight_.data(), out_ch_, static_cast<Eigen::Index>(ckk));
#pragma omp parallel
      {
        std::vector<T> colg(ckk * hw);
#pragma omp for schedule(static)
        for (int b = 0; b < batch; ++b) {
          ConstMatMap<T> gymat(gy.data() + static_cast<std::size_t>(b) * out_ch_ * hw,
                               out_ch_, static_cast<Eigen::Index>(hw));
          MatMap<T> cmat(colg.data(), static_cast<Eigen::Index>(ckk),
                         static_cast<Eigen::Index>(hw));
          cmat.noalias() = wmat.transpose() * gymat;
          col2im(colg.data(), b, *gx);
        }
      }
    }

    if (want_gw) {
      const int nchunks = (batch + kGwChunk - 1) / kGwChunk;
      std::vector<std::vector<T>> partial(static_cast<std::size_t>(nchunks));
#pragma omp parallel
      {
        std::vector<T> col(ckk * hw);
#pragma omp for schedule(static)
        for (int c = 0; c < nchunks; ++c) {
          auto& part = partial[static_cast<std::size_t>(c)];
          part.assign(static_cast<std::size_t>(out_ch_) * ckk, T(0));
          MatMap<T> pmat(part.data(), out_ch_, static_cast<Eigen::Index>(ckk));
          const int b_end = std::min(batch, (c + 1) * kGwChunk);
          for (int b = c * kGwChunk; b < b_end; ++b) {
            im2col(x, b, col.data());
            ConstMatMap<T> cmat(col.data(), static_cast<Eigen::Index>(ckk),
                                static_cast<Eigen::Index>(hw));
            ConstMatMap<T> gymat(gy.data() + static_cast<std::size_t>(b) * out_ch_ * hw,
                                 out_ch_, static_cast<Eigen::Index>(hw));
            pmat.noalias() += gymat * cmat.transpose();
          }
        }
      }
      MatMap<T> gwmat(grad_weight_.data(), out_ch_, static_cast<Eigen::Index>(ckk));
      for (int c = 0; c < nchunks; ++c) {
        ConstMatMap<T> pmat(partial[static_cast<std::size_t>(c)].data(), out_ch_,
                            static_cast<Eigen::Index>(ckk));
        gwmat += pmat;
      }
    }
  }

private:
  static constexpr int kGwChunk = 16;

  void im2col(const Tensor<T>& x, int b, T* col) const {
    const int h = x.dim(2), w = x.dim(3);
    const int oh = out_size(h), ow = out_size(w);
    const T* xb = x.data() + static_cast<std::size_t>(b) * in_ch_ * h * w;
    std::size_t idx = 0;
    for (int c = 0; c < in_ch_; ++c) {
      const T* xc = xb + static_cast<std::size_t>(c) * h * w;
      for (int ky = 0; ky < k_; ++ky) {
        for (int kx = 0; kx < k_; ++kx) {
          for (int oy = 0; oy < oh; ++oy) {
            const int iy = oy * stride_ - pad_ + ky;
            if (iy < 0 || iy >= h) {
              for (int ox = 0; ox < ow; ++ox) col[idx++] = T(0);
              continue;
            }
            const T* row = xc + static_cast<std::size_t>(iy) * w;
            for (int ox = 0; ox < ow; ++ox) {
              const int ix = ox * stride_ - pad_ + kx;
              col[idx++] = (ix >= 0 && ix < w) ? row[ix] : T(0);
            }
          }
        }
      }
    }
  }

  void col2im(const T* col, int b, Tensor<T>& gx) const {
    const int h = gx.dim(2), w = gx.dim(3);
    const int oh = out_size(h), ow = out_size(w);
    T* xb = gx.data() + static_cast<std::size_t>(b) * in_ch_ * h * w;
    std::fill(xb, xb + static_cast<std::size_t>(in_ch_) * h * w, T(0));
    std::size_t idx = 0;
    for (int c = 0; c < in_ch_; ++c) {
      T* xc = xb + static_cast<std::size_t>(c) * h * w;
      for (int ky = 0; ky < k_; ++ky) {
        for (int kx = 0; kx < k_; ++kx) {
          for (int oy = 0; oy < oh; ++oy) {
            const int iy = oy * stride_ - pad_ + ky;
            if (iy < 0 || iy >= h) {
              idx += static_cast<std::size_t>(ow);
              continue;
            }
            T* row = xc + static_cast<std::size_t>(iy) * w;
            for (int ox = 0; ox < ow; ++ox) {
              const int ix = ox * stride_ - pad_ + kx;
              if (ix >= 0 && ix < w) row[ix] += col[idx];
              ++idx;
            }
          }
        }
      }
    }
  }

  int in_ch_ = 0, out_ch_ = 0, k_ = 0, stride_ = 1, pad_ = 0;
  Tensor<T> weight_;
  Tensor<T> grad_weight_;
};

} // namespace sbf::nn

#endif
