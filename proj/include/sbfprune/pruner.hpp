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
#ifndef SBFPRUNE_PRUNER_HPP
#define SBFPRUNE_PRUNER_HPP

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "sbfprune/core/errors.hpp"
#include "sbfprune/core/tensor.hpp"

namespace sbf {

/// Score activation: e^x below zero, 1 + a*x above. Positive everywhere,
/// continuous at 0, and never saturates, so scores can always move.
template <typename T>
inline T leaky_exponential(T x, T a) {
  if (!std::isfinite(static_cast<double>(x)))
    throw std::domain_error("leaky_exponential: non-finite input");
  return x < T(0) ? std::exp(x) : T(1) + a * x;
}

/// Derivative of leaky_exponential. At x == 0 the right branch (value a)
/// applies, so zero pre-activations — the dense-start state — still train.
template <typename T>
inline T leaky_exponential_grad(T x, T a) {
  if (!std::isfinite(static_cast<double>(x)))
    throw std::domain_error("leaky_exponential_grad: non-finite input");
  return x < T(0) ? std::exp(x) : a;
}

/// Hard 0.5 threshold turning a continuous score into a keep bit.
template <typename T>
inline std::uint8_t gate(T score) {
  return score >= T(0.5) ? std::uint8_t(1) : std::uint8_t(0);
}

/// Per-filter continuous scores of one layer, all in (0, 1 + eps].
template <typename T>
struct ScoreVector {
  std::vector<T> values;
  int source_layer = -1;

  int size() const { return static_cast<int>(values.size()); }
};

/// Keep/remove bits for one layer's filters.
struct BinaryMask {
  std::vector<std::uint8_t> bits;

  int size() const { return static_cast<int>(bits.size()); }
  int popcount() const {
    int n = 0;
    for (auto b : bits) n += b;
    return n;
  }
  bool all_set() const { return popcount() == size(); }
  bool none_set() const { return popcount() == 0; }

  std::vector<int> keep_list() const {
    std::vector<int> keep;
    for (int i = 0; i < size(); ++i)
      if (bits[static_cast<std::size_t>(i)]) keep.push_back(i);
    return keep;
  }
};

template <typename T>
inline BinaryMask binarize(const ScoreVector<T>& scores) {
  BinaryMask mask;
  mask.bits.reserve(scores.values.size());
  for (const T s : scores.values) mask.bits.push_back(gate(s));
  return mask;
}

/// Read-only view of one convolution's weights, interpreted as the pruner
/// input. Flattening is the tensor's own row-major [F, C, K, K] order:
/// filters stacked in layer order, (C, K, K) row-major within each filter.
template <typename T>
struct FilterBank {
  const Tensor<T>* weights = nullptr; // [F, C, K, K]
  int layer_id = -1;

  int filters() const { return weights->dim(0); }
  std::size_t flat_size() const { return weights->numel(); }
  const T* flat() const { return weights->data(); }
};

/// compute_scores output plus what its backward pass needs.
template <typename T>
struct ScoreResult {
  ScoreVector<T> scores;
  std::vector<T> preact;  // pre-activation z, one per filter
  T realized_eps = T(0);  // slope_a * max(0, max z); scores <= 1 + realized_eps
};

/// The pruner layer attached to one convolution: a projection from the
/// flattened filter weights to one pre-activation per filter, followed by
/// the leaky-exponential activation. Zero-initialized, so every score starts
/// at exactly 1 and the initial network is dense.
template <typename T>
class PrunerLayer {
public:
  PrunerLayer() = default;

  PrunerLayer(int layer_id, int filters, std::size_t flat_size, T slope_a = T(0.01))
      : layer_id_(layer_id), filters_(filters), flat_size_(flat_size), slope_a_(slope_a),
        projection_({static_cast<int>(flat_size), filters}),
        grad_projection_({static_cast<int>(flat_size), filters}) {
    if (slope_a_ <= T(0)) throw ConfigError("pruner slope_a must be positive");
  }

  int layer_id() const { return layer_id_; }
  int filters() const { return filters_; }
  T slope_a() const { return slope_a_; }
  Tensor<T>& projection() { return projection_; }
  const Tensor<T>& projection() const { return projection_; }
  Tensor<T>& grad_projection() { return grad_projection_; }

  ScoreResult<T> compute_scores(const FilterBank<T>& filters) const {
    if (filters.flat_size() != flat_size_ || filters.filters() != filters_)
      throw ConfigError("pruner projection does not match filter bank shape (layer " +
                        std::to_string(layer_id_) + ")");
    ScoreResult<T> out;
    out.scores.source_layer = layer_id_;
    out.scores.values.resize(static_cast<std::size_t>(filters_));
    out.preact.assign(static_cast<std::size_t>(filters_), T(0));
    const T* flat = filters.flat();
    // z = flat(W) * P, accumulated in double for shape [flat_size x F]
    std::vector<double> acc(static_cast<std::size_t>(filters_), 0.0);
    for (std::size_t i = 0; i < flat_size_; ++i) {
      const double wi = static_cast<double>(flat[i]);
      if (wi == 0.0) continue;
      const T* prow = projection_.data() + i * static_cast<std::size_t>(filters_);
      for (int j = 0; j < filters_; ++j) acc[static_cast<std::size_t>(j)] += wi * static_cast<double>(prow[j]);
    }
    T zmax = T(0);
    for (int j = 0; j < filters_; ++j) {
      const T z = static_cast<T>(acc[static_cast<std::size_t>(j)]);
      out.preact[static_cast<std::size_t>(j)] = z;
      out.scores.values[static_cast<std::size_t>(j)] = leaky_exponential(z, slope_a_);
      if (z > zmax) zmax = z;
    }
    out.realized_eps = slope_a_ * (zmax > T(0) ? zmax : T(0));
    return out;
  }

  /// Accumulates d(loss)/d(projection) from d(loss)/d(scores); optionally
  /// also returns the score-path gradient w.r.t. the filter weights
  /// (flattened), which exists because the scores are a function of the
  /// weights themselves.
  void backward(const FilterBank<T>& filters, const ScoreResult<T>& fwd,
                const std::vector<T>& dscore, std::vector<T>* dweights_flat = nullptr) {
    if (static_cast<int>(dscore.size()) != filters_)
      throw ConfigError("dscore length does not match filter count");
    std::vector<T> dz(static_cast<std::size_t>(filters_));
    for (int j = 0; j < filters_; ++j) {
      const std::size_t sj = static_cast<std::size_t>(j);
      dz[sj] = dscore[sj] * leaky_exponential_grad(fwd.preact[sj], slope_a_);
    }
    const T* flat = filters.flat();
    if (dweights_flat != nullptr) dweights_flat->assign(flat_size_, T(0));
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < flat_size_; ++i) {
      T* grow = grad_projection_.data() + i * static_cast<std::size_t>(filters_);
      const T* prow = projection_.data() + i * static_cast<std::size_t>(filters_);
      const T wi = flat[i];
      T dw = T(0);
      for (int j = 0; j < filters_; ++j) {
        grow[j] += dz[static_cast<std::size_t>(j)] * wi;
        dw += dz[static_cast<std::size_t>(j)] * prow[j];
      }
      if (dweights_flat != nullptr) (*dweights_flat)[i] = dw;
    }
  }

private:
  int layer_id_ = -1;
  int filters_ = 0;
  std::size_t flat_size_ = 0;
  T slope_a_ = T(0.01);
  Tensor<T> projection_; // [flat_size, F]
  Tensor<T> grad_projection_;
};

enum class ScoreMode { Continuous, Binary };

/// Scales each channel of a feature map by its score (continuous) or its
/// gate bit (binary). Accepts [F, H, W] or [B, F, H, W].
template <typename T>
inline Tensor<T> apply_scores(const ScoreVector<T>& scores, const Tensor<T>& maps,
                              ScoreMode mode) {
  const int ch_axis = maps.rank() == 4 ? 1 : 0;
  if (maps.dim(ch_axis) != scores.size())
    throw ConfigError("apply_scores: score length " + std::to_string(scores.size()) +
                      " does not match channel count " + std::to_string(maps.dim(ch_axis)));
  Tensor<T> out(maps.shape());
  const int batch = maps.rank() == 4 ? maps.dim(0) : 1;
  const int f = scores.size();
  std::size_t hw = 1;
  for (int d = ch_axis + 1; d < maps.rank(); ++d) hw *= static_cast<std::size_t>(maps.dim(d));
  for (int b = 0; b < batch; ++b)
    for (int j = 0; j < f; ++j) {
      const T s = mode == ScoreMode::Continuous
                      ? scores.values[static_cast<std::size_t>(j)]
                      : static_cast<T>(gate(scores.values[static_cast<std::size_t>(j)]));
      const std::size_t off = (static_cast<std::size_t>(b) * f + j) * hw;
      for (std::size_t i = 0; i < hw; ++i) out[off + i] = s * maps[off + i];
    }
  return out;
}

} // namespace sbf

#endif
