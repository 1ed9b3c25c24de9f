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
#ifndef SBFPRUNE_NN_OPTIM_HPP
#define SBFPRUNE_NN_OPTIM_HPP

#include <cmath>
#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include "sbfprune/core/errors.hpp"
#include "sbfprune/core/tensor.hpp"

namespace sbf::nn {

/// One optimizable tensor: parameter storage plus its gradient accumulator.
template <typename T>
struct ParamRef {
  Tensor<T>* value = nullptr;
  Tensor<T>* grad = nullptr;
};

struct OptimizerConfig {
  std::string kind = "sgd"; // "sgd" | "adam"
  double lr = 0.1;
  double momentum = 0.9;     // sgd only
  double weight_decay = 0.0; // sgd only
};

/// SGD with classical momentum and decoupled-from-nothing L2 weight decay
/// (decay folded into the gradient, the standard CNN recipe), or Adam.
/// Slot state is lazily sized to the registered parameter list, and can be
/// serialized for checkpoint resume.
template <typename T>
class Optimizer {
public:
  Optimizer() = default;
  explicit Optimizer(OptimizerConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.kind != "sgd" && cfg_.kind != "adam")
      throw ConfigError("unknown optimizer kind: " + cfg_.kind);
  }

  const OptimizerConfig& config() const { return cfg_; }
  void set_lr(double lr) { lr_override_ = lr; }
  double lr() const { return lr_override_ >= 0 ? lr_override_ : cfg_.lr; }

  void step(const std::vector<ParamRef<T>>& params) {
    ensure_state(params);
    const double lr = this->lr();
    if (cfg_.kind == "sgd") {
      for (std::size_t p = 0; p < params.size(); ++p) {
        Tensor<T>& v = slot1_[p];
        Tensor<T>& w = *params[p].value;
        Tensor<T>& g = *params[p].grad;
        for (std::size_t i = 0; i < w.numel(); ++i) {
          const double grad =
              static_cast<double>(g[i]) + cfg_.weight_decay * static_cast<double>(w[i]);
          const double vel = cfg_.momentum * static_cast<double>(v[i]) + grad;
          v[i] = static_cast<T>(vel);
          w[i] = static_cast<T>(static_cast<double>(w[i]) - lr * vel);
        }
      }
    } else {
      ++t_;
      const double bc1 = 1.0 - std::pow(0.9, static_cast<double>(t_));
      const double bc2 = 1.0 - std::pow(0.999, static_cast<double>(t_));
      for (std::size_t p = 0; p < params.size(); ++p) {
        Tensor<T>& m = slot1_[p];
        Tensor<T>& v = slot2_[p];
        Tensor<T>& w = *params[p].value;
        Tensor<T>& g = *params[p].grad;
        for (std::size_t i = 0; i < w.numel(); ++i) {
          const double grad = static_cast<double>(g[i]);
          const double mi = 0.9 * static_cast<double>(m[i]) + 0.1 * grad;
          const double vi = 0.999 * static_cast<double>(v[i]) + 0.001 * grad * grad;
          m[i] = static_cast<T>(mi);
          v[i] = static_cast<T>(vi);
          w[i] = static_cast<T>(static_cast<double>(w[i]) -
                                lr * (mi / bc1) / (std::sqrt(vi / bc2) + 1e-8));
        }
      }
    }
  }

  static void zero_grads(const std::vector<ParamRef<T>>& params) {
    for (const auto& p : params) p.grad->zero();
  }

  void save(std::ostream& os) const {
    const std::uint64_t n = slot1_.size();
    os.write(reinterpret_cast<const char*>(&t_), sizeof(t_));
    os.write(reinterpret_cast<const char*>(&n), sizeof(n));
    auto dump = [&os](const std::vector<Tensor<T>>& slots) {
      for (const auto& t : slots) {
        const std::uint64_t sz = t.numel();
        os.write(reinterpret_cast<const char*>(&sz), sizeof(sz));
        os.write(reinterpret_cast<const char*>(t.data()),
                 static_cast<std::streamsize>(sz * sizeof(T)));
      }
    };
    dump(slot1_);
    dump(slot2_);
  }

  void load(std::istream& is, const std::vector<ParamRef<T>>& params) {
    ensure_state(params);
    std::uint64_t n = 0;
    is.read(reinterpret_cast<char*>(&t_), sizeof(t_));
    is.read(reinterpret_cast<char*>(&n), sizeof(n));
    if (n != slot1_.size()) throw ConfigError("optimizer state does not match parameter list");
    auto slurp = [&is](std::vector<Tensor<T>>& slots) {
      for (auto& t : slots) {
        std::uint64_t sz = 0;
        is.read(reinterpret_cast<char*>(&sz), sizeof(sz));
        if (sz != t.numel()) throw ConfigError("optimizer slot size mismatch");
        is.read(reinterpret_cast<char*>(t.data()),
                static_cast<std::streamsize>(sz * sizeof(T)));
      }
    };
    slurp(slot1_);
    slurp(slot2_);
  }

private:
  void ensure_state(const std::vector<ParamRef<T>>& params) {
    if (slot1_.size() == params.size()) return;
    slot1_.clear();
    slot2_.clear();
    for (const auto& p : params) {
      slot1_.emplace_back(p.value->shape());
      if (cfg_.kind == "adam") slot2_.emplace_back(p.value->shape());
    }
    if (cfg_.kind != "adam") slot2_.resize(params.size());
  }

  OptimizerConfig cfg_;
  double lr_override_ = -1.0;
  std::int64_t t_ = 0;
  std::vector<Tensor<T>> slot1_; // sgd velocity / adam first moment
  std::vector<Tensor<T>> slot2_; // adam second moment
};

/// Cosine decay from lr0 to 0 across total epochs; epoch is 0-based.
inline double cosine_lr(double lr0, int epoch, int total) {
  if (total <= 1) return lr0;
  return lr0 * 0.5 *
         (1.0 + std::cos(3.14159265358979323846 * static_cast<double>(epoch) /
                         static_cast<double>(total)));
}

} // namespace sbf::nn

#endif
