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
#ifndef SBFPRUNE_LAYER_SPEC_HPP
#define SBFPRUNE_LAYER_SPEC_HPP

#include <cstdint>

namespace sbf {

/// Static description of one convolutional (or fully connected) layer:
/// enough to count parameters and flops. Spatial sizes are the layer's
/// INPUT sizes; output sizes derive from kernel/stride/padding.
struct LayerSpec {
  int C = 1;    // input channels
  int F = 1;    // filters (output channels)
  int K = 1;    // kernel size
  int H_in = 1; // input height
  int W_in = 1; // input width
  int stride = 1;
  int pad = 0;

  int H_out() const { return (H_in + 2 * pad - K) / stride + 1; }
  int W_out() const { return (W_in + 2 * pad - K) / stride + 1; }

  bool valid() const {
    return C >= 1 && F >= 1 && K >= 1 && H_in >= 1 && W_in >= 1 && stride >= 1 && pad >= 0;
  }
};

} // namespace sbf

#endif
