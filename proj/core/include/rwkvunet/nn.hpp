// Copyright 2026 The RWKV-UNet Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <string>

#include "rwkvunet/random.hpp"
#include "rwkvunet/tensor.hpp"

namespace rwkvunet::nn {

struct Conv2dParams {
  std::int64_t in_channels = 0;
  std::int64_t out_channels = 0;
  int kernel_size = 1;
  int stride = 1;
  int padding = 0;
  int groups = 1;
  Tensor weight;  // (out, in / groups, k, k)
  Tensor bias;    // (out), undefined when disabled

  bool depthwise() const { return groups > 1 && groups == in_channels && in_channels == out_channels; }
  bool has_bias() const { return bias.defined(); }
  std::int64_t parameter_count() const;
};

/// Same-padding convolution with truncated-normal(0.02) weights and zero bias.
/// groups must be 1 or in_channels (depthwise, which needs out == in).
Conv2dParams make_conv2d(std::int64_t in_channels, std::int64_t out_channels, int kernel_size, int stride, int groups,
                         bool bias, Rng& rng, DType dtype = DType::kFloat32);

/// x is (N, C, H, W). Output extents follow (H + 2p - k) / s + 1.
Tensor conv2d(const Tensor& x, const Conv2dParams& p);

/// Token projection: x (N, Cin, T), weight (Cout, Cin), optional bias (Cout).
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias = {});

struct LayerNormParams {
  std::int64_t normalized_dim = 0;
  Tensor gamma;
  Tensor beta;
  double epsilon = 1e-5;
};

LayerNormParams make_layer_norm(std::int64_t dim, DType dtype = DType::kFloat32);

/// Normalizes over axis 1 of an (N, C, ...) tensor at every other position.
Tensor layer_norm(const Tensor& x, const LayerNormParams& p);

/// (N, C, H, W) -> (N, C, H*W); token index of pixel (r, c) is r * W + c.
Tensor unfold(const Tensor& x);
/// (N, C, H*W) -> (N, C, H, W).
Tensor fold(const Tensor& tokens, std::int64_t height, std::int64_t width);

/// Bilinear interpolation with half-pixel centers (align_corners disabled).
Tensor bilinear_resize(const Tensor& x, std::int64_t out_h, std::int64_t out_w);

}  // namespace rwkvunet::nn
