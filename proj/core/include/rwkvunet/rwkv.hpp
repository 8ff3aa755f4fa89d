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

#include "rwkvunet/nn.hpp"
#include "rwkvunet/random.hpp"
#include "rwkvunet/tensor.hpp"

namespace rwkvunet::rwkv {

/// Per-channel decay w and bonus u of the bidirectional WKV.
///
/// A token at distance d from the query contributes with log-weight
/// -(d - 1) / T * w + k, so positive w decays with distance.
struct WkvParams {
  Tensor w;  // (C)
  Tensor u;  // (C)
};

/// w spaced linearly over [0, 1] across channels, u = 0.5.
WkvParams make_wkv(std::int64_t channels, DType dtype = DType::kFloat32);

struct SpatialMixParams {
  std::int64_t dim = 0;
  nn::LayerNormParams norm;
  Tensor receptance;  // (C, C)
  Tensor key;         // (C, C)
  Tensor value;       // (C, C)
  Tensor output;      // (C, C)
  WkvParams wkv;
};

SpatialMixParams make_spatial_mix(std::int64_t dim, Rng& rng, DType dtype = DType::kFloat32);

struct ChannelMixParams {
  std::int64_t dim = 0;
  int hidden_ratio = 4;
  nn::LayerNormParams norm;
  Tensor key;         // (h*C, C)
  Tensor value;       // (C, h*C)
  Tensor receptance;  // (C, C)
};

ChannelMixParams make_channel_mix(std::int64_t dim, int hidden_ratio, Rng& rng, DType dtype = DType::kFloat32);

/// Shifts the four channel quarters of (N, C, H, W) one pixel right, left,
/// down and up respectively, filling with zeros. C must be divisible by 4.
Tensor q_shift(const Tensor& x);

/// Bidirectional WKV. Accepts k, v as (T, C), or as (N, C, T) token maps.
Tensor bi_wkv(const Tensor& k, const Tensor& v, const WkvParams& p);

/// Token mixer over an (N, C, H*W) token map of an H x W grid. The caller adds the residual.
Tensor spatial_mix(const Tensor& tokens, std::int64_t height, std::int64_t width, const SpatialMixParams& p);

/// Channel mixer over an (N, C, H*W) token map. The caller adds the residual.
Tensor channel_mix(const Tensor& tokens, std::int64_t height, std::int64_t width, const ChannelMixParams& p);

}  // namespace rwkvunet::rwkv
