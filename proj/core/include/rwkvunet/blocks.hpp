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

#include <array>
#include <cstdint>
#include <functional>
#include <string>

#include "rwkvunet/nn.hpp"
#include "rwkvunet/random.hpp"
#include "rwkvunet/rwkv.hpp"
#include "rwkvunet/tensor.hpp"

namespace rwkvunet {

/// Called once per learnable tensor with its dotted name.
using ParamVisitor = std::function<void(const std::string& name, Tensor& tensor)>;

void visit_parameters(nn::Conv2dParams& p, const std::string& prefix, const ParamVisitor& fn);
void visit_parameters(nn::LayerNormParams& p, const std::string& prefix, const ParamVisitor& fn);
void visit_parameters(rwkv::SpatialMixParams& p, const std::string& prefix, const ParamVisitor& fn);
void visit_parameters(rwkv::ChannelMixParams& p, const std::string& prefix, const ParamVisitor& fn);

/// Inverted-residual block, optionally with a spatial-mix token stage.
struct IrRwkvBlockParams {
  std::int64_t c_in = 0;
  std::int64_t c_mid = 0;
  std::int64_t c_out = 0;
  int stride = 1;
  bool use_spatial_mix = false;
  bool residual = false;

  nn::Conv2dParams expand;  // 1x1, c_in -> c_mid, no bias
  nn::LayerNormParams norm;
  rwkv::SpatialMixParams mix;  // present only when use_spatial_mix
  nn::Conv2dParams dw;         // 5x5 depthwise, stride
  nn::Conv2dParams project;    // 1x1, c_mid -> c_out
};

/// Validates the channel/stride/flag combination and initializes weights.
IrRwkvBlockParams make_ir_rwkv_block(std::int64_t c_in, std::int64_t c_mid, std::int64_t c_out, int stride,
                                     bool use_spatial_mix, bool residual, Rng& rng, DType dtype = DType::kFloat32);

Tensor ir_rwkv_forward(const Tensor& x, const IrRwkvBlockParams& p);
/// Same block with the token stage removed, regardless of use_spatial_mix.
Tensor ir_forward(const Tensor& x, const IrRwkvBlockParams& p);

void visit_parameters(IrRwkvBlockParams& p, const std::string& prefix, const ParamVisitor& fn);

/// 1x1 expand, GELU, k x k depthwise, 1x1 project, then 2x bilinear upsample.
struct DecoderBlockParams {
  std::int64_t c_in = 0;
  std::int64_t c_mid = 0;
  std::int64_t c_out = 0;
  nn::Conv2dParams expand;
  nn::Conv2dParams dw;
  nn::Conv2dParams project;
};

DecoderBlockParams make_decoder_block(std::int64_t c_in, std::int64_t c_mid, std::int64_t c_out, int kernel_size,
                                      Rng& rng, DType dtype = DType::kFloat32);
Tensor decoder_forward(const Tensor& x, const DecoderBlockParams& p);
void visit_parameters(DecoderBlockParams& p, const std::string& prefix, const ParamVisitor& fn);

/// Cross-channel mix over three skip features of decreasing resolution.
struct CcmParams {
  std::array<std::int64_t, 3> channels{};
  std::array<nn::Conv2dParams, 3> inbound;  // C_i -> C_1
  rwkv::ChannelMixParams mix;               // over 3 * C_1
  std::array<nn::Conv2dParams, 3> outbound;  // C_1 -> C_i
};

CcmParams make_ccm(std::int64_t c1, std::int64_t c2, std::int64_t c3, Rng& rng, DType dtype = DType::kFloat32,
                   int hidden_ratio = 4);
std::array<Tensor, 3> ccm_forward(const Tensor& f1, const Tensor& f2, const Tensor& f3, const CcmParams& p);
void visit_parameters(CcmParams& p, const std::string& prefix, const ParamVisitor& fn);

}  // namespace rwkvunet
