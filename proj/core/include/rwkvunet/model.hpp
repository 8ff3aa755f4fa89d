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
#include <string>
#include <vector>

#include "rwkvunet/blocks.hpp"
#include "rwkvunet/nn.hpp"
#include "rwkvunet/tensor.hpp"

namespace rwkvunet {

enum class Variant : std::uint8_t { kTiny = 0, kSmall = 1, kBase = 2 };

std::string variant_name(Variant v);
/// Accepts "tiny"/"small"/"base" (and the short forms t/s/b).
Variant parse_variant(const std::string& name);

struct StageConfig {
  int depth = 0;
  std::int64_t dim = 0;
  double expansion = 0;
  bool spatial_mix = false;
};

struct EncoderConfig {
  std::int64_t stem_dim = 24;
  int stem_stride = 1;
  std::array<StageConfig, 4> stages{};

  static EncoderConfig for_variant(Variant v);
  /// Downsampling factor between the input and the deepest stage.
  int total_stride() const { return stem_stride * 16; }
  /// Expanded width of block `block` in stage `stage`.
  std::int64_t block_mid(int stage, int block) const;
};

struct ModelConfig {
  Variant variant = Variant::kTiny;
  std::int64_t in_channels = 3;
  std::int64_t num_classes = 1;
  EncoderConfig encoder;
  int decoder_kernel = 9;
  int decoder_expansion = 2;
  int mix_hidden_ratio = 4;

  static ModelConfig make(Variant v, std::int64_t in_channels, std::int64_t num_classes);
};

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

/// Encoder of stacked IR / IR-RWKV stages, CCM skip fusion, three decoder
/// stages and a 1x1 head followed by bilinear upsampling to the input size.
class SegmentationModel {
 public:
  ModelConfig config;
  nn::Conv2dParams stem;
  nn::LayerNormParams stem_norm;
  std::array<std::vector<IrRwkvBlockParams>, 4> stages;
  CcmParams ccm;
  std::array<DecoderBlockParams, 3> decoders;
  nn::Conv2dParams head;

  /// Stage outputs F1..F4.
  std::array<Tensor, 4> encode(const Tensor& x) const;
  /// Logits (N, num_classes, H, W).
  Tensor forward(const Tensor& x) const;

  void visit(const ParamVisitor& fn);
  /// Learnable tensors in a fixed order; the tensors share storage with the model.
  std::vector<NamedTensor> parameters();
  std::int64_t parameter_count();
  DType dtype() const { return head.weight.dtype(); }

  /// Throws ShapeError unless x is (N, in_channels, H, W) with H, W multiples of the total stride.
  void check_input(const Tensor& x) const;
};

SegmentationModel build_model(const ModelConfig& config, std::uint64_t seed, DType dtype = DType::kFloat32);

}  // namespace rwkvunet
