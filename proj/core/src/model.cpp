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

#include "rwkvunet/model.hpp"

#include <cmath>

#include "rwkvunet/ops.hpp"

namespace rwkvunet {

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::kTiny:
      return "tiny";
    case Variant::kSmall:
      return "small";
    case Variant::kBase:
      return "base";
  }
  return "unknown";
}

Variant parse_variant(const std::string& name) {
  if (name == "tiny" || name == "t") return Variant::kTiny;
  if (name == "small" || name == "s") return Variant::kSmall;
  if (name == "base" || name == "b") return Variant::kBase;
  throw ValueError("unknown model variant '" + name + "' (expected tiny, small or base)");
}

EncoderConfig EncoderConfig::for_variant(Variant v) {
  EncoderConfig c;
  switch (v) {
    case Variant::kTiny:
      c.stages = {StageConfig{2, 32, 2.0, false}, {2, 48, 2.5, false}, {4, 96, 3.0, true}, {2, 160, 3.5, true}};
      break;
    case Variant::kSmall:
      c.stages = {StageConfig{3, 32, 2.0, false}, {3, 64, 2.5, false}, {6, 128, 3.0, true}, {3, 192, 4.0, true}};
      break;
    case Variant::kBase:
      c.stages = {StageConfig{3, 48, 2.0, false}, {3, 72, 2.5, false}, {6, 144, 4.0, true}, {3, 240, 4.0, true}};
      break;
  }
  return c;
}

std::int64_t EncoderConfig::block_mid(int stage, int /*block*/) const {
  // every block of a stage expands from the stage width
  const auto& s = stages[static_cast<std::size_t>(stage)];
  return static_cast<std::int64_t>(std::llround(static_cast<double>(s.dim) * s.expansion));
}

ModelConfig ModelConfig::make(Variant v, std::int64_t in_channels, std::int64_t num_classes) {
  if (in_channels < 1) throw ValueError("in_channels must be >= 1");
  if (num_classes < 1) throw ValueError("num_classes must be >= 1");
  ModelConfig c;
  c.variant = v;
  c.in_channels = in_channels;
  c.num_classes = num_classes;
  c.encoder = EncoderConfig::for_variant(v);
  return c;
}

SegmentationModel build_model(const ModelConfig& config, std::uint64_t seed, DType dtype) {
  if (config.num_classes < 1 || config.in_channels < 1) throw ValueError("invalid channel or class count");
  if (config.encoder.stem_stride != 1 && config.encoder.stem_stride != 2) {
    throw ValueError("stem stride must be 1 or 2");
  }
  Rng rng(seed);
  SegmentationModel m;
  m.config = config;
  const auto& enc = config.encoder;
  m.stem = nn::make_conv2d(config.in_channels, enc.stem_dim, 3, enc.stem_stride, 1, false, rng, dtype);
  m.stem_norm = nn::make_layer_norm(enc.stem_dim, dtype);

  std::int64_t c_in = enc.stem_dim;
  std::array<std::int64_t, 4> dims{};
  for (int s = 0; s < 4; ++s) {
    const auto& st = enc.stages[static_cast<std::size_t>(s)];
    auto& blocks = m.stages[static_cast<std::size_t>(s)];
    for (int b = 0; b < st.depth; ++b) {
      const bool first = b == 0;
      blocks.push_back(make_ir_rwkv_block(c_in, enc.block_mid(s, b), st.dim, first ? 2 : 1, st.spatial_mix && !first,
                                          !first, rng, dtype));
      c_in = st.dim;
    }
    dims[static_cast<std::size_t>(s)] = st.dim;
  }
  m.ccm = make_ccm(dims[0], dims[1], dims[2], rng, dtype, config.mix_hidden_ratio);
  const std::array<std::int64_t, 3> dec_in{dims[3], 2 * dims[2], 2 * dims[1]};
  const std::array<std::int64_t, 3> dec_out{dims[2], dims[1], dims[0]};
  for (std::size_t i = 0; i < 3; ++i) {
    m.decoders[i] = make_decoder_block(dec_in[i], config.decoder_expansion * dec_in[i], dec_out[i],
                                       config.decoder_kernel, rng, dtype);
  }
  m.head = nn::make_conv2d(2 * dims[0], config.num_classes, 1, 1, 1, true, rng, dtype);
  return m;
}

void SegmentationModel::check_input(const Tensor& x) const {
  if (x.rank() != 4 || x.dim(1) != config.in_channels) {
    throw ShapeError("model input must be (N, " + std::to_string(config.in_channels) + ", H, W), got " +
                     shape_str(x.shape()));
  }
  const int stride = config.encoder.total_stride();
  if (x.dim(2) % stride != 0 || x.dim(3) % stride != 0) {
    throw ShapeError("input extents " + std::to_string(x.dim(2)) + "x" + std::to_string(x.dim(3)) +
                     " must be divisible by " + std::to_string(stride));
  }
}

std::array<Tensor, 4> SegmentationModel::encode(const Tensor& x) const {
  check_input(x);
  Tensor h = ops::gelu(nn::layer_norm(nn::conv2d(x, stem), stem_norm));
  std::array<Tensor, 4> features;
  for (std::size_t s = 0; s < 4; ++s) {
    for (const auto& block : stages[s]) h = ir_rwkv_forward(h, block);
    features[s] = h;
  }
  return features;
}

Tensor SegmentationModel::forward(const Tensor& x) const {
  auto f = encode(x);
  auto skips = ccm_forward(f[0], f[1], f[2], ccm);
  Tensor d = decoder_forward(f[3], decoders[0]);
  d = decoder_forward(ops::concat({d, skips[2]}, 1), decoders[1]);
  d = decoder_forward(ops::concat({d, skips[1]}, 1), decoders[2]);
  Tensor logits = nn::conv2d(ops::concat({d, skips[0]}, 1), head);
  return nn::bilinear_resize(logits, x.dim(2), x.dim(3));
}

void SegmentationModel::visit(const ParamVisitor& fn) {
  visit_parameters(stem, "stem.conv", fn);
  visit_parameters(stem_norm, "stem.norm", fn);
  for (std::size_t s = 0; s < 4; ++s) {
    for (std::size_t b = 0; b < stages[s].size(); ++b) {
      visit_parameters(stages[s][b], "stage" + std::to_string(s + 1) + ".block" + std::to_string(b), fn);
    }
  }
  visit_parameters(ccm, "ccm", fn);
  for (std::size_t i = 0; i < 3; ++i) visit_parameters(decoders[i], "decoder" + std::to_string(i + 1), fn);
  visit_parameters(head, "head", fn);
}

std::vector<NamedTensor> SegmentationModel::parameters() {
  std::vector<NamedTensor> out;
  visit([&](const std::string& name, Tensor& t) { out.push_back({name, t}); });
  return out;
}

std::int64_t SegmentationModel::parameter_count() {
  std::int64_t n = 0;
  visit([&](const std::string&, Tensor& t) { n += t.numel(); });
  return n;
}

}  // namespace rwkvunet
