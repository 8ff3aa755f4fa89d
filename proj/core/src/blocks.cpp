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

#include "rwkvunet/blocks.hpp"

#include "rwkvunet/ops.hpp"

namespace rwkvunet {

namespace {

std::string join(const std::string& prefix, const char* name) { return prefix.empty() ? name : prefix + "." + name; }

void expect_channels(const Tensor& x, std::int64_t channels, const char* op) {
  if (x.rank() != 4 || x.dim(1) != channels) {
    throw ShapeError(std::string(op) + ": expected (N, " + std::to_string(channels) + ", H, W) input, got " +
                     shape_str(x.shape()));
  }
}

Tensor ir_block(const Tensor& x, const IrRwkvBlockParams& p, bool with_mix) {
  expect_channels(x, p.c_in, "ir block");
  Tensor h = ops::gelu(nn::layer_norm(nn::conv2d(x, p.expand), p.norm));
  if (with_mix) {
    const std::int64_t height = h.dim(2), width = h.dim(3);
    Tensor tokens = nn::unfold(h);
    tokens = ops::add(rwkv::spatial_mix(tokens, height, width, p.mix), tokens);
    h = nn::fold(tokens, height, width);
  }
  Tensor local = nn::conv2d(h, p.dw);
  if (p.stride == 1) local = ops::add(local, h);
  Tensor out = nn::conv2d(local, p.project);
  if (p.residual) out = ops::add(out, x);
  return out;
}

}  // namespace

void visit_parameters(nn::Conv2dParams& p, const std::string& prefix, const ParamVisitor& fn) {
  fn(join(prefix, "weight"), p.weight);
  if (p.has_bias()) fn(join(prefix, "bias"), p.bias);
}

void visit_parameters(nn::LayerNormParams& p, const std::string& prefix, const ParamVisitor& fn) {
  fn(join(prefix, "gamma"), p.gamma);
  fn(join(prefix, "beta"), p.beta);
}

void visit_parameters(rwkv::SpatialMixParams& p, const std::string& prefix, const ParamVisitor& fn) {
  visit_parameters(p.norm, join(prefix, "norm"), fn);
  fn(join(prefix, "receptance"), p.receptance);
  fn(join(prefix, "key"), p.key);
  fn(join(prefix, "value"), p.value);
  fn(join(prefix, "output"), p.output);
  fn(join(prefix, "decay"), p.wkv.w);
  fn(join(prefix, "bonus"), p.wkv.u);
}

void visit_parameters(rwkv::ChannelMixParams& p, const std::string& prefix, const ParamVisitor& fn) {
  visit_parameters(p.norm, join(prefix, "norm"), fn);
  fn(join(prefix, "key"), p.key);
  fn(join(prefix, "value"), p.value);
  fn(join(prefix, "receptance"), p.receptance);
}

IrRwkvBlockParams make_ir_rwkv_block(std::int64_t c_in, std::int64_t c_mid, std::int64_t c_out, int stride,
                                     bool use_spatial_mix, bool residual, Rng& rng, DType dtype) {
  if (c_in <= 0 || c_out <= 0) throw ValueError("ir block: channel counts must be positive");
  if (c_mid <= c_in) {
    throw ValueError("ir block: expanded width " + std::to_string(c_mid) + " must exceed input width " +
                     std::to_string(c_in));
  }
  if (stride != 1 && stride != 2) throw ValueError("ir block: stride must be 1 or 2");
  if (residual && (stride != 1 || c_in != c_out)) {
    throw ValueError("ir block: a residual connection needs stride 1 and c_in == c_out");
  }
  if (use_spatial_mix && c_mid % 4 != 0) {
    throw ValueError("ir block: spatial mix needs an expanded width divisible by 4, got " + std::to_string(c_mid));
  }
  IrRwkvBlockParams p;
  p.c_in = c_in;
  p.c_mid = c_mid;
  p.c_out = c_out;
  p.stride = stride;
  p.use_spatial_mix = use_spatial_mix;
  p.residual = residual;
  p.expand = nn::make_conv2d(c_in, c_mid, 1, 1, 1, false, rng, dtype);
  p.norm = nn::make_layer_norm(c_mid, dtype);
  if (use_spatial_mix) p.mix = rwkv::make_spatial_mix(c_mid, rng, dtype);
  p.dw = nn::make_conv2d(c_mid, c_mid, 5, stride, static_cast<int>(c_mid), true, rng, dtype);
  p.project = nn::make_conv2d(c_mid, c_out, 1, 1, 1, true, rng, dtype);
  return p;
}

Tensor ir_rwkv_forward(const Tensor& x, const IrRwkvBlockParams& p) { return ir_block(x, p, p.use_spatial_mix); }

Tensor ir_forward(const Tensor& x, const IrRwkvBlockParams& p) { return ir_block(x, p, false); }

void visit_parameters(IrRwkvBlockParams& p, const std::string& prefix, const ParamVisitor& fn) {
  visit_parameters(p.expand, join(prefix, "expand"), fn);
  visit_parameters(p.norm, join(prefix, "norm"), fn);
  if (p.use_spatial_mix) visit_parameters(p.mix, join(prefix, "mix"), fn);
  visit_parameters(p.dw, join(prefix, "dw"), fn);
  visit_parameters(p.project, join(prefix, "project"), fn);
}

DecoderBlockParams make_decoder_block(std::int64_t c_in, std::int64_t c_mid, std::int64_t c_out, int kernel_size,
                                      Rng& rng, DType dtype) {
  if (c_in <= 0 || c_mid <= 0 || c_out <= 0) throw ValueError("decoder block: channel counts must be positive");
  DecoderBlockParams p;
  p.c_in = c_in;
  p.c_mid = c_mid;
  p.c_out = c_out;
  p.expand = nn::make_conv2d(c_in, c_mid, 1, 1, 1, true, rng, dtype);
  p.dw = nn::make_conv2d(c_mid, c_mid, kernel_size, 1, static_cast<int>(c_mid), true, rng, dtype);
  p.project = nn::make_conv2d(c_mid, c_out, 1, 1, 1, true, rng, dtype);
  return p;
}

Tensor decoder_forward(const Tensor& x, const DecoderBlockParams& p) {
  expect_channels(x, p.c_in, "decoder block");
  Tensor h = ops::gelu(nn::conv2d(x, p.expand));
  h = nn::conv2d(nn::conv2d(h, p.dw), p.project);
  return nn::bilinear_resize(h, 2 * h.dim(2), 2 * h.dim(3));
}

void visit_parameters(DecoderBlockParams& p, const std::string& prefix, const ParamVisitor& fn) {
  visit_parameters(p.expand, join(prefix, "expand"), fn);
  visit_parameters(p.dw, join(prefix, "dw"), fn);
  visit_parameters(p.project, join(prefix, "project"), fn);
}

CcmParams make_ccm(std::int64_t c1, std::int64_t c2, std::int64_t c3, Rng& rng, DType dtype, int hidden_ratio) {
  if (!(c1 < c2 && c2 < c3)) {
    throw ValueError("ccm: branch channels must increase strictly, got " + std::to_string(c1) + ", " +
                     std::to_string(c2) + ", " + std::to_string(c3));
  }
  CcmParams p;
  p.channels = {c1, c2, c3};
  for (std::size_t i = 0; i < 3; ++i) p.inbound[i] = nn::make_conv2d(p.channels[i], c1, 1, 1, 1, true, rng, dtype);
  p.mix = rwkv::make_channel_mix(3 * c1, hidden_ratio, rng, dtype);
  for (std::size_t i = 0; i < 3; ++i) p.outbound[i] = nn::make_conv2d(c1, p.channels[i], 1, 1, 1, true, rng, dtype);
  return p;
}

std::array<Tensor, 3> ccm_forward(const Tensor& f1, const Tensor& f2, const Tensor& f3, const CcmParams& p) {
  const std::array<const Tensor*, 3> in{&f1, &f2, &f3};
  for (std::size_t i = 0; i < 3; ++i) expect_channels(*in[i], p.channels[i], "ccm");
  if (!(f1.dim(2) > f2.dim(2) && f2.dim(2) > f3.dim(2) && f1.dim(3) > f2.dim(3) && f2.dim(3) > f3.dim(3))) {
    throw ShapeError("ccm: branch extents must decrease strictly, got " + shape_str(f1.shape()) + ", " +
                     shape_str(f2.shape()) + ", " + shape_str(f3.shape()));
  }
  if (f1.dim(0) != f2.dim(0) || f2.dim(0) != f3.dim(0)) throw ShapeError("ccm: branch batch sizes differ");
  const std::int64_t h1 = f1.dim(2), w1 = f1.dim(3), c1 = p.channels[0];

  std::vector<Tensor> aligned;
  for (std::size_t i = 0; i < 3; ++i) {
    aligned.push_back(nn::conv2d(nn::bilinear_resize(*in[i], h1, w1), p.inbound[i]));
  }
  Tensor tokens = nn::unfold(ops::concat(aligned, 1));
  tokens = ops::add(rwkv::channel_mix(tokens, h1, w1, p.mix), tokens);
  auto parts = ops::split(nn::fold(tokens, h1, w1), 1, {c1, c1, c1});

  std::array<Tensor, 3> out;
  for (std::size_t i = 0; i < 3; ++i) {
    out[i] = nn::conv2d(nn::bilinear_resize(parts[i], in[i]->dim(2), in[i]->dim(3)), p.outbound[i]);
  }
  return out;
}

void visit_parameters(CcmParams& p, const std::string& prefix, const ParamVisitor& fn) {
  for (std::size_t i = 0; i < 3; ++i) visit_parameters(p.inbound[i], join(prefix, ("in" + std::to_string(i + 1)).c_str()), fn);
  visit_parameters(p.mix, join(prefix, "mix"), fn);
  for (std::size_t i = 0; i < 3; ++i) visit_parameters(p.outbound[i], join(prefix, ("out" + std::to_string(i + 1)).c_str()), fn);
}

}  // namespace rwkvunet
