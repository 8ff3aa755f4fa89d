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

#include "rwkvunet/analysis.hpp"

#include <iomanip>
#include <sstream>

#include "rwkvunet/autodiff.hpp"
#include "rwkvunet/profiling.hpp"

namespace rwkvunet::analysis {

CostNode& CostNode::add(CostNode child) {
  params += child.params;
  macs += child.macs;
  children.push_back(std::move(child));
  return children.back();
}

const CostNode* CostNode::find(const std::string& child) const {
  for (const auto& c : children) {
    if (c.name == child) return &c;
  }
  return nullptr;
}

const CostNode* CostReport::find(const std::string& path) const {
  const CostNode* node = &root;
  std::istringstream parts(path);
  std::string part;
  while (node && std::getline(parts, part, '/')) node = node->find(part);
  return node;
}

namespace {

template <class F>
void walk(const CostNode& node, const std::string& path, int depth, F&& fn) {
  fn(node, path, depth);
  for (const auto& c : node.children) walk(c, path.empty() ? c.name : path + "/" + c.name, depth + 1, fn);
}

std::int64_t scaled(const CostReport& r, std::int64_t macs) { return r.multiply_add ? 2 * macs : macs; }

}  // namespace

std::string CostReport::to_text() const {
  std::size_t name_width = 9;
  walk(root, "", 0, [&](const CostNode& n, const std::string&, int depth) {
    name_width = std::max(name_width, n.name.size() + 2 * static_cast<std::size_t>(depth));
  });
  std::ostringstream out;
  out << "resolution " << height << "x" << width << ", counts per sample, convention " << convention() << '\n';
  out << std::left << std::setw(static_cast<int>(name_width)) << "component" << std::right << std::setw(14)
      << "params" << std::setw(18) << convention() << '\n';
  walk(root, "", 0, [&](const CostNode& n, const std::string&, int depth) {
    out << std::left << std::setw(static_cast<int>(name_width))
        << (std::string(2 * static_cast<std::size_t>(depth), ' ') + n.name) << std::right << std::setw(14)
        << n.params << std::setw(18) << scaled(*this, n.macs) << '\n';
  });
  return out.str();
}

std::string CostReport::to_key_value() const {
  std::ostringstream out;
  out << "convention=" << convention() << '\n'
      << "height=" << height << '\n'
      << "width=" << width << '\n'
      << "params=" << params() << '\n'
      << "operations=" << operations() << '\n';
  walk(root, "", 0, [&](const CostNode& n, const std::string& path, int) {
    if (path.empty()) return;
    out << path << ".params=" << n.params << '\n' << path << ".operations=" << scaled(*this, n.macs) << '\n';
  });
  return out.str();
}

std::string CostReport::to_csv() const {
  std::ostringstream out;
  out << "component,depth,params," << (multiply_add ? "flops" : "macs") << '\n';
  walk(root, "", 0, [&](const CostNode& n, const std::string& path, int depth) {
    out << (path.empty() ? n.name : path) << ',' << depth << ',' << n.params << ',' << scaled(*this, n.macs) << '\n';
  });
  return out.str();
}

namespace {

CostNode leaf(std::string name, std::int64_t params, std::int64_t macs) { return {std::move(name), params, macs, {}}; }

void check_resolution(std::int64_t height, std::int64_t width, int stride) {
  if (height <= 0 || width <= 0 || height % stride != 0 || width % stride != 0) {
    throw ValueError("resolution " + std::to_string(height) + "x" + std::to_string(width) +
                     " must be positive and divisible by " + std::to_string(stride));
  }
}

// ---- symbolic path: arithmetic on the configuration only ----

CostNode sym_conv(std::string name, std::int64_t cin, std::int64_t cout, std::int64_t k, bool depthwise, bool bias,
                  std::int64_t ho, std::int64_t wo) {
  const std::int64_t per_out = (depthwise ? 1 : cin) * k * k;
  return leaf(std::move(name), cout * per_out + (bias ? cout : 0), ho * wo * cout * per_out);
}

CostNode sym_norm(std::string name, std::int64_t c) { return leaf(std::move(name), 2 * c, 0); }

CostNode sym_block(std::string name, std::int64_t cin, std::int64_t cmid, std::int64_t cout, int stride, bool mix,
                   std::int64_t h, std::int64_t w) {
  CostNode n{std::move(name), 0, 0, {}};
  n.add(sym_conv("expand", cin, cmid, 1, false, false, h, w));
  n.add(sym_norm("norm", cmid));
  if (mix) {
    const std::int64_t t = h * w;
    CostNode m{"mix", 0, 0, {}};
    m.add(sym_norm("norm", cmid));
    for (const char* proj : {"receptance", "key", "value"}) m.add(leaf(proj, cmid * cmid, t * cmid * cmid));
    m.add(leaf("wkv", 2 * cmid, kWkvMacsPerChannelToken * cmid * t));
    m.add(leaf("output", cmid * cmid, t * cmid * cmid));
    n.add(std::move(m));
  }
  const std::int64_t ho = h / stride, wo = w / stride;
  n.add(sym_conv("dw", cmid, cmid, 5, true, true, ho, wo));
  n.add(sym_conv("project", cmid, cout, 1, false, true, ho, wo));
  return n;
}

CostNode sym_channel_mix(std::string name, std::int64_t dim, std::int64_t ratio, std::int64_t t) {
  CostNode m{std::move(name), 0, 0, {}};
  const std::int64_t hidden = ratio * dim;
  m.add(sym_norm("norm", dim));
  m.add(leaf("key", hidden * dim, t * hidden * dim));
  m.add(leaf("value", dim * hidden, t * dim * hidden));
  m.add(leaf("receptance", dim * dim, t * dim * dim));
  return m;
}

CostNode sym_decoder(std::string name, std::int64_t cin, std::int64_t cmid, std::int64_t cout, std::int64_t k,
                     std::int64_t h, std::int64_t w) {
  CostNode n{std::move(name), 0, 0, {}};
  n.add(sym_conv("expand", cin, cmid, 1, false, true, h, w));
  n.add(sym_conv("dw", cmid, cmid, k, true, true, h, w));
  n.add(sym_conv("project", cmid, cout, 1, false, true, h, w));
  return n;
}

// ---- structural path: shapes read from the built tensors ----

CostNode walk_conv(std::string name, const nn::Conv2dParams& p, std::int64_t& h, std::int64_t& w) {
  const auto& s = p.weight.shape();  // (out, in / groups, k, k)
  h = (h + 2 * p.padding - s[2]) / p.stride + 1;
  w = (w + 2 * p.padding - s[3]) / p.stride + 1;
  const std::int64_t params = p.weight.numel() + (p.has_bias() ? p.bias.numel() : 0);
  return leaf(std::move(name), params, h * w * s[0] * s[1] * s[2] * s[3]);
}

CostNode walk_norm(std::string name, const nn::LayerNormParams& p) {
  return leaf(std::move(name), p.gamma.numel() + p.beta.numel(), 0);
}

CostNode walk_linear(std::string name, const Tensor& weight, std::int64_t tokens) {
  return leaf(std::move(name), weight.numel(), tokens * weight.dim(0) * weight.dim(1));
}

CostNode walk_block(std::string name, const IrRwkvBlockParams& p, std::int64_t& h, std::int64_t& w) {
  CostNode n{std::move(name), 0, 0, {}};
  n.add(walk_conv("expand", p.expand, h, w));
  n.add(walk_norm("norm", p.norm));
  if (p.use_spatial_mix) {
    const std::int64_t t = h * w;
    CostNode m{"mix", 0, 0, {}};
    m.add(walk_norm("norm", p.mix.norm));
    m.add(walk_linear("receptance", p.mix.receptance, t));
    m.add(walk_linear("key", p.mix.key, t));
    m.add(walk_linear("value", p.mix.value, t));
    m.add(leaf("wkv", p.mix.wkv.w.numel() + p.mix.wkv.u.numel(), kWkvMacsPerChannelToken * p.mix.wkv.w.numel() * t));
    m.add(walk_linear("output", p.mix.output, t));
    n.add(std::move(m));
  }
  n.add(walk_conv("dw", p.dw, h, w));
  n.add(walk_conv("project", p.project, h, w));
  return n;
}

CostNode walk_decoder(std::string name, const DecoderBlockParams& p, std::int64_t& h, std::int64_t& w) {
  CostNode n{std::move(name), 0, 0, {}};
  n.add(walk_conv("expand", p.expand, h, w));
  n.add(walk_conv("dw", p.dw, h, w));
  n.add(walk_conv("project", p.project, h, w));
  h *= 2;
  w *= 2;
  return n;
}

}  // namespace

CostReport count(const ModelConfig& config, std::int64_t height, std::int64_t width) {
  const auto& enc = config.encoder;
  check_resolution(height, width, enc.total_stride());
  CostReport r;
  r.height = height;
  r.width = width;
  r.root.name = "model";

  CostNode encoder{"encoder", 0, 0, {}};
  std::int64_t h = height / enc.stem_stride, w = width / enc.stem_stride;
  CostNode stem{"stem", 0, 0, {}};
  stem.add(sym_conv("conv", config.in_channels, enc.stem_dim, 3, false, false, h, w));
  stem.add(sym_norm("norm", enc.stem_dim));
  encoder.add(std::move(stem));
  std::int64_t cin = enc.stem_dim;
  std::array<std::int64_t, 4> dims{}, hs{}, ws{};
  for (int s = 0; s < 4; ++s) {
    const auto& st = enc.stages[static_cast<std::size_t>(s)];
    CostNode stage{"stage" + std::to_string(s + 1), 0, 0, {}};
    for (int b = 0; b < st.depth; ++b) {
      const int stride = b == 0 ? 2 : 1;
      stage.add(sym_block("block" + std::to_string(b), cin, enc.block_mid(s, b), st.dim, stride,
                          st.spatial_mix && b > 0, h, w));
      h /= stride;
      w /= stride;
      cin = st.dim;
    }
    encoder.add(std::move(stage));
    dims[static_cast<std::size_t>(s)] = st.dim;
    hs[static_cast<std::size_t>(s)] = h;
    ws[static_cast<std::size_t>(s)] = w;
  }
  r.root.add(std::move(encoder));

  CostNode ccm{"ccm", 0, 0, {}};
  const std::int64_t c1 = dims[0], t1 = hs[0] * ws[0];
  for (std::size_t i = 0; i < 3; ++i) {
    ccm.add(sym_conv("in" + std::to_string(i + 1), dims[i], c1, 1, false, true, hs[0], ws[0]));
  }
  ccm.add(sym_channel_mix("mix", 3 * c1, config.mix_hidden_ratio, t1));
  for (std::size_t i = 0; i < 3; ++i) {
    ccm.add(sym_conv("out" + std::to_string(i + 1), c1, dims[i], 1, false, true, hs[i], ws[i]));
  }
  r.root.add(std::move(ccm));

  CostNode decoder{"decoder", 0, 0, {}};
  const std::array<std::int64_t, 3> dec_in{dims[3], 2 * dims[2], 2 * dims[1]};
  const std::array<std::int64_t, 3> dec_out{dims[2], dims[1], dims[0]};
  for (std::size_t i = 0; i < 3; ++i) {
    const std::size_t level = 3 - i;
    decoder.add(sym_decoder("decoder" + std::to_string(i + 1), dec_in[i], config.decoder_expansion * dec_in[i],
                            dec_out[i], config.decoder_kernel, hs[level], ws[level]));
  }
  r.root.add(std::move(decoder));
  r.root.add(sym_conv("head", 2 * dims[0], config.num_classes, 1, false, true, hs[0], ws[0]));
  return r;
}

CostReport count(Variant variant, std::int64_t in_channels, std::int64_t num_classes, std::int64_t resolution) {
  return count(ModelConfig::make(variant, in_channels, num_classes), resolution, resolution);
}

CostReport count(const SegmentationModel& model, std::int64_t height, std::int64_t width) {
  check_resolution(height, width, model.config.encoder.total_stride());
  CostReport r;
  r.height = height;
  r.width = width;
  r.root.name = "model";

  CostNode encoder{"encoder", 0, 0, {}};
  std::int64_t h = height, w = width;
  CostNode stem{"stem", 0, 0, {}};
  stem.add(walk_conv("conv", model.stem, h, w));
  stem.add(walk_norm("norm", model.stem_norm));
  encoder.add(std::move(stem));
  std::array<std::int64_t, 4> hs{}, ws{};
  for (std::size_t s = 0; s < 4; ++s) {
    CostNode stage{"stage" + std::to_string(s + 1), 0, 0, {}};
    for (std::size_t b = 0; b < model.stages[s].size(); ++b) {
      stage.add(walk_block("block" + std::to_string(b), model.stages[s][b], h, w));
    }
    encoder.add(std::move(stage));
    hs[s] = h;
    ws[s] = w;
  }
  r.root.add(std::move(encoder));

  CostNode ccm{"ccm", 0, 0, {}};
  for (std::size_t i = 0; i < 3; ++i) {
    std::int64_t ch = hs[0], cw = ws[0];
    ccm.add(walk_conv("in" + std::to_string(i + 1), model.ccm.inbound[i], ch, cw));
  }
  CostNode mix{"mix", 0, 0, {}};
  const std::int64_t t1 = hs[0] * ws[0];
  mix.add(walk_norm("norm", model.ccm.mix.norm));
  mix.add(walk_linear("key", model.ccm.mix.key, t1));
  mix.add(walk_linear("value", model.ccm.mix.value, t1));
  mix.add(walk_linear("receptance", model.ccm.mix.receptance, t1));
  ccm.add(std::move(mix));
  for (std::size_t i = 0; i < 3; ++i) {
    std::int64_t ch = hs[i], cw = ws[i];
    ccm.add(walk_conv("out" + std::to_string(i + 1), model.ccm.outbound[i], ch, cw));
  }
  r.root.add(std::move(ccm));

  CostNode decoder{"decoder", 0, 0, {}};
  h = hs[3];
  w = ws[3];
  for (std::size_t i = 0; i < 3; ++i) decoder.add(walk_decoder("decoder" + std::to_string(i + 1), model.decoders[i], h, w));
  r.root.add(std::move(decoder));
  r.root.add(walk_conv("head", model.head, h, w));
  return r;
}

std::int64_t measure_macs(const SegmentationModel& model, std::int64_t height, std::int64_t width) {
  NoGradGuard guard;
  const Tensor x = Tensor::zeros({1, model.config.in_channels, height, width}, model.dtype());
  MacCounter counter;
  model.forward(x);
  return counter.total();
}

DecoderCost decoder_trio_macs(std::int64_t h, std::int64_t w, std::int64_t c_in, std::int64_t c_out, std::int64_t k) {
  if (h <= 0 || w <= 0 || c_in <= 0 || c_out <= 0 || k <= 0) throw ValueError("decoder cost arguments must be positive");
  return {h * w * c_in * c_out * k * k, h * w * c_in * (c_in + k * k + c_out)};
}

std::int64_t decoder_variant_macs(DecoderOrdering ordering, std::int64_t h, std::int64_t w, std::int64_t c_in,
                                  std::int64_t c_out, std::int64_t k) {
  if (h <= 0 || w <= 0 || c_in <= 0 || c_out <= 0 || k <= 0) throw ValueError("decoder cost arguments must be positive");
  if (ordering == DecoderOrdering::kPointDepthPoint) return decoder_trio_macs(h, w, c_in, c_out, k).trio;
  return h * w * (c_in * c_in + c_in * c_out + c_out * k * k);
}

}  // namespace rwkvunet::analysis
