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

#include "rwkvunet/gradcheck.hpp"

#include <cmath>

#include "rwkvunet/autodiff.hpp"
#include "rwkvunet/blocks.hpp"
#include "rwkvunet/losses.hpp"
#include "rwkvunet/nn.hpp"
#include "rwkvunet/ops.hpp"
#include "rwkvunet/random.hpp"
#include "rwkvunet/rwkv.hpp"

namespace rwkvunet {

GradcheckResult gradcheck(const std::string& name, const std::function<Tensor()>& loss,
                          const std::vector<std::pair<std::string, Tensor>>& inputs, GradcheckOptions options) {
  for (const auto& [label, t] : inputs) {
    if (t.dtype() != DType::kFloat64) throw DTypeError("gradcheck input '" + label + "' must be float64");
    if (!t.is_leaf()) throw ValueError("gradcheck input '" + label + "' must be a leaf tensor");
  }
  std::vector<Tensor> tensors;
  for (const auto& in : inputs) {
    Tensor t = in.second;
    t.set_requires_grad(true);
    t.clear_grad();
    tensors.push_back(t);
  }
  {
    Tape tape;
    tape.backward(loss());
  }

  GradcheckResult result;
  result.name = name;
  NoGradGuard guard;
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    Tensor& t = tensors[i];
    const std::vector<double> analytic = t.has_grad() ? t.grad().to_vector() : std::vector<double>(t.numel(), 0.0);
    auto values = t.mutable_data<double>();
    double worst = 0, scale = 0;
    for (std::size_t j = 0; j < values.size(); ++j) {
      const double saved = values[j];
      values[j] = saved + options.step;
      const double up = loss().item();
      values[j] = saved - options.step;
      const double down = loss().item();
      values[j] = saved;
      const double numeric = (up - down) / (2 * options.step);
      worst = std::max(worst, std::abs(analytic[j] - numeric));
      scale = std::max(scale, std::abs(numeric));
    }
    result.elements += static_cast<std::int64_t>(values.size());
    result.max_abs_error = std::max(result.max_abs_error, worst);
    const double rel = worst == 0 ? 0.0 : worst / std::max(scale, 1e-12);
    if (rel >= result.max_rel_error) {
      result.max_rel_error = rel;
      result.worst_input = inputs[i].first;
    }
    t.clear_grad();
  }
  return result;
}

namespace {

constexpr DType kF64 = DType::kFloat64;

Tensor random_tensor(const Shape& shape, Rng& rng, double scale = 1.0) {
  std::vector<double> v(static_cast<std::size_t>(shape_numel(shape)));
  for (auto& x : v) x = scale * rng.normal();
  return Tensor::from_vector(shape, std::move(v));
}

// Weighted sum with fixed random weights, so no gradient is trivially symmetric.
std::function<Tensor()> probe(std::function<Tensor()> forward, Rng& rng) {
  Shape shape;
  {
    NoGradGuard guard;
    shape = forward().shape();
  }
  Tensor weights = random_tensor(shape, rng);
  return [forward = std::move(forward), weights] { return ops::sum(ops::mul(forward(), weights)); };
}

using Inputs = std::vector<std::pair<std::string, Tensor>>;

// Replaces initial values with O(1) random ones so nonlinearities leave their linear regime.
template <class P>
Inputs randomized(P& params, const std::string& prefix, Rng& rng) {
  Inputs out;
  visit_parameters(params, prefix, [&](const std::string& name, Tensor& t) {
    auto v = t.mutable_data<double>();
    const bool gain = name.size() >= 5 && name.compare(name.size() - 5, 5, "gamma") == 0;
    for (auto& x : v) x = gain ? 1.0 + 0.2 * rng.normal() : 0.5 * rng.normal();
    out.emplace_back(name, t);
  });
  return out;
}

void randomize_wkv(rwkv::WkvParams& p, Rng& rng) {
  for (auto* t : {&p.w, &p.u}) {
    for (auto& x : t->mutable_data<double>()) x = rng.uniform(-1.0, 1.0);
  }
}

Inputs with(Inputs base, std::string name, Tensor t) {
  base.emplace_back(std::move(name), std::move(t));
  return base;
}

LabelMap random_labels(std::int64_t n, std::int64_t h, std::int64_t w, std::int64_t classes, Rng& rng) {
  LabelMap m = LabelMap::zeros(n, h, w);
  for (auto& l : m.labels) l = static_cast<std::int32_t>(rng.uniform_int(static_cast<std::uint64_t>(classes)));
  return m;
}

}  // namespace

std::vector<GradcheckResult> gradcheck_suite(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<GradcheckResult> out;

  {
    auto p = make_ir_rwkv_block(4, 8, 4, 1, false, true, rng, kF64);
    Tensor x = random_tensor({2, 4, 4, 4}, rng);
    auto in = with(randomized(p, "ir", rng), "x", x);
    out.push_back(gradcheck("ir_block", probe([&] { return ir_forward(x, p); }, rng), in));
  }
  {
    auto p = make_ir_rwkv_block(4, 8, 6, 2, false, false, rng, kF64);
    Tensor x = random_tensor({1, 4, 6, 6}, rng);
    auto in = with(randomized(p, "ir", rng), "x", x);
    out.push_back(gradcheck("ir_block_stride2", probe([&] { return ir_forward(x, p); }, rng), in));
  }
  {
    auto p = make_ir_rwkv_block(4, 8, 4, 1, true, true, rng, kF64);
    Tensor x = random_tensor({1, 4, 4, 4}, rng);
    auto in = with(randomized(p, "ir_rwkv", rng), "x", x);
    randomize_wkv(p.mix.wkv, rng);
    out.push_back(gradcheck("ir_rwkv_block_spatial_mix", probe([&] { return ir_rwkv_forward(x, p); }, rng), in));
  }
  {
    auto p = make_ir_rwkv_block(4, 8, 4, 1, false, true, rng, kF64);
    Tensor x = random_tensor({1, 4, 4, 4}, rng);
    auto in = with(randomized(p, "ir_rwkv", rng), "x", x);
    out.push_back(gradcheck("ir_rwkv_block_plain", probe([&] { return ir_rwkv_forward(x, p); }, rng), in));
  }
  {
    auto p = make_decoder_block(4, 8, 3, 9, rng, kF64);
    Tensor x = random_tensor({1, 4, 4, 4}, rng);
    auto in = with(randomized(p, "decoder", rng), "x", x);
    out.push_back(gradcheck("decoder_block", probe([&] { return decoder_forward(x, p); }, rng), in));
  }
  {
    auto p = make_ccm(4, 6, 8, rng, kF64);
    Tensor f1 = random_tensor({1, 4, 8, 8}, rng), f2 = random_tensor({1, 6, 4, 4}, rng),
           f3 = random_tensor({1, 8, 2, 2}, rng);
    auto in = randomized(p, "ccm", rng);
    in = with(with(with(in, "f1", f1), "f2", f2), "f3", f3);
    auto fwd = [&] {
      auto o = ccm_forward(f1, f2, f3, p);
      return ops::concat({nn::unfold(o[0]), nn::unfold(nn::bilinear_resize(o[1], 8, 8)),
                          nn::unfold(nn::bilinear_resize(o[2], 8, 8))}, 1);
    };
    out.push_back(gradcheck("ccm", probe(fwd, rng), in));
  }
  {
    auto p = rwkv::make_spatial_mix(8, rng, kF64);
    Tensor tokens = random_tensor({1, 8, 16}, rng);
    auto in = with(randomized(p, "spatial_mix", rng), "tokens", tokens);
    randomize_wkv(p.wkv, rng);
    out.push_back(gradcheck("spatial_mix", probe([&] { return rwkv::spatial_mix(tokens, 4, 4, p); }, rng), in));
  }
  {
    auto p = rwkv::make_channel_mix(8, 4, rng, kF64);
    Tensor tokens = random_tensor({1, 8, 16}, rng);
    auto in = with(randomized(p, "channel_mix", rng), "tokens", tokens);
    out.push_back(gradcheck("channel_mix", probe([&] { return rwkv::channel_mix(tokens, 4, 4, p); }, rng), in));
  }
  {
    auto p = rwkv::make_wkv(4, kF64);
    randomize_wkv(p, rng);
    Tensor k = random_tensor({2, 4, 7}, rng), v = random_tensor({2, 4, 7}, rng);
    Inputs in{{"w", p.w}, {"u", p.u}, {"k", k}, {"v", v}};
    out.push_back(gradcheck("bi_wkv", probe([&] { return rwkv::bi_wkv(k, v, p); }, rng), in));
  }
  {
    Tensor logits = random_tensor({2, 3, 4, 4}, rng);
    const LabelMap masks = random_labels(2, 4, 4, 3, rng);
    out.push_back(gradcheck("mixed_loss_softmax", [&] { return mixed_loss(logits, masks, LossConfig{}); },
                            {{"logits", logits}}));
  }
  {
    Tensor logits = random_tensor({2, 1, 4, 4}, rng);
    const LabelMap masks = random_labels(2, 4, 4, 2, rng);
    out.push_back(gradcheck("mixed_loss_sigmoid", [&] { return mixed_loss(logits, masks, LossConfig{}); },
                            {{"logits", logits}}));
  }
  {
    auto p = nn::make_conv2d(3, 5, 3, 2, 1, true, rng, kF64);
    Tensor x = random_tensor({2, 3, 5, 5}, rng);
    auto in = with(randomized(p, "conv", rng), "x", x);
    out.push_back(gradcheck("conv2d", probe([&] { return nn::conv2d(x, p); }, rng), in));
  }
  {
    auto p = nn::make_layer_norm(6, kF64);
    Tensor x = random_tensor({2, 6, 3, 2}, rng);
    auto in = with(randomized(p, "norm", rng), "x", x);
    out.push_back(gradcheck("layer_norm", probe([&] { return nn::layer_norm(x, p); }, rng), in));
  }
  {
    Tensor x = random_tensor({1, 2, 3, 5}, rng);
    out.push_back(gradcheck("bilinear_resize", probe([&] { return nn::bilinear_resize(x, 7, 4); }, rng), {{"x", x}}));
  }
  {
    Tensor x = random_tensor({1, 8, 3, 3}, rng);
    out.push_back(gradcheck("q_shift", probe([&] { return rwkv::q_shift(x); }, rng), {{"x", x}}));
  }
  return out;
}

}  // namespace rwkvunet
