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

#include <benchmark/benchmark.h>

#include "rwkvunet/autodiff.hpp"
#include "rwkvunet/model.hpp"
#include "rwkvunet/nn.hpp"
#include "rwkvunet/ops.hpp"
#include "rwkvunet/rwkv.hpp"

namespace {

using namespace rwkvunet;

Tensor noise(Shape shape, std::uint64_t seed) {
  Rng rng(seed);
  Tensor t = Tensor::zeros(std::move(shape));
  for (auto& x : t.mutable_data<float>()) x = static_cast<float>(rng.normal());
  return t;
}

void BM_BiWkv(benchmark::State& state) {
  const std::int64_t t = state.range(0), c = 64;
  const Tensor k = noise({1, c, t}, 1), v = noise({1, c, t}, 2);
  const auto p = rwkv::make_wkv(c);
  NoGradGuard ng;
  for (auto _ : state) benchmark::DoNotOptimize(rwkv::bi_wkv(k, v, p));
  state.SetComplexityN(t);
}
BENCHMARK(BM_BiWkv)->RangeMultiplier(4)->Range(256, 16384)->Complexity(benchmark::oN);

void BM_BiWkvBackward(benchmark::State& state) {
  const std::int64_t t = state.range(0), c = 64;
  Tensor k = noise({1, c, t}, 1), v = noise({1, c, t}, 2);
  const auto p = rwkv::make_wkv(c);
  k.set_requires_grad(true);
  v.set_requires_grad(true);
  for (auto _ : state) {
    Tape tape;
    tape.backward(ops::sum(rwkv::bi_wkv(k, v, p)));
  }
  state.SetComplexityN(t);
}
BENCHMARK(BM_BiWkvBackward)->RangeMultiplier(4)->Range(256, 4096)->Complexity(benchmark::oN);

void BM_Conv3x3(benchmark::State& state) {
  const std::int64_t c = state.range(0);
  Rng rng(3);
  const auto conv = nn::make_conv2d(c, c, 3, 1, 1, true, rng);
  const Tensor x = noise({1, c, 56, 56}, 4);
  NoGradGuard ng;
  for (auto _ : state) benchmark::DoNotOptimize(nn::conv2d(x, conv));
}
BENCHMARK(BM_Conv3x3)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_DepthwiseConv9x9(benchmark::State& state) {
  const std::int64_t c = state.range(0);
  Rng rng(5);
  const auto conv = nn::make_conv2d(c, c, 9, 1, static_cast<int>(c), true, rng);
  const Tensor x = noise({1, c, 56, 56}, 6);
  NoGradGuard ng;
  for (auto _ : state) benchmark::DoNotOptimize(nn::conv2d(x, conv));
}
BENCHMARK(BM_DepthwiseConv9x9)->Arg(96)->Arg(288)->Unit(benchmark::kMillisecond);

void BM_ModelForward(benchmark::State& state) {
  const auto variant = static_cast<Variant>(state.range(0));
  const std::int64_t res = state.range(1);
  const auto model = build_model(ModelConfig::make(variant, 1, 9), 0);
  const Tensor x = noise({1, 1, res, res}, 7);
  NoGradGuard ng;
  for (auto _ : state) benchmark::DoNotOptimize(model.forward(x));
}
BENCHMARK(BM_ModelForward)
    ->Args({0, 128})
    ->Args({0, 256})
    ->Args({2, 224})
    ->Unit(benchmark::kMillisecond)
    ->Iterations(2);

}  // namespace

BENCHMARK_MAIN();
