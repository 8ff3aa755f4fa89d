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

#include <gtest/gtest.h>

#include <set>

#include "oracles.hpp"
#include "rwkvunet/autodiff.hpp"
#include "rwkvunet/ops.hpp"

namespace rwkvunet {
namespace {

TEST(Variant, ParsesNamesAndShortForms) {
  EXPECT_EQ(parse_variant("t"), Variant::kTiny);
  EXPECT_EQ(parse_variant("small"), Variant::kSmall);
  EXPECT_EQ(parse_variant("b"), Variant::kBase);
  EXPECT_THROW(parse_variant("x"), ValueError);
  EXPECT_EQ(variant_name(Variant::kSmall), "small");
}

TEST(EncoderConfig, StageTablesPerVariant) {
  const auto b = EncoderConfig::for_variant(Variant::kBase);
  EXPECT_EQ(b.stem_dim, 24);
  EXPECT_EQ(b.stages[0].depth, 3);
  EXPECT_EQ(b.stages[2].dim, 144);
  EXPECT_EQ(b.stages[3].expansion, 4.0);
  EXPECT_FALSE(b.stages[1].spatial_mix);
  EXPECT_TRUE(b.stages[2].spatial_mix);
  const auto t = EncoderConfig::for_variant(Variant::kTiny);
  EXPECT_EQ(t.stages[3].dim, 160);
  EXPECT_EQ(t.block_mid(3, 1), 560);
}

TEST(Model, ParameterCountsPerVariant) {
  // Totals for 3 input channels and 9 classes, summed by hand from the layer table.
  EXPECT_EQ(build_model(ModelConfig::make(Variant::kTiny, 3, 9), 0).parameter_count(), 3258081);
  EXPECT_EQ(build_model(ModelConfig::make(Variant::kSmall, 3, 9), 0).parameter_count(), 9822529);
  EXPECT_EQ(build_model(ModelConfig::make(Variant::kBase, 3, 9), 0).parameter_count(), 17345961);
}

TEST(Model, ParameterNamesAreUnique) {
  auto m = build_model(ModelConfig::make(Variant::kTiny, 1, 3), 0);
  std::set<std::string> seen;
  for (const auto& p : m.parameters()) EXPECT_TRUE(seen.insert(p.name).second) << p.name;
  EXPECT_EQ(m.parameters().front().name, "stem.conv.weight");
  EXPECT_EQ(m.parameters().back().name, "head.bias");
}

TEST(Model, BuildIsDeterministicPerSeed) {
  auto a = build_model(ModelConfig::make(Variant::kTiny, 1, 3), 5);
  auto b = build_model(ModelConfig::make(Variant::kTiny, 1, 3), 5);
  auto c = build_model(ModelConfig::make(Variant::kTiny, 1, 3), 6);
  const auto pa = a.parameters(), pb = b.parameters(), pc = c.parameters();
  bool differs = false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    EXPECT_TRUE(bitwise_equal(pa[i].tensor, pb[i].tensor)) << pa[i].name;
    differs = differs || !bitwise_equal(pa[i].tensor, pc[i].tensor);
  }
  EXPECT_TRUE(differs);
}

TEST(Model, StageShapesFollowStrideSchedule) {
  const auto m = build_model(ModelConfig::make(Variant::kBase, 3, 9), 0);
  NoGradGuard guard;
  const auto f = m.encode(Tensor::zeros({1, 3, 64, 64}));
  EXPECT_EQ(f[0].shape(), (Shape{1, 48, 32, 32}));
  EXPECT_EQ(f[1].shape(), (Shape{1, 72, 16, 16}));
  EXPECT_EQ(f[2].shape(), (Shape{1, 144, 8, 8}));
  EXPECT_EQ(f[3].shape(), (Shape{1, 240, 4, 4}));
}

TEST(Model, ForwardGivesLogitsAtInputSize) {
  Rng rng(71);
  const auto m = build_model(ModelConfig::make(Variant::kTiny, 1, 4), 0);
  NoGradGuard guard;
  const Tensor x = oracle::random_tensor({2, 1, 48, 32}, rng, 1.0, DType::kFloat32);
  EXPECT_EQ(m.forward(x).shape(), (Shape{2, 4, 48, 32}));
}

TEST(Model, RejectsIndivisibleOrWrongInput) {
  const auto m = build_model(ModelConfig::make(Variant::kTiny, 1, 2), 0);
  NoGradGuard guard;
  EXPECT_THROW(m.forward(Tensor::zeros({1, 1, 40, 36})), ShapeError);
  EXPECT_THROW(m.forward(Tensor::zeros({1, 3, 32, 32})), ShapeError);
  EXPECT_THROW(m.forward(Tensor::zeros({1, 32, 32})), ShapeError);
}

TEST(Model, BatchItemsAreIndependent) {
  Rng rng(72);
  const auto m = build_model(ModelConfig::make(Variant::kTiny, 1, 3), 0, DType::kFloat64);
  NoGradGuard guard;
  const Tensor a = oracle::random_tensor({1, 1, 32, 32}, rng), b = oracle::random_tensor({1, 1, 32, 32}, rng);
  const Tensor both = m.forward(ops::concat({a, b}, 0));
  const auto parts = ops::split(both, 0, {1, 1});
  EXPECT_LT(max_abs_diff(parts[0], m.forward(a)), 1e-12);
  EXPECT_LT(max_abs_diff(parts[1], m.forward(b)), 1e-12);
}

TEST(Model, GradientsReachEveryParameter) {
  Rng rng(73);
  auto m = build_model(ModelConfig::make(Variant::kTiny, 1, 3), 0);
  const Tensor x = oracle::random_tensor({1, 1, 32, 32}, rng, 1.0, DType::kFloat32);
  {
    Tape tape;
    tape.backward(ops::mean(ops::square(m.forward(x))));
  }
  for (const auto& p : m.parameters()) EXPECT_TRUE(p.tensor.has_grad()) << p.name;
}

}  // namespace
}  // namespace rwkvunet
