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

#include <gtest/gtest.h>

#include <functional>

namespace rwkvunet {
namespace {

using analysis::CostNode;

void expect_sums(const CostNode& n) {
  if (n.children.empty()) return;
  std::int64_t p = 0, m = 0;
  for (const auto& c : n.children) {
    p += c.params;
    m += c.macs;
    expect_sums(c);
  }
  EXPECT_EQ(n.params, p) << n.name;
  EXPECT_EQ(n.macs, m) << n.name;
}

void expect_same_tree(const CostNode& a, const CostNode& b) {
  EXPECT_EQ(a.name, b.name);
  EXPECT_EQ(a.params, b.params) << a.name;
  EXPECT_EQ(a.macs, b.macs) << a.name;
  ASSERT_EQ(a.children.size(), b.children.size()) << a.name;
  for (std::size_t i = 0; i < a.children.size(); ++i) expect_same_tree(a.children[i], b.children[i]);
}

TEST(DecoderTrio, ExactIntegers) {
  const auto c = analysis::decoder_trio_macs(14, 14, 128, 64, 9);
  EXPECT_EQ(c.trio, 6849024);
  EXPECT_EQ(c.standard, 130056192);
  EXPECT_DOUBLE_EQ(c.ratio(), 273.0 / 5184.0);
}

TEST(DecoderTrio, PointwiseRegimeIsNotCheaper) {
  const auto c = analysis::decoder_trio_macs(7, 5, 16, 16, 1);
  EXPECT_DOUBLE_EQ(c.ratio(), 33.0 / 16.0);
  EXPECT_GT(c.ratio(), 1.0);
  EXPECT_THROW(analysis::decoder_trio_macs(0, 5, 16, 16, 1), ValueError);
}

TEST(DecoderTrio, OrderingGrid) {
  using analysis::DecoderOrdering;
  for (std::int64_t k : {3, 5, 7, 9}) {
    EXPECT_EQ(analysis::decoder_variant_macs(DecoderOrdering::kPointDepthPoint, 14, 14, 128, 64, k),
              196 * 128 * (128 + k * k + 64));
    EXPECT_EQ(analysis::decoder_variant_macs(DecoderOrdering::kPointPointDepth, 14, 14, 128, 64, k),
              196 * (128 * 128 + 128 * 64 + 64 * k * k));
  }
}

}  // namespace

void PrintTo(Variant v, std::ostream* os) { *os << variant_name(v); }

namespace {

class CountPaths : public ::testing::TestWithParam<Variant> {};

TEST_P(CountPaths, SymbolicStructuralAndRuntimeAgree) {
  const auto cfg = ModelConfig::make(GetParam(), 3, 5);
  auto model = build_model(cfg, 0);
  const auto sym = analysis::count(cfg, 64, 96);
  const auto walk = analysis::count(model, 64, 96);
  expect_same_tree(sym.root, walk.root);
  expect_sums(sym.root);
  EXPECT_EQ(sym.params(), model.parameter_count());
  EXPECT_EQ(analysis::measure_macs(model, 64, 96), sym.macs());
}

INSTANTIATE_TEST_SUITE_P(Analysis, CountPaths, ::testing::Values(Variant::kTiny, Variant::kSmall, Variant::kBase),
                         [](const auto& info) { return variant_name(info.param); });

TEST(Count, DoublingResolutionQuadruplesMacs) {
  for (auto v : {Variant::kTiny, Variant::kBase}) {
    const auto a = analysis::count(v, 3, 9, 128), b = analysis::count(v, 3, 9, 256);
    EXPECT_EQ(b.macs(), 4 * a.macs());
    EXPECT_EQ(a.params(), b.params());
  }
}

TEST(Count, ParamsIndependentOfResolution) {
  EXPECT_EQ(analysis::count(Variant::kBase, 1, 9, 224).params(), analysis::count(Variant::kBase, 1, 9, 512).params());
}

TEST(Count, RejectsIndivisibleResolution) {
  EXPECT_THROW(analysis::count(Variant::kTiny, 3, 9, 100), ValueError);
}

TEST(Count, FindNavigatesPaths) {
  const auto r = analysis::count(Variant::kTiny, 3, 9, 64);
  ASSERT_NE(r.find("encoder/stage3/block1/mix/wkv"), nullptr);
  EXPECT_EQ(r.find("encoder/stage3/block0/mix"), nullptr);
  EXPECT_EQ(r.find("encoder/stage3/block1/mix/wkv")->macs, 8 * 288 * 64);
}

TEST(Report, ConventionAndFormats) {
  auto r = analysis::count(Variant::kTiny, 3, 9, 64);
  EXPECT_EQ(r.convention(), "MACs");
  const auto macs = r.macs();
  r.multiply_add = true;
  EXPECT_EQ(r.operations(), 2 * macs);

  const auto csv = r.to_csv();
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "component,depth,params,flops");
  EXPECT_NE(csv.find("\nmodel,0," + std::to_string(r.params()) + "," + std::to_string(2 * macs) + "\n"),
            std::string::npos);
  EXPECT_NE(csv.find("\nencoder/stem/conv,3,"), std::string::npos);

  const auto kv = r.to_key_value();
  EXPECT_NE(kv.find("params=" + std::to_string(r.params()) + "\n"), std::string::npos);
  EXPECT_NE(kv.find("decoder/decoder1.params="), std::string::npos);
  EXPECT_NE(r.to_text().find("FLOPs(2xMACs)"), std::string::npos);
}

}  // namespace
}  // namespace rwkvunet
