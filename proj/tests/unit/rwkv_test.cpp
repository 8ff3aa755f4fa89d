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

#include "rwkvunet/rwkv.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "rwkvunet/autodiff.hpp"
#include "rwkvunet/gradcheck.hpp"
#include "rwkvunet/nn.hpp"
#include "rwkvunet/ops.hpp"
#include "rwkvunet/profiling.hpp"

namespace rwkvunet {
namespace {

struct WkvInstance {
  std::int64_t t, c;
  Tensor k, v;
  rwkv::WkvParams p;
};

WkvInstance random_instance(Rng& rng, std::int64_t t, std::int64_t c, double k_scale = 2.0) {
  WkvInstance in{t, c, oracle::random_tensor({t, c}, rng, k_scale), oracle::random_tensor({t, c}, rng),
                 rwkv::make_wkv(c, DType::kFloat64)};
  for (auto& x : in.p.w.mutable_data<double>()) x = rng.uniform(-2.0, 4.0);
  for (auto& x : in.p.u.mutable_data<double>()) x = rng.uniform(-1.0, 1.0);
  return in;
}

TEST(BiWkv, MatchesQuadraticSummation) {
  Rng rng(31);
  for (int trial = 0; trial < 40; ++trial) {
    const auto t = static_cast<std::int64_t>(1 + rng.uniform_int(64));
    const auto c = static_cast<std::int64_t>(1 + rng.uniform_int(8));
    auto in = random_instance(rng, t, c);
    const auto got = rwkv::bi_wkv(in.k, in.v, in.p).to_vector();
    const auto expect =
        oracle::bi_wkv(in.k.to_vector(), in.v.to_vector(), in.p.w.to_vector(), in.p.u.to_vector(), t, c);
    for (std::size_t i = 0; i < got.size(); ++i) ASSERT_NEAR(got[i], expect[i], 1e-10) << "T=" << t << " C=" << c;
  }
}

TEST(BiWkv, OutputIsConvexCombinationOfValues) {
  Rng rng(32);
  auto in = random_instance(rng, 50, 4, 10.0);
  const auto y = rwkv::bi_wkv(in.k, in.v, in.p).to_vector();
  const auto v = in.v.to_vector();
  for (std::int64_t ch = 0; ch < 4; ++ch) {
    double lo = 1e300, hi = -1e300;
    for (std::int64_t i = 0; i < 50; ++i) {
      lo = std::min(lo, v[i * 4 + ch]);
      hi = std::max(hi, v[i * 4 + ch]);
    }
    for (std::int64_t t = 0; t < 50; ++t) {
      EXPECT_GE(y[t * 4 + ch], lo - 1e-12);
      EXPECT_LE(y[t * 4 + ch], hi + 1e-12);
    }
  }
}

TEST(BiWkv, InvariantToConstantKeyShift) {
  Rng rng(33);
  auto in = random_instance(rng, 20, 3);
  const Tensor y0 = rwkv::bi_wkv(in.k, in.v, in.p);
  const Tensor y1 = rwkv::bi_wkv(ops::add_scalar(in.k, 37.5), in.v, in.p);
  EXPECT_LT(max_abs_diff(y0, y1), 1e-12);
}

TEST(BiWkv, StableForLargeKeys) {
  Rng rng(34);
  auto in = random_instance(rng, 64, 2);
  for (auto& x : in.k.mutable_data<double>()) x *= 400;
  for (double y : rwkv::bi_wkv(in.k, in.v, in.p).to_vector()) EXPECT_TRUE(std::isfinite(y));
}

TEST(BiWkv, SingleTokenReturnsValue) {
  Rng rng(35);
  auto in = random_instance(rng, 1, 3);
  EXPECT_LT(max_abs_diff(rwkv::bi_wkv(in.k, in.v, in.p), in.v), 1e-15);
}

TEST(BiWkv, ConstantValuesPassThrough) {
  Rng rng(36);
  auto in = random_instance(rng, 30, 2);
  const Tensor v = Tensor::full({30, 2}, -1.25, DType::kFloat64);
  for (double y : rwkv::bi_wkv(in.k, v, in.p).to_vector()) EXPECT_NEAR(y, -1.25, 1e-13);
}

TEST(BiWkv, BatchedLayoutMatchesPerItem) {
  Rng rng(37);
  const Tensor k = oracle::random_tensor({2, 3, 10}, rng), v = oracle::random_tensor({2, 3, 10}, rng);
  auto p = rwkv::make_wkv(3, DType::kFloat64);
  const auto y = rwkv::bi_wkv(k, v, p).to_vector();
  const auto kv = k.to_vector(), vv = v.to_vector();
  for (int n = 0; n < 2; ++n) {
    std::vector<double> kt(30), vt(30);
    for (int c = 0; c < 3; ++c)
      for (int t = 0; t < 10; ++t) {
        kt[t * 3 + c] = kv[(n * 3 + c) * 10 + t];
        vt[t * 3 + c] = vv[(n * 3 + c) * 10 + t];
      }
    const auto e = oracle::bi_wkv(kt, vt, p.w.to_vector(), p.u.to_vector(), 10, 3);
    for (int c = 0; c < 3; ++c)
      for (int t = 0; t < 10; ++t) EXPECT_NEAR(y[(n * 3 + c) * 10 + t], e[t * 3 + c], 1e-12);
  }
}

TEST(BiWkv, CountsEightMacsPerChannelToken) {
  Rng rng(38);
  auto in = random_instance(rng, 17, 5);
  MacCounter counter;
  rwkv::bi_wkv(in.k, in.v, in.p);
  EXPECT_EQ(counter.total(), 8 * 17 * 5);
}

TEST(BiWkv, Gradients) {
  Rng rng(39);
  auto in = random_instance(rng, 9, 3);
  const Tensor w = oracle::random_tensor({9, 3}, rng);
  const auto r = gradcheck("wkv", [&] { return ops::sum(ops::mul(rwkv::bi_wkv(in.k, in.v, in.p), w)); },
                           {{"k", in.k}, {"v", in.v}, {"w", in.p.w}, {"u", in.p.u}});
  EXPECT_LT(r.max_rel_error, 1e-6);
}

TEST(BiWkv, RejectsMismatchedShapes) {
  auto p = rwkv::make_wkv(3, DType::kFloat64);
  EXPECT_THROW(rwkv::bi_wkv(Tensor::zeros({4, 3}, DType::kFloat64), Tensor::zeros({5, 3}, DType::kFloat64), p),
               ShapeError);
  EXPECT_THROW(rwkv::bi_wkv(Tensor::zeros({4, 2}, DType::kFloat64), Tensor::zeros({4, 2}, DType::kFloat64), p),
               ShapeError);
}

TEST(QShift, MovesEachQuarterOnePixel) {
  Rng rng(40);
  const Tensor x = oracle::random_tensor({1, 8, 4, 5}, rng);
  const auto y = rwkv::q_shift(x).to_vector();
  const auto xv = x.to_vector();
  const int dy[4] = {0, 0, 1, -1}, dx[4] = {1, -1, 0, 0};
  for (int c = 0; c < 8; ++c) {
    const int q = c / 2;
    for (int r = 0; r < 4; ++r)
      for (int col = 0; col < 5; ++col) {
        const int sr = r - dy[q], sc = col - dx[q];
        const double expect = (sr < 0 || sr >= 4 || sc < 0 || sc >= 5) ? 0.0 : xv[(c * 4 + sr) * 5 + sc];
        EXPECT_EQ(y[(c * 4 + r) * 5 + col], expect) << "channel " << c;
      }
  }
}

TEST(QShift, NeedsChannelsDivisibleByFour) {
  EXPECT_THROW(rwkv::q_shift(Tensor::zeros({1, 6, 3, 3})), ShapeError);
}

TEST(SpatialMix, ZeroOutputProjectionGivesZero) {
  Rng rng(41);
  auto p = rwkv::make_spatial_mix(8, rng, DType::kFloat64);
  p.output = Tensor::zeros({8, 8}, DType::kFloat64);
  const Tensor tokens = oracle::random_tensor({2, 8, 12}, rng);
  for (double v : rwkv::spatial_mix(tokens, 3, 4, p).to_vector()) EXPECT_EQ(v, 0.0);
}

TEST(SpatialMix, CountsProjectionsAndWkv) {
  Rng rng(42);
  auto p = rwkv::make_spatial_mix(8, rng);
  MacCounter counter;
  rwkv::spatial_mix(Tensor::zeros({1, 8, 12}), 3, 4, p);
  EXPECT_EQ(counter.total(), 4 * 12 * 8 * 8 + 8 * 8 * 12);
}

TEST(ChannelMix, MatchesGatedSquaredReluFormula) {
  Rng rng(43);
  const std::int64_t c = 4, hid = 8, h = 3, w = 2, t_len = h * w;
  auto p = rwkv::make_channel_mix(c, 2, rng, DType::kFloat64);
  for (Tensor* t : {&p.key, &p.value, &p.receptance}) {
    for (auto& v : t->mutable_data<double>()) v = rng.normal();
  }
  const Tensor tokens = oracle::random_tensor({1, c, t_len}, rng);
  const auto y = rwkv::channel_mix(tokens, h, w, p).to_vector();

  const auto x = tokens.to_vector();
  std::vector<double> norm(static_cast<std::size_t>(c * t_len));
  for (std::int64_t t = 0; t < t_len; ++t) {
    double mean = 0, var = 0;
    for (std::int64_t ch = 0; ch < c; ++ch) mean += x[ch * t_len + t] / c;
    for (std::int64_t ch = 0; ch < c; ++ch) var += std::pow(x[ch * t_len + t] - mean, 2) / c;
    for (std::int64_t ch = 0; ch < c; ++ch) norm[ch * t_len + t] = (x[ch * t_len + t] - mean) / std::sqrt(var + 1e-5);
  }
  const int dy[4] = {0, 0, 1, -1}, dx[4] = {1, -1, 0, 0};
  std::vector<double> shifted(norm.size(), 0.0);
  for (std::int64_t ch = 0; ch < c; ++ch)
    for (std::int64_t r = 0; r < h; ++r)
      for (std::int64_t q = 0; q < w; ++q) {
        const std::int64_t sr = r - dy[ch], sq = q - dx[ch];
        if (sr >= 0 && sr < h && sq >= 0 && sq < w) shifted[ch * t_len + r * w + q] = norm[ch * t_len + sr * w + sq];
      }
  const auto wk = p.key.to_vector(), wv = p.value.to_vector(), wr = p.receptance.to_vector();
  for (std::int64_t t = 0; t < t_len; ++t) {
    std::vector<double> hidden(hid);
    for (std::int64_t j = 0; j < hid; ++j) {
      double s = 0;
      for (std::int64_t i = 0; i < c; ++i) s += wk[j * c + i] * shifted[i * t_len + t];
      hidden[j] = std::pow(std::max(s, 0.0), 2);
    }
    for (std::int64_t o = 0; o < c; ++o) {
      double r = 0, v = 0;
      for (std::int64_t i = 0; i < c; ++i) r += wr[o * c + i] * shifted[i * t_len + t];
      for (std::int64_t j = 0; j < hid; ++j) v += wv[o * hid + j] * hidden[j];
      EXPECT_NEAR(y[o * t_len + t], v / (1 + std::exp(-r)), 1e-11);
    }
  }
}

TEST(ChannelMix, Gradients) {
  Rng rng(44);
  auto p = rwkv::make_channel_mix(4, 2, rng, DType::kFloat64);
  for (Tensor* t : {&p.key, &p.value, &p.receptance}) {
    for (auto& v : t->mutable_data<double>()) v = 0.5 * rng.normal();
  }
  Tensor tokens = oracle::random_tensor({1, 4, 9}, rng);
  const Tensor w = oracle::random_tensor({1, 4, 9}, rng);
  const auto r = gradcheck("cmix", [&] { return ops::sum(ops::mul(rwkv::channel_mix(tokens, 3, 3, p), w)); },
                           {{"tokens", tokens}, {"key", p.key}, {"value", p.value}, {"receptance", p.receptance}});
  EXPECT_LT(r.max_rel_error, 1e-6);
}

}  // namespace
}  // namespace rwkvunet
