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

#include "rwkvunet/losses.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "rwkvunet/autodiff.hpp"
#include "rwkvunet/gradcheck.hpp"

namespace rwkvunet {
namespace {

LabelMap random_labels(std::int64_t n, std::int64_t h, std::int64_t w, std::int64_t classes, Rng& rng) {
  LabelMap m = LabelMap::zeros(n, h, w);
  for (auto& l : m.labels) l = static_cast<std::int32_t>(rng.uniform_int(static_cast<std::uint64_t>(classes)));
  return m;
}

// Softmax probabilities in (N, K, P) layout, computed without max subtraction.
std::vector<double> softmax(const std::vector<double>& z, std::int64_t n, std::int64_t k, std::int64_t pixels) {
  std::vector<double> p(z.size());
  for (std::int64_t b = 0; b < n; ++b)
    for (std::int64_t s = 0; s < pixels; ++s) {
      double den = 0;
      for (std::int64_t c = 0; c < k; ++c) den += std::exp(z[(b * k + c) * pixels + s]);
      for (std::int64_t c = 0; c < k; ++c) p[(b * k + c) * pixels + s] = std::exp(z[(b * k + c) * pixels + s]) / den;
    }
  return p;
}

TEST(CrossEntropy, MatchesNegativeLogLikelihood) {
  Rng rng(81);
  const Tensor z = oracle::random_tensor({2, 4, 3, 3}, rng, 2.0);
  const LabelMap m = random_labels(2, 3, 3, 4, rng);
  const auto p = softmax(z.to_vector(), 2, 4, 9);
  double expect = 0;
  for (std::int64_t b = 0; b < 2; ++b)
    for (std::int64_t s = 0; s < 9; ++s) expect -= std::log(p[(b * 4 + m.labels[b * 9 + s]) * 9 + s]);
  EXPECT_NEAR(cross_entropy(z, m).item(), expect / 18, 1e-12);
}

TEST(CrossEntropy, BinaryPathMatchesLogistic) {
  Rng rng(82);
  const Tensor z = oracle::random_tensor({1, 1, 4, 4}, rng, 3.0);
  const LabelMap m = random_labels(1, 4, 4, 2, rng);
  const auto zv = z.to_vector();
  double expect = 0;
  for (std::size_t i = 0; i < zv.size(); ++i) {
    const double p = 1 / (1 + std::exp(-zv[i]));
    expect -= m.labels[i] ? std::log(p) : std::log(1 - p);
  }
  EXPECT_NEAR(cross_entropy(z, m).item(), expect / 16, 1e-12);
}

TEST(CrossEntropy, StableForHugeLogits) {
  Tensor z = Tensor::from_vector({1, 2, 1, 1}, std::vector<double>{1000, -1000});
  LabelMap m = LabelMap::zeros(1, 1, 1);
  EXPECT_NEAR(cross_entropy(z, m).item(), 0.0, 1e-12);
  m.labels[0] = 1;
  EXPECT_NEAR(cross_entropy(z, m).item(), 2000.0, 1e-9);
}

TEST(DiceLoss, MatchesSoftDiceOverForegroundClasses) {
  Rng rng(83);
  const Tensor z = oracle::random_tensor({2, 3, 4, 4}, rng);
  const LabelMap m = random_labels(2, 4, 4, 3, rng);
  const auto p = softmax(z.to_vector(), 2, 3, 16);
  const double eps = 1e-5;
  double score = 0;
  for (std::int64_t c = 1; c < 3; ++c) {
    double inter = 0, sum = 0;
    for (std::int64_t b = 0; b < 2; ++b)
      for (std::int64_t s = 0; s < 16; ++s) {
        const double t = m.labels[b * 16 + s] == c ? 1 : 0;
        inter += p[(b * 3 + c) * 16 + s] * t;
        sum += p[(b * 3 + c) * 16 + s] + t;
      }
    score += (2 * inter + eps) / (sum + eps);
  }
  EXPECT_NEAR(dice_loss(z, m, LossConfig{}).item(), 1 - score / 2, 1e-12);
}

TEST(DiceLoss, PerfectPredictionApproachesZero) {
  LabelMap m = LabelMap::zeros(1, 2, 2);
  m.labels = {0, 1, 2, 1};
  std::vector<double> z(12, -60.0);
  for (int s = 0; s < 4; ++s) z[m.labels[s] * 4 + s] = 60.0;
  const Tensor logits = Tensor::from_vector({1, 3, 2, 2}, z);
  EXPECT_NEAR(dice_loss(logits, m, LossConfig{}).item(), 0.0, 1e-9);
  EXPECT_NEAR(cross_entropy(logits, m).item(), 0.0, 1e-9);
}

TEST(MixedLoss, IsWeightedSum) {
  Rng rng(84);
  const Tensor z = oracle::random_tensor({1, 3, 4, 4}, rng);
  const LabelMap m = random_labels(1, 4, 4, 3, rng);
  LossConfig cfg;
  cfg.alpha = 0.3;
  cfg.beta = 0.7;
  EXPECT_NEAR(mixed_loss(z, m, cfg).item(), 0.3 * cross_entropy(z, m).item() + 0.7 * dice_loss(z, m, cfg).item(),
              1e-14);
}

TEST(MixedLoss, Gradients) {
  Rng rng(85);
  for (std::int64_t k : {1, 2, 4}) {
    for (bool fg : {true, false}) {
      Tensor z = oracle::random_tensor({2, k, 3, 3}, rng);
      const LabelMap m = random_labels(2, 3, 3, k == 1 ? 2 : k, rng);
      LossConfig cfg;
      cfg.foreground_only = fg;
      const auto r = gradcheck("mixed", [&] { return mixed_loss(z, m, cfg); }, {{"logits", z}});
      EXPECT_LT(r.max_rel_error, 1e-6) << "classes " << k << " foreground_only " << fg;
    }
  }
}

TEST(Losses, RejectInvalidInputs) {
  const Tensor z = Tensor::zeros({1, 3, 2, 2}, DType::kFloat64);
  LabelMap m = LabelMap::zeros(1, 2, 2);
  m.labels[0] = 3;
  EXPECT_THROW(cross_entropy(z, m), ValueError);
  EXPECT_THROW(cross_entropy(z, LabelMap::zeros(1, 2, 3)), ShapeError);
  LossConfig bad;
  bad.alpha = -1;
  EXPECT_THROW(mixed_loss(z, LabelMap::zeros(1, 2, 2), bad), ValueError);
}

}  // namespace
}  // namespace rwkvunet
