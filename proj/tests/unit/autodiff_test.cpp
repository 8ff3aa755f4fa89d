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

#include "rwkvunet/autodiff.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "rwkvunet/gradcheck.hpp"
#include "rwkvunet/ops.hpp"

namespace rwkvunet {
namespace {

constexpr double kTol = 1e-6;

Tensor leaf(const Shape& shape, Rng& rng, double scale = 1.0) {
  Tensor t = oracle::random_tensor(shape, rng, scale);
  t.set_requires_grad(true);
  return t;
}

TEST(Autodiff, ProductRuleByHand) {
  Tensor a = Tensor::from_vector({2}, std::vector<double>{2, 3});
  Tensor b = Tensor::from_vector({2}, std::vector<double>{5, 7});
  a.set_requires_grad(true);
  b.set_requires_grad(true);
  {
    Tape tape;
    tape.backward(ops::sum(ops::mul(a, b)));
  }
  EXPECT_EQ(a.grad().to_vector(), (std::vector<double>{5, 7}));
  EXPECT_EQ(b.grad().to_vector(), (std::vector<double>{2, 3}));
}

TEST(Autodiff, ReusedInputAccumulates) {
  Tensor a = Tensor::from_vector({1}, std::vector<double>{3});
  a.set_requires_grad(true);
  {
    Tape tape;
    tape.backward(ops::sum(ops::add(ops::mul(a, a), a)));
  }
  EXPECT_DOUBLE_EQ(a.grad().item(), 7.0);
}

TEST(Autodiff, GradientsAccumulateAcrossTapes) {
  Tensor a = Tensor::from_vector({1}, std::vector<double>{1});
  a.set_requires_grad(true);
  for (int i = 0; i < 2; ++i) {
    Tape tape;
    tape.backward(ops::sum(ops::mul_scalar(a, 3)));
  }
  EXPECT_DOUBLE_EQ(a.grad().item(), 6.0);
}

TEST(Autodiff, TapeIsSingleUse) {
  Tensor a = Tensor::from_vector({1}, std::vector<double>{1});
  a.set_requires_grad(true);
  Tape tape;
  const Tensor loss = ops::sum(a);
  tape.backward(loss);
  EXPECT_TRUE(tape.consumed());
  EXPECT_THROW(tape.backward(loss), Error);
}

TEST(Autodiff, BackwardNeedsScalar) {
  Tensor a = Tensor::zeros({2}, DType::kFloat64);
  a.set_requires_grad(true);
  Tape tape;
  EXPECT_THROW(tape.backward(ops::exp(a)), ShapeError);
}

TEST(Autodiff, NoGradGuardStopsRecording) {
  Tensor a = Tensor::zeros({2}, DType::kFloat64);
  a.set_requires_grad(true);
  Tape tape;
  {
    NoGradGuard guard;
    const Tensor y = ops::exp(a);
    EXPECT_FALSE(y.requires_grad());
  }
  EXPECT_EQ(tape.size(), 0u);
}

TEST(Autodiff, UnusedLeafGetsZeroGradOnlyIfReached) {
  Tensor a = Tensor::zeros({2}, DType::kFloat64);
  Tensor b = Tensor::zeros({2}, DType::kFloat64);
  a.set_requires_grad(true);
  b.set_requires_grad(true);
  {
    Tape tape;
    tape.backward(ops::sum(a));
  }
  EXPECT_TRUE(a.has_grad());
  EXPECT_FALSE(b.has_grad());
}

TEST(Autodiff, MixedDtypesRejected) {
  EXPECT_THROW(ops::add(Tensor::zeros({2}), Tensor::zeros({2}, DType::kFloat64)), DTypeError);
  EXPECT_THROW(ops::add(Tensor::zeros({2}), Tensor::zeros({3})), ShapeError);
}

TEST(Ops, MatmulMatchesNaiveProduct) {
  Rng rng(1);
  const Tensor a = oracle::random_tensor({3, 4}, rng), b = oracle::random_tensor({4, 5}, rng);
  const auto av = a.to_vector(), bv = b.to_vector(), c = ops::matmul(a, b).to_vector();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 5; ++j) {
      double s = 0;
      for (int k = 0; k < 4; ++k) s += av[i * 4 + k] * bv[k * 5 + j];
      EXPECT_NEAR(c[i * 5 + j], s, 1e-12);
    }
}

TEST(Ops, SoftmaxRowsSumToOne) {
  Rng rng(2);
  const Tensor x = oracle::random_tensor({2, 3, 2, 2}, rng, 5.0);
  const auto y = ops::softmax_channels(x).to_vector();
  for (int n = 0; n < 2; ++n)
    for (int p = 0; p < 4; ++p) {
      double s = 0;
      for (int c = 0; c < 3; ++c) s += y[(n * 3 + c) * 4 + p];
      EXPECT_NEAR(s, 1.0, 1e-12);
    }
}

TEST(Ops, SplitInvertsConcat) {
  Rng rng(3);
  const Tensor a = oracle::random_tensor({2, 2, 3}, rng), b = oracle::random_tensor({2, 4, 3}, rng);
  const auto parts = ops::split(ops::concat({a, b}, 1), 1, {2, 4});
  EXPECT_TRUE(bitwise_equal(parts[0], a));
  EXPECT_TRUE(bitwise_equal(parts[1], b));
}

struct UnaryCase {
  const char* name;
  Tensor (*fn)(const Tensor&);
  double shift;
};

void PrintTo(const UnaryCase& c, std::ostream* os) { *os << c.name; }

class UnaryGrad : public ::testing::TestWithParam<UnaryCase> {};

TEST_P(UnaryGrad, MatchesFiniteDifferences) {
  Rng rng(4);
  const auto& c = GetParam();
  Tensor x = leaf({2, 3}, rng);
  if (c.shift != 0) {
    for (auto& v : x.mutable_data<double>()) v = std::abs(v) + c.shift;
  }
  const Tensor w = oracle::random_tensor(c.fn(x.detach()).shape(), rng);
  const auto r = gradcheck(c.name, [&] { return ops::sum(ops::mul(c.fn(x), w)); }, {{"x", x}});
  EXPECT_LT(r.max_rel_error, kTol) << c.name;
}

Tensor neg_fn(const Tensor& x) { return ops::neg(x); }
Tensor sigmoid_fn(const Tensor& x) { return ops::sigmoid(x); }
Tensor relu_fn(const Tensor& x) { return ops::relu(x); }
Tensor gelu_fn(const Tensor& x) { return ops::gelu(x); }
Tensor exp_fn(const Tensor& x) { return ops::exp(x); }
Tensor log_fn(const Tensor& x) { return ops::log(x); }
Tensor square_fn(const Tensor& x) { return ops::square(x); }
Tensor add_scalar_fn(const Tensor& x) { return ops::add_scalar(x, 1.5); }
Tensor softmax_fn(const Tensor& x) { return ops::softmax_channels(ops::reshape(x, {1, 2, 3})); }
Tensor transpose_fn(const Tensor& x) { return ops::transpose(x); }

INSTANTIATE_TEST_SUITE_P(Ops, UnaryGrad,
                         ::testing::Values(UnaryCase{"neg", neg_fn, 0}, UnaryCase{"sigmoid", sigmoid_fn, 0},
                                           UnaryCase{"relu", relu_fn, 0.1}, UnaryCase{"gelu", gelu_fn, 0},
                                           UnaryCase{"exp", exp_fn, 0}, UnaryCase{"log", log_fn, 0.5},
                                           UnaryCase{"square", square_fn, 0}, UnaryCase{"add_scalar", add_scalar_fn, 0},
                                           UnaryCase{"softmax", softmax_fn, 0},
                                           UnaryCase{"transpose", transpose_fn, 0}),
                         [](const auto& info) { return std::string(info.param.name); });

TEST(Ops, MeanGradient) {
  Rng rng(5);
  Tensor x = leaf({2, 3}, rng);
  const auto r = gradcheck("mean", [&] { return ops::mean(ops::square(x)); }, {{"x", x}});
  EXPECT_LT(r.max_rel_error, kTol);
}

TEST(Ops, BinaryGradients) {
  Rng rng(6);
  Tensor a = leaf({3, 4}, rng), b = leaf({3, 4}, rng);
  for (auto& v : b.mutable_data<double>()) v = 1.0 + std::abs(v);
  const Tensor w = oracle::random_tensor({3, 4}, rng);
  auto check = [&](const char* name, auto fn) {
    const auto r = gradcheck(name, [&] { return ops::sum(ops::mul(fn(a, b), w)); }, {{"a", a}, {"b", b}});
    EXPECT_LT(r.max_rel_error, kTol) << name;
  };
  check("add", [](const Tensor& x, const Tensor& y) { return ops::add(x, y); });
  check("sub", [](const Tensor& x, const Tensor& y) { return ops::sub(x, y); });
  check("mul", [](const Tensor& x, const Tensor& y) { return ops::mul(x, y); });
  check("div", [](const Tensor& x, const Tensor& y) { return ops::div(x, y); });
}

TEST(Ops, MatmulGradients) {
  Rng rng(7);
  Tensor a = leaf({2, 3, 4}, rng), b = leaf({2, 4, 5}, rng);
  const Tensor w = oracle::random_tensor({2, 3, 5}, rng);
  const auto r = gradcheck("bmm", [&] { return ops::sum(ops::mul(ops::matmul(a, b), w)); }, {{"a", a}, {"b", b}});
  EXPECT_LT(r.max_rel_error, kTol);
}

TEST(Ops, ConcatSplitChannelSumGradients) {
  Rng rng(8);
  Tensor a = leaf({2, 2, 3}, rng), b = leaf({2, 3, 3}, rng);
  const Tensor w = oracle::random_tensor({4}, rng);
  const auto r = gradcheck(
      "concat",
      [&] {
        const auto parts = ops::split(ops::concat({a, b}, 1), 1, {1, 4});
        return ops::sum(ops::mul(ops::channel_sum(ops::square(parts[1])), w));
      },
      {{"a", a}, {"b", b}});
  EXPECT_LT(r.max_rel_error, kTol);
}

}  // namespace
}  // namespace rwkvunet
