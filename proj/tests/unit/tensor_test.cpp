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

#include "rwkvunet/tensor.hpp"

#include <gtest/gtest.h>

namespace rwkvunet {
namespace {

TEST(Tensor, ZerosHaveShapeAndDtype) {
  const Tensor t = Tensor::zeros({2, 3, 4});
  EXPECT_EQ(t.rank(), 3);
  EXPECT_EQ(t.numel(), 24);
  EXPECT_EQ(t.dim(-1), 4);
  EXPECT_EQ(t.dtype(), DType::kFloat32);
  for (double v : t.to_vector()) EXPECT_EQ(v, 0.0);
}

TEST(Tensor, ScalarHasOneElement) {
  const Tensor s = Tensor::scalar(2.5, DType::kFloat64);
  EXPECT_EQ(s.rank(), 0);
  EXPECT_EQ(s.item(), 2.5);
}

TEST(Tensor, RejectsNonPositiveExtents) {
  EXPECT_THROW(Tensor::zeros({2, 0}), ShapeError);
  EXPECT_THROW(Tensor::zeros({-1}), ShapeError);
}

TEST(Tensor, RejectsValueCountMismatch) {
  EXPECT_THROW(Tensor::from_vector({2, 2}, std::vector<float>{1, 2, 3}), ShapeError);
}

TEST(Tensor, DimOutOfRangeThrows) {
  const Tensor t = Tensor::zeros({2, 3});
  EXPECT_THROW(t.dim(2), ShapeError);
  EXPECT_THROW(t.dim(-3), ShapeError);
}

TEST(Tensor, ItemRequiresSingleElement) { EXPECT_THROW(Tensor::zeros({2}).item(), ShapeError); }

TEST(Tensor, DataOfWrongTypeThrows) {
  const Tensor t = Tensor::zeros({2});
  EXPECT_THROW(t.data<double>(), DTypeError);
}

TEST(Tensor, CopiesShareStorage) {
  Tensor a = Tensor::zeros({3});
  Tensor b = a;
  b.mutable_data<float>()[1] = 7;
  EXPECT_EQ(a.value_at(1), 7.0);
  EXPECT_TRUE(a.same_storage(b));
}

TEST(Tensor, DetachCopiesValuesNotGradState) {
  Tensor a = Tensor::full({2}, 3.0);
  a.set_requires_grad(true);
  const Tensor d = a.detach();
  EXPECT_FALSE(d.requires_grad());
  EXPECT_FALSE(d.same_storage(a));
  EXPECT_TRUE(bitwise_equal(a, d));
}

TEST(Tensor, ConversionRoundTripsRepresentableValues) {
  const Tensor a = Tensor::from_vector({3}, std::vector<double>{0.5, -2.0, 1024.0});
  const Tensor b = a.to(DType::kFloat32).to(DType::kFloat64);
  EXPECT_TRUE(bitwise_equal(a, b));
}

TEST(Tensor, BitwiseEqualDistinguishesDtype) {
  EXPECT_FALSE(bitwise_equal(Tensor::zeros({2}, DType::kFloat32), Tensor::zeros({2}, DType::kFloat64)));
}

TEST(Tensor, MaxAbsDiff) {
  const Tensor a = Tensor::from_vector({2}, std::vector<double>{1, 2});
  const Tensor b = Tensor::from_vector({2}, std::vector<double>{1.5, 1});
  EXPECT_DOUBLE_EQ(max_abs_diff(a, b), 1.0);
  EXPECT_THROW(max_abs_diff(a, Tensor::zeros({3}, DType::kFloat64)), ShapeError);
}

TEST(Tensor, ShapeString) {
  EXPECT_EQ(shape_str({2, 3}), "(2, 3)");
  EXPECT_EQ(shape_str({4}), "(4,)");
}

TEST(Tensor, ZeroGradAllocatesAndClears) {
  Tensor a = Tensor::zeros({2});
  EXPECT_FALSE(a.has_grad());
  a.zero_grad();
  ASSERT_TRUE(a.has_grad());
  EXPECT_EQ(a.grad().to_vector(), (std::vector<double>{0, 0}));
  a.clear_grad();
  EXPECT_FALSE(a.has_grad());
  EXPECT_THROW(a.grad(), Error);
}

}  // namespace
}  // namespace rwkvunet
