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

#pragma once

#include <vector>

#include "rwkvunet/tensor.hpp"

// Differentiable primitives. Every function records itself on the active
// tape when any input requires grad. Binary elementwise ops require equal
// shapes; there is no implicit broadcasting.
namespace rwkvunet::ops {

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& x, double s);
Tensor mul_scalar(const Tensor& x, double s);
Tensor neg(const Tensor& x);

Tensor sigmoid(const Tensor& x);
Tensor relu(const Tensor& x);
/// Exact (erf-based) GELU.
Tensor gelu(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor square(const Tensor& x);

/// Sum of all elements as a rank-0 tensor.
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
/// Reduces (N, C, ...) to (C) by summing every axis except axis 1.
Tensor channel_sum(const Tensor& x);

/// (M, K) x (K, N) -> (M, N), or batched (B, M, K) x (B, K, N) -> (B, M, N).
Tensor matmul(const Tensor& a, const Tensor& b);
/// Swaps the two axes of a rank-2 tensor.
Tensor transpose(const Tensor& x);

Tensor concat(const std::vector<Tensor>& parts, int axis);
std::vector<Tensor> split(const Tensor& x, int axis, const std::vector<std::int64_t>& sizes);
/// Materialized reshape; element count must be preserved.
Tensor reshape(const Tensor& x, Shape shape);

/// Softmax over axis 1 of an (N, C, ...) tensor.
Tensor softmax_channels(const Tensor& x);

}  // namespace rwkvunet::ops
