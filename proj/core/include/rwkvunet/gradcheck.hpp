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

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "rwkvunet/tensor.hpp"

namespace rwkvunet {

struct GradcheckResult {
  std::string name;
  std::int64_t elements = 0;
  /// Largest over checked tensors of max|analytic - numeric| / max|numeric|.
  double max_rel_error = 0;
  double max_abs_error = 0;
  /// Input whose relative error is largest.
  std::string worst_input;

  bool passed(double tolerance) const { return max_rel_error < tolerance; }
};

struct GradcheckOptions {
  double step = 1e-6;
};

/// Compares tape gradients of the scalar `loss` with central differences
/// for every element of every float64 tensor in `inputs`.
GradcheckResult gradcheck(const std::string& name, const std::function<Tensor()>& loss,
                          const std::vector<std::pair<std::string, Tensor>>& inputs, GradcheckOptions options = {});

/// Checks every block and loss of the library at toy float64 shapes.
std::vector<GradcheckResult> gradcheck_suite(std::uint64_t seed);

}  // namespace rwkvunet
