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

namespace rwkvunet {

/// Tallies the multiply-accumulates executed by forward kernels on this
/// thread while in scope. Conv and projection kernels report
/// Hout*Wout*Cout*(Cin/groups)*K^2 per sample, bi-WKV reports 8*C*T;
/// normalization, elementwise ops and resizes report nothing.
class MacCounter {
 public:
  MacCounter();
  ~MacCounter();
  MacCounter(const MacCounter&) = delete;
  MacCounter& operator=(const MacCounter&) = delete;

  std::int64_t total() const { return total_; }

 private:
  friend void add_macs(std::int64_t macs);
  std::int64_t total_ = 0;
  MacCounter* previous_;
};

void add_macs(std::int64_t macs);

}  // namespace rwkvunet
