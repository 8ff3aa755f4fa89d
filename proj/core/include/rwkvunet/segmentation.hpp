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
#include <vector>

#include "rwkvunet/tensor.hpp"

namespace rwkvunet {

/// Integer class ids of shape (N, H, W), row-major.
struct LabelMap {
  std::int64_t batch = 0;
  std::int64_t height = 0;
  std::int64_t width = 0;
  std::vector<std::int32_t> labels;

  static LabelMap zeros(std::int64_t batch, std::int64_t height, std::int64_t width);
  std::int64_t size() const { return batch * height * width; }
  std::int32_t at(std::int64_t n, std::int64_t y, std::int64_t x) const {
    return labels[static_cast<std::size_t>((n * height + y) * width + x)];
  }
  /// The (1, H, W) slice of item n.
  LabelMap item(std::int64_t n) const;
};

struct SegmentationBatch {
  Tensor images;  // (N, C, H, W)
  LabelMap masks;
  std::int64_t class_count = 0;
};

/// Throws ValueError when a label falls outside [0, class_count).
void validate_labels(const LabelMap& masks, std::int64_t class_count);

/// Hard prediction from logits: argmax over channels, or logit > 0 when there is a single channel.
LabelMap predict_labels(const Tensor& logits);

/// Stacks single-item label maps.
LabelMap stack_labels(const std::vector<LabelMap>& items);

}  // namespace rwkvunet
