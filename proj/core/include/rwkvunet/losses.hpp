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

#include "rwkvunet/segmentation.hpp"
#include "rwkvunet/tensor.hpp"

namespace rwkvunet {

/// Mixed cross-entropy + Dice objective. A single logit channel selects the
/// sigmoid path with {0, 1} masks; otherwise the softmax path is used.
struct LossConfig {
  double alpha = 0.5;
  double beta = 0.5;
  double dice_epsilon = 1e-5;
  /// Average Dice over classes 1..K-1 in the softmax path.
  bool foreground_only = true;

  void validate() const;
};

/// Mean pixel cross entropy (binary cross entropy for a single channel).
Tensor cross_entropy(const Tensor& logits, const LabelMap& masks);
/// 1 - mean soft Dice over the batch, per class.
Tensor dice_loss(const Tensor& logits, const LabelMap& masks, const LossConfig& cfg);
/// alpha * cross_entropy + beta * dice_loss.
Tensor mixed_loss(const Tensor& logits, const LabelMap& masks, const LossConfig& cfg);

}  // namespace rwkvunet
