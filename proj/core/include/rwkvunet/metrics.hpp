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

#include "rwkvunet/segmentation.hpp"

namespace rwkvunet {

struct DscResult {
  std::vector<double> per_class;  // empty-vs-empty classes score 1
  double mean_foreground = 0;     // classes 1..K-1 (class 0 alone when K == 1)
  double mean_all = 0;
};

/// Dice similarity per class over every pixel of the two label maps.
DscResult dsc(const LabelMap& pred, const LabelMap& truth, std::int64_t class_count);

struct BinaryMask {
  std::int64_t height = 0;
  std::int64_t width = 0;
  std::vector<std::uint8_t> data;

  /// Pixels of item n equal to `label`.
  static BinaryMask from_labels(const LabelMap& labels, std::int64_t n, std::int32_t label);
  bool empty() const;
};

/// Mask pixels with at least one 4-neighbor outside the mask (the image border counts as outside).
BinaryMask boundary(const BinaryMask& mask);

/// Exact Euclidean distance from every pixel to the nearest set pixel of `sites`.
std::vector<double> distance_transform(const BinaryMask& sites);

/// Linear-interpolation percentile (q in [0, 100]) of a non-empty sample.
double percentile(std::vector<double> values, double q);

struct Hd95 {
  bool defined = true;
  double value = 0;
};

/// 95th percentile of the pooled boundary-to-boundary distances in both
/// directions. Both empty gives 0; exactly one empty is undefined.
Hd95 hd95(const BinaryMask& a, const BinaryMask& b);

struct SegmentationScores {
  double mean_dsc = 0;   // over items and foreground classes
  double mean_hd95 = 0;  // over defined (item, class) pairs
  std::int64_t hd95_defined = 0;
  std::int64_t hd95_undefined = 0;
  std::vector<double> class_dsc;  // foreground classes averaged over items
};

/// Per-item, per-foreground-class evaluation, averaged.
SegmentationScores evaluate(const LabelMap& pred, const LabelMap& truth, std::int64_t class_count);

}  // namespace rwkvunet
