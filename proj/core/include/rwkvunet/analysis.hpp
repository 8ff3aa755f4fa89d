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
#include <string>
#include <vector>

#include "rwkvunet/model.hpp"

namespace rwkvunet::analysis {

/// Bi-WKV cost per channel and token, in multiply-accumulate equivalents:
/// one exponential, two accumulations for each of numerator and
/// denominator, one rescale and one divide.
inline constexpr std::int64_t kWkvMacsPerChannelToken = 8;

/// One component of a cost breakdown. Parent totals are the sums of their children.
struct CostNode {
  std::string name;
  std::int64_t params = 0;
  std::int64_t macs = 0;
  std::vector<CostNode> children;

  /// Appends `child` and adds its totals to this node.
  CostNode& add(CostNode child);
  /// Direct child by name, or nullptr.
  const CostNode* find(const std::string& child) const;
};

/// Per-sample parameter and multiply-accumulate counts of a model at one input resolution.
struct CostReport {
  CostNode root;
  std::int64_t height = 0;
  std::int64_t width = 0;
  /// Report multiply and add separately (2 x MACs) instead of MACs.
  bool multiply_add = false;

  std::int64_t params() const { return root.params; }
  std::int64_t macs() const { return root.macs; }
  /// Operation count under the selected convention.
  std::int64_t operations() const { return multiply_add ? 2 * root.macs : root.macs; }
  std::string convention() const { return multiply_add ? "FLOPs(2xMACs)" : "MACs"; }
  /// Node at a slash-separated path below the root ("encoder/stage3"), or nullptr.
  const CostNode* find(const std::string& path) const;

  /// Aligned, indented table.
  std::string to_text() const;
  /// `key=value` lines; component keys are slash-separated paths.
  std::string to_key_value() const;
  /// Header plus one row per component.
  std::string to_csv() const;
};

/// Counts from the configuration alone.
CostReport count(const ModelConfig& config, std::int64_t height, std::int64_t width);
CostReport count(Variant variant, std::int64_t in_channels, std::int64_t num_classes, std::int64_t resolution);
/// Counts by walking the tensors of a built model.
CostReport count(const SegmentationModel& model, std::int64_t height, std::int64_t width);
/// MACs tallied by the kernels during one forward pass of a batch-1 zero input.
std::int64_t measure_macs(const SegmentationModel& model, std::int64_t height, std::int64_t width);

struct DecoderCost {
  std::int64_t standard = 0;  // one dense k x k convolution
  std::int64_t trio = 0;      // pointwise, depthwise k x k, pointwise
  double ratio() const { return static_cast<double>(trio) / static_cast<double>(standard); }
};

/// Dense versus factorized decoder convolution cost at one resolution.
DecoderCost decoder_trio_macs(std::int64_t h, std::int64_t w, std::int64_t c_in, std::int64_t c_out, std::int64_t k);

enum class DecoderOrdering : std::uint8_t {
  kPointDepthPoint,  // 1x1 (c_in), depthwise, 1x1 to c_out
  kPointPointDepth,  // 1x1 (c_in), 1x1 to c_out, depthwise on c_out
};

/// MACs of a three-layer decoder trio under either layer ordering.
std::int64_t decoder_variant_macs(DecoderOrdering ordering, std::int64_t h, std::int64_t w, std::int64_t c_in,
                                  std::int64_t c_out, std::int64_t k);

}  // namespace rwkvunet::analysis
