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

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "rwkvunet/image_io.hpp"
#include "rwkvunet/segmentation.hpp"
#include "rwkvunet/tensor.hpp"

namespace rwkvunet {

/// One training example: image (1, C, H, W) scaled to [0, 1] and mask (1, H, W).
struct Sample {
  Tensor image;
  LabelMap mask;
};

/// (1, C, H, W) tensor with values scaled to [0, 1].
Tensor image_to_tensor(const Image& image, DType dtype = DType::kFloat32);

/// Loads an image/mask pair, resizing the image bilinearly and the mask by
/// nearest neighbor to height x width. Labels must be below class_count.

Sample load_sample(const std::string& image_path, const std::string& mask_path, std::int64_t height,
                   std::int64_t width, std::int64_t class_count, DType dtype = DType::kFloat32);

/// Nearest-neighbor resize of a single-item label map.
LabelMap resize_labels(const LabelMap& mask, std::int64_t height, std::int64_t width);
/// Converts an 8-bit single-channel image to labels (label = pixel value).
LabelMap labels_from_image(const Image& image);
Image image_from_labels(const LabelMap& labels, std::int64_t n = 0);

struct ManifestRecord {
  std::string image;
  std::string mask;
  bool operator==(const ManifestRecord& o) const { return image == o.image && mask == o.mask; }
};

/// Records hold paths relative to `root` (absolute paths are kept as they are).
struct Manifest {
  std::filesystem::path root;
  std::vector<ManifestRecord> records;

  std::string image_path(std::size_t i) const;
  std::string mask_path(std::size_t i) const;
};

/// Reads `image<TAB>mask` lines; a directory argument means <dir>/manifest.tsv.
Manifest read_manifest(const std::string& path);
void write_manifest(const std::string& path, const Manifest& manifest);

struct SplitRatios {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
};

/// Shuffles with `random_state` and cuts train/val/test partitions.
std::array<Manifest, 3> split_manifest(const Manifest& manifest, const SplitRatios& ratios,
                                       std::uint64_t random_state);

enum class ShapeKind { kDisk, kRectangle, kAnnulus };

struct ShapeInstance {
  ShapeKind kind = ShapeKind::kDisk;
  std::int32_t label = 1;
  double cy = 0, cx = 0;
  double size = 0;   // disk / annulus outer radius, rectangle half-height
  double size2 = 0;  // annulus inner radius, rectangle half-width
};

/// Rasterizes shapes in order (later shapes overwrite earlier ones) by pixel-center tests.
LabelMap render_shapes(std::int64_t height, std::int64_t width, const std::vector<ShapeInstance>& shapes);

struct SyntheticSpec {
  int count = 8;
  int resolution = 128;
  int class_count = 3;  // including background
  double noise = 0.05;  // gaussian sigma as a fraction of full scale
  std::uint64_t seed = 0;
  int channels = 1;
};

/// Writes images/NNNN.png, masks/NNNN.png and manifest.tsv under out_dir.
Manifest generate_synthetic(const SyntheticSpec& spec, const std::string& out_dir);

struct Dataset {
  std::vector<Sample> samples;
  std::int64_t class_count = 0;
  std::int64_t channels() const { return samples.empty() ? 0 : samples.front().image.dim(1); }
};

Dataset load_dataset(const Manifest& manifest, std::int64_t resolution, std::int64_t class_count,
                     DType dtype = DType::kFloat32);

/// Stacks samples idx into one batch.
SegmentationBatch make_batch(const Dataset& data, const std::vector<std::size_t>& idx);

}  // namespace rwkvunet
