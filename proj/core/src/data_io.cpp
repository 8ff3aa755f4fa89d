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

#include "rwkvunet/data_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "rwkvunet/autodiff.hpp"
#include "rwkvunet/nn.hpp"
#include "rwkvunet/ops.hpp"
#include "rwkvunet/random.hpp"

namespace rwkvunet {

namespace {

std::string resolve(const std::filesystem::path& root, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() ? path.string() : (root / path).string();
}

std::string four_digits(int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d", i);
  return buf;
}

double bounding_radius(const ShapeInstance& s) {
  return s.kind == ShapeKind::kRectangle ? std::hypot(s.size, s.size2) : s.size;
}

bool covers(const ShapeInstance& s, double y, double x) {
  const double dy = y - s.cy, dx = x - s.cx;
  switch (s.kind) {
    case ShapeKind::kDisk:
      return dy * dy + dx * dx <= s.size * s.size;
    case ShapeKind::kRectangle:
      return std::abs(dy) <= s.size && std::abs(dx) <= s.size2;
    case ShapeKind::kAnnulus: {
      const double d2 = dy * dy + dx * dx;
      return d2 <= s.size * s.size && d2 > s.size2 * s.size2;
    }
  }
  return false;
}

}  // namespace

LabelMap labels_from_image(const Image& image) {
  if (image.channels != 1) throw DataError(DataError::Kind::kFormat, "masks must be single-channel images");
  LabelMap m = LabelMap::zeros(1, image.height, image.width);
  for (std::size_t i = 0; i < image.pixels.size(); ++i) m.labels[i] = image.pixels[i];
  return m;
}

Image image_from_labels(const LabelMap& labels, std::int64_t n) {
  Image img;
  img.height = labels.height;
  img.width = labels.width;
  img.channels = 1;
  img.pixels.resize(static_cast<std::size_t>(img.height * img.width));
  for (std::int64_t y = 0; y < img.height; ++y) {
    for (std::int64_t x = 0; x < img.width; ++x) {
      const auto v = labels.at(n, y, x);
      if (v < 0 || v > 255) throw ValueError("label " + std::to_string(v) + " does not fit an 8-bit mask");
      img.pixels[static_cast<std::size_t>(y * img.width + x)] = static_cast<std::uint8_t>(v);
    }
  }
  return img;
}

LabelMap resize_labels(const LabelMap& mask, std::int64_t height, std::int64_t width) {
  if (mask.batch != 1) throw ShapeError("resize_labels expects a single-item label map");
  if (mask.height == height && mask.width == width) return mask;
  LabelMap out = LabelMap::zeros(1, height, width);
  auto source = [](std::int64_t o, std::int64_t in, std::int64_t out_extent) {
    const auto s = static_cast<std::int64_t>(
        std::floor((static_cast<double>(o) + 0.5) * static_cast<double>(in) / static_cast<double>(out_extent)));
    return std::min(s, in - 1);
  };
  for (std::int64_t y = 0; y < height; ++y) {
    const std::int64_t sy = source(y, mask.height, height);
    for (std::int64_t x = 0; x < width; ++x) {
      out.labels[static_cast<std::size_t>(y * width + x)] = mask.at(0, sy, source(x, mask.width, width));
    }
  }
  return out;
}

Tensor image_to_tensor(const Image& img, DType dtype) {
  const std::int64_t c = img.channels;
  std::vector<double> values(img.pixels.size());
  const double scale = 1.0 / static_cast<double>(img.max_value);
  for (std::int64_t ch = 0; ch < c; ++ch) {
    for (std::int64_t i = 0; i < img.height * img.width; ++i) {
      values[static_cast<std::size_t>(ch * img.height * img.width + i)] =
          static_cast<double>(img.pixels[static_cast<std::size_t>(i * c + ch)]) * scale;
    }
  }
  return Tensor::from_vector({1, c, img.height, img.width}, std::move(values)).to(dtype);
}

Sample load_sample(const std::string& image_path, const std::string& mask_path, std::int64_t height,
                   std::int64_t width, std::int64_t class_count, DType dtype) {
  if (height < 1 || width < 1) throw ValueError("target resolution must be positive");
  const Image img = read_image(image_path);
  const Image mask_img = read_image(mask_path);
  if (img.height != mask_img.height || img.width != mask_img.width) {
    throw DataError(DataError::Kind::kExtentMismatch,
                    "image " + image_path + " is " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                        " but mask " + mask_path + " is " + std::to_string(mask_img.width) + "x" +
                        std::to_string(mask_img.height));
  }
  LabelMap mask = labels_from_image(mask_img);
  for (auto v : mask.labels) {
    if (v >= class_count) {
      throw DataError(DataError::Kind::kLabelRange, "mask " + mask_path + " holds label " + std::to_string(v) +
                                                        " but only " + std::to_string(class_count) +
                                                        " classes are configured");
    }
  }
  Tensor image = image_to_tensor(img, dtype);
  {
    NoGradGuard guard;
    image = nn::bilinear_resize(image, height, width);
  }
  return {image, resize_labels(mask, height, width)};
}

std::string Manifest::image_path(std::size_t i) const { return resolve(root, records.at(i).image); }

std::string Manifest::mask_path(std::size_t i) const { return resolve(root, records.at(i).mask); }

Manifest read_manifest(const std::string& path) {
  std::filesystem::path p(path);
  if (std::filesystem::is_directory(p)) p /= "manifest.tsv";
  std::ifstream f(p);
  if (!f) throw DataError(DataError::Kind::kIo, "cannot open manifest " + p.string());
  Manifest m;
  m.root = p.parent_path();
  std::string line;
  int line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos || tab == 0 ||
        tab + 1 == line.size()) {
      throw DataError(DataError::Kind::kFormat,
                      p.string() + ":" + std::to_string(line_no) + ": expected 'image<TAB>mask'");
    }
    m.records.push_back({line.substr(0, tab), line.substr(tab + 1)});
  }
  return m;
}

void write_manifest(const std::string& path, const Manifest& manifest) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw DataError(DataError::Kind::kIo, "cannot write manifest " + path);
  for (const auto& r : manifest.records) f << r.image << '\t' << r.mask << '\n';
  if (!f) throw DataError(DataError::Kind::kIo, "write failed for manifest " + path);
}

std::array<Manifest, 3> split_manifest(const Manifest& manifest, const SplitRatios& ratios,
                                       std::uint64_t random_state) {
  if (manifest.records.empty()) throw ValueError("cannot split an empty manifest");
  if (ratios.train < 0 || ratios.val < 0 || ratios.test < 0 ||
      std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9) {
    throw ValueError("split ratios must be nonnegative and sum to 1");
  }
  const auto n = static_cast<std::int64_t>(manifest.records.size());
  std::vector<std::size_t> order(manifest.records.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(random_state);
  for (std::size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[static_cast<std::size_t>(rng.uniform_int(i))]);
  }
  const std::int64_t n_train = std::min<std::int64_t>(n, std::llround(static_cast<double>(n) * ratios.train));
  const std::int64_t n_val = std::min<std::int64_t>(n - n_train, std::llround(static_cast<double>(n) * ratios.val));
  std::array<Manifest, 3> out;
  for (auto& m : out) m.root = manifest.root;
  for (std::int64_t i = 0; i < n; ++i) {
    const std::size_t part = i < n_train ? 0 : (i < n_train + n_val ? 1 : 2);
    out[part].records.push_back(manifest.records[order[static_cast<std::size_t>(i)]]);
  }
  return out;
}

LabelMap render_shapes(std::int64_t height, std::int64_t width, const std::vector<ShapeInstance>& shapes) {
  LabelMap m = LabelMap::zeros(1, height, width);
  for (const auto& s : shapes) {
    const double reach = bounding_radius(s) + 1;
    const auto y0 = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::floor(s.cy - reach)));
    const auto y1 = std::min<std::int64_t>(height, static_cast<std::int64_t>(std::ceil(s.cy + reach)) + 1);
    const auto x0 = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::floor(s.cx - reach)));
    const auto x1 = std::min<std::int64_t>(width, static_cast<std::int64_t>(std::ceil(s.cx + reach)) + 1);
    for (std::int64_t y = y0; y < y1; ++y) {
      for (std::int64_t x = x0; x < x1; ++x) {
        if (covers(s, static_cast<double>(y) + 0.5, static_cast<double>(x) + 0.5)) {
          m.labels[static_cast<std::size_t>(y * width + x)] = s.label;
        }
      }
    }
  }
  return m;
}

Manifest generate_synthetic(const SyntheticSpec& spec, const std::string& out_dir) {
  if (spec.count < 1) throw ValueError("synthetic dataset needs at least one image");
  if (spec.resolution < 32 || spec.resolution % 32 != 0) {
    throw ValueError("synthetic resolution must be a positive multiple of 32");
  }
  if (spec.class_count < 2 || spec.class_count > 255) throw ValueError("synthetic class count must be in [2, 255]");
  if (spec.channels != 1 && spec.channels != 3) throw ValueError("synthetic images must have 1 or 3 channels");
  if (spec.noise < 0) throw ValueError("noise level must be nonnegative");

  const std::filesystem::path root(out_dir);
  std::filesystem::create_directories(root / "images");
  std::filesystem::create_directories(root / "masks");
  const double res = spec.resolution;
  const int foreground = spec.class_count - 1;

  Manifest manifest;
  manifest.root = root;
  for (int i = 0; i < spec.count; ++i) {
    Rng rng(mix_seed(spec.seed, static_cast<std::uint64_t>(i)));
    std::vector<ShapeInstance> shapes;
    for (int label = 1; label <= foreground; ++label) {
      ShapeInstance s;
      s.kind = static_cast<ShapeKind>((label - 1) % 3);
      s.label = label;
      double scale = 1.0;
      for (int attempt = 0;; ++attempt) {
        if (attempt > 0 && attempt % 200 == 0) scale *= 0.8;
        s.size = rng.uniform(res / 10, res / 5) * scale;
        s.size2 = s.kind == ShapeKind::kAnnulus ? s.size * 0.5 : rng.uniform(res / 10, res / 5) * scale;
        const double reach = bounding_radius(s) + 1;
        if (2 * reach >= res) continue;
        s.cy = rng.uniform(reach, res - reach);
        s.cx = rng.uniform(reach, res - reach);
        const bool clear = std::all_of(shapes.begin(), shapes.end(), [&](const ShapeInstance& o) {
          return std::hypot(o.cy - s.cy, o.cx - s.cx) > bounding_radius(o) + bounding_radius(s) + 2;
        });
        if (clear) break;
      }
      shapes.push_back(s);
    }
    const LabelMap mask = render_shapes(spec.resolution, spec.resolution, shapes);

    Image img;
    img.height = img.width = spec.resolution;
    img.channels = spec.channels;
    img.pixels.resize(static_cast<std::size_t>(spec.resolution * spec.resolution * spec.channels));
    for (std::size_t p = 0; p < mask.labels.size(); ++p) {
      const double level = 0.15 + 0.75 * static_cast<double>(mask.labels[p]) / static_cast<double>(foreground);
      for (int c = 0; c < spec.channels; ++c) {
        const double v = std::clamp(level + spec.noise * rng.normal(), 0.0, 1.0);
        img.pixels[p * static_cast<std::size_t>(spec.channels) + static_cast<std::size_t>(c)] =
            static_cast<std::uint8_t>(std::lround(v * 255.0));
      }
    }
    const std::string name = four_digits(i) + ".png";
    write_png((root / "images" / name).string(), img);
    write_png((root / "masks" / name).string(), image_from_labels(mask));
    manifest.records.push_back({"images/" + name, "masks/" + name});
  }
  write_manifest((root / "manifest.tsv").string(), manifest);
  return manifest;
}

Dataset load_dataset(const Manifest& manifest, std::int64_t resolution, std::int64_t class_count, DType dtype) {
  if (manifest.records.empty()) throw ValueError("dataset manifest is empty");
  Dataset d;
  d.class_count = class_count;
  for (std::size_t i = 0; i < manifest.records.size(); ++i) {
    d.samples.push_back(
        load_sample(manifest.image_path(i), manifest.mask_path(i), resolution, resolution, class_count, dtype));
    if (d.samples.back().image.dim(1) != d.samples.front().image.dim(1)) {
      throw DataError(DataError::Kind::kFormat, "dataset mixes gray and color images at " + manifest.image_path(i));
    }
  }
  return d;
}

SegmentationBatch make_batch(const Dataset& data, const std::vector<std::size_t>& idx) {
  if (idx.empty()) throw ValueError("make_batch: empty index list");
  std::vector<Tensor> images;
  std::vector<LabelMap> masks;
  for (auto i : idx) {
    images.push_back(data.samples.at(i).image);
    masks.push_back(data.samples.at(i).mask);
  }
  SegmentationBatch b;
  {
    NoGradGuard guard;
    b.images = images.size() == 1 ? images[0] : ops::concat(images, 0);
  }
  b.masks = stack_labels(masks);
  b.class_count = data.class_count;
  return b;
}

}  // namespace rwkvunet
