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

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>

namespace rwkvunet {
namespace {

namespace fs = std::filesystem;

class DataIoTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           (std::string("rwkvunet_data_") + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

Image gradient_image(std::int64_t h, std::int64_t w, int channels) {
  Image img;
  img.height = h;
  img.width = w;
  img.channels = channels;
  for (std::int64_t i = 0; i < h * w * channels; ++i) img.pixels.push_back(static_cast<std::uint8_t>((i * 37) % 256));
  return img;
}

TEST_F(DataIoTest, PngAndPnmRoundTrip) {
  for (int channels : {1, 3}) {
    const Image img = gradient_image(7, 5, channels);
    write_png(path("a.png"), img);
    write_pnm(path("a.pnm"), img);
    for (const auto& p : {path("a.png"), path("a.pnm")}) {
      const Image back = read_image(p);
      EXPECT_EQ(back.height, 7);
      EXPECT_EQ(back.width, 5);
      EXPECT_EQ(back.channels, channels);
      EXPECT_EQ(back.pixels, img.pixels) << p;
    }
  }
}

TEST_F(DataIoTest, ReadErrors) {
  try {
    read_image(path("missing.png"));
    FAIL();
  } catch (const DataError& e) {
    EXPECT_EQ(e.kind(), DataError::Kind::kIo);
  }
  std::ofstream(path("junk.png")) << "not an image";
  EXPECT_THROW(read_image(path("junk.png")), DataError);
}

TEST_F(DataIoTest, ImageTensorIsPlanarAndScaled) {
  Image img = gradient_image(2, 3, 3);
  const Tensor t = image_to_tensor(img, DType::kFloat64);
  ASSERT_EQ(t.shape(), (Shape{1, 3, 2, 3}));
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 2; ++y)
      for (int x = 0; x < 3; ++x)
        EXPECT_DOUBLE_EQ(t.value_at((c * 2 + y) * 3 + x), img.at(y, x, c) / 255.0);
}

TEST_F(DataIoTest, LoadSampleResizesAndValidates) {
  Image img = gradient_image(40, 40, 1);
  LabelMap mask = LabelMap::zeros(1, 40, 40);
  for (int i = 0; i < 40 * 20; ++i) mask.labels[i] = 2;
  write_png(path("i.png"), img);
  write_png(path("m.png"), image_from_labels(mask));
  const Sample s = load_sample(path("i.png"), path("m.png"), 32, 32, 3);
  EXPECT_EQ(s.image.shape(), (Shape{1, 1, 32, 32}));
  EXPECT_EQ(s.mask.at(0, 0, 0), 2);
  EXPECT_EQ(s.mask.at(0, 31, 31), 0);
  try {
    load_sample(path("i.png"), path("m.png"), 32, 32, 2);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_EQ(e.kind(), DataError::Kind::kLabelRange);
  }
  write_png(path("small.png"), gradient_image(20, 40, 1));
  try {
    load_sample(path("small.png"), path("m.png"), 32, 32, 3);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_EQ(e.kind(), DataError::Kind::kExtentMismatch);
  }
}

TEST(ResizeLabels, NeverInventsLabels) {
  LabelMap m = LabelMap::zeros(1, 13, 11);
  for (std::size_t i = 0; i < m.labels.size(); ++i) m.labels[i] = static_cast<std::int32_t>((i * 7) % 5 == 0 ? 4 : i % 2);
  for (auto [h, w] : {std::pair{32, 32}, std::pair{5, 7}, std::pair{13, 11}}) {
    const auto r = resize_labels(m, h, w);
    ASSERT_EQ(r.labels.size(), static_cast<std::size_t>(h * w));
    for (auto v : r.labels) EXPECT_TRUE(v == 0 || v == 1 || v == 4);
  }
  // Integer upscaling replicates pixels.
  const auto up = resize_labels(m, 26, 22);
  for (int y = 0; y < 26; ++y)
    for (int x = 0; x < 22; ++x) EXPECT_EQ(up.at(0, y, x), m.at(0, y / 2, x / 2));
}

TEST(RenderShapes, DiskAreaMatchesGeometry) {
  for (double r : {10.0, 20.5, 30.0}) {
    const auto m = render_shapes(128, 128, {ShapeInstance{ShapeKind::kDisk, 1, 64, 64, r, 0}});
    double area = 0;
    for (auto v : m.labels) area += v;
    EXPECT_NEAR(area / (std::numbers::pi * r * r), 1.0, 0.02) << r;
  }
  const auto rect = render_shapes(64, 64, {ShapeInstance{ShapeKind::kRectangle, 2, 32, 32, 5, 10}});
  double area = 0;
  for (auto v : rect.labels) area += v == 2;
  EXPECT_EQ(area, 10.0 * 20.0);
}

TEST_F(DataIoTest, SyntheticIsDeterministicAndLoadable) {
  SyntheticSpec spec;
  spec.count = 3;
  spec.resolution = 64;
  spec.class_count = 4;
  spec.seed = 11;
  const auto a = generate_synthetic(spec, path("a"));
  const auto b = generate_synthetic(spec, path("b"));
  ASSERT_EQ(a.records.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(read_image(a.image_path(i)).pixels, read_image(b.image_path(i)).pixels);
    EXPECT_EQ(read_image(a.mask_path(i)).pixels, read_image(b.mask_path(i)).pixels);
  }
  const Manifest m = read_manifest(path("a"));
  EXPECT_EQ(m.records, a.records);
  const Dataset d = load_dataset(m, 64, 4);
  EXPECT_EQ(d.channels(), 1);
  std::set<std::int32_t> seen(d.samples[0].mask.labels.begin(), d.samples[0].mask.labels.end());
  EXPECT_EQ(seen, (std::set<std::int32_t>{0, 1, 2, 3}));
  const auto batch = make_batch(d, {2, 0});
  EXPECT_EQ(batch.images.shape(), (Shape{2, 1, 64, 64}));
  EXPECT_EQ(batch.masks.item(1).labels, d.samples[0].mask.labels);

  spec.resolution = 50;
  EXPECT_THROW(generate_synthetic(spec, path("c")), ValueError);
}

TEST(SplitManifest, PartitionsDeterministically) {
  Manifest m;
  for (int i = 0; i < 50; ++i) m.records.push_back({"i" + std::to_string(i), "m" + std::to_string(i)});
  const auto s = split_manifest(m, {}, 3);
  EXPECT_EQ(s[0].records.size(), 40u);
  EXPECT_EQ(s[1].records.size(), 5u);
  EXPECT_EQ(s[2].records.size(), 5u);
  std::set<std::string> all;
  for (const auto& part : s)
    for (const auto& r : part.records) all.insert(r.image);
  EXPECT_EQ(all.size(), 50u);
  EXPECT_EQ(split_manifest(m, {}, 3)[1].records, s[1].records);
  EXPECT_NE(split_manifest(m, {}, 4)[0].records, s[0].records);
  EXPECT_THROW(split_manifest(m, {0.5, 0.5, 0.5}, 0), ValueError);
}

TEST_F(DataIoTest, ManifestFormatErrors) {
  std::ofstream(path("bad.tsv")) << "# header\nimage_only\n";
  try {
    read_manifest(path("bad.tsv"));
    FAIL();
  } catch (const DataError& e) {
    EXPECT_EQ(e.kind(), DataError::Kind::kFormat);
    EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos);
  }
  Manifest m;
  m.records = {{"a.png", "b.png"}};
  write_manifest(path("ok.tsv"), m);
  EXPECT_EQ(read_manifest(path("ok.tsv")).records, m.records);
}

}  // namespace
}  // namespace rwkvunet
