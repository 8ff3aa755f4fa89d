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

#include "rwkvunet/image_io.hpp"

#include <png.h>

#include <cctype>
#include <cstring>
#include <fstream>
#include <iterator>

namespace rwkvunet {

namespace {

bool has_png_signature(const std::string& bytes) {
  return bytes.size() >= 8 && png_sig_cmp(reinterpret_cast<png_const_bytep>(bytes.data()), 0, 8) == 0;
}

Image decode_png(const std::string& bytes, const std::string& path) {
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size())) {
    throw DataError(DataError::Kind::kDecode, "cannot decode PNG " + path + ": " + img.message);
  }
  const bool color = (img.format & PNG_FORMAT_FLAG_COLOR) != 0;
  img.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  Image out;
  out.height = img.height;
  out.width = img.width;
  out.channels = color ? 3 : 1;
  out.pixels.resize(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, out.pixels.data(), 0, nullptr)) {
    png_image_free(&img);
    throw DataError(DataError::Kind::kDecode, "cannot decode PNG " + path + ": " + img.message);
  }
  return out;
}

class PnmParser {
 public:
  PnmParser(const std::string& bytes, const std::string& path) : b_(bytes), path_(path) {}

  Image parse() {
    if (b_.size() < 2 || b_[0] != 'P') fail("missing P-format magic");
    const char kind = b_[1];
    if (kind != '2' && kind != '3' && kind != '5' && kind != '6') fail("unsupported PNM type");
    pos_ = 2;
    Image img;
    img.channels = (kind == '3' || kind == '6') ? 3 : 1;
    img.width = number();
    img.height = number();
    img.max_value = static_cast<int>(number());
    if (img.width <= 0 || img.height <= 0) fail("invalid extents");
    if (img.max_value <= 0 || img.max_value > 255) fail("only 8-bit PNM files are supported");
    const auto count = static_cast<std::size_t>(img.width * img.height * img.channels);
    img.pixels.resize(count);
    if (kind == '5' || kind == '6') {
      ++pos_;  // single whitespace after the header
      if (b_.size() < pos_ + count) fail("truncated pixel data");
      std::memcpy(img.pixels.data(), b_.data() + pos_, count);
    } else {
      for (auto& p : img.pixels) {
        const auto v = number();
        if (v > img.max_value) fail("sample exceeds max value");
        p = static_cast<std::uint8_t>(v);
      }
    }
    return img;
  }

 private:
  [[noreturn]] void fail(const std::string& why) const {
    throw DataError(DataError::Kind::kDecode, "cannot decode PNM " + path_ + ": " + why);
  }

  std::int64_t number() {
    while (pos_ < b_.size()) {
      if (b_[pos_] == '#') {
        while (pos_ < b_.size() && b_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(b_[pos_]))) {
        ++pos_;
      } else {
        break;
      }
    }
    if (pos_ >= b_.size() || !std::isdigit(static_cast<unsigned char>(b_[pos_]))) fail("malformed header");
    std::int64_t v = 0;
    while (pos_ < b_.size() && std::isdigit(static_cast<unsigned char>(b_[pos_]))) {
      v = v * 10 + (b_[pos_] - '0');
      if (v > (1 << 24)) fail("number too large");
      ++pos_;
    }
    return v;
  }

  const std::string& b_;
  const std::string& path_;
  std::size_t pos_ = 0;
};

void check_image(const Image& image) {
  if (image.channels != 1 && image.channels != 3) throw ValueError("images must have 1 or 3 channels");
  if (image.pixels.size() != static_cast<std::size_t>(image.height * image.width * image.channels)) {
    throw ValueError("image pixel count does not match its extents");
  }
}

}  // namespace

Image read_image(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError(DataError::Kind::kIo, "cannot open " + path);
  const std::string bytes(std::istreambuf_iterator<char>(f), {});
  if (has_png_signature(bytes)) return decode_png(bytes, path);
  if (bytes.size() >= 2 && bytes[0] == 'P') return PnmParser(bytes, path).parse();
  throw DataError(DataError::Kind::kFormat, path + " is neither PNG nor PGM/PPM");
}

void write_png(const std::string& path, const Image& image) {
  check_image(image);
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width);
  img.height = static_cast<png_uint_32>(image.height);
  img.format = image.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&img, path.c_str(), 0, image.pixels.data(), 0, nullptr)) {
    throw DataError(DataError::Kind::kIo, "cannot write PNG " + path + ": " + img.message);
  }
}

void write_pnm(const std::string& path, const Image& image) {
  check_image(image);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError(DataError::Kind::kIo, "cannot open " + path + " for writing");
  f << (image.channels == 3 ? "P6" : "P5") << '\n' << image.width << ' ' << image.height << '\n'
    << image.max_value << '\n';
  f.write(reinterpret_cast<const char*>(image.pixels.data()), static_cast<std::streamsize>(image.pixels.size()));
  if (!f) throw DataError(DataError::Kind::kIo, "write failed for " + path);
}

}  // namespace rwkvunet
