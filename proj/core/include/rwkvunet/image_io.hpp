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

#include "rwkvunet/tensor.hpp"

namespace rwkvunet {

class DataError : public Error {
 public:
  enum class Kind { kIo, kDecode, kExtentMismatch, kLabelRange, kFormat };

  DataError(Kind kind, const std::string& message) : Error(message), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// 8-bit raster with interleaved channels (1 = gray, 3 = RGB).
struct Image {
  std::int64_t height = 0;
  std::int64_t width = 0;
  int channels = 1;
  int max_value = 255;
  std::vector<std::uint8_t> pixels;

  std::uint8_t at(std::int64_t y, std::int64_t x, int c = 0) const {
    return pixels[static_cast<std::size_t>((y * width + x) * channels + c)];
  }
};

/// Decodes PNG (8-bit gray/RGB, other PNG layouts are converted) or binary/ASCII PGM/PPM.
Image read_image(const std::string& path);
void write_png(const std::string& path, const Image& image);
void write_pnm(const std::string& path, const Image& image);

}  // namespace rwkvunet
