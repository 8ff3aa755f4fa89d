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

#include "rwkvunet/segmentation.hpp"

#include <string>

namespace rwkvunet {

LabelMap LabelMap::zeros(std::int64_t batch, std::int64_t height, std::int64_t width) {
  if (batch < 1 || height < 1 || width < 1) throw ShapeError("label map extents must be positive");
  LabelMap m;
  m.batch = batch;
  m.height = height;
  m.width = width;
  m.labels.assign(static_cast<std::size_t>(batch * height * width), 0);
  return m;
}

LabelMap LabelMap::item(std::int64_t n) const {
  if (n < 0 || n >= batch) throw ShapeError("label map item " + std::to_string(n) + " out of range");
  LabelMap m;
  m.batch = 1;
  m.height = height;
  m.width = width;
  const auto plane = height * width;
  m.labels.assign(labels.begin() + n * plane, labels.begin() + (n + 1) * plane);
  return m;
}

void validate_labels(const LabelMap& masks, std::int64_t class_count) {
  if (static_cast<std::int64_t>(masks.labels.size()) != masks.size()) {
    throw ShapeError("label map holds " + std::to_string(masks.labels.size()) + " values for extents " +
                     shape_str({masks.batch, masks.height, masks.width}));
  }
  for (auto v : masks.labels) {
    if (v < 0 || v >= class_count) {
      throw ValueError("mask label " + std::to_string(v) + " outside [0, " + std::to_string(class_count) + ")");
    }
  }
}

LabelMap predict_labels(const Tensor& logits) {
  if (logits.rank() != 4) throw ShapeError("predict_labels: logits must be (N, K, H, W)");
  LabelMap m = LabelMap::zeros(logits.dim(0), logits.dim(2), logits.dim(3));
  const std::int64_t k = logits.dim(1), plane = m.height * m.width;
  const auto z = logits.to_vector();
  for (std::int64_t n = 0; n < m.batch; ++n) {
    for (std::int64_t s = 0; s < plane; ++s) {
      const double* base = z.data() + n * k * plane + s;
      std::int32_t best = 0;
      if (k == 1) {
        best = base[0] > 0 ? 1 : 0;
      } else {
        for (std::int64_t c = 1; c < k; ++c) {
          if (base[c * plane] > base[best * plane]) best = static_cast<std::int32_t>(c);
        }
      }
      m.labels[static_cast<std::size_t>(n * plane + s)] = best;
    }
  }
  return m;
}

LabelMap stack_labels(const std::vector<LabelMap>& items) {
  if (items.empty()) throw ValueError("stack_labels: no items");
  LabelMap m;
  m.height = items[0].height;
  m.width = items[0].width;
  for (const auto& it : items) {
    if (it.height != m.height || it.width != m.width) throw ShapeError("stack_labels: extents differ");
    m.batch += it.batch;
    m.labels.insert(m.labels.end(), it.labels.begin(), it.labels.end());
  }
  return m;
}

}  // namespace rwkvunet
