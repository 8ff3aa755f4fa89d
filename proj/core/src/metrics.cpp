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

#include "rwkvunet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace rwkvunet {

namespace {

void check_pair(const LabelMap& a, const LabelMap& b) {
  if (a.batch != b.batch || a.height != b.height || a.width != b.width) {
    throw ShapeError("label maps differ in shape: " + shape_str({a.batch, a.height, a.width}) + " vs " +
                     shape_str({b.batch, b.height, b.width}));
  }
}

// Squared 1-D distance transform of f (lower envelope of parabolas).
void edt_1d(const double* f, std::int64_t n, std::int64_t stride, double* out, std::vector<std::int64_t>& v,
            std::vector<double>& z) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  v.assign(static_cast<std::size_t>(n), 0);
  z.assign(static_cast<std::size_t>(n + 1), 0);
  std::int64_t k = -1;
  for (std::int64_t q = 0; q < n; ++q) {
    const double fq = f[q * stride];
    if (fq == kInf) continue;
    if (k < 0) {
      k = 0;
      v[0] = q;
      z[0] = -kInf;
      z[1] = kInf;
      continue;
    }
    double s;
    while (true) {
      const std::int64_t p = v[static_cast<std::size_t>(k)];
      s = ((fq + static_cast<double>(q * q)) - (f[p * stride] + static_cast<double>(p * p))) /
          (2.0 * static_cast<double>(q - p));
      if (s <= z[static_cast<std::size_t>(k)] && k > 0) {
        --k;
      } else {
        break;
      }
    }
    ++k;
    v[static_cast<std::size_t>(k)] = q;
    z[static_cast<std::size_t>(k)] = s;
    z[static_cast<std::size_t>(k + 1)] = kInf;
  }
  if (k < 0) {
    for (std::int64_t q = 0; q < n; ++q) out[q * stride] = kInf;
    return;
  }
  std::int64_t j = 0;
  for (std::int64_t q = 0; q < n; ++q) {
    while (z[static_cast<std::size_t>(j + 1)] < static_cast<double>(q)) ++j;
    const std::int64_t p = v[static_cast<std::size_t>(j)];
    out[q * stride] = static_cast<double>((q - p) * (q - p)) + f[p * stride];
  }
}

}  // namespace

DscResult dsc(const LabelMap& pred, const LabelMap& truth, std::int64_t class_count) {
  check_pair(pred, truth);
  validate_labels(pred, class_count);
  validate_labels(truth, class_count);
  const auto k = static_cast<std::size_t>(class_count);
  std::vector<std::int64_t> inter(k, 0), pc(k, 0), tc(k, 0);
  for (std::size_t i = 0; i < pred.labels.size(); ++i) {
    const auto p = static_cast<std::size_t>(pred.labels[i]);
    const auto t = static_cast<std::size_t>(truth.labels[i]);
    ++pc[p];
    ++tc[t];
    if (p == t) ++inter[p];
  }
  DscResult r;
  for (std::size_t c = 0; c < k; ++c) {
    const std::int64_t den = pc[c] + tc[c];
    r.per_class.push_back(den == 0 ? 1.0 : 2.0 * static_cast<double>(inter[c]) / static_cast<double>(den));
  }
  double all = 0, fg = 0;
  for (std::size_t c = 0; c < k; ++c) {
    all += r.per_class[c];
    if (c > 0) fg += r.per_class[c];
  }
  r.mean_all = all / static_cast<double>(k);
  r.mean_foreground = k > 1 ? fg / static_cast<double>(k - 1) : r.per_class[0];
  return r;
}

BinaryMask BinaryMask::from_labels(const LabelMap& labels, std::int64_t n, std::int32_t label) {
  BinaryMask m;
  m.height = labels.height;
  m.width = labels.width;
  m.data.resize(static_cast<std::size_t>(m.height * m.width));
  for (std::int64_t y = 0; y < m.height; ++y) {
    for (std::int64_t x = 0; x < m.width; ++x) {
      m.data[static_cast<std::size_t>(y * m.width + x)] = labels.at(n, y, x) == label ? 1 : 0;
    }
  }
  return m;
}

bool BinaryMask::empty() const {
  return std::none_of(data.begin(), data.end(), [](std::uint8_t v) { return v != 0; });
}

BinaryMask boundary(const BinaryMask& mask) {
  BinaryMask b = mask;
  auto inside = [&](std::int64_t y, std::int64_t x) {
    return y >= 0 && y < mask.height && x >= 0 && x < mask.width &&
           mask.data[static_cast<std::size_t>(y * mask.width + x)] != 0;
  };
  for (std::int64_t y = 0; y < mask.height; ++y) {
    for (std::int64_t x = 0; x < mask.width; ++x) {
      if (!inside(y, x)) continue;
      const bool edge = !inside(y - 1, x) || !inside(y + 1, x) || !inside(y, x - 1) || !inside(y, x + 1);
      b.data[static_cast<std::size_t>(y * mask.width + x)] = edge ? 1 : 0;
    }
  }
  return b;
}

std::vector<double> distance_transform(const BinaryMask& sites) {
  const std::int64_t h = sites.height, w = sites.width;
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> f(static_cast<std::size_t>(h * w)), g(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = sites.data[i] ? 0.0 : kInf;
  std::vector<std::int64_t> v;
  std::vector<double> z;
  for (std::int64_t x = 0; x < w; ++x) edt_1d(f.data() + x, h, w, g.data() + x, v, z);
  for (std::int64_t y = 0; y < h; ++y) edt_1d(g.data() + y * w, w, 1, f.data() + y * w, v, z);
  for (auto& d : f) d = std::sqrt(d);
  return f;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw ValueError("percentile of an empty sample");
  if (q < 0 || q > 100) throw ValueError("percentile rank must lie in [0, 100]");
  std::sort(values.begin(), values.end());
  const double rank = q / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (rank - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

Hd95 hd95(const BinaryMask& a, const BinaryMask& b) {
  if (a.height != b.height || a.width != b.width) throw ShapeError("hd95: masks differ in extents");
  const bool ea = a.empty(), eb = b.empty();
  if (ea && eb) return {true, 0.0};
  if (ea || eb) return {false, 0.0};
  const BinaryMask ba = boundary(a), bb = boundary(b);
  const auto to_b = distance_transform(bb);
  const auto to_a = distance_transform(ba);
  std::vector<double> pooled;
  for (std::size_t i = 0; i < ba.data.size(); ++i) {
    if (ba.data[i]) pooled.push_back(to_b[i]);
    if (bb.data[i]) pooled.push_back(to_a[i]);
  }
  return {true, percentile(std::move(pooled), 95.0)};
}

SegmentationScores evaluate(const LabelMap& pred, const LabelMap& truth, std::int64_t class_count) {
  check_pair(pred, truth);
  validate_labels(pred, class_count);
  validate_labels(truth, class_count);
  SegmentationScores s;
  const std::int64_t first = class_count > 1 ? 1 : 0;
  s.class_dsc.assign(static_cast<std::size_t>(class_count - first), 0.0);
  double dsc_sum = 0, hd_sum = 0;
  for (std::int64_t n = 0; n < pred.batch; ++n) {
    const auto d = dsc(pred.item(n), truth.item(n), class_count);
    for (std::int64_t c = first; c < class_count; ++c) {
      s.class_dsc[static_cast<std::size_t>(c - first)] += d.per_class[static_cast<std::size_t>(c)];
      dsc_sum += d.per_class[static_cast<std::size_t>(c)];
      const auto h = hd95(BinaryMask::from_labels(pred, n, static_cast<std::int32_t>(c)),
                          BinaryMask::from_labels(truth, n, static_cast<std::int32_t>(c)));
      if (h.defined) {
        hd_sum += h.value;
        ++s.hd95_defined;
      } else {
        ++s.hd95_undefined;
      }
    }
  }
  for (auto& v : s.class_dsc) v /= static_cast<double>(pred.batch);
  s.mean_dsc = dsc_sum / static_cast<double>(pred.batch * (class_count - first));
  s.mean_hd95 = s.hd95_defined ? hd_sum / static_cast<double>(s.hd95_defined) : 0.0;
  return s;
}

}  // namespace rwkvunet
