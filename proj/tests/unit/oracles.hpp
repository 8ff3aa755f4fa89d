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

// Reference implementations written directly from the defining formulas,
// without the streaming, factorization or caching of the library kernels.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "rwkvunet/random.hpp"
#include "rwkvunet/tensor.hpp"

namespace oracle {

using rwkvunet::Rng;
using rwkvunet::Shape;
using rwkvunet::Tensor;

inline Tensor random_tensor(const Shape& shape, Rng& rng, double scale = 1.0,
                            rwkvunet::DType dtype = rwkvunet::DType::kFloat64) {
  std::vector<double> v(static_cast<std::size_t>(rwkvunet::shape_numel(shape)));
  for (auto& x : v) x = scale * rng.normal();
  return Tensor::from_vector(shape, std::move(v)).to(dtype);
}

/// Direct 2-D convolution with zero padding.
inline std::vector<double> conv2d(const std::vector<double>& x, std::int64_t n, std::int64_t c, std::int64_t h,
                                  std::int64_t w, const std::vector<double>& weight, const std::vector<double>& bias,
                                  std::int64_t cout, std::int64_t k, std::int64_t stride, std::int64_t pad,
                                  std::int64_t groups) {
  const std::int64_t ho = (h + 2 * pad - k) / stride + 1, wo = (w + 2 * pad - k) / stride + 1;
  const std::int64_t cin_g = c / groups, cout_g = cout / groups;
  std::vector<double> y(static_cast<std::size_t>(n * cout * ho * wo));
  for (std::int64_t b = 0; b < n; ++b)
    for (std::int64_t o = 0; o < cout; ++o)
      for (std::int64_t oy = 0; oy < ho; ++oy)
        for (std::int64_t ox = 0; ox < wo; ++ox) {
          double acc = bias.empty() ? 0.0 : bias[static_cast<std::size_t>(o)];
          const std::int64_t g = o / cout_g;
          for (std::int64_t ci = 0; ci < cin_g; ++ci)
            for (std::int64_t ky = 0; ky < k; ++ky)
              for (std::int64_t kx = 0; kx < k; ++kx) {
                const std::int64_t iy = oy * stride + ky - pad, ix = ox * stride + kx - pad;
                if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
                acc += weight[static_cast<std::size_t>(((o * cin_g + ci) * k + ky) * k + kx)] *
                       x[static_cast<std::size_t>(((b * c + g * cin_g + ci) * h + iy) * w + ix)];
              }
          y[static_cast<std::size_t>(((b * cout + o) * ho + oy) * wo + ox)] = acc;
        }
  return y;
}

/// Bidirectional WKV by direct summation over all token pairs. k, v are (T, C) row-major.
inline std::vector<double> bi_wkv(const std::vector<double>& k, const std::vector<double>& v,
                                  const std::vector<double>& w, const std::vector<double>& u, std::int64_t t_len,
                                  std::int64_t c) {
  std::vector<double> y(static_cast<std::size_t>(t_len * c));
  const double tl = static_cast<double>(t_len);
  for (std::int64_t ch = 0; ch < c; ++ch)
    for (std::int64_t t = 0; t < t_len; ++t) {
      long double num = 0, den = 0;
      for (std::int64_t i = 0; i < t_len; ++i) {
        const auto at = static_cast<std::size_t>(i * c + ch);
        long double e;
        if (i == t) {
          e = std::exp(static_cast<long double>(u[static_cast<std::size_t>(ch)] + k[at]));
        } else {
          const double dist = static_cast<double>(std::abs(t - i));
          e = std::exp(static_cast<long double>(-(dist - 1) / tl * w[static_cast<std::size_t>(ch)] + k[at]));
        }
        num += e * v[at];
        den += e;
      }
      y[static_cast<std::size_t>(t * c + ch)] = static_cast<double>(num / den);
    }
  return y;
}

/// Half-pixel bilinear sample of one plane.
inline std::vector<double> bilinear(const std::vector<double>& x, std::int64_t h, std::int64_t w, std::int64_t oh,
                                    std::int64_t ow) {
  auto coord = [](std::int64_t o, std::int64_t in, std::int64_t out, std::int64_t& i0, std::int64_t& i1, double& f) {
    double s = (static_cast<double>(o) + 0.5) * static_cast<double>(in) / static_cast<double>(out) - 0.5;
    s = std::clamp(s, 0.0, static_cast<double>(in - 1));
    i0 = static_cast<std::int64_t>(std::floor(s));
    i1 = std::min(i0 + 1, in - 1);
    f = s - static_cast<double>(i0);
  };
  std::vector<double> y(static_cast<std::size_t>(oh * ow));
  for (std::int64_t oy = 0; oy < oh; ++oy)
    for (std::int64_t ox = 0; ox < ow; ++ox) {
      std::int64_t y0, y1, x0, x1;
      double fy, fx;
      coord(oy, h, oh, y0, y1, fy);
      coord(ox, w, ow, x0, x1, fx);
      auto at = [&](std::int64_t r, std::int64_t q) { return x[static_cast<std::size_t>(r * w + q)]; };
      y[static_cast<std::size_t>(oy * ow + ox)] = (1 - fy) * ((1 - fx) * at(y0, x0) + fx * at(y0, x1)) +
                                                  fy * ((1 - fx) * at(y1, x0) + fx * at(y1, x1));
    }
  return y;
}

/// Dice of one class by pixel counting; 1 when the class is absent from both.
inline double dice_count(const std::vector<std::int32_t>& pred, const std::vector<std::int32_t>& truth,
                         std::int32_t label) {
  std::int64_t both = 0, p = 0, t = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    p += pred[i] == label;
    t += truth[i] == label;
    both += pred[i] == label && truth[i] == label;
  }
  if (p + t == 0) return 1.0;
  return 2.0 * static_cast<double>(both) / static_cast<double>(p + t);
}

/// HD95 from all boundary pairs. Boundary pixels have a 4-neighbor outside the mask or image.
inline double hd95_all_pairs(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b, std::int64_t h,
                             std::int64_t w) {
  auto edge_points = [&](const std::vector<std::uint8_t>& m) {
    auto in = [&](std::int64_t y, std::int64_t x) {
      return y >= 0 && y < h && x >= 0 && x < w && m[static_cast<std::size_t>(y * w + x)];
    };
    std::vector<std::pair<double, double>> pts;
    for (std::int64_t y = 0; y < h; ++y)
      for (std::int64_t x = 0; x < w; ++x)
        if (in(y, x) && (!in(y - 1, x) || !in(y + 1, x) || !in(y, x - 1) || !in(y, x + 1)))
          pts.emplace_back(static_cast<double>(y), static_cast<double>(x));
    return pts;
  };
  const auto pa = edge_points(a), pb = edge_points(b);
  std::vector<double> d;
  auto directed = [&](const auto& from, const auto& to) {
    for (const auto& p : from) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& q : to) best = std::min(best, std::hypot(p.first - q.first, p.second - q.second));
      d.push_back(best);
    }
  };
  directed(pa, pb);
  directed(pb, pa);
  std::sort(d.begin(), d.end());
  const double rank = 0.95 * static_cast<double>(d.size() - 1);
  const auto lo = static_cast<std::size_t>(rank);
  const auto hi = std::min(lo + 1, d.size() - 1);
  return d[lo] + (rank - static_cast<double>(lo)) * (d[hi] - d[lo]);
}

}  // namespace oracle
