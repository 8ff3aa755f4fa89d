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

#include "rwkvunet/losses.hpp"

#include <algorithm>
#include <cmath>

#include "rwkvunet/autodiff.hpp"
#include "rwkvunet/ops.hpp"

namespace rwkvunet {

namespace {

struct Geometry {
  std::int64_t batch, classes, pixels;  // pixels per item
};

Geometry check_inputs(const Tensor& logits, const LabelMap& masks, const char* op) {
  if (logits.rank() != 4) throw ShapeError(std::string(op) + ": logits must be (N, K, H, W), got " + shape_str(logits.shape()));
  if (masks.batch != logits.dim(0) || masks.height != logits.dim(2) || masks.width != logits.dim(3)) {
    throw ShapeError(std::string(op) + ": logits " + shape_str(logits.shape()) + " do not match masks " +
                     shape_str({masks.batch, masks.height, masks.width}));
  }
  const std::int64_t k = logits.dim(1);
  validate_labels(masks, k == 1 ? 2 : k);
  return {logits.dim(0), k, logits.dim(2) * logits.dim(3)};
}

// Per-pixel probabilities in double, laid out like the logits.
std::vector<double> probabilities(const Tensor& logits, const Geometry& g) {
  std::vector<double> z = logits.to_vector();
  if (g.classes == 1) {
    for (auto& v : z) v = 1.0 / (1.0 + std::exp(-v));
    return z;
  }
  for (std::int64_t n = 0; n < g.batch; ++n) {
    double* base = z.data() + n * g.classes * g.pixels;
    for (std::int64_t s = 0; s < g.pixels; ++s) {
      double m = base[s];
      for (std::int64_t c = 1; c < g.classes; ++c) m = std::max(m, base[c * g.pixels + s]);
      double total = 0;
      for (std::int64_t c = 0; c < g.classes; ++c) {
        double& v = base[c * g.pixels + s];
        v = std::exp(v - m);
        total += v;
      }
      for (std::int64_t c = 0; c < g.classes; ++c) base[c * g.pixels + s] /= total;
    }
  }
  return z;
}

Tensor scalar_like(const Tensor& logits, double value) { return Tensor::scalar(value, logits.dtype()); }

// Records a scalar loss whose gradient w.r.t. the logits is `dz` scaled by the incoming gradient.
void attach(Tensor& out, const Tensor& logits, const char* name, std::shared_ptr<std::vector<double>> dz) {
  if (!detail::should_record({&logits})) return;
  detail::record(name, {logits}, out, [logits, dz](const detail::Buffer& g) {
    dispatch(logits.dtype(), [&]<class T>() {
      const double scale = static_cast<double>(std::get<std::vector<T>>(g)[0]);
      auto& gx = detail::grad_vector<T>(logits);
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += static_cast<T>(scale * (*dz)[i]);
    });
  });
}

}  // namespace

void LossConfig::validate() const {
  if (alpha < 0 || beta < 0 || !(alpha + beta > 0)) {
    throw ValueError("loss weights must be nonnegative with a positive sum");
  }
  if (!(dice_epsilon >= 0)) throw ValueError("dice epsilon must be nonnegative");
}

Tensor cross_entropy(const Tensor& logits, const LabelMap& masks) {
  const Geometry g = check_inputs(logits, masks, "cross_entropy");
  const double count = static_cast<double>(g.batch * g.pixels);
  const auto z = logits.to_vector();
  auto dz = std::make_shared<std::vector<double>>(z.size());
  double total = 0;
  if (g.classes == 1) {
    for (std::int64_t i = 0; i < g.batch * g.pixels; ++i) {
      const double x = z[static_cast<std::size_t>(i)];
      const double y = masks.labels[static_cast<std::size_t>(i)];
      total += std::max(x, 0.0) - x * y + std::log1p(std::exp(-std::abs(x)));
      (*dz)[static_cast<std::size_t>(i)] = (1.0 / (1.0 + std::exp(-x)) - y) / count;
    }
  } else {
    const auto p = probabilities(logits, g);
    for (std::int64_t n = 0; n < g.batch; ++n) {
      for (std::int64_t s = 0; s < g.pixels; ++s) {
        const std::int64_t label = masks.labels[static_cast<std::size_t>(n * g.pixels + s)];
        const std::int64_t base = n * g.classes * g.pixels + s;
        double m = z[static_cast<std::size_t>(base)];
        for (std::int64_t c = 1; c < g.classes; ++c) m = std::max(m, z[static_cast<std::size_t>(base + c * g.pixels)]);
        double lse = 0;
        for (std::int64_t c = 0; c < g.classes; ++c) lse += std::exp(z[static_cast<std::size_t>(base + c * g.pixels)] - m);
        total += m + std::log(lse) - z[static_cast<std::size_t>(base + label * g.pixels)];
        for (std::int64_t c = 0; c < g.classes; ++c) {
          const auto idx = static_cast<std::size_t>(base + c * g.pixels);
          (*dz)[idx] = (p[idx] - (c == label ? 1.0 : 0.0)) / count;
        }
      }
    }
  }
  Tensor out = scalar_like(logits, total / count);
  attach(out, logits, "cross_entropy", dz);
  return out;
}

Tensor dice_loss(const Tensor& logits, const LabelMap& masks, const LossConfig& cfg) {
  cfg.validate();
  const Geometry g = check_inputs(logits, masks, "dice_loss");
  const auto p = probabilities(logits, g);
  const double eps = cfg.dice_epsilon;

  // Classes that enter the average; the single-channel path scores its foreground channel.
  std::int64_t first = 0;
  if (g.classes > 1 && cfg.foreground_only) first = 1;
  const double averaged = static_cast<double>(g.classes - first);

  std::vector<double> inter(static_cast<std::size_t>(g.classes), 0.0), sums(static_cast<std::size_t>(g.classes), 0.0);
  auto target = [&](std::int64_t n, std::int64_t c, std::int64_t s) {
    const std::int32_t label = masks.labels[static_cast<std::size_t>(n * g.pixels + s)];
    return g.classes == 1 ? static_cast<double>(label) : (label == c ? 1.0 : 0.0);
  };
  for (std::int64_t n = 0; n < g.batch; ++n) {
    for (std::int64_t c = 0; c < g.classes; ++c) {
      for (std::int64_t s = 0; s < g.pixels; ++s) {
        const double pv = p[static_cast<std::size_t>((n * g.classes + c) * g.pixels + s)];
        const double t = target(n, c, s);
        inter[static_cast<std::size_t>(c)] += pv * t;
        sums[static_cast<std::size_t>(c)] += pv + t;
      }
    }
  }
  double score = 0;
  for (std::int64_t c = first; c < g.classes; ++c) {
    const auto ci = static_cast<std::size_t>(c);
    score += (2 * inter[ci] + eps) / (sums[ci] + eps);
  }
  const double loss = 1.0 - score / averaged;

  // dL/dp per class and pixel, then through the sigmoid or softmax.
  auto dz = std::make_shared<std::vector<double>>(p.size(), 0.0);
  std::vector<double> dp(static_cast<std::size_t>(g.classes));
  for (std::int64_t n = 0; n < g.batch; ++n) {
    for (std::int64_t s = 0; s < g.pixels; ++s) {
      for (std::int64_t c = 0; c < g.classes; ++c) {
        const auto ci = static_cast<std::size_t>(c);
        if (c < first) {
          dp[ci] = 0;
          continue;
        }
        const double den = sums[ci] + eps;
        dp[ci] = -(2 * target(n, c, s) * den - (2 * inter[ci] + eps)) / (den * den) / averaged;
      }
      if (g.classes == 1) {
        const auto idx = static_cast<std::size_t>(n * g.pixels + s);
        (*dz)[idx] = dp[0] * p[idx] * (1 - p[idx]);
        continue;
      }
      double dot = 0;
      for (std::int64_t c = 0; c < g.classes; ++c) {
        dot += p[static_cast<std::size_t>((n * g.classes + c) * g.pixels + s)] * dp[static_cast<std::size_t>(c)];
      }
      for (std::int64_t c = 0; c < g.classes; ++c) {
        const auto idx = static_cast<std::size_t>((n * g.classes + c) * g.pixels + s);
        (*dz)[idx] = p[idx] * (dp[static_cast<std::size_t>(c)] - dot);
      }
    }
  }
  Tensor out = scalar_like(logits, loss);
  attach(out, logits, "dice_loss", dz);
  return out;
}

Tensor mixed_loss(const Tensor& logits, const LabelMap& masks, const LossConfig& cfg) {
  cfg.validate();
  return ops::add(ops::mul_scalar(cross_entropy(logits, masks), cfg.alpha),
                  ops::mul_scalar(dice_loss(logits, masks, cfg), cfg.beta));
}

}  // namespace rwkvunet
