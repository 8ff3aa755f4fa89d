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

#include "rwkvunet/rwkv.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "rwkvunet/autodiff.hpp"
#include "rwkvunet/ops.hpp"
#include "rwkvunet/parallel.hpp"
#include "rwkvunet/profiling.hpp"

namespace rwkvunet::rwkv {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

Tensor projection(std::int64_t out, std::int64_t in, Rng& rng, DType dtype) {
  std::vector<double> values(static_cast<std::size_t>(out * in));
  for (auto& v : values) v = rng.truncated_normal(0.02);
  Tensor t = Tensor::from_vector({out, in}, std::move(values)).to(dtype);
  t.set_requires_grad(true);
  return t;
}

// ---- Q-shift ------------------------------------------------------------

// Offset (dy, dx) such that out(r, c) = in(r - dy, c - dx) for channel quarter q.
constexpr int kShiftY[4] = {0, 0, 1, -1};
constexpr int kShiftX[4] = {1, -1, 0, 0};

template <class T>
void shift_planes(const T* src, T* dst, std::int64_t batch, std::int64_t channels, std::int64_t h, std::int64_t w,
                  bool transpose) {
  const std::int64_t quarter = channels / 4;
  for (std::int64_t n = 0; n < batch; ++n) {
    for (std::int64_t c = 0; c < channels; ++c) {
      const int q = static_cast<int>(c / quarter);
      const int dy = transpose ? -kShiftY[q] : kShiftY[q];
      const int dx = transpose ? -kShiftX[q] : kShiftX[q];
      const T* in = src + (n * channels + c) * h * w;
      T* out = dst + (n * channels + c) * h * w;
      for (std::int64_t r = 0; r < h; ++r) {
        const std::int64_t sr = r - dy;
        if (sr < 0 || sr >= h) continue;
        for (std::int64_t col = 0; col < w; ++col) {
          const std::int64_t sc = col - dx;
          if (sc >= 0 && sc < w) out[r * w + col] += in[sr * w + sc];
        }
      }
    }
  }
}

// ---- Bi-WKV kernels -------------------------------------------------------

// One channel of the forward pass. Outputs y, the log scale q and the scaled
// denominator d (true denominator = d * exp(q), d >= 1).
void wkv_forward_channel(std::int64_t n, double delta, double u, const double* k, const double* v, double* y,
                         double* q, double* d, std::vector<double>& scratch) {
  scratch.resize(static_cast<std::size_t>(3 * n));
  double* fa = scratch.data();
  double* fb = fa + n;
  double* fp = fb + n;
  double a = 0, b = 0, p = kNegInf;
  for (std::int64_t t = 0; t < n; ++t) {
    fa[t] = a;
    fb[t] = b;
    fp[t] = p;
    const double np = std::max(p + delta, k[t]);
    const double s = std::exp(p + delta - np);
    const double e = std::exp(k[t] - np);
    a = a * s + v[t] * e;
    b = b * s + e;
    p = np;
  }
  a = 0;
  b = 0;
  p = kNegInf;
  for (std::int64_t t = n - 1; t >= 0; --t) {
    const double self = u + k[t];
    const double m = std::max({fp[t], p, self});
    const double ef = std::exp(fp[t] - m), eb = std::exp(p - m), es = std::exp(self - m);
    const double num = fa[t] * ef + a * eb + v[t] * es;
    const double den = fb[t] * ef + b * eb + es;
    y[t] = num / den;
    q[t] = m;
    d[t] = den;
    const double np = std::max(p + delta, k[t]);
    const double s = std::exp(p + delta - np);
    const double e = std::exp(k[t] - np);
    a = a * s + v[t] * e;
    b = b * s + e;
    p = np;
  }
}

struct ChannelGrads {
  double dw = 0;
  double du = 0;
};

// One directional sweep of the backward pass, visiting tokens in order idx(0..n-1).
template <class Index>
void wkv_backward_sweep(std::int64_t n, double delta, double inv_t, const double* k, const double* v, const double* y,
                        const double* q, const double* bm, const double* gm, double* dk, double* dv, Index idx,
                        ChannelGrads& out) {
  // value/weight sums with their distance-weighted companions, sharing exponent p
  double a = 0, b = 0, gv = 0, g1 = 0, p = kNegInf;
  // output-gradient sums used by dv / dk, sharing exponent r
  double pm = 0, qm = 0, r = kNegInf;
  for (std::int64_t j = 0; j < n; ++j) {
    const std::int64_t t = idx(j);
    out.dw -= inv_t * bm[t] * std::exp(p - q[t]) * (gv - y[t] * g1);
    const double scale = std::exp(k[t] + r);
    dv[t] += scale * pm;
    dk[t] += v[t] * scale * pm - scale * qm;

    const double np = std::max(p + delta, k[t]);
    const double s = std::exp(p + delta - np);
    const double e = std::exp(k[t] - np);
    gv = (gv + a) * s;
    g1 = (g1 + b) * s;
    a = a * s + v[t] * e;
    b = b * s + e;
    p = np;

    const double nr = std::max(r + delta, -q[t]);
    const double sr = std::exp(r + delta - nr);
    const double er = std::exp(-q[t] - nr);
    pm = pm * sr + bm[t] * er;
    qm = qm * sr + gm[t] * er;
    r = nr;
  }
}

ChannelGrads wkv_backward_channel(std::int64_t n, double delta, double u, const double* k, const double* v,
                                  const double* y, const double* q, const double* d, const double* g, double* dk,
                                  double* dv, std::vector<double>& scratch) {
  scratch.resize(static_cast<std::size_t>(2 * n));
  double* bm = scratch.data();
  double* gm = bm + n;
  ChannelGrads out;
  for (std::int64_t t = 0; t < n; ++t) {
    bm[t] = g[t] / d[t];
    gm[t] = bm[t] * y[t];
    const double s = std::exp(u + k[t] - q[t]);
    dv[t] = s * bm[t];
    dk[t] = s * bm[t] * (v[t] - y[t]);
    out.du += s * bm[t] * (v[t] - y[t]);
  }
  const double inv_t = 1.0 / static_cast<double>(n);
  wkv_backward_sweep(n, delta, inv_t, k, v, y, q, bm, gm, dk, dv, [](std::int64_t j) { return j; }, out);
  wkv_backward_sweep(n, delta, inv_t, k, v, y, q, bm, gm, dk, dv, [n](std::int64_t j) { return n - 1 - j; }, out);
  return out;
}

// Where channel job j lives inside a k/v buffer.
struct WkvLayout {
  std::int64_t jobs = 0;      // independent (batch, channel) sequences
  std::int64_t tokens = 0;    // sequence length T
  std::int64_t channels = 0;  // C, indexes w and u
  bool token_major = false;   // (T, C) rather than (N, C, T)

  std::int64_t base(std::int64_t job) const { return token_major ? job : job * tokens; }
  std::int64_t stride() const { return token_major ? channels : 1; }
  std::int64_t channel(std::int64_t job) const { return job % channels; }
};

template <class T>
void gather(const T* src, const WkvLayout& lay, std::int64_t job, double* dst) {
  const T* p = src + lay.base(job);
  const std::int64_t s = lay.stride();
  for (std::int64_t t = 0; t < lay.tokens; ++t) dst[t] = static_cast<double>(p[t * s]);
}

void require_finite(const Tensor& t, const char* what) {
  for (double x : t.to_vector()) {
    if (!std::isfinite(x)) throw NonFiniteError(std::string("bi_wkv: non-finite value in ") + what);
  }
}

}  // namespace

WkvParams make_wkv(std::int64_t channels, DType dtype) {
  std::vector<double> w(static_cast<std::size_t>(channels));
  for (std::int64_t c = 0; c < channels; ++c) {
    w[static_cast<std::size_t>(c)] = channels > 1 ? static_cast<double>(c) / static_cast<double>(channels - 1) : 0.0;
  }
  WkvParams p;
  p.w = Tensor::from_vector({channels}, std::move(w)).to(dtype).set_requires_grad(true);
  p.u = Tensor::full({channels}, 0.5, dtype).set_requires_grad(true);
  return p;
}

SpatialMixParams make_spatial_mix(std::int64_t dim, Rng& rng, DType dtype) {
  SpatialMixParams p;
  p.dim = dim;
  p.norm = nn::make_layer_norm(dim, dtype);
  p.receptance = projection(dim, dim, rng, dtype);
  p.key = projection(dim, dim, rng, dtype);
  p.value = projection(dim, dim, rng, dtype);
  p.output = projection(dim, dim, rng, dtype);
  p.wkv = make_wkv(dim, dtype);
  return p;
}

ChannelMixParams make_channel_mix(std::int64_t dim, int hidden_ratio, Rng& rng, DType dtype) {
  if (hidden_ratio <= 0) throw ValueError("channel mix hidden ratio must be positive");
  ChannelMixParams p;
  p.dim = dim;
  p.hidden_ratio = hidden_ratio;
  p.norm = nn::make_layer_norm(dim, dtype);
  p.key = projection(hidden_ratio * dim, dim, rng, dtype);
  p.value = projection(dim, hidden_ratio * dim, rng, dtype);
  p.receptance = projection(dim, dim, rng, dtype);
  return p;
}

Tensor q_shift(const Tensor& x) {
  if (x.rank() != 4) throw ShapeError("q_shift: expected (N, C, H, W), got " + shape_str(x.shape()));
  const std::int64_t batch = x.dim(0), channels = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (channels % 4 != 0) {
    throw ShapeError("q_shift: channel count " + std::to_string(channels) + " is not divisible by 4");
  }
  Tensor out = dispatch(x.dtype(), [&]<class T>() {
    std::vector<T> y(static_cast<std::size_t>(x.numel()), T(0));
    shift_planes(x.data<T>().data(), y.data(), batch, channels, h, w, false);
    return Tensor::from_vector(x.shape(), std::move(y));
  });
  if (detail::should_record({&x})) {
    detail::record("q_shift", {x}, out, [x, batch, channels, h, w](const detail::Buffer& g) {
      dispatch(x.dtype(), [&]<class T>() {
        const auto& gy = std::get<std::vector<T>>(g);
        shift_planes(gy.data(), detail::grad_vector<T>(x).data(), batch, channels, h, w, true);
      });
    });
  }
  return out;
}

Tensor bi_wkv(const Tensor& k, const Tensor& v, const WkvParams& p) {
  check_same_shape(k, v, "bi_wkv");
  check_same_dtype(k, v, "bi_wkv");
  WkvLayout lay;
  if (k.rank() == 2) {
    lay.token_major = true;
    lay.tokens = k.dim(0);
    lay.channels = k.dim(1);
    lay.jobs = lay.channels;
  } else if (k.rank() == 3) {
    lay.tokens = k.dim(2);
    lay.channels = k.dim(1);
    lay.jobs = k.dim(0) * lay.channels;
  } else {
    throw ShapeError("bi_wkv: expected (T, C) or (N, C, T) inputs, got " + shape_str(k.shape()));
  }
  if (lay.tokens == 0) throw ShapeError("bi_wkv: empty token sequence");
  if (p.w.numel() != lay.channels || p.u.numel() != lay.channels) {
    throw ShapeError("bi_wkv: decay/bonus of shape " + shape_str(p.w.shape()) + "/" + shape_str(p.u.shape()) +
                     " do not match " + std::to_string(lay.channels) + " channels");
  }
  require_finite(k, "k");
  require_finite(v, "v");
  require_finite(p.w, "w");
  require_finite(p.u, "u");

  const std::int64_t n = lay.tokens;
  const auto wv = p.w.to_vector();
  const auto uv = p.u.to_vector();
  const double inv_t = 1.0 / static_cast<double>(n);
  // y, q, d per job, kept for the backward pass
  auto saved = std::make_shared<std::vector<double>>(static_cast<std::size_t>(3 * lay.jobs * n));

  Tensor out = dispatch(k.dtype(), [&]<class T>() {
    std::vector<T> result(static_cast<std::size_t>(k.numel()));
    const T* ks = k.data<T>().data();
    const T* vs = v.data<T>().data();
    parallel_for(lay.jobs, [&](std::int64_t lo, std::int64_t hi) {
      std::vector<double> kk(static_cast<std::size_t>(n)), vv(static_cast<std::size_t>(n)), scratch;
      for (std::int64_t job = lo; job < hi; ++job) {
        gather(ks, lay, job, kk.data());
        gather(vs, lay, job, vv.data());
        const auto c = static_cast<std::size_t>(lay.channel(job));
        double* y = saved->data() + 3 * job * n;
        wkv_forward_channel(n, -wv[c] * inv_t, uv[c], kk.data(), vv.data(), y, y + n, y + 2 * n, scratch);
        T* dst = result.data() + lay.base(job);
        for (std::int64_t t = 0; t < n; ++t) dst[t * lay.stride()] = static_cast<T>(y[t]);
      }
    });
    return Tensor::from_vector(k.shape(), std::move(result));
  });
  add_macs(8 * lay.jobs * n);

  if (detail::should_record({&k, &v, &p.w, &p.u})) {
    Tensor w = p.w, u = p.u;
    detail::record("bi_wkv", {k, v, w, u}, out, [k, v, w, u, lay, saved, wv, uv](const detail::Buffer& g) {
      dispatch(k.dtype(), [&]<class T>() {
        const auto& gy = std::get<std::vector<T>>(g);
        const std::int64_t n = lay.tokens;
        const double inv_t = 1.0 / static_cast<double>(n);
        const T* ks = k.data<T>().data();
        const T* vs = v.data<T>().data();
        T* gk = k.requires_grad() ? detail::grad_vector<T>(k).data() : nullptr;
        T* gv = v.requires_grad() ? detail::grad_vector<T>(v).data() : nullptr;
        std::vector<ChannelGrads> per_job(static_cast<std::size_t>(lay.jobs));
        parallel_for(lay.jobs, [&](std::int64_t lo, std::int64_t hi) {
          const auto sz = static_cast<std::size_t>(n);
          std::vector<double> kk(sz), vv(sz), gg(sz), dk(sz), dv(sz), scratch;
          for (std::int64_t job = lo; job < hi; ++job) {
            gather(ks, lay, job, kk.data());
            gather(vs, lay, job, vv.data());
            gather(gy.data(), lay, job, gg.data());
            const auto c = static_cast<std::size_t>(lay.channel(job));
            const double* y = saved->data() + 3 * job * n;
            per_job[static_cast<std::size_t>(job)] =
                wkv_backward_channel(n, -wv[c] * inv_t, uv[c], kk.data(), vv.data(), y, y + n, y + 2 * n, gg.data(),
                                     dk.data(), dv.data(), scratch);
            const std::int64_t base = lay.base(job), stride = lay.stride();
            for (std::int64_t t = 0; t < n; ++t) {
              if (gk) gk[base + t * stride] += static_cast<T>(dk[t]);
              if (gv) gv[base + t * stride] += static_cast<T>(dv[t]);
            }
          }
        });
        T* gw = w.requires_grad() ? detail::grad_vector<T>(w).data() : nullptr;
        T* gu = u.requires_grad() ? detail::grad_vector<T>(u).data() : nullptr;
        for (std::int64_t job = 0; job < lay.jobs; ++job) {
          const auto c = lay.channel(job);
          if (gw) gw[c] += static_cast<T>(per_job[static_cast<std::size_t>(job)].dw);
          if (gu) gu[c] += static_cast<T>(per_job[static_cast<std::size_t>(job)].du);
        }
      });
    });
  }
  return out;
}

Tensor spatial_mix(const Tensor& tokens, std::int64_t height, std::int64_t width, const SpatialMixParams& p) {
  if (tokens.rank() != 3 || tokens.dim(1) != p.dim) {
    throw ShapeError("spatial_mix: expected (N, " + std::to_string(p.dim) + ", T) tokens, got " +
                     shape_str(tokens.shape()));
  }
  Tensor x = nn::layer_norm(tokens, p.norm);
  x = nn::unfold(q_shift(nn::fold(x, height, width)));
  Tensor r = nn::linear(x, p.receptance);
  Tensor k = nn::linear(x, p.key);
  Tensor v = nn::linear(x, p.value);
  Tensor mixed = ops::mul(ops::sigmoid(r), bi_wkv(k, v, p.wkv));
  return nn::linear(mixed, p.output);
}

Tensor channel_mix(const Tensor& tokens, std::int64_t height, std::int64_t width, const ChannelMixParams& p) {
  if (tokens.rank() != 3 || tokens.dim(1) != p.dim) {
    throw ShapeError("channel_mix: expected (N, " + std::to_string(p.dim) + ", T) tokens, got " +
                     shape_str(tokens.shape()));
  }
  Tensor x = nn::layer_norm(tokens, p.norm);
  x = nn::unfold(q_shift(nn::fold(x, height, width)));
  Tensor hidden = ops::square(ops::relu(nn::linear(x, p.key)));
  return ops::mul(ops::sigmoid(nn::linear(x, p.receptance)), nn::linear(hidden, p.value));
}

}  // namespace rwkvunet::rwkv
