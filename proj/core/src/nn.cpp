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

#include "rwkvunet/nn.hpp"

#include <algorithm>
#include <cmath>

#include "gemm.hpp"
#include "rwkvunet/autodiff.hpp"
#include "rwkvunet/ops.hpp"
#include "rwkvunet/parallel.hpp"
#include "rwkvunet/profiling.hpp"

namespace rwkvunet::nn {

namespace {

template <class T>
const std::vector<T>& as_vec(const detail::Buffer& b) {
  return std::get<std::vector<T>>(b);
}

Tensor random_weight(Shape shape, Rng& rng, DType dtype) {
  const auto n = static_cast<std::size_t>(shape_numel(shape));
  std::vector<double> values(n);
  for (auto& v : values) v = rng.truncated_normal(0.02);
  return Tensor::from_vector(std::move(shape), std::move(values)).to(dtype);
}

// Shared kernel for 1x1 convolutions and token projections:
// y[n] (Cout x S) = W (Cout x Cin) * x[n] (Cin x S) + b.
Tensor pointwise(const char* name, const Tensor& x, const Tensor& weight, const Tensor& bias, Shape out_shape,
                 std::int64_t cin, std::int64_t cout) {
  const std::int64_t batch = x.dim(0);
  const std::int64_t spatial = x.numel() / (batch * cin);
  Tensor out = dispatch(x.dtype(), [&]<class T>() {
    std::vector<T> y(static_cast<std::size_t>(batch * cout * spatial));
    auto xs = x.data<T>();
    auto ws = weight.data<T>();
    const T* bs = bias.defined() ? bias.data<T>().data() : nullptr;
    parallel_for(batch, [&](std::int64_t lo, std::int64_t hi) {
      for (std::int64_t n = lo; n < hi; ++n) {
        T* yn = y.data() + n * cout * spatial;
        detail::gemm<T>(false, false, cout, spatial, cin, ws.data(), xs.data() + n * cin * spatial, yn, false);
        if (bs) {
          for (std::int64_t o = 0; o < cout; ++o) {
            T* row = yn + o * spatial;
            for (std::int64_t s = 0; s < spatial; ++s) row[s] += bs[o];
          }
        }
      }
    });
    return Tensor::from_vector(std::move(out_shape), std::move(y));
  });
  add_macs(batch * spatial * cout * cin);
  detail::debug_check_finite(out, name);
  std::vector<Tensor> inputs{x, weight};
  if (bias.defined()) inputs.push_back(bias);
  if (detail::should_record(inputs)) {
    detail::record(name, inputs, out, [x, weight, bias, batch, spatial, cin, cout](const detail::Buffer& g) {
      dispatch(x.dtype(), [&]<class T>() {
        const auto& gy = as_vec<T>(g);
        auto xs = x.data<T>();
        auto ws = weight.data<T>();
        if (x.requires_grad()) {
          auto& gx = detail::grad_vector<T>(x);
          parallel_for(batch, [&](std::int64_t lo, std::int64_t hi) {
            for (std::int64_t n = lo; n < hi; ++n) {
              detail::gemm<T>(true, false, cin, spatial, cout, ws.data(), gy.data() + n * cout * spatial,
                              gx.data() + n * cin * spatial, true);
            }
          });
        }
        if (weight.requires_grad()) {
          auto& gw = detail::grad_vector<T>(weight);
          for (std::int64_t n = 0; n < batch; ++n) {
            detail::gemm<T>(false, true, cout, cin, spatial, gy.data() + n * cout * spatial,
                            xs.data() + n * cin * spatial, gw.data(), true);
          }
        }
        if (bias.defined() && bias.requires_grad()) {
          auto& gb = detail::grad_vector<T>(bias);
          for (std::int64_t n = 0; n < batch; ++n) {
            for (std::int64_t o = 0; o < cout; ++o) {
              const T* row = gy.data() + (n * cout + o) * spatial;
              T acc = 0;
              for (std::int64_t s = 0; s < spatial; ++s) acc += row[s];
              gb[static_cast<std::size_t>(o)] += acc;
            }
          }
        }
      });
    });
  }
  return out;
}

struct ConvGeometry {
  std::int64_t batch, cin, cout, h, w, oh, ow;
  int k, stride, pad;
};

// Index range [lo, hi) of outputs whose input coordinate o*stride - pad + kk lies in [0, extent).
inline void valid_range(std::int64_t extent, std::int64_t out_extent, int kk, int stride, int pad, std::int64_t& lo,
                        std::int64_t& hi) {
  const std::int64_t off = kk - pad;
  lo = off >= 0 ? 0 : (-off + stride - 1) / stride;
  hi = (extent - 1 - off) >= 0 ? (extent - 1 - off) / stride + 1 : 0;
  hi = std::min(hi, out_extent);
  if (lo > hi) lo = hi;
}

Tensor depthwise(const Tensor& x, const Conv2dParams& p, const ConvGeometry& geo) {
  Tensor out = dispatch(x.dtype(), [&]<class T>() {
    std::vector<T> y(static_cast<std::size_t>(geo.batch * geo.cout * geo.oh * geo.ow));
    auto xs = x.data<T>();
    auto ws = p.weight.data<T>();
    const T* bs = p.has_bias() ? p.bias.data<T>().data() : nullptr;
    parallel_for(geo.batch * geo.cin, [&](std::int64_t lo_nc, std::int64_t hi_nc) {
      for (std::int64_t nc = lo_nc; nc < hi_nc; ++nc) {
        const std::int64_t c = nc % geo.cin;
        const T* xp = xs.data() + nc * geo.h * geo.w;
        T* yp = y.data() + nc * geo.oh * geo.ow;
        const T* wp = ws.data() + c * geo.k * geo.k;
        if (bs) std::fill(yp, yp + geo.oh * geo.ow, bs[c]);
        for (int ky = 0; ky < geo.k; ++ky) {
          std::int64_t oy0, oy1;
          valid_range(geo.h, geo.oh, ky, geo.stride, geo.pad, oy0, oy1);
          for (int kx = 0; kx < geo.k; ++kx) {
            std::int64_t ox0, ox1;
            valid_range(geo.w, geo.ow, kx, geo.stride, geo.pad, ox0, ox1);
            const T wv = wp[ky * geo.k + kx];
            for (std::int64_t oy = oy0; oy < oy1; ++oy) {
              const T* xrow = xp + (oy * geo.stride - geo.pad + ky) * geo.w + (kx - geo.pad);
              T* yrow = yp + oy * geo.ow;
              if (geo.stride == 1) {
                for (std::int64_t ox = ox0; ox < ox1; ++ox) yrow[ox] += wv * xrow[ox];
              } else {
                for (std::int64_t ox = ox0; ox < ox1; ++ox) yrow[ox] += wv * xrow[ox * geo.stride];
              }
            }
          }
        }
      }
    });
    return Tensor::from_vector({geo.batch, geo.cout, geo.oh, geo.ow}, std::move(y));
  });
  add_macs(geo.batch * geo.oh * geo.ow * geo.cout * geo.k * geo.k);
  std::vector<Tensor> inputs{x, p.weight};
  if (p.has_bias()) inputs.push_back(p.bias);
  if (detail::should_record(inputs)) {
    Tensor weight = p.weight, bias = p.bias;
    detail::record("depthwise_conv2d", inputs, out, [x, weight, bias, geo](const detail::Buffer& g) {
      dispatch(x.dtype(), [&]<class T>() {
        const auto& gy = as_vec<T>(g);
        auto xs = x.data<T>();
        auto ws = weight.data<T>();
        T* gx = x.requires_grad() ? detail::grad_vector<T>(x).data() : nullptr;
        T* gw = weight.requires_grad() ? detail::grad_vector<T>(weight).data() : nullptr;
        T* gb = bias.defined() && bias.requires_grad() ? detail::grad_vector<T>(bias).data() : nullptr;
        for (std::int64_t nc = 0; nc < geo.batch * geo.cin; ++nc) {
          const std::int64_t c = nc % geo.cin;
          const T* xp = xs.data() + nc * geo.h * geo.w;
          const T* gp = gy.data() + nc * geo.oh * geo.ow;
          const T* wp = ws.data() + c * geo.k * geo.k;
          if (gb) {
            T acc = 0;
            for (std::int64_t i = 0; i < geo.oh * geo.ow; ++i) acc += gp[i];
            gb[c] += acc;
          }
          for (int ky = 0; ky < geo.k; ++ky) {
            std::int64_t oy0, oy1;
            valid_range(geo.h, geo.oh, ky, geo.stride, geo.pad, oy0, oy1);
            for (int kx = 0; kx < geo.k; ++kx) {
              std::int64_t ox0, ox1;
              valid_range(geo.w, geo.ow, kx, geo.stride, geo.pad, ox0, ox1);
              const T wv = wp[ky * geo.k + kx];
              T wacc = 0;
              for (std::int64_t oy = oy0; oy < oy1; ++oy) {
                const std::int64_t row_off = (oy * geo.stride - geo.pad + ky) * geo.w + (kx - geo.pad);
                const T* xrow = xp + row_off;
                const T* grow = gp + oy * geo.ow;
                if (gx) {
                  T* gxrow = gx + nc * geo.h * geo.w + row_off;
                  for (std::int64_t ox = ox0; ox < ox1; ++ox) gxrow[ox * geo.stride] += wv * grow[ox];
                }
                for (std::int64_t ox = ox0; ox < ox1; ++ox) wacc += grow[ox] * xrow[ox * geo.stride];
              }
              if (gw) gw[c * geo.k * geo.k + ky * geo.k + kx] += wacc;
            }
          }
        }
      });
    });
  }
  return out;
}

template <class T>
void im2col(const T* x, const ConvGeometry& g, T* cols) {
  const std::int64_t plane = g.oh * g.ow;
  for (std::int64_t c = 0; c < g.cin; ++c) {
    for (int ky = 0; ky < g.k; ++ky) {
      for (int kx = 0; kx < g.k; ++kx) {
        T* row = cols + ((c * g.k + ky) * g.k + kx) * plane;
        for (std::int64_t oy = 0; oy < g.oh; ++oy) {
          const std::int64_t iy = oy * g.stride - g.pad + ky;
          for (std::int64_t ox = 0; ox < g.ow; ++ox) {
            const std::int64_t ix = ox * g.stride - g.pad + kx;
            row[oy * g.ow + ox] = (iy >= 0 && iy < g.h && ix >= 0 && ix < g.w) ? x[(c * g.h + iy) * g.w + ix] : T(0);
          }
        }
      }
    }
  }
}

template <class T>
void col2im(const T* cols, const ConvGeometry& g, T* x) {
  const std::int64_t plane = g.oh * g.ow;
  for (std::int64_t c = 0; c < g.cin; ++c) {
    for (int ky = 0; ky < g.k; ++ky) {
      for (int kx = 0; kx < g.k; ++kx) {
        const T* row = cols + ((c * g.k + ky) * g.k + kx) * plane;
        for (std::int64_t oy = 0; oy < g.oh; ++oy) {
          const std::int64_t iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= g.h) continue;
          for (std::int64_t ox = 0; ox < g.ow; ++ox) {
            const std::int64_t ix = ox * g.stride - g.pad + kx;
            if (ix >= 0 && ix < g.w) x[(c * g.h + iy) * g.w + ix] += row[oy * g.ow + ox];
          }
        }
      }
    }
  }
}

Tensor dense(const Tensor& x, const Conv2dParams& p, const ConvGeometry& geo) {
  const std::int64_t ckk = geo.cin * geo.k * geo.k;
  const std::int64_t plane = geo.oh * geo.ow;
  Tensor out = dispatch(x.dtype(), [&]<class T>() {
    std::vector<T> y(static_cast<std::size_t>(geo.batch * geo.cout * plane));
    auto xs = x.data<T>();
    auto ws = p.weight.data<T>();
    const T* bs = p.has_bias() ? p.bias.data<T>().data() : nullptr;
    std::vector<T> cols(static_cast<std::size_t>(ckk * plane));
    for (std::int64_t n = 0; n < geo.batch; ++n) {
      im2col(xs.data() + n * geo.cin * geo.h * geo.w, geo, cols.data());
      T* yn = y.data() + n * geo.cout * plane;
      detail::gemm<T>(false, false, geo.cout, plane, ckk, ws.data(), cols.data(), yn, false);
      if (bs) {
        for (std::int64_t o = 0; o < geo.cout; ++o)
          for (std::int64_t s = 0; s < plane; ++s) yn[o * plane + s] += bs[o];
      }
    }
    return Tensor::from_vector({geo.batch, geo.cout, geo.oh, geo.ow}, std::move(y));
  });
  add_macs(geo.batch * plane * geo.cout * ckk);
  std::vector<Tensor> inputs{x, p.weight};
  if (p.has_bias()) inputs.push_back(p.bias);
  if (detail::should_record(inputs)) {
    Tensor weight = p.weight, bias = p.bias;
    detail::record("conv2d", inputs, out, [x, weight, bias, geo, ckk, plane](const detail::Buffer& g) {
      dispatch(x.dtype(), [&]<class T>() {
        const auto& gy = as_vec<T>(g);
        auto xs = x.data<T>();
        auto ws = weight.data<T>();
        std::vector<T> cols(static_cast<std::size_t>(ckk * plane));
        for (std::int64_t n = 0; n < geo.batch; ++n) {
          const T* gn = gy.data() + n * geo.cout * plane;
          if (weight.requires_grad()) {
            im2col(xs.data() + n * geo.cin * geo.h * geo.w, geo, cols.data());
            detail::gemm<T>(false, true, geo.cout, ckk, plane, gn, cols.data(), detail::grad_vector<T>(weight).data(),
                            true);
          }
          if (x.requires_grad()) {
            detail::gemm<T>(true, false, ckk, plane, geo.cout, ws.data(), gn, cols.data(), false);
            col2im(cols.data(), geo, detail::grad_vector<T>(x).data() + n * geo.cin * geo.h * geo.w);
          }
          if (bias.defined() && bias.requires_grad()) {
            auto& gb = detail::grad_vector<T>(bias);
            for (std::int64_t o = 0; o < geo.cout; ++o) {
              T acc = 0;
              for (std::int64_t s = 0; s < plane; ++s) acc += gn[o * plane + s];
              gb[static_cast<std::size_t>(o)] += acc;
            }
          }
        }
      });
    });
  }
  return out;
}

}  // namespace

std::int64_t Conv2dParams::parameter_count() const {
  return weight.numel() + (has_bias() ? bias.numel() : 0);
}

Conv2dParams make_conv2d(std::int64_t in_channels, std::int64_t out_channels, int kernel_size, int stride, int groups,
                         bool bias, Rng& rng, DType dtype) {
  if (kernel_size < 1 || kernel_size % 2 == 0) {
    throw ValueError("same-padding convolution needs an odd kernel size, got " + std::to_string(kernel_size));
  }
  if (stride < 1) throw ValueError("convolution stride must be >= 1, got " + std::to_string(stride));
  if (groups != 1 && !(groups == in_channels && in_channels == out_channels)) {
    throw ValueError("convolution groups must be 1 or equal in == out channels (depthwise)");
  }
  Conv2dParams p;
  p.in_channels = in_channels;
  p.out_channels = out_channels;
  p.kernel_size = kernel_size;
  p.stride = stride;
  p.padding = (kernel_size - 1) / 2;
  p.groups = groups;
  p.weight = random_weight({out_channels, in_channels / groups, kernel_size, kernel_size}, rng, dtype);
  p.weight.set_requires_grad(true);
  if (bias) p.bias = Tensor::zeros({out_channels}, dtype).set_requires_grad(true);
  return p;
}

Tensor conv2d(const Tensor& x, const Conv2dParams& p) {
  if (x.rank() != 4) throw ShapeError("conv2d: expected (N, C, H, W) input, got " + shape_str(x.shape()));
  if (x.dim(1) != p.in_channels) {
    throw ShapeError("conv2d: input has " + std::to_string(x.dim(1)) + " channels but the layer expects " +
                     std::to_string(p.in_channels) + " (input shape " + shape_str(x.shape()) + ", weight shape " +
                     shape_str(p.weight.shape()) + ")");
  }
  if (p.stride < 1) throw ValueError("conv2d: stride must be >= 1");
  check_same_dtype(x, p.weight, "conv2d");
  ConvGeometry geo{x.dim(0), p.in_channels, p.out_channels, x.dim(2), x.dim(3), 0, 0,
                   p.kernel_size, p.stride, p.padding};
  if (geo.h + 2 * geo.pad < geo.k || geo.w + 2 * geo.pad < geo.k) {
    throw ShapeError("conv2d: spatial extents " + shape_str(x.shape()) + " smaller than kernel reach " +
                     std::to_string(geo.k));
  }
  geo.oh = (geo.h + 2 * geo.pad - geo.k) / geo.stride + 1;
  geo.ow = (geo.w + 2 * geo.pad - geo.k) / geo.stride + 1;

  if (p.groups == 1 && p.kernel_size == 1 && p.stride == 1 && p.padding == 0) {
    return pointwise("conv2d_1x1", x, p.weight, p.bias, {geo.batch, geo.cout, geo.h, geo.w}, geo.cin, geo.cout);
  }
  if (p.groups == 1) return dense(x, p, geo);
  if (!p.depthwise()) throw ValueError("conv2d: only groups == 1 or depthwise convolutions are supported");
  return depthwise(x, p, geo);
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  if (x.rank() != 3 || weight.rank() != 2 || weight.dim(1) != x.dim(1)) {
    throw ShapeError("linear: token shape " + shape_str(x.shape()) + " incompatible with weight " +
                     shape_str(weight.shape()));
  }
  check_same_dtype(x, weight, "linear");
  return pointwise("linear", x, weight, bias, {x.dim(0), weight.dim(0), x.dim(2)}, weight.dim(1), weight.dim(0));
}

LayerNormParams make_layer_norm(std::int64_t dim, DType dtype) {
  LayerNormParams p;
  p.normalized_dim = dim;
  p.gamma = Tensor::full({dim}, 1.0, dtype).set_requires_grad(true);
  p.beta = Tensor::zeros({dim}, dtype).set_requires_grad(true);
  return p;
}

Tensor layer_norm(const Tensor& x, const LayerNormParams& p) {
  if (x.rank() < 2 || x.dim(1) != p.normalized_dim) {
    throw ShapeError("layer_norm: expected channel extent " + std::to_string(p.normalized_dim) + " on axis 1, got " +
                     shape_str(x.shape()));
  }
  if (!(p.epsilon > 0)) throw ValueError("layer_norm: epsilon must be positive");
  const std::int64_t batch = x.dim(0), channels = x.dim(1);
  const std::int64_t spatial = x.numel() / (batch * channels);
  // mean and reciprocal std per (n, position), kept for the backward pass
  auto stats = std::make_shared<std::vector<double>>(static_cast<std::size_t>(2 * batch * spatial));
  Tensor out = dispatch(x.dtype(), [&]<class T>() {
    auto xs = x.data<T>();
    auto gs = p.gamma.data<T>();
    auto bs = p.beta.data<T>();
    std::vector<T> y(xs.size());
    std::vector<T> mu(static_cast<std::size_t>(spatial)), var(static_cast<std::size_t>(spatial));
    for (std::int64_t n = 0; n < batch; ++n) {
      const T* xn = xs.data() + n * channels * spatial;
      T* yn = y.data() + n * channels * spatial;
      std::fill(mu.begin(), mu.end(), T(0));
      std::fill(var.begin(), var.end(), T(0));
      for (std::int64_t c = 0; c < channels; ++c)
        for (std::int64_t s = 0; s < spatial; ++s) mu[s] += xn[c * spatial + s];
      for (auto& m : mu) m /= static_cast<T>(channels);
      for (std::int64_t c = 0; c < channels; ++c) {
        for (std::int64_t s = 0; s < spatial; ++s) {
          const T d = xn[c * spatial + s] - mu[s];
          var[s] += d * d;
        }
      }
      for (std::int64_t s = 0; s < spatial; ++s) {
        var[s] = T(1) / std::sqrt(var[s] / static_cast<T>(channels) + static_cast<T>(p.epsilon));
        (*stats)[static_cast<std::size_t>(2 * (n * spatial + s))] = mu[s];
        (*stats)[static_cast<std::size_t>(2 * (n * spatial + s) + 1)] = var[s];
      }
      for (std::int64_t c = 0; c < channels; ++c) {
        const T gc = gs[c], bc = bs[c];
        for (std::int64_t s = 0; s < spatial; ++s) {
          yn[c * spatial + s] = (xn[c * spatial + s] - mu[s]) * var[s] * gc + bc;
        }
      }
    }
    return Tensor::from_vector(x.shape(), std::move(y));
  });
  detail::debug_check_finite(out, "layer_norm");
  if (detail::should_record({&x, &p.gamma, &p.beta})) {
    Tensor gamma = p.gamma, beta = p.beta;
    detail::record("layer_norm", {x, gamma, beta}, out,
                   [x, gamma, beta, stats, batch, channels, spatial](const detail::Buffer& g) {
                     dispatch(x.dtype(), [&]<class T>() {
                       const auto& gy = as_vec<T>(g);
                       auto xs = x.data<T>();
                       auto gs = gamma.data<T>();
                       T* gx = x.requires_grad() ? detail::grad_vector<T>(x).data() : nullptr;
                       T* gg = gamma.requires_grad() ? detail::grad_vector<T>(gamma).data() : nullptr;
                       T* gb = beta.requires_grad() ? detail::grad_vector<T>(beta).data() : nullptr;
                       std::vector<T> mean_dxhat(static_cast<std::size_t>(spatial));
                       std::vector<T> mean_dxhat_xhat(static_cast<std::size_t>(spatial));
                       for (std::int64_t n = 0; n < batch; ++n) {
                         const T* xn = xs.data() + n * channels * spatial;
                         const T* gn = gy.data() + n * channels * spatial;
                         const double* st = stats->data() + 2 * n * spatial;
                         std::fill(mean_dxhat.begin(), mean_dxhat.end(), T(0));
                         std::fill(mean_dxhat_xhat.begin(), mean_dxhat_xhat.end(), T(0));
                         for (std::int64_t c = 0; c < channels; ++c) {
                           T gacc = 0, bacc = 0;
                           for (std::int64_t s = 0; s < spatial; ++s) {
                             const T xhat = (xn[c * spatial + s] - T(st[2 * s])) * T(st[2 * s + 1]);
                             const T dy = gn[c * spatial + s];
                             gacc += dy * xhat;
                             bacc += dy;
                             const T dxhat = dy * gs[c];
                             mean_dxhat[s] += dxhat;
                             mean_dxhat_xhat[s] += dxhat * xhat;
                           }
                           if (gg) gg[c] += gacc;
                           if (gb) gb[c] += bacc;
                         }
                         if (!gx) continue;
                         const T inv_c = T(1) / static_cast<T>(channels);
                         T* gxn = gx + n * channels * spatial;
                         for (std::int64_t c = 0; c < channels; ++c) {
                           for (std::int64_t s = 0; s < spatial; ++s) {
                             const T rstd = T(st[2 * s + 1]);
                             const T xhat = (xn[c * spatial + s] - T(st[2 * s])) * rstd;
                             const T dxhat = gn[c * spatial + s] * gs[c];
                             gxn[c * spatial + s] +=
                                 rstd * (dxhat - mean_dxhat[s] * inv_c - xhat * mean_dxhat_xhat[s] * inv_c);
                           }
                         }
                       }
                     });
                   });
  }
  return out;
}

Tensor unfold(const Tensor& x) {
  if (x.rank() != 4) throw ShapeError("unfold: expected (N, C, H, W), got " + shape_str(x.shape()));
  return ops::reshape(x, {x.dim(0), x.dim(1), x.dim(2) * x.dim(3)});
}

Tensor fold(const Tensor& tokens, std::int64_t height, std::int64_t width) {
  if (tokens.rank() != 3) throw ShapeError("fold: expected (N, C, T), got " + shape_str(tokens.shape()));
  if (height * width != tokens.dim(2)) {
    throw ShapeError("fold: " + std::to_string(height) + "x" + std::to_string(width) + " does not match " +
                     std::to_string(tokens.dim(2)) + " tokens");
  }
  return ops::reshape(tokens, {tokens.dim(0), tokens.dim(1), height, width});
}

namespace {

struct AxisTaps {
  std::vector<std::int64_t> i0, i1;
  std::vector<double> lambda;
};

AxisTaps axis_taps(std::int64_t in, std::int64_t out) {
  AxisTaps taps;
  taps.i0.resize(static_cast<std::size_t>(out));
  taps.i1.resize(static_cast<std::size_t>(out));
  taps.lambda.resize(static_cast<std::size_t>(out));
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  for (std::int64_t o = 0; o < out; ++o) {
    double src = (static_cast<double>(o) + 0.5) * scale - 0.5;
    if (src < 0) src = 0;
    auto i0 = static_cast<std::int64_t>(src);
    if (i0 > in - 1) i0 = in - 1;
    const auto idx = static_cast<std::size_t>(o);
    taps.i0[idx] = i0;
    taps.i1[idx] = std::min(i0 + 1, in - 1);
    taps.lambda[idx] = src - static_cast<double>(i0);
  }
  return taps;
}

}  // namespace

Tensor bilinear_resize(const Tensor& x, std::int64_t out_h, std::int64_t out_w) {
  if (x.rank() != 4) throw ShapeError("bilinear_resize: expected (N, C, H, W), got " + shape_str(x.shape()));
  if (out_h < 1 || out_w < 1) {
    throw ValueError("bilinear_resize: invalid output size " + std::to_string(out_h) + "x" + std::to_string(out_w));
  }
  const std::int64_t planes = x.dim(0) * x.dim(1), in_h = x.dim(2), in_w = x.dim(3);
  if (in_h == out_h && in_w == out_w) return ops::reshape(x, x.shape());

  auto ty = std::make_shared<AxisTaps>(axis_taps(in_h, out_h));
  auto tx = std::make_shared<AxisTaps>(axis_taps(in_w, out_w));
  Tensor out = dispatch(x.dtype(), [&]<class T>() {
    auto xs = x.data<T>();
    std::vector<T> y(static_cast<std::size_t>(planes * out_h * out_w));
    for (std::int64_t p = 0; p < planes; ++p) {
      const T* xp = xs.data() + p * in_h * in_w;
      T* yp = y.data() + p * out_h * out_w;
      for (std::int64_t oy = 0; oy < out_h; ++oy) {
        const T ly = static_cast<T>(ty->lambda[oy]);
        const T* r0 = xp + ty->i0[oy] * in_w;
        const T* r1 = xp + ty->i1[oy] * in_w;
        for (std::int64_t ox = 0; ox < out_w; ++ox) {
          const T lx = static_cast<T>(tx->lambda[ox]);
          const auto a = tx->i0[ox], b = tx->i1[ox];
          yp[oy * out_w + ox] = (T(1) - ly) * ((T(1) - lx) * r0[a] + lx * r0[b]) + ly * ((T(1) - lx) * r1[a] + lx * r1[b]);
        }
      }
    }
    return Tensor::from_vector({x.dim(0), x.dim(1), out_h, out_w}, std::move(y));
  });
  if (detail::should_record({&x})) {
    detail::record("bilinear_resize", {x}, out, [x, ty, tx, planes, in_h, in_w, out_h, out_w](const detail::Buffer& g) {
      dispatch(x.dtype(), [&]<class T>() {
        const auto& gy = as_vec<T>(g);
        auto& gx = detail::grad_vector<T>(x);
        for (std::int64_t p = 0; p < planes; ++p) {
          T* xp = gx.data() + p * in_h * in_w;
          const T* gp = gy.data() + p * out_h * out_w;
          for (std::int64_t oy = 0; oy < out_h; ++oy) {
            const T ly = static_cast<T>(ty->lambda[oy]);
            T* r0 = xp + ty->i0[oy] * in_w;
            T* r1 = xp + ty->i1[oy] * in_w;
            for (std::int64_t ox = 0; ox < out_w; ++ox) {
              const T lx = static_cast<T>(tx->lambda[ox]);
              const T v = gp[oy * out_w + ox];
              const auto a = tx->i0[ox], b = tx->i1[ox];
              r0[a] += (T(1) - ly) * (T(1) - lx) * v;
              r0[b] += (T(1) - ly) * lx * v;
              r1[a] += ly * (T(1) - lx) * v;
              r1[b] += ly * lx * v;
            }
          }
        }
      });
    });
  }
  return out;
}

}  // namespace rwkvunet::nn
