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

#include "rwkvunet/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "gemm.hpp"
#include "rwkvunet/autodiff.hpp"
#include "rwkvunet/profiling.hpp"

namespace rwkvunet::ops {

namespace {

template <class T>
std::vector<T>& as_vec(const detail::Buffer& b) {
  return const_cast<std::vector<T>&>(std::get<std::vector<T>>(b));
}

template <class Fwd, class Deriv>
Tensor unary(const char* name, const Tensor& x, Fwd fwd, Deriv deriv) {
  Tensor out = dispatch(x.dtype(), [&]<class T>() {
    auto xs = x.data<T>();
    std::vector<T> y(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) y[i] = fwd(xs[i]);
    return Tensor::from_vector(x.shape(), std::move(y));
  });
  detail::debug_check_finite(out, name);
  if (detail::should_record({&x})) {
    detail::record(name, {x}, out, [x, out, deriv](const detail::Buffer& g) {
      dispatch(x.dtype(), [&]<class T>() {
        auto& gx = detail::grad_vector<T>(x);
        const auto& gy = as_vec<T>(g);
        auto xs = x.data<T>();
        auto ys = out.data<T>();
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy[i] * deriv(xs[i], ys[i]);
      });
    });
  }
  return out;
}

template <class Fwd, class Back>
Tensor binary(const char* name, const Tensor& a, const Tensor& b, Fwd fwd, Back back) {
  check_same_dtype(a, b, name);
  check_same_shape(a, b, name);
  Tensor out = dispatch(a.dtype(), [&]<class T>() {
    auto as = a.data<T>();
    auto bs = b.data<T>();
    std::vector<T> y(as.size());
    for (std::size_t i = 0; i < as.size(); ++i) y[i] = fwd(as[i], bs[i]);
    return Tensor::from_vector(a.shape(), std::move(y));
  });
  detail::debug_check_finite(out, name);
  if (detail::should_record({&a, &b})) {
    detail::record(name, {a, b}, out, [a, b, back](const detail::Buffer& g) {
      dispatch(a.dtype(), [&]<class T>() {
        const auto& gy = as_vec<T>(g);
        auto as = a.data<T>();
        auto bs = b.data<T>();
        T* ga = a.requires_grad() ? detail::grad_vector<T>(a).data() : nullptr;
        T* gb = b.requires_grad() ? detail::grad_vector<T>(b).data() : nullptr;
        for (std::size_t i = 0; i < gy.size(); ++i) back(as[i], bs[i], gy[i], ga ? ga + i : nullptr, gb ? gb + i : nullptr);
      });
    });
  }
  return out;
}

struct Dims {
  std::int64_t outer = 1;
  std::int64_t mid = 1;
  std::int64_t inner = 1;
};

Dims split_dims(const Shape& shape, int axis) {
  Dims d;
  for (int i = 0; i < axis; ++i) d.outer *= shape[static_cast<std::size_t>(i)];
  d.mid = shape[static_cast<std::size_t>(axis)];
  for (std::size_t i = static_cast<std::size_t>(axis) + 1; i < shape.size(); ++i) d.inner *= shape[i];
  return d;
}

int normalize_axis(const Tensor& x, int axis, const char* op) {
  const int r = x.rank();
  const int a = axis < 0 ? axis + r : axis;
  if (a < 0 || a >= r) {
    throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) + " out of range for shape " +
                     shape_str(x.shape()));
  }
  return a;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary("add", a, b, [](auto x, auto y) { return x + y; },
                [](auto, auto, auto g, auto* ga, auto* gb) {
                  if (ga) *ga += g;
                  if (gb) *gb += g;
                });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary("sub", a, b, [](auto x, auto y) { return x - y; },
                [](auto, auto, auto g, auto* ga, auto* gb) {
                  if (ga) *ga += g;
                  if (gb) *gb -= g;
                });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary("mul", a, b, [](auto x, auto y) { return x * y; },
                [](auto x, auto y, auto g, auto* ga, auto* gb) {
                  if (ga) *ga += g * y;
                  if (gb) *gb += g * x;
                });
}

Tensor div(const Tensor& a, const Tensor& b) {
  return binary("div", a, b, [](auto x, auto y) { return x / y; },
                [](auto x, auto y, auto g, auto* ga, auto* gb) {
                  if (ga) *ga += g / y;
                  if (gb) *gb -= g * x / (y * y);
                });
}

Tensor add_scalar(const Tensor& x, double s) {
  return unary("add_scalar", x, [s](auto v) { return static_cast<decltype(v)>(v + s); },
               [](auto, auto) { return 1; });
}

Tensor mul_scalar(const Tensor& x, double s) {
  return unary("mul_scalar", x, [s](auto v) { return static_cast<decltype(v)>(v * s); },
               [s](auto v, auto) { return static_cast<decltype(v)>(s); });
}

Tensor neg(const Tensor& x) {
  return unary("neg", x, [](auto v) { return -v; }, [](auto v, auto) { return static_cast<decltype(v)>(-1); });
}

Tensor sigmoid(const Tensor& x) {
  return unary("sigmoid", x,
               [](auto v) {
                 using T = decltype(v);
                 return T(1) / (T(1) + std::exp(-v));
               },
               [](auto, auto y) { return y * (decltype(y)(1) - y); });
}

Tensor relu(const Tensor& x) {
  return unary("relu", x, [](auto v) { return v > 0 ? v : decltype(v)(0); },
               [](auto v, auto) { return v > 0 ? decltype(v)(1) : decltype(v)(0); });
}

Tensor gelu(const Tensor& x) {
  return unary("gelu", x,
               [](auto v) {
                 using T = decltype(v);
                 return T(0.5) * v * (T(1) + std::erf(v * T(std::numbers::sqrt2 / 2)));
               },
               [](auto v, auto) {
                 using T = decltype(v);
                 const T cdf = T(0.5) * (T(1) + std::erf(v * T(std::numbers::sqrt2 / 2)));
                 const T pdf = std::exp(T(-0.5) * v * v) * T(0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2);
                 return cdf + v * pdf;
               });
}

Tensor exp(const Tensor& x) {
  return unary("exp", x, [](auto v) { return std::exp(v); }, [](auto, auto y) { return y; });
}

Tensor log(const Tensor& x) {
  return unary("log", x, [](auto v) { return std::log(v); },
               [](auto v, auto) { return decltype(v)(1) / v; });
}

Tensor square(const Tensor& x) {
  return unary("square", x, [](auto v) { return v * v; }, [](auto v, auto) { return 2 * v; });
}

Tensor sum(const Tensor& x) {
  Tensor out = dispatch(x.dtype(), [&]<class T>() {
    double acc = 0.0;
    for (auto v : x.data<T>()) acc += v;
    return Tensor::scalar(acc, x.dtype());
  });
  if (detail::should_record({&x})) {
    detail::record("sum", {x}, out, [x](const detail::Buffer& g) {
      dispatch(x.dtype(), [&]<class T>() {
        const T gy = as_vec<T>(g)[0];
        for (auto& v : detail::grad_vector<T>(x)) v += gy;
      });
    });
  }
  return out;
}

Tensor mean(const Tensor& x) { return mul_scalar(sum(x), 1.0 / static_cast<double>(x.numel())); }

Tensor channel_sum(const Tensor& x) {
  if (x.rank() < 2) throw ShapeError("channel_sum: expected rank >= 2, got " + shape_str(x.shape()));
  const Dims d = split_dims(x.shape(), 1);
  Tensor out = dispatch(x.dtype(), [&]<class T>() {
    auto xs = x.data<T>();
    std::vector<double> acc(static_cast<std::size_t>(d.mid), 0.0);
    for (std::int64_t n = 0; n < d.outer; ++n) {
      for (std::int64_t c = 0; c < d.mid; ++c) {
        const T* p = xs.data() + (n * d.mid + c) * d.inner;
        double s = 0.0;
        for (std::int64_t i = 0; i < d.inner; ++i) s += p[i];
        acc[static_cast<std::size_t>(c)] += s;
      }
    }
    return Tensor::from_vector({d.mid}, std::vector<T>(acc.begin(), acc.end()));
  });
  if (detail::should_record({&x})) {
    detail::record("channel_sum", {x}, out, [x, d](const detail::Buffer& g) {
      dispatch(x.dtype(), [&]<class T>() {
        const auto& gy = as_vec<T>(g);
        auto& gx = detail::grad_vector<T>(x);
        for (std::int64_t n = 0; n < d.outer; ++n) {
          for (std::int64_t c = 0; c < d.mid; ++c) {
            T* p = gx.data() + (n * d.mid + c) * d.inner;
            for (std::int64_t i = 0; i < d.inner; ++i) p[i] += gy[static_cast<std::size_t>(c)];
          }
        }
      });
    });
  }
  return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  check_same_dtype(a, b, "matmul");
  const bool batched = a.rank() == 3 && b.rank() == 3;
  if (!batched && !(a.rank() == 2 && b.rank() == 2)) {
    throw ShapeError("matmul: expected rank-2 or rank-3 operands, got " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()));
  }
  const std::int64_t batch = batched ? a.dim(0) : 1;
  const std::int64_t m = a.dim(-2), k = a.dim(-1), n = b.dim(-1);
  if (b.dim(-2) != k || (batched && b.dim(0) != batch)) {
    throw ShapeError("matmul: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  Shape out_shape = batched ? Shape{batch, m, n} : Shape{m, n};
  Tensor out = dispatch(a.dtype(), [&]<class T>() {
    std::vector<T> y(static_cast<std::size_t>(batch * m * n));
    auto as = a.data<T>();
    auto bs = b.data<T>();
    for (std::int64_t i = 0; i < batch; ++i) {
      detail::gemm<T>(false, false, m, n, k, as.data() + i * m * k, bs.data() + i * k * n, y.data() + i * m * n, false);
    }
    return Tensor::from_vector(out_shape, std::move(y));
  });
  add_macs(batch * m * n * k);
  if (detail::should_record({&a, &b})) {
    detail::record("matmul", {a, b}, out, [a, b, batch, m, n, k](const detail::Buffer& g) {
      dispatch(a.dtype(), [&]<class T>() {
        const auto& gy = as_vec<T>(g);
        auto as = a.data<T>();
        auto bs = b.data<T>();
        for (std::int64_t i = 0; i < batch; ++i) {
          const T* gi = gy.data() + i * m * n;
          if (a.requires_grad()) {
            detail::gemm<T>(false, true, m, k, n, gi, bs.data() + i * k * n,
                            detail::grad_vector<T>(a).data() + i * m * k, true);
          }
          if (b.requires_grad()) {
            detail::gemm<T>(true, false, k, n, m, as.data() + i * m * k, gi,
                            detail::grad_vector<T>(b).data() + i * k * n, true);
          }
        }
      });
    });
  }
  return out;
}

Tensor transpose(const Tensor& x) {
  if (x.rank() != 2) throw ShapeError("transpose: expected rank 2, got " + shape_str(x.shape()));
  const std::int64_t r = x.dim(0), c = x.dim(1);
  Tensor out = dispatch(x.dtype(), [&]<class T>() {
    auto xs = x.data<T>();
    std::vector<T> y(xs.size());
    for (std::int64_t i = 0; i < r; ++i)
      for (std::int64_t j = 0; j < c; ++j) y[static_cast<std::size_t>(j * r + i)] = xs[static_cast<std::size_t>(i * c + j)];
    return Tensor::from_vector({c, r}, std::move(y));
  });
  if (detail::should_record({&x})) {
    detail::record("transpose", {x}, out, [x, r, c](const detail::Buffer& g) {
      dispatch(x.dtype(), [&]<class T>() {
        const auto& gy = as_vec<T>(g);
        auto& gx = detail::grad_vector<T>(x);
        for (std::int64_t i = 0; i < r; ++i)
          for (std::int64_t j = 0; j < c; ++j) gx[static_cast<std::size_t>(i * c + j)] += gy[static_cast<std::size_t>(j * r + i)];
      });
    });
  }
  return out;
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const int a = normalize_axis(parts[0], axis, "concat");
  Shape out_shape = parts[0].shape();
  out_shape[static_cast<std::size_t>(a)] = 0;
  for (const auto& p : parts) {
    check_same_dtype(parts[0], p, "concat");
    bool ok = p.rank() == parts[0].rank();
    for (int i = 0; ok && i < p.rank(); ++i) {
      if (i != a && p.dim(i) != parts[0].dim(i)) ok = false;
    }
    if (!ok) {
      throw ShapeError("concat: shape mismatch " + shape_str(parts[0].shape()) + " vs " + shape_str(p.shape()) +
                       " along axis " + std::to_string(a));
    }
    out_shape[static_cast<std::size_t>(a)] += p.dim(a);
  }
  const Dims od = split_dims(out_shape, a);
  Tensor out = dispatch(parts[0].dtype(), [&]<class T>() {
    std::vector<T> y(static_cast<std::size_t>(shape_numel(out_shape)));
    std::int64_t offset = 0;
    for (const auto& p : parts) {
      auto ps = p.data<T>();
      const std::int64_t block = p.dim(a) * od.inner;
      for (std::int64_t o = 0; o < od.outer; ++o) {
        std::copy_n(ps.data() + o * block, block, y.data() + o * od.mid * od.inner + offset);
      }
      offset += block;
    }
    return Tensor::from_vector(out_shape, std::move(y));
  });
  if (detail::should_record(parts)) {
    detail::record("concat", parts, out, [parts, a, od](const detail::Buffer& g) {
      dispatch(parts[0].dtype(), [&]<class T>() {
        const auto& gy = as_vec<T>(g);
        std::int64_t offset = 0;
        for (const auto& p : parts) {
          const std::int64_t block = p.dim(a) * od.inner;
          if (p.requires_grad()) {
            auto& gp = detail::grad_vector<T>(p);
            for (std::int64_t o = 0; o < od.outer; ++o) {
              const T* src = gy.data() + o * od.mid * od.inner + offset;
              T* dst = gp.data() + o * block;
              for (std::int64_t i = 0; i < block; ++i) dst[i] += src[i];
            }
          }
          offset += block;
        }
      });
    });
  }
  return out;
}

std::vector<Tensor> split(const Tensor& x, int axis, const std::vector<std::int64_t>& sizes) {
  const int a = normalize_axis(x, axis, "split");
  const std::int64_t total = std::accumulate(sizes.begin(), sizes.end(), std::int64_t{0});
  if (total != x.dim(a)) {
    throw ShapeError("split: sizes sum to " + std::to_string(total) + " but axis " + std::to_string(a) +
                     " of shape " + shape_str(x.shape()) + " has extent " + std::to_string(x.dim(a)));
  }
  const Dims d = split_dims(x.shape(), a);
  std::vector<Tensor> outs;
  std::int64_t offset = 0;
  for (auto size : sizes) {
    Shape s = x.shape();
    s[static_cast<std::size_t>(a)] = size;
    const std::int64_t block = size * d.inner;
    Tensor out = dispatch(x.dtype(), [&]<class T>() {
      auto xs = x.data<T>();
      std::vector<T> y(static_cast<std::size_t>(d.outer * block));
      for (std::int64_t o = 0; o < d.outer; ++o) {
        std::copy_n(xs.data() + o * d.mid * d.inner + offset, block, y.data() + o * block);
      }
      return Tensor::from_vector(s, std::move(y));
    });
    if (detail::should_record({&x})) {
      detail::record("split", {x}, out, [x, d, block, offset](const detail::Buffer& g) {
        dispatch(x.dtype(), [&]<class T>() {
          const auto& gy = as_vec<T>(g);
          auto& gx = detail::grad_vector<T>(x);
          for (std::int64_t o = 0; o < d.outer; ++o) {
            T* dst = gx.data() + o * d.mid * d.inner + offset;
            const T* src = gy.data() + o * block;
            for (std::int64_t i = 0; i < block; ++i) dst[i] += src[i];
          }
        });
      });
    }
    outs.push_back(std::move(out));
    offset += block;
  }
  return outs;
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw ShapeError("reshape: cannot reshape " + shape_str(x.shape()) + " to " + shape_str(shape));
  }
  Tensor out = Tensor::from_buffer(std::move(shape), x.impl().data);
  if (detail::should_record({&x})) {
    detail::record("reshape", {x}, out, [x](const detail::Buffer& g) {
      dispatch(x.dtype(), [&]<class T>() {
        const auto& gy = as_vec<T>(g);
        auto& gx = detail::grad_vector<T>(x);
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy[i];
      });
    });
  }
  return out;
}

Tensor softmax_channels(const Tensor& x) {
  if (x.rank() < 2) throw ShapeError("softmax_channels: expected rank >= 2, got " + shape_str(x.shape()));
  const Dims d = split_dims(x.shape(), 1);
  Tensor out = dispatch(x.dtype(), [&]<class T>() {
    auto xs = x.data<T>();
    std::vector<T> y(xs.size());
    for (std::int64_t n = 0; n < d.outer; ++n) {
      const T* xp = xs.data() + n * d.mid * d.inner;
      T* yp = y.data() + n * d.mid * d.inner;
      for (std::int64_t s = 0; s < d.inner; ++s) {
        T mx = xp[s];
        for (std::int64_t c = 1; c < d.mid; ++c) mx = std::max(mx, xp[c * d.inner + s]);
        T total = 0;
        for (std::int64_t c = 0; c < d.mid; ++c) {
          const T e = std::exp(xp[c * d.inner + s] - mx);
          yp[c * d.inner + s] = e;
          total += e;
        }
        for (std::int64_t c = 0; c < d.mid; ++c) yp[c * d.inner + s] /= total;
      }
    }
    return Tensor::from_vector(x.shape(), std::move(y));
  });
  if (detail::should_record({&x})) {
    detail::record("softmax_channels", {x}, out, [x, out, d](const detail::Buffer& g) {
      dispatch(x.dtype(), [&]<class T>() {
        const auto& gy = as_vec<T>(g);
        auto ys = out.data<T>();
        auto& gx = detail::grad_vector<T>(x);
        for (std::int64_t n = 0; n < d.outer; ++n) {
          const std::int64_t base = n * d.mid * d.inner;
          for (std::int64_t s = 0; s < d.inner; ++s) {
            T dot = 0;
            for (std::int64_t c = 0; c < d.mid; ++c) {
              const auto i = static_cast<std::size_t>(base + c * d.inner + s);
              dot += gy[i] * ys[i];
            }
            for (std::int64_t c = 0; c < d.mid; ++c) {
              const auto i = static_cast<std::size_t>(base + c * d.inner + s);
              gx[i] += ys[i] * (gy[i] - dot);
            }
          }
        }
      });
    });
  }
  return out;
}

}  // namespace rwkvunet::ops
