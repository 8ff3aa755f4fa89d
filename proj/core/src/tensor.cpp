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

#include "rwkvunet/tensor.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

namespace rwkvunet {

std::string_view dtype_name(DType dtype) {
  return dtype == DType::kFloat64 ? "float64" : "float32";
}

std::size_t dtype_size(DType dtype) {
  return dtype == DType::kFloat64 ? sizeof(double) : sizeof(float);
}

std::string shape_str(const Shape& shape) {
  std::ostringstream out;
  out << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ", ";
    out << shape[i];
  }
  if (shape.size() == 1) out << ',';
  out << ')';
  return out.str();
}

std::int64_t shape_numel(const Shape& shape) {
  std::int64_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

namespace detail {

DType buffer_dtype(const Buffer& buffer) {
  return std::holds_alternative<std::vector<double>>(buffer) ? DType::kFloat64 : DType::kFloat32;
}

std::size_t buffer_size(const Buffer& buffer) {
  return std::visit([](const auto& v) { return v.size(); }, buffer);
}

Buffer make_buffer(DType dtype, std::size_t size, double fill) {
  if (dtype == DType::kFloat64) return std::vector<double>(size, fill);
  return std::vector<float>(size, static_cast<float>(fill));
}

}  // namespace detail

namespace {

void validate_shape(const Shape& shape) {
  for (auto d : shape) {
    if (d <= 0) throw ShapeError("tensor extents must be positive, got " + shape_str(shape));
  }
}

template <class T>
std::vector<T>& buffer_as(detail::Buffer& buffer) {
  auto* v = std::get_if<std::vector<T>>(&buffer);
  if (!v) throw DTypeError("tensor dtype does not match the requested element type");
  return *v;
}

}  // namespace

Tensor::Tensor(std::shared_ptr<detail::TensorImpl> impl) : impl_(std::move(impl)) {}

Tensor Tensor::zeros(Shape shape, DType dtype) { return full(std::move(shape), 0.0, dtype); }

Tensor Tensor::full(Shape shape, double value, DType dtype) {
  validate_shape(shape);
  auto n = static_cast<std::size_t>(shape_numel(shape));
  return from_buffer(std::move(shape), detail::make_buffer(dtype, n, value));
}

Tensor Tensor::from_vector(Shape shape, std::vector<float> values) {
  return from_buffer(std::move(shape), detail::Buffer(std::move(values)));
}

Tensor Tensor::from_vector(Shape shape, std::vector<double> values) {
  return from_buffer(std::move(shape), detail::Buffer(std::move(values)));
}

Tensor Tensor::from_buffer(Shape shape, detail::Buffer buffer) {
  validate_shape(shape);
  if (static_cast<std::int64_t>(detail::buffer_size(buffer)) != shape_numel(shape)) {
    throw ShapeError("value count " + std::to_string(detail::buffer_size(buffer)) +
                     " does not match shape " + shape_str(shape));
  }
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(buffer);
  return Tensor(std::move(impl));
}

Tensor Tensor::scalar(double value, DType dtype) { return full({}, value, dtype); }

detail::TensorImpl& Tensor::impl() const {
  if (!impl_) throw Error("use of an undefined tensor");
  return *impl_;
}

const Shape& Tensor::shape() const { return impl().shape; }

int Tensor::rank() const { return static_cast<int>(impl().shape.size()); }

std::int64_t Tensor::dim(int axis) const {
  const int r = rank();
  const int a = axis < 0 ? axis + r : axis;
  if (a < 0 || a >= r) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " + shape_str(shape()));
  }
  return impl().shape[static_cast<std::size_t>(a)];
}

std::int64_t Tensor::numel() const { return shape_numel(impl().shape); }

DType Tensor::dtype() const { return detail::buffer_dtype(impl().data); }

template <class T>
std::span<const T> Tensor::data() const {
  const auto& v = buffer_as<T>(impl().data);
  return {v.data(), v.size()};
}

template <class T>
std::span<T> Tensor::mutable_data() {
  auto& v = buffer_as<T>(impl().data);
  return {v.data(), v.size()};
}

template std::span<const float> Tensor::data<float>() const;
template std::span<const double> Tensor::data<double>() const;
template std::span<float> Tensor::mutable_data<float>();
template std::span<double> Tensor::mutable_data<double>();

double Tensor::item() const {
  if (numel() != 1) throw ShapeError("item() requires a single-element tensor, got " + shape_str(shape()));
  return value_at(0);
}

double Tensor::value_at(std::int64_t flat_index) const {
  return std::visit([&](const auto& v) { return static_cast<double>(v.at(static_cast<std::size_t>(flat_index))); },
                    impl().data);
}

std::vector<double> Tensor::to_vector() const {
  return std::visit([](const auto& v) { return std::vector<double>(v.begin(), v.end()); }, impl().data);
}

bool Tensor::requires_grad() const { return impl().requires_grad; }

Tensor& Tensor::set_requires_grad(bool value) {
  impl().requires_grad = value;
  return *this;
}

bool Tensor::is_leaf() const { return impl().is_leaf; }

bool Tensor::has_grad() const { return impl().grad != nullptr; }

Tensor Tensor::grad() const {
  if (!has_grad()) throw Error("tensor has no gradient");
  return from_buffer(shape(), *impl().grad);
}

template <class T>
std::span<const T> Tensor::grad_data() const {
  if (!has_grad()) throw Error("tensor has no gradient");
  const auto& v = buffer_as<T>(*impl().grad);
  return {v.data(), v.size()};
}

template std::span<const float> Tensor::grad_data<float>() const;
template std::span<const double> Tensor::grad_data<double>() const;

void Tensor::zero_grad() {
  auto& im = impl();
  if (im.grad) {
    std::visit([](auto& v) { std::fill(v.begin(), v.end(), 0); }, *im.grad);
  } else {
    im.grad = std::make_unique<detail::Buffer>(detail::make_buffer(dtype(), static_cast<std::size_t>(numel())));
  }
}

void Tensor::clear_grad() { impl().grad.reset(); }

Tensor Tensor::detach() const { return from_buffer(shape(), impl().data); }

Tensor Tensor::to(DType target) const {
  if (target == dtype()) return detach();
  return std::visit(
      [&](const auto& v) -> Tensor {
        if (target == DType::kFloat64) return from_vector(shape(), std::vector<double>(v.begin(), v.end()));
        std::vector<float> out(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<float>(v[i]);
        return from_vector(shape(), std::move(out));
      },
      impl().data);
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape() || a.dtype() != b.dtype()) return false;
  return std::visit(
      [&](const auto& va) {
        using V = std::decay_t<decltype(va)>;
        const auto& vb = std::get<V>(b.impl().data);
        return std::memcmp(va.data(), vb.data(), va.size() * sizeof(typename V::value_type)) == 0;
      },
      a.impl().data);
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "max_abs_diff");
  double worst = 0.0;
  const auto va = a.to_vector();
  const auto vb = b.to_vector();
  for (std::size_t i = 0; i < va.size(); ++i) worst = std::max(worst, std::abs(va[i] - vb[i]));
  return worst;
}

void check_same_shape(const Tensor& a, const Tensor& b, std::string_view op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

void check_same_dtype(const Tensor& a, const Tensor& b, std::string_view op) {
  if (a.dtype() != b.dtype()) {
    throw DTypeError(std::string(op) + ": dtype mismatch " + std::string(dtype_name(a.dtype())) + " vs " +
                     std::string(dtype_name(b.dtype())));
  }
}

}  // namespace rwkvunet
