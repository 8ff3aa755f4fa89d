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

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace rwkvunet {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand extents do not fit the operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Operands carry different element types.
class DTypeError : public Error {
 public:
  using Error::Error;
};

/// A value violates an operation's numeric precondition.
class ValueError : public Error {
 public:
  using Error::Error;
};

/// An input held NaN or infinity where a finite value is required.
class NonFiniteError : public ValueError {
 public:
  using ValueError::ValueError;
};

enum class DType : std::uint8_t { kFloat32 = 0, kFloat64 = 1 };

std::string_view dtype_name(DType dtype);
std::size_t dtype_size(DType dtype);

using Shape = std::vector<std::int64_t>;

std::string shape_str(const Shape& shape);
std::int64_t shape_numel(const Shape& shape);

namespace detail {

using Buffer = std::variant<std::vector<float>, std::vector<double>>;

DType buffer_dtype(const Buffer& buffer);
std::size_t buffer_size(const Buffer& buffer);
Buffer make_buffer(DType dtype, std::size_t size, double fill = 0.0);

struct TensorImpl {
  Shape shape;
  Buffer data;
  bool requires_grad = false;
  bool is_leaf = true;
  std::unique_ptr<Buffer> grad;
};

}  // namespace detail

/// Calls `f.template operator()<T>()` with T = float or double according to `dtype`.
template <class F>
decltype(auto) dispatch(DType dtype, F&& f) {
  if (dtype == DType::kFloat64) {
    return f.template operator()<double>();
  }
  return f.template operator()<float>();
}

/// Dense row-major N-D array with an optional gradient slot.
///
/// Tensors share their storage when copied. Storage is treated as immutable
/// once an op has produced it; the only sanctioned writers are initializers,
/// optimizers and the autodiff tape (which owns `grad`).
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<detail::TensorImpl> impl);

  static Tensor zeros(Shape shape, DType dtype = DType::kFloat32);
  static Tensor full(Shape shape, double value, DType dtype = DType::kFloat32);
  static Tensor from_vector(Shape shape, std::vector<float> values);
  static Tensor from_vector(Shape shape, std::vector<double> values);
  static Tensor from_buffer(Shape shape, detail::Buffer buffer);
  static Tensor scalar(double value, DType dtype = DType::kFloat32);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  int rank() const;
  /// Extent of `axis`; negative axes count from the back.
  std::int64_t dim(int axis) const;
  std::int64_t numel() const;
  DType dtype() const;

  template <class T>
  std::span<const T> data() const;
  template <class T>
  std::span<T> mutable_data();

  double item() const;
  double value_at(std::int64_t flat_index) const;
  std::vector<double> to_vector() const;

  bool requires_grad() const;
  Tensor& set_requires_grad(bool value);
  bool is_leaf() const;
  bool has_grad() const;
  /// Gradient as a detached tensor; throws if absent.
  Tensor grad() const;
  template <class T>
  std::span<const T> grad_data() const;
  void zero_grad();
  void clear_grad();

  Tensor detach() const;
  Tensor to(DType dtype) const;

  detail::TensorImpl& impl() const;
  const std::shared_ptr<detail::TensorImpl>& impl_ptr() const { return impl_; }
  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

 private:
  std::shared_ptr<detail::TensorImpl> impl_;
};

bool bitwise_equal(const Tensor& a, const Tensor& b);
double max_abs_diff(const Tensor& a, const Tensor& b);

void check_same_shape(const Tensor& a, const Tensor& b, std::string_view op);
void check_same_dtype(const Tensor& a, const Tensor& b, std::string_view op);

}  // namespace rwkvunet
