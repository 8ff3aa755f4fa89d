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

#include <functional>
#include <string>
#include <vector>

#include "rwkvunet/tensor.hpp"

namespace rwkvunet {

namespace detail {

struct Node {
  std::string op;
  std::vector<Tensor> inputs;
  Tensor output;
  // Receives the output gradient and accumulates into input gradients.
  std::function<void(const Buffer& grad_out)> backward;
};

}  // namespace detail

/// Reverse-mode recording of primitive ops.
///
/// Constructing a Tape makes it the active tape of the calling thread until
/// it is destroyed; ops whose inputs require grad record themselves on it.
/// A tape can be replayed backward exactly once.
class Tape {
 public:
  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Active tape of this thread, or nullptr when recording is off.
  static Tape* active();

  /// Writes d(loss)/d(leaf) into every requires-grad leaf reachable from the
  /// recorded ops. Leaf gradients accumulate across tapes.
  void backward(const Tensor& loss);

  std::size_t size() const { return nodes_.size(); }
  bool consumed() const { return consumed_; }

  void record(detail::Node node);

 private:
  std::vector<detail::Node> nodes_;
  bool consumed_ = false;
  Tape* previous_ = nullptr;
};

/// Suspends recording on this thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  Tape* saved_;
};

namespace detail {

/// True when an op over `inputs` must be recorded.
bool should_record(std::initializer_list<const Tensor*> inputs);
bool should_record(const std::vector<Tensor>& inputs);

/// Marks `output` as produced by `op` and appends the node to the active tape.
void record(std::string op, std::vector<Tensor> inputs, Tensor& output,
            std::function<void(const Buffer& grad_out)> backward);

/// Gradient buffer of `t`, allocated as zeros on first use.
Buffer& grad_buffer(const Tensor& t);

template <class T>
std::vector<T>& grad_vector(const Tensor& t) {
  return std::get<std::vector<T>>(grad_buffer(t));
}

/// Aborts in debug builds when a freshly computed forward value is not finite.
void debug_check_finite(const Tensor& t, std::string_view op);

}  // namespace detail

}  // namespace rwkvunet
