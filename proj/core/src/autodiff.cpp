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

#include "rwkvunet/autodiff.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>

namespace rwkvunet {

namespace {
thread_local Tape* g_active_tape = nullptr;
}  // namespace

Tape::Tape() : previous_(g_active_tape) { g_active_tape = this; }

Tape::~Tape() { g_active_tape = previous_; }

Tape* Tape::active() { return g_active_tape; }

void Tape::record(detail::Node node) {
  if (consumed_) throw Error("cannot record on a consumed tape");
  nodes_.push_back(std::move(node));
}

void Tape::backward(const Tensor& loss) {
  if (consumed_) throw Error("backward called on a consumed tape");
  if (loss.numel() != 1) {
    throw ShapeError("backward requires a scalar loss, got shape " + shape_str(loss.shape()));
  }
  if (!loss.requires_grad()) throw Error("backward: loss was not recorded on a tape");

  auto& seed = detail::grad_buffer(loss);
  std::visit([](auto& v) { v.assign(v.size(), 1); }, seed);

  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    auto& out = it->output.impl();
    if (!out.grad) continue;
    it->backward(*out.grad);
  }
  for (auto& node : nodes_) {
    for (auto& in : node.inputs) {
      if (in.is_leaf() && in.requires_grad() && !in.has_grad()) detail::grad_buffer(in);
    }
  }
  nodes_.clear();
  consumed_ = true;
}

NoGradGuard::NoGradGuard() : saved_(g_active_tape) { g_active_tape = nullptr; }

NoGradGuard::~NoGradGuard() { g_active_tape = saved_; }

namespace detail {

bool should_record(std::initializer_list<const Tensor*> inputs) {
  if (!g_active_tape) return false;
  for (const auto* t : inputs) {
    if (t && t->defined() && t->requires_grad()) return true;
  }
  return false;
}

bool should_record(const std::vector<Tensor>& inputs) {
  if (!g_active_tape) return false;
  for (const auto& t : inputs) {
    if (t.defined() && t.requires_grad()) return true;
  }
  return false;
}

void record(std::string op, std::vector<Tensor> inputs, Tensor& output,
            std::function<void(const Buffer& grad_out)> backward) {
  auto& impl = output.impl();
  impl.requires_grad = true;
  impl.is_leaf = false;
  g_active_tape->record(Node{std::move(op), std::move(inputs), output, std::move(backward)});
}

Buffer& grad_buffer(const Tensor& t) {
  auto& impl = t.impl();
  if (!impl.grad) {
    impl.grad = std::make_unique<Buffer>(make_buffer(t.dtype(), static_cast<std::size_t>(t.numel())));
  }
  return *impl.grad;
}

void debug_check_finite([[maybe_unused]] const Tensor& t, [[maybe_unused]] std::string_view op) {
#ifndef NDEBUG
  std::visit(
      [&](const auto& v) {
        for (auto x : v) {
          if (!std::isfinite(x)) {
            std::fprintf(stderr, "non-finite value produced by %.*s\n", static_cast<int>(op.size()), op.data());
            std::abort();
          }
        }
      },
      t.impl().data);
#endif
}

}  // namespace detail

}  // namespace rwkvunet
