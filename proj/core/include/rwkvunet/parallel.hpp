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

#include <cstdint>
#include <functional>

namespace rwkvunet {

/// Worker count for internal kernels. Read once from RWKV_UNET_THREADS
/// (0 or unset means hardware concurrency) unless overridden.
int thread_count();
void set_thread_count(int threads);

/// Runs fn over [0, n) split into contiguous chunks, one per worker. The
/// partition depends only on n and the worker count, and callers write
/// disjoint outputs, so results do not depend on scheduling.
void parallel_for(std::int64_t n, const std::function<void(std::int64_t begin, std::int64_t end)>& fn);

}  // namespace rwkvunet
