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

#include "rwkvunet/profiling.hpp"

namespace rwkvunet {

namespace {
thread_local MacCounter* g_counter = nullptr;
}  // namespace

MacCounter::MacCounter() : previous_(g_counter) { g_counter = this; }

MacCounter::~MacCounter() { g_counter = previous_; }

void add_macs(std::int64_t macs) {
  for (auto* c = g_counter; c; c = c->previous_) c->total_ += macs;
}

}  // namespace rwkvunet
