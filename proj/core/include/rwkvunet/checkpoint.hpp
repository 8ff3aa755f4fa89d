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
#include <string>
#include <vector>

#include "rwkvunet/model.hpp"

namespace rwkvunet {

class CheckpointError : public Error {
 public:
  enum class Kind { kIo, kNotCheckpoint, kVersion, kTruncated, kChecksum, kMalformed, kMissingTensor, kShapeMismatch };

  CheckpointError(Kind kind, const std::string& message) : Error(message), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Writes named tensors to `path` (via a temporary file and rename).
void write_tensors(const std::string& path, const std::vector<NamedTensor>& tensors);
/// Reads and validates a tensor container.
std::vector<NamedTensor> read_tensors(const std::string& path);

/// Tensor holding the architecture settings needed to rebuild a model.
NamedTensor config_tensor(const ModelConfig& config);
ModelConfig config_from_tensors(const std::vector<NamedTensor>& tensors);

/// Copies every model parameter from `tensors` in place. Missing names and
/// shape mismatches raise CheckpointError naming the first offending tensor.
void assign_parameters(SegmentationModel& model, const std::vector<NamedTensor>& tensors);

void save_checkpoint(SegmentationModel& model, const std::string& path, const std::vector<NamedTensor>& extra = {});
SegmentationModel load_checkpoint(const std::string& path, DType dtype = DType::kFloat32);
/// Loads weights into an existing model, which must have the same architecture.
void load_checkpoint_into(SegmentationModel& model, const std::string& path);

}  // namespace rwkvunet
