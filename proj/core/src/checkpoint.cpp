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

#include "rwkvunet/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>

namespace rwkvunet {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'R', 'W', 'K', 'V', 'U', 'N', 'T', '1'};
constexpr const char* kConfigName = "meta.config";

template <class T>
void put(std::string& out, T value) {
  char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  out.append(bytes, sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::string data) : data_(std::move(data)) {}

  template <class T>
  T get(const char* what) {
    T value;
    std::memcpy(&value, take(sizeof(T), what), sizeof(T));
    return value;
  }

  const char* take(std::size_t n, const char* what) {
    if (data_.size() - pos_ < n) {
      throw CheckpointError(CheckpointError::Kind::kTruncated,
                            std::string("checkpoint truncated while reading ") + what);
    }
    const char* p = data_.data() + pos_;
    pos_ += n;
    return p;
  }

  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  std::string data_;
  std::size_t pos_ = 0;
};

std::uint64_t byte_sum(const char* p, std::size_t n) {
  std::uint64_t s = 0;
  for (std::size_t i = 0; i < n; ++i) s += static_cast<unsigned char>(p[i]);
  return s;
}

}  // namespace

void write_tensors(const std::string& path, const std::vector<NamedTensor>& tensors) {
  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  std::uint64_t checksum = 0;
  for (const auto& nt : tensors) {
    if (nt.name.size() > 0xFFFF) throw ValueError("tensor name too long: " + nt.name.substr(0, 64));
    const auto& shape = nt.tensor.shape();
    if (shape.size() > 0xFF) throw ValueError("tensor rank too large for checkpoint: " + nt.name);
    put<std::uint16_t>(out, static_cast<std::uint16_t>(nt.name.size()));
    out += nt.name;
    put<std::uint8_t>(out, static_cast<std::uint8_t>(shape.size()));
    for (auto d : shape) put<std::uint64_t>(out, static_cast<std::uint64_t>(d));
    put<std::uint8_t>(out, static_cast<std::uint8_t>(nt.tensor.dtype()));
    std::visit(
        [&](const auto& v) {
          const auto* p = reinterpret_cast<const char*>(v.data());
          const std::size_t n = v.size() * sizeof(v[0]);
          checksum += byte_sum(p, n);
          out.append(p, n);
        },
        nt.tensor.impl().data);
  }
  put<std::uint64_t>(out, checksum);

  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw CheckpointError(CheckpointError::Kind::kIo, "cannot open " + tmp + " for writing");
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw CheckpointError(CheckpointError::Kind::kIo, "write failed for " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw CheckpointError(CheckpointError::Kind::kIo, "cannot move checkpoint into place at " + path);
}

std::vector<NamedTensor> read_tensors(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CheckpointError(CheckpointError::Kind::kIo, "cannot open checkpoint " + path);
  Reader r(std::string(std::istreambuf_iterator<char>(f), {}));

  if (r.remaining() < sizeof(kMagic) || std::memcmp(r.take(sizeof(kMagic), "magic"), kMagic, sizeof(kMagic)) != 0) {
    throw CheckpointError(CheckpointError::Kind::kNotCheckpoint, path + " is not a checkpoint (bad magic bytes)");
  }
  const auto version = r.get<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    throw CheckpointError(CheckpointError::Kind::kVersion, "unsupported checkpoint version " +
                                                               std::to_string(version) + " (expected " +
                                                               std::to_string(kCheckpointVersion) + ")");
  }
  const auto count = r.get<std::uint32_t>("tensor count");
  std::vector<NamedTensor> tensors;
  std::uint64_t checksum = 0;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = r.get<std::uint16_t>("name length");
    std::string name(r.take(name_len, "tensor name"), name_len);
    const auto rank = r.get<std::uint8_t>("rank");
    Shape shape;
    for (int d = 0; d < rank; ++d) {
      const auto extent = r.get<std::uint64_t>("extent");
      if (extent == 0 || extent > (1ull << 40)) {
        throw CheckpointError(CheckpointError::Kind::kMalformed, "invalid extent in tensor '" + name + "'");
      }
      shape.push_back(static_cast<std::int64_t>(extent));
    }
    const auto code = r.get<std::uint8_t>("dtype");
    if (code > 1) {
      throw CheckpointError(CheckpointError::Kind::kMalformed,
                            "unknown dtype code " + std::to_string(code) + " in tensor '" + name + "'");
    }
    const auto dtype = static_cast<DType>(code);
    const auto n = static_cast<std::size_t>(shape_numel(shape));
    const std::size_t bytes = n * dtype_size(dtype);
    if (bytes > r.remaining()) {
      throw CheckpointError(CheckpointError::Kind::kTruncated, "checkpoint truncated inside tensor '" + name + "'");
    }
    const char* payload = r.take(bytes, "payload");
    checksum += byte_sum(payload, bytes);
    auto buffer = detail::make_buffer(dtype, n);
    std::visit([&](auto& v) { std::memcpy(v.data(), payload, bytes); }, buffer);
    tensors.push_back({std::move(name), Tensor::from_buffer(std::move(shape), std::move(buffer))});
  }
  const auto stored = r.get<std::uint64_t>("checksum");
  if (stored != checksum) {
    throw CheckpointError(CheckpointError::Kind::kChecksum, "checkpoint checksum mismatch in " + path);
  }
  if (r.remaining() != 0) {
    throw CheckpointError(CheckpointError::Kind::kMalformed, "trailing bytes after checkpoint checksum");
  }
  return tensors;
}

NamedTensor config_tensor(const ModelConfig& c) {
  std::vector<double> values{static_cast<double>(c.variant),         static_cast<double>(c.in_channels),
                             static_cast<double>(c.num_classes),     static_cast<double>(c.encoder.stem_stride),
                             static_cast<double>(c.decoder_kernel),  static_cast<double>(c.decoder_expansion),
                             static_cast<double>(c.mix_hidden_ratio)};
  const Shape shape{static_cast<std::int64_t>(values.size())};
  return {kConfigName, Tensor::from_vector(shape, std::move(values))};
}

ModelConfig config_from_tensors(const std::vector<NamedTensor>& tensors) {
  for (const auto& nt : tensors) {
    if (nt.name != kConfigName) continue;
    const auto v = nt.tensor.to_vector();
    if (v.size() != 7 || v[0] < 0 || v[0] > 2) {
      throw CheckpointError(CheckpointError::Kind::kMalformed, "malformed model configuration record");
    }
    ModelConfig c = ModelConfig::make(static_cast<Variant>(static_cast<int>(v[0])), static_cast<std::int64_t>(v[1]),
                                      static_cast<std::int64_t>(v[2]));
    c.encoder.stem_stride = static_cast<int>(v[3]);
    c.decoder_kernel = static_cast<int>(v[4]);
    c.decoder_expansion = static_cast<int>(v[5]);
    c.mix_hidden_ratio = static_cast<int>(v[6]);
    return c;
  }
  throw CheckpointError(CheckpointError::Kind::kMissingTensor, "checkpoint has no model configuration record");
}

void assign_parameters(SegmentationModel& model, const std::vector<NamedTensor>& tensors) {
  // validate everything before touching the model
  std::vector<std::pair<Tensor, const NamedTensor*>> plan;
  model.visit([&](const std::string& name, Tensor& param) {
    const NamedTensor* found = nullptr;
    for (const auto& nt : tensors) {
      if (nt.name == name) {
        found = &nt;
        break;
      }
    }
    if (!found) throw CheckpointError(CheckpointError::Kind::kMissingTensor, "checkpoint lacks tensor '" + name + "'");
    if (found->tensor.shape() != param.shape()) {
      throw CheckpointError(CheckpointError::Kind::kShapeMismatch,
                            "shape mismatch for tensor '" + name + "': checkpoint " +
                                shape_str(found->tensor.shape()) + " vs model " + shape_str(param.shape()));
    }
    plan.emplace_back(param, found);
  });
  for (auto& [param, found] : plan) {
    const Tensor src = found->tensor.to(param.dtype());
    param.impl().data = src.impl().data;
  }
}

void save_checkpoint(SegmentationModel& model, const std::string& path, const std::vector<NamedTensor>& extra) {
  std::vector<NamedTensor> all{config_tensor(model.config)};
  for (auto& nt : model.parameters()) all.push_back(std::move(nt));
  for (const auto& nt : extra) all.push_back(nt);
  write_tensors(path, all);
}

SegmentationModel load_checkpoint(const std::string& path, DType dtype) {
  const auto tensors = read_tensors(path);
  SegmentationModel model = build_model(config_from_tensors(tensors), 0, dtype);
  assign_parameters(model, tensors);
  return model;
}

void load_checkpoint_into(SegmentationModel& model, const std::string& path) {
  assign_parameters(model, read_tensors(path));
}

}  // namespace rwkvunet
