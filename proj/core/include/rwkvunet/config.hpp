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
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rwkvunet/data_io.hpp"
#include "rwkvunet/trainer.hpp"

namespace rwkvunet {

/// Malformed configuration text, or a key nobody consumed.
class ConfigError : public ValueError {
 public:
  using ValueError::ValueError;
};

/// Flat `key = value` configuration with `#` comments.
///
/// Values are fetched with the take_* accessors, which mark the key as used;
/// check_consumed() then rejects whatever is left, naming the key.
class KeyValues {
 public:
  static KeyValues parse(std::string_view text, const std::string& source = "<config>");
  static KeyValues load(const std::string& path);

  bool contains(const std::string& key) const;
  /// Inserts or replaces a value.
  void set(const std::string& key, const std::string& value);

  std::optional<std::string> take_string(const std::string& key);
  std::optional<std::int64_t> take_int(const std::string& key);
  std::optional<std::uint64_t> take_uint(const std::string& key);
  std::optional<double> take_double(const std::string& key);
  /// Accepts true/false, yes/no, on/off and 1/0.
  std::optional<bool> take_bool(const std::string& key);

  void check_consumed() const;

 private:
  struct Entry {
    std::string key;
    std::string value;
    int line = 0;
    bool used = false;
  };
  Entry* find(const std::string& key);
  std::string where(const Entry& e) const;

  std::string source_;
  std::vector<Entry> entries_;
};

/// Consumes the keys that mirror TrainConfig fields.
void apply_train_config(KeyValues& kv, TrainConfig& cfg);
/// Consumes the keys that mirror SyntheticSpec fields.
void apply_synthetic_spec(KeyValues& kv, SyntheticSpec& spec);

}  // namespace rwkvunet
