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

#include "rwkvunet/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

namespace rwkvunet {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

template <class T>
T parse_number(const std::string& value, const std::string& context) {
  T out{};
  const char* first = value.data();
  const char* last = first + value.size();
  if (!value.empty() && value.front() == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc() || ptr != last) throw ConfigError(context + ": cannot parse '" + value + "' as a number");
  return out;
}

}  // namespace

KeyValues KeyValues::parse(std::string_view text, const std::string& source) {
  KeyValues kv;
  kv.source_ = source;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::string_view s(raw);
    if (const auto hash = s.find('#'); hash != std::string_view::npos) s = s.substr(0, hash);
    s = trim(s);
    if (s.empty()) continue;
    const auto eq = s.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(source + ":" + std::to_string(line) + ": expected 'key = value'");
    }
    const std::string key(trim(s.substr(0, eq)));
    const std::string value(trim(s.substr(eq + 1)));
    if (key.empty()) throw ConfigError(source + ":" + std::to_string(line) + ": empty key");
    if (kv.find(key)) throw ConfigError(source + ":" + std::to_string(line) + ": duplicate key '" + key + "'");
    kv.entries_.push_back({key, value, line, false});
  }
  return kv;
}

KeyValues KeyValues::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream text;
  text << f.rdbuf();
  return parse(text.str(), path);
}

KeyValues::Entry* KeyValues::find(const std::string& key) {
  auto it = std::find_if(entries_.begin(), entries_.end(), [&](const Entry& e) { return e.key == key; });
  return it == entries_.end() ? nullptr : &*it;
}

std::string KeyValues::where(const Entry& e) const {
  return e.line > 0 ? source_ + ":" + std::to_string(e.line) + ": key '" + e.key + "'" : "key '" + e.key + "'";
}

bool KeyValues::contains(const std::string& key) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const Entry& e) { return e.key == key; });
}

void KeyValues::set(const std::string& key, const std::string& value) {
  if (Entry* e = find(key)) {
    e->value = value;
    e->line = 0;
  } else {
    entries_.push_back({key, value, 0, false});
  }
}

std::optional<std::string> KeyValues::take_string(const std::string& key) {
  Entry* e = find(key);
  if (!e) return std::nullopt;
  e->used = true;
  return e->value;
}

std::optional<std::int64_t> KeyValues::take_int(const std::string& key) {
  Entry* e = find(key);
  if (!e) return std::nullopt;
  e->used = true;
  return parse_number<std::int64_t>(e->value, where(*e));
}

std::optional<std::uint64_t> KeyValues::take_uint(const std::string& key) {
  Entry* e = find(key);
  if (!e) return std::nullopt;
  e->used = true;
  return parse_number<std::uint64_t>(e->value, where(*e));
}

std::optional<double> KeyValues::take_double(const std::string& key) {
  Entry* e = find(key);
  if (!e) return std::nullopt;
  e->used = true;
  return parse_number<double>(e->value, where(*e));
}

std::optional<bool> KeyValues::take_bool(const std::string& key) {
  Entry* e = find(key);
  if (!e) return std::nullopt;
  e->used = true;
  std::string v = e->value;
  std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
  if (v == "true" || v == "yes" || v == "on" || v == "1") return true;
  if (v == "false" || v == "no" || v == "off" || v == "0") return false;
  throw ConfigError(where(*e) + ": cannot parse '" + e->value + "' as a boolean");
}

void KeyValues::check_consumed() const {
  for (const auto& e : entries_) {
    if (!e.used) throw ConfigError(where(e) + " is not a recognized setting");
  }
}

void apply_train_config(KeyValues& kv, TrainConfig& cfg) {
  if (auto v = kv.take_string("variant")) {
    try {
      cfg.variant = parse_variant(*v);
    } catch (const ValueError& e) {
      throw ConfigError(e.what());
    }
  }
  if (auto v = kv.take_int("epochs")) cfg.epochs = static_cast<int>(*v);
  if (auto v = kv.take_int("batch_size")) cfg.batch_size = static_cast<int>(*v);
  if (auto v = kv.take_double("lr_init")) cfg.lr_init = *v;
  if (auto v = kv.take_double("lr_min")) cfg.lr_min = *v;
  if (auto v = kv.take_double("weight_decay")) cfg.weight_decay = *v;
  if (auto v = kv.take_uint("seed")) cfg.seed = *v;
  if (auto v = kv.take_double("alpha")) cfg.loss.alpha = *v;
  if (auto v = kv.take_double("beta")) cfg.loss.beta = *v;
  if (auto v = kv.take_double("dice_epsilon")) cfg.loss.dice_epsilon = *v;
  if (auto v = kv.take_bool("foreground_only")) cfg.loss.foreground_only = *v;
  if (auto v = kv.take_double("grad_clip")) cfg.grad_clip = *v;
  if (auto v = kv.take_bool("augment")) cfg.augment = *v;
  if (auto v = kv.take_string("checkpoint_dir")) cfg.checkpoint_dir = *v;
  if (auto v = kv.take_int("stop_after")) cfg.stop_after = static_cast<int>(*v);
  if (auto v = kv.take_string("dtype")) {
    if (*v == "float32") {
      cfg.dtype = DType::kFloat32;
    } else if (*v == "float64") {
      cfg.dtype = DType::kFloat64;
    } else {
      throw ConfigError("dtype must be float32 or float64, got '" + *v + "'");
    }
  }
}

void apply_synthetic_spec(KeyValues& kv, SyntheticSpec& spec) {
  if (auto v = kv.take_int("count")) spec.count = static_cast<int>(*v);
  if (auto v = kv.take_int("resolution")) spec.resolution = static_cast<int>(*v);
  if (auto v = kv.take_int("class_count")) spec.class_count = static_cast<int>(*v);
  if (auto v = kv.take_double("noise")) spec.noise = *v;
  if (auto v = kv.take_uint("seed")) spec.seed = *v;
  if (auto v = kv.take_int("channels")) spec.channels = static_cast<int>(*v);
}

}  // namespace rwkvunet
