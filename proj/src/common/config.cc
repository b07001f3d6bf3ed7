// Copyright 2026 The cassnat Authors. All Rights Reserved.
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

#include "cassnat/common/config.h"

#include <charconv>
#include <fstream>
#include <sstream>

#include "cassnat/common/error.h"

namespace cassnat {
namespace {

std::string Trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T ParseNumber(const std::string& key, const std::string& text) {
  T v{};
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  CASSNAT_CHECK(ec == std::errc() && ptr == end, ErrorKind::kUsage,
                "config key '" + key + "': cannot parse '" + text + "'");
  return v;
}

}  // namespace

KeyValueConfig KeyValueConfig::Load(const std::string& path) {
  std::ifstream is(path);
  CASSNAT_CHECK(is.good(), ErrorKind::kIo, "cannot open config " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return Parse(ss.str(), path);
}

KeyValueConfig KeyValueConfig::Parse(const std::string& text, const std::string& origin) {
  KeyValueConfig cfg;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = Trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    CASSNAT_CHECK(eq != std::string::npos, ErrorKind::kUsage,
                  origin + ":" + std::to_string(lineno) + ": expected key = value");
    const std::string key = Trim(line.substr(0, eq));
    CASSNAT_CHECK(!key.empty(), ErrorKind::kUsage,
                  origin + ":" + std::to_string(lineno) + ": empty key");
    cfg.values_[key] = Trim(line.substr(eq + 1));
  }
  return cfg;
}

void KeyValueConfig::Merge(const KeyValueConfig& other) {
  for (const auto& [k, v] : other.values_) values_[k] = v;
}

std::string KeyValueConfig::GetString(const std::string& key,
                                      const std::string& fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double KeyValueConfig::GetDouble(const std::string& key, double fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : ParseNumber<double>(key, it->second);
}

std::int64_t KeyValueConfig::GetInt(const std::string& key, std::int64_t fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : ParseNumber<std::int64_t>(key, it->second);
}

std::uint64_t KeyValueConfig::GetUint(const std::string& key,
                                      std::uint64_t fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : ParseNumber<std::uint64_t>(key, it->second);
}

bool KeyValueConfig::GetBool(const std::string& key, bool fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  if (it->second == "true" || it->second == "1") return true;
  if (it->second == "false" || it->second == "0") return false;
  Fail(ErrorKind::kUsage, "config key '" + key + "': expected true/false, got '" +
                              it->second + "'");
}

std::string KeyValueConfig::Serialize() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
  return out;
}

void KeyValueConfig::Save(const std::string& path) const {
  std::ofstream os(path, std::ios::trunc);
  CASSNAT_CHECK(os.good(), ErrorKind::kIo, "cannot write config " + path);
  os << Serialize();
}

std::string FormatDouble(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace cassnat
