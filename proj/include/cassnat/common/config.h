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

#ifndef CASSNAT_COMMON_CONFIG_H_
#define CASSNAT_COMMON_CONFIG_H_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace cassnat {

// Flat key=value configuration. Lines are "key = value"; '#' starts a
// comment; blank lines are ignored. Later assignments win, so applying a
// file and then command-line overrides gives flag precedence.
class KeyValueConfig {
 public:
  static KeyValueConfig Load(const std::string& path);
  static KeyValueConfig Parse(const std::string& text, const std::string& origin = "<text>");

  void Set(const std::string& key, const std::string& value) { values_[key] = value; }
  void Merge(const KeyValueConfig& other);
  bool Has(const std::string& key) const { return values_.count(key) != 0; }

  std::string GetString(const std::string& key, const std::string& fallback) const;
  double GetDouble(const std::string& key, double fallback) const;
  std::int64_t GetInt(const std::string& key, std::int64_t fallback) const;
  std::uint64_t GetUint(const std::string& key, std::uint64_t fallback) const;
  bool GetBool(const std::string& key, bool fallback) const;

  // Keys in sorted order, one "key = value" per line.
  std::string Serialize() const;
  void Save(const std::string& path) const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

// Shortest round-trip text for a double.
std::string FormatDouble(double v);

}  // namespace cassnat

#endif  // CASSNAT_COMMON_CONFIG_H_
