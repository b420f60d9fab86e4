// Copyright 2026 The Deletion Lab Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#ifndef DELETION_LAB_CONFIG_H_
#define DELETION_LAB_CONFIG_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace deletion_lab {

// Flattened key/value tree. Keys are dot paths ("plan.alpha").
//
// File format:
//   # comment
//   seed = 7
//   [plan]
//   alpha = 0.8        -> plan.alpha
class ConfigTree {
 public:
  static ConfigTree Parse(std::string_view text, std::string_view source = "<config>");
  static ConfigTree Load(const std::filesystem::path& path);

  // "a.b=value"
  void ApplyOverride(std::string_view assignment);
  void Set(const std::string& key, const std::string& value);

  bool Has(const std::string& key) const { return values_.count(key) > 0; }
  const std::map<std::string, std::string>& values() const { return values_; }

  // FNV-1a over the sorted key=value lines; independent of insertion order.
  uint64_t Hash() const;
  nlohmann::json ToJson() const;

 private:
  std::map<std::string, std::string> values_;
};

std::string HashHex(uint64_t h);

// Typed access with unknown-key detection. Every key read (or declared via
// Allow) is marked; Finish() rejects anything left over.
class ConfigReader {
 public:
  explicit ConfigReader(const ConfigTree& tree) : tree_(tree) {}

  std::string String(const std::string& key, const std::string& def);
  double Double(const std::string& key, double def);
  int Int(const std::string& key, int def);
  uint64_t U64(const std::string& key, uint64_t def);
  bool Bool(const std::string& key, bool def);
  std::vector<double> Doubles(const std::string& key, const std::vector<double>& def);
  std::vector<std::string> Strings(const std::string& key,
                                   const std::vector<std::string>& def);
  // "1..5", "1,3,9" or a single value.
  std::vector<uint64_t> Seeds(const std::string& key, const std::vector<uint64_t>& def);
  // All keys under "prefix." as numbers, prefix stripped.
  std::map<std::string, double> Section(const std::string& prefix);

  bool Has(const std::string& key) const { return tree_.Has(key); }
  void Finish() const;

 private:
  const std::string* Raw(const std::string& key);

  const ConfigTree& tree_;
  std::set<std::string> used_;
};

struct RunManifest {
  std::string kind;
  std::string tool_version;
  int schema_version = 1;
  std::string config_hash;
  nlohmann::json config;
  std::vector<uint64_t> seeds;
  std::map<std::string, std::string> artifacts;
  double seconds = 0.0;
  int threads = 1;
  std::string status = "ok";
};

nlohmann::json ToJson(const RunManifest& m);

// Write to a sibling temp file, then rename over the target.
void WriteFileAtomic(const std::filesystem::path& path, std::string_view content);

}  // namespace deletion_lab

#endif  // DELETION_LAB_CONFIG_H_
