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
#include "deletion_lab/config.h"

#include <cctype>
#include <charconv>
#include <climits>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <system_error>

#include "deletion_lab/error.h"

namespace deletion_lab {
namespace {

std::string Trim(std::string_view s) {
  size_t b = 0;
  size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

bool ValidKey(std::string_view k) {
  if (k.empty() || k.front() == '.' || k.back() == '.') return false;
  for (size_t i = 0; i < k.size(); ++i) {
    const char c = k[i];
    if (c == '.' && i > 0 && k[i - 1] == '.') return false;
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.')) {
      return false;
    }
  }
  return true;
}

[[noreturn]] void Fail(const std::string& msg) { throw Error(ErrorCode::kConfigError, msg); }

double ParseDouble(const std::string& key, const std::string& v) {
  double out = 0.0;
  const char* b = v.data();
  const char* e = v.data() + v.size();
  auto [p, ec] = std::from_chars(b, e, out);
  if (ec != std::errc() || p != e) Fail("field '" + key + "': expected a number, got '" + v + "'");
  return out;
}

int64_t ParseInt(const std::string& key, const std::string& v) {
  int64_t out = 0;
  const char* b = v.data();
  const char* e = v.data() + v.size();
  auto [p, ec] = std::from_chars(b, e, out);
  if (ec != std::errc() || p != e) Fail("field '" + key + "': expected an integer, got '" + v + "'");
  return out;
}

std::vector<std::string> SplitList(const std::string& v) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(v);
  while (std::getline(in, cur, ',')) {
    std::string t = Trim(cur);
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

}  // namespace

ConfigTree ConfigTree::Parse(std::string_view text, std::string_view source) {
  ConfigTree tree;
  std::string section;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  auto where = [&] { return std::string(source) + ":" + std::to_string(lineno) + ": "; };
  while (std::getline(in, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::string t = Trim(line);
    if (t.empty()) continue;
    if (t.front() == '[') {
      if (t.back() != ']') Fail(where() + "unterminated section header");
      section = Trim(std::string_view(t).substr(1, t.size() - 2));
      if (!section.empty() && !ValidKey(section)) Fail(where() + "bad section name '" + section + "'");
      continue;
    }
    const size_t eq = t.find('=');
    if (eq == std::string::npos) Fail(where() + "expected key = value");
    std::string key = Trim(std::string_view(t).substr(0, eq));
    std::string value = Trim(std::string_view(t).substr(eq + 1));
    if (!ValidKey(key)) Fail(where() + "bad key '" + key + "'");
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = value.substr(1, value.size() - 2);
    }
    const std::string full = section.empty() ? key : section + "." + key;
    if (tree.values_.count(full)) Fail(where() + "duplicate key '" + full + "'");
    tree.values_[full] = value;
  }
  return tree;
}

ConfigTree ConfigTree::Load(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) Fail("cannot open config file " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return Parse(ss.str(), path.string());
}

void ConfigTree::ApplyOverride(std::string_view assignment) {
  const size_t eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    Fail("override '" + std::string(assignment) + "': expected key=value");
  }
  std::string key = Trim(assignment.substr(0, eq));
  if (!ValidKey(key)) Fail("override: bad key '" + key + "'");
  values_[key] = Trim(assignment.substr(eq + 1));
}

void ConfigTree::Set(const std::string& key, const std::string& value) {
  if (!ValidKey(key)) Fail("bad key '" + key + "'");
  values_[key] = value;
}

uint64_t ConfigTree::Hash() const {
  uint64_t h = 14695981039346656037ull;
  auto feed = [&h](std::string_view s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ull;
    }
  };
  for (const auto& [k, v] : values_) {
    feed(k);
    feed("=");
    feed(v);
    feed("\n");
  }
  return h;
}

nlohmann::json ConfigTree::ToJson() const {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [k, v] : values_) j[k] = v;
  return j;
}

std::string HashHex(uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

const std::string* ConfigReader::Raw(const std::string& key) {
  used_.insert(key);
  auto it = tree_.values().find(key);
  return it == tree_.values().end() ? nullptr : &it->second;
}

std::string ConfigReader::String(const std::string& key, const std::string& def) {
  const std::string* v = Raw(key);
  return v ? *v : def;
}

double ConfigReader::Double(const std::string& key, double def) {
  const std::string* v = Raw(key);
  return v ? ParseDouble(key, *v) : def;
}

int ConfigReader::Int(const std::string& key, int def) {
  const std::string* v = Raw(key);
  if (!v) return def;
  const int64_t x = ParseInt(key, *v);
  if (x < INT32_MIN || x > INT32_MAX) Fail("field '" + key + "': out of range");
  return static_cast<int>(x);
}

uint64_t ConfigReader::U64(const std::string& key, uint64_t def) {
  const std::string* v = Raw(key);
  if (!v) return def;
  const int64_t x = ParseInt(key, *v);
  if (x < 0) Fail("field '" + key + "': must be non-negative");
  return static_cast<uint64_t>(x);
}

bool ConfigReader::Bool(const std::string& key, bool def) {
  const std::string* v = Raw(key);
  if (!v) return def;
  if (*v == "true" || *v == "1" || *v == "yes") return true;
  if (*v == "false" || *v == "0" || *v == "no") return false;
  Fail("field '" + key + "': expected true/false, got '" + *v + "'");
}

std::vector<double> ConfigReader::Doubles(const std::string& key,
                                          const std::vector<double>& def) {
  const std::string* v = Raw(key);
  if (!v) return def;
  std::vector<double> out;
  for (const auto& s : SplitList(*v)) out.push_back(ParseDouble(key, s));
  if (out.empty()) Fail("field '" + key + "': empty list");
  return out;
}

std::vector<std::string> ConfigReader::Strings(const std::string& key,
                                               const std::vector<std::string>& def) {
  const std::string* v = Raw(key);
  if (!v) return def;
  auto out = SplitList(*v);
  if (out.empty()) Fail("field '" + key + "': empty list");
  return out;
}

std::vector<uint64_t> ConfigReader::Seeds(const std::string& key,
                                          const std::vector<uint64_t>& def) {
  const std::string* v = Raw(key);
  if (!v) return def;
  std::vector<uint64_t> out;
  for (const auto& part : SplitList(*v)) {
    const size_t dots = part.find("..");
    if (dots != std::string::npos) {
      const int64_t lo = ParseInt(key, Trim(part.substr(0, dots)));
      const int64_t hi = ParseInt(key, Trim(part.substr(dots + 2)));
      if (lo < 0 || hi < lo) Fail("field '" + key + "': bad range '" + part + "'");
      if (hi - lo > 1000000) Fail("field '" + key + "': range too large");
      for (int64_t s = lo; s <= hi; ++s) out.push_back(static_cast<uint64_t>(s));
    } else {
      const int64_t s = ParseInt(key, part);
      if (s < 0) Fail("field '" + key + "': seeds must be non-negative");
      out.push_back(static_cast<uint64_t>(s));
    }
  }
  if (out.empty()) Fail("field '" + key + "': no seeds");
  return out;
}

std::map<std::string, double> ConfigReader::Section(const std::string& prefix) {
  std::map<std::string, double> out;
  const std::string p = prefix + ".";
  for (const auto& [k, v] : tree_.values()) {
    if (k.rfind(p, 0) == 0) {
      used_.insert(k);
      out[k.substr(p.size())] = ParseDouble(k, v);
    }
  }
  return out;
}

void ConfigReader::Finish() const {
  std::string unknown;
  for (const auto& [k, v] : tree_.values()) {
    if (!used_.count(k)) unknown += (unknown.empty() ? "" : ", ") + k;
  }
  if (!unknown.empty()) Fail("unknown field(s): " + unknown);
}

nlohmann::json ToJson(const RunManifest& m) {
  nlohmann::json j;
  j["kind"] = m.kind;
  j["tool_version"] = m.tool_version;
  j["schema_version"] = m.schema_version;
  j["config_hash"] = m.config_hash;
  j["config"] = m.config;
  j["seeds"] = m.seeds;
  j["artifacts"] = m.artifacts;
  j["seconds"] = m.seconds;
  j["threads"] = m.threads;
  j["status"] = m.status;
  return j;
}

void WriteFileAtomic(const std::filesystem::path& path, std::string_view content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw Error(ErrorCode::kIoError, "cannot write " + tmp.string());
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!f) throw Error(ErrorCode::kIoError, "write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::kIoError, "rename to " + path.string() + ": " + ec.message());
}

}  // namespace deletion_lab
