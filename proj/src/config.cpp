// Copyright 2026 The LyricMood Authors.
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

#include "lyricmood/config.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "csv.hpp"
#include "lyricmood/error.hpp"

namespace lyricmood {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

KeyValues KeyValues::parse(std::istream& in) {
  KeyValues kv;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    auto body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) throw ParseError(n, "expected key=value");
    std::string key(trim(body.substr(0, eq)));
    std::string value(trim(body.substr(eq + 1)));
    if (key.empty()) throw ParseError(n, "empty key");
    if (kv.values_.count(key)) throw ValidationError(n, "duplicate key '" + key + "'");
    kv.values_[key] = std::move(value);
    kv.lines_[key] = n;
  }
  return kv;
}

KeyValues KeyValues::parse_string(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse(in);
}

KeyValues KeyValues::read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config '" + path + "'");
  return parse(in);
}

void KeyValues::write(std::ostream& out) const {
  for (const auto& [k, v] : values_) out << k << " = " << v << '\n';
}

std::string KeyValues::to_string() const {
  std::ostringstream out;
  write(out);
  return out.str();
}

void KeyValues::merge(const KeyValues& other) {
  for (const auto& [k, v] : other.values_) values_[k] = v;
}

void KeyValues::require_known(std::initializer_list<std::string_view> allowed) const {
  require_known(std::vector<std::string>(allowed.begin(), allowed.end()));
}

void KeyValues::require_known(const std::vector<std::string>& allowed) const {
  for (const auto& [k, v] : values_) {
    if (std::find(allowed.begin(), allowed.end(), k) == allowed.end()) {
      auto it = lines_.find(k);
      const std::size_t line = it == lines_.end() ? 0 : it->second;
      throw ValidationError(line, "unknown config key '" + k + "'");
    }
  }
}

std::optional<std::string> KeyValues::find(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

std::string KeyValues::get(const std::string& key, const std::string& fallback) const {
  return find(key).value_or(fallback);
}

double KeyValues::get_double(const std::string& key, double fallback) const {
  auto v = find(key);
  if (!v) return fallback;
  double out = 0.0;
  if (!detail::parse_double(*v, out)) {
    throw ValidationError("config key '" + key + "': '" + *v + "' is not a number");
  }
  return out;
}

std::int64_t KeyValues::get_int(const std::string& key, std::int64_t fallback) const {
  auto v = find(key);
  if (!v) return fallback;
  std::int64_t out = 0;
  if (!detail::parse_int64(*v, out)) {
    throw ValidationError("config key '" + key + "': '" + *v + "' is not an integer");
  }
  return out;
}

bool KeyValues::get_bool(const std::string& key, bool fallback) const {
  auto v = find(key);
  if (!v) return fallback;
  if (*v == "1" || *v == "true" || *v == "yes") return true;
  if (*v == "0" || *v == "false" || *v == "no") return false;
  throw ValidationError("config key '" + key + "': '" + *v + "' is not a boolean");
}

std::vector<std::size_t> parse_size_list(std::string_view text) {
  std::vector<std::size_t> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto comma = text.find(',', pos);
    if (comma == std::string_view::npos) comma = text.size();
    auto item = trim(text.substr(pos, comma - pos));
    std::int64_t v = 0;
    if (!detail::parse_int64(item, v)) {
      throw ValidationError("'" + std::string(text) + "' is not a list of integers");
    }
    if (v <= 0) throw ValidationError("list entries must be positive in '" + std::string(text) + "'");
    out.push_back(static_cast<std::size_t>(v));
    pos = comma + 1;
  }
  return out;
}

std::string join_size_list(const std::vector<std::size_t>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(values[i]);
  }
  return out;
}

}  // namespace lyricmood
