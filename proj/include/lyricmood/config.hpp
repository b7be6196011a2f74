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

// Flat key=value configuration files.

#pragma once

#include <cstdint>
#include <initializer_list>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace lyricmood {

// Ordered key=value store. Lines are `key = value`; blank lines and lines
// starting with '#' are ignored. Keys are unique.
class KeyValues {
 public:
  static KeyValues parse(std::istream& in);
  static KeyValues parse_string(std::string_view text);
  static KeyValues read_file(const std::string& path);

  void write(std::ostream& out) const;
  std::string to_string() const;

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
  void merge(const KeyValues& other);  // other wins
  const std::map<std::string, std::string>& entries() const { return values_; }

  // Throws ValidationError naming the first key not in `allowed`.
  void require_known(std::initializer_list<std::string_view> allowed) const;
  void require_known(const std::vector<std::string>& allowed) const;

  std::string get(const std::string& key, const std::string& fallback) const;
  std::optional<std::string> find(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  friend bool operator==(const KeyValues& a, const KeyValues& b) { return a.values_ == b.values_; }

 private:
  std::map<std::string, std::string> values_;
  std::map<std::string, std::size_t> lines_;
};

// Comma separated unsigned integers, e.g. "32,64,64".
std::vector<std::size_t> parse_size_list(std::string_view text);
std::string join_size_list(const std::vector<std::size_t>& values);

}  // namespace lyricmood
