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

// Minimal RFC-4180 reader/writer shared by the dataset and sidecar parsers.

#pragma once

#include <charconv>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "lyricmood/error.hpp"

namespace lyricmood::detail {

struct CsvRecord {
  std::vector<std::string> fields;
  std::size_t line = 0;  // line where the record starts, 1-based
};

class CsvReader {
 public:
  explicit CsvReader(std::istream& in) : in_(in) {}

  // Reads the next record. Quoted fields may span lines. Returns false at
  // end of input.
  bool next(CsvRecord& rec) {
    rec.fields.clear();
    std::string line;
    // Skip blank lines between records.
    while (true) {
      if (!std::getline(in_, line)) return false;
      ++line_no_;
      strip_cr(line);
      if (!line.empty()) break;
    }
    rec.line = line_no_;
    std::string field;
    bool in_quotes = false;
    bool was_quoted = false;
    std::size_t i = 0;
    while (true) {
      if (i >= line.size()) {
        if (in_quotes) {
          std::string more;
          if (!std::getline(in_, more)) {
            throw ParseError(rec.line, "unterminated quoted field");
          }
          ++line_no_;
          strip_cr(more);
          field += '\n';
          line = std::move(more);
          i = 0;
          continue;
        }
        rec.fields.push_back(std::move(field));
        return true;
      }
      char c = line[i];
      if (in_quotes) {
        if (c == '"') {
          if (i + 1 < line.size() && line[i + 1] == '"') {
            field += '"';
            i += 2;
            continue;
          }
          in_quotes = false;
          ++i;
          continue;
        }
        field += c;
        ++i;
        continue;
      }
      if (c == ',') {
        rec.fields.push_back(std::move(field));
        field.clear();
        was_quoted = false;
        ++i;
        continue;
      }
      if (c == '"') {
        if (!field.empty() || was_quoted) {
          throw ParseError(rec.line, "stray quote inside unquoted field");
        }
        in_quotes = true;
        was_quoted = true;
        ++i;
        continue;
      }
      if (was_quoted) {
        throw ParseError(rec.line, "text after closing quote");
      }
      field += c;
      ++i;
    }
  }

 private:
  static void strip_cr(std::string& s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
  }

  std::istream& in_;
  std::size_t line_no_ = 0;
};

inline void write_csv_field(std::ostream& out, std::string_view s) {
  bool needs_quotes = s.find_first_of(",\"\n\r") != std::string_view::npos ||
                      (!s.empty() && (s.front() == ' ' || s.back() == ' '));
  if (!needs_quotes) {
    out << s;
    return;
  }
  out << '"';
  for (char c : s) {
    if (c == '"') out << '"';
    out << c;
  }
  out << '"';
}

// Shortest representation that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline bool parse_double(std::string_view s, double& out) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

inline bool parse_int64(std::string_view s, std::int64_t& out) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  if (s.empty()) return false;
  auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

}  // namespace lyricmood::detail
