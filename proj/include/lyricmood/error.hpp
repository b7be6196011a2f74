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

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lyricmood {

// Base for every error the library throws. The CLI maps the concrete type to
// its exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input that could not be decoded at all (bad CSV quoting, a
// timestamp that does not parse, a truncated WAV header).
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& reason)
      : Error("line " + std::to_string(line) + ": " + reason), line_(line) {}
  explicit ParseError(const std::string& reason) : Error(reason), line_(0) {}

  // 1-based line number, or 0 when the error is not tied to a line.
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Input decoded fine but violates a domain invariant (end <= start,
// overlapping rows, unknown label, mismatched dimensions in a data file).
class ValidationError : public Error {
 public:
  ValidationError(std::size_t line, const std::string& reason)
      : Error("line " + std::to_string(line) + ": " + reason), line_(line) {}
  explicit ValidationError(const std::string& reason)
      : Error(reason), line_(0) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Programming-contract violations on tensors and models: shape mismatch,
// backward on a non-scalar.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Numerical failure at run time (NaN loss, divergence).
class NumericError : public Error {
 public:
  using Error::Error;
};

class UnsupportedFormat : public Error {
 public:
  using Error::Error;
};

}  // namespace lyricmood
