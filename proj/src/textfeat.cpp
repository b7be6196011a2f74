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

#include "lyricmood/textfeat.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

#include "csv.hpp"
#include "lyricmood/error.hpp"
#include "lyricmood/random.hpp"

namespace lyricmood::textfeat {

namespace {

// Splits UTF-8 into code points, keeping each as its byte sequence.
std::vector<std::string_view> code_points(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    auto c = static_cast<unsigned char>(s[i]);
    std::size_t len = 1;
    if (c >= 0xF0) len = 4;
    else if (c >= 0xE0) len = 3;
    else if (c >= 0xC0) len = 2;
    len = std::min(len, s.size() - i);
    out.push_back(s.substr(i, len));
    i += len;
  }
  return out;
}

std::vector<double> read_values(std::istringstream& ss, std::size_t line) {
  std::vector<double> values;
  std::string tok;
  while (ss >> tok) {
    double v;
    if (!detail::parse_double(tok, v)) {
      throw ParseError(line, "not a number: '" + tok + "'");
    }
    values.push_back(v);
  }
  return values;
}

void write_values(std::ostream& out, std::span<const double> values) {
  for (double v : values) out << ' ' << detail::format_double(v);
}

bool next_content_line(std::istream& in, std::string& line, std::size_t& line_no) {
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") != std::string::npos) return true;
  }
  return false;
}

}  // namespace

std::vector<std::string> normalize(std::string_view text) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* nfkc = icu::Normalizer2::getNFKCInstance(status);
  if (U_FAILURE(status)) throw Error("ICU NFKC normalizer unavailable");
  icu::UnicodeString src = icu::UnicodeString::fromUTF8(
      icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
  icu::UnicodeString norm = nfkc->normalize(src, status);
  if (U_FAILURE(status)) throw Error("ICU normalization failed");
  norm.toLower(icu::Locale::getRoot());

  std::vector<std::string> tokens;
  icu::UnicodeString current;
  auto flush = [&] {
    if (current.isEmpty()) return;
    std::string utf8;
    current.toUTF8String(utf8);
    tokens.push_back(std::move(utf8));
    current.remove();
  };
  for (int32_t i = 0; i < norm.length();) {
    UChar32 c = norm.char32At(i);
    i += U16_LENGTH(c);
    if (u_ispunct(c) || u_isUWhiteSpace(c) || u_iscntrl(c)) {
      flush();
    } else {
      current.append(c);
    }
  }
  flush();
  return tokens;
}

std::vector<std::string> subwords(std::string_view token, int n_min, int n_max) {
  if (token.empty()) throw ValidationError("subwords: empty token");
  if (n_min < 1 || n_max < n_min) {
    throw ValidationError("subwords: invalid n-gram range");
  }
  std::vector<std::string> out;
  out.emplace_back(token);
  std::string wrapped = "<" + std::string(token) + ">";
  auto cps = code_points(wrapped);
  const auto len = static_cast<int>(cps.size());
  for (int n = n_min; n <= n_max; ++n) {
    for (int start = 0; start + n <= len; ++start) {
      std::string gram;
      for (int k = start; k < start + n; ++k) gram += cps[static_cast<std::size_t>(k)];
      out.push_back(std::move(gram));
    }
  }
  return out;
}

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

EmbeddingTable::EmbeddingTable(std::size_t dim, std::size_t buckets,
                               std::vector<std::string> vocab, int n_min, int n_max)
    : dim_(dim), buckets_(buckets), n_min_(n_min), n_max_(n_max), vocab_(std::move(vocab)) {
  if (dim_ == 0) throw ValidationError("embedding dimension must be positive");
  if (buckets_ == 0) throw ValidationError("bucket count must be positive");
  for (std::size_t i = 0; i < vocab_.size(); ++i) {
    if (!index_.emplace(vocab_[i], i).second) {
      throw ValidationError("duplicate vocabulary token '" + vocab_[i] + "'");
    }
  }
  values_.assign(rows() * dim_, 0.0);
}

EmbeddingTable EmbeddingTable::random(std::size_t dim, std::size_t buckets,
                                      std::vector<std::string> vocab, std::uint64_t seed,
                                      double scale, int n_min, int n_max) {
  EmbeddingTable t(dim, buckets, std::move(vocab), n_min, n_max);
  Rng rng(seed);
  for (double& v : t.values_) v = rng.uniform(-scale, scale);
  return t;
}

std::optional<std::size_t> EmbeddingTable::word_row(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::size_t> EmbeddingTable::unit_rows(std::string_view token) const {
  auto units = subwords(token, n_min_, n_max_);
  std::vector<std::size_t> rows_out;
  rows_out.reserve(units.size());
  if (auto w = word_row(token)) {
    rows_out.push_back(*w);
  } else {
    rows_out.push_back(vocab_.size() + hash_bucket(units[0], buckets_));
  }
  for (std::size_t i = 1; i < units.size(); ++i) {
    rows_out.push_back(vocab_.size() + hash_bucket(units[i], buckets_));
  }
  return rows_out;
}

bool operator==(const EmbeddingTable& a, const EmbeddingTable& b) {
  return a.dim_ == b.dim_ && a.buckets_ == b.buckets_ && a.n_min_ == b.n_min_ &&
         a.n_max_ == b.n_max_ && a.vocab_ == b.vocab_ && a.values_ == b.values_;
}

TextFeature embed_text(std::string_view text, const EmbeddingTable& table) {
  TextFeature f;
  f.vector.assign(table.dim(), 0.0);
  for (const auto& tok : normalize(text)) {
    for (std::size_t r : table.unit_rows(tok)) {
      auto v = table.row(r);
      for (std::size_t k = 0; k < v.size(); ++k) f.vector[k] += v[k];
      ++f.subword_count;
    }
  }
  if (f.subword_count > 0) {
    const double inv = 1.0 / static_cast<double>(f.subword_count);
    for (double& v : f.vector) v *= inv;
  }
  return f;
}

EmbeddingTable load_embeddings(std::istream& in, std::size_t default_buckets) {
  std::string line;
  std::size_t line_no = 0;
  if (!next_content_line(in, line, line_no)) {
    throw ParseError(1, "missing '<count> <dim>' header");
  }
  std::size_t count = 0, dim = 0;
  {
    std::istringstream ss(line);
    std::string extra;
    if (!(ss >> count >> dim) || (ss >> extra) || dim == 0) {
      throw ParseError(line_no, "malformed '<count> <dim>' header");
    }
  }
  std::vector<std::string> vocab;
  std::vector<std::vector<double>> word_vectors;
  vocab.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    if (!next_content_line(in, line, line_no)) {
      throw ParseError(line_no + 1, "expected " + std::to_string(count) +
                                        " vectors, file ends after " + std::to_string(i));
    }
    std::istringstream ss(line);
    std::string token;
    ss >> token;
    auto values = read_values(ss, line_no);
    if (values.size() != dim) {
      throw ValidationError(line_no, "expected " + std::to_string(dim) + " values, got " +
                                         std::to_string(values.size()));
    }
    vocab.push_back(std::move(token));
    word_vectors.push_back(std::move(values));
  }

  std::size_t buckets = default_buckets;
  int n_min = kDefaultMinN, n_max = kDefaultMaxN;
  std::vector<std::pair<std::size_t, std::vector<double>>> bucket_vectors;
  if (next_content_line(in, line, line_no)) {
    std::istringstream ss(line);
    std::string tag;
    ss >> tag;
    if (tag != "#buckets" || !(ss >> buckets >> n_min >> n_max) || buckets == 0) {
      throw ParseError(line_no, "expected '#buckets <B> <n_min> <n_max>'");
    }
    while (next_content_line(in, line, line_no)) {
      std::istringstream bs(line);
      std::size_t index;
      if (!(bs >> index) || index >= buckets) {
        throw ParseError(line_no, "bad bucket index");
      }
      auto values = read_values(bs, line_no);
      if (values.size() != dim) {
        throw ValidationError(line_no, "expected " + std::to_string(dim) + " values, got " +
                                           std::to_string(values.size()));
      }
      bucket_vectors.emplace_back(index, std::move(values));
    }
  }

  EmbeddingTable table(dim, buckets, std::move(vocab), n_min, n_max);
  for (std::size_t i = 0; i < word_vectors.size(); ++i) {
    std::copy(word_vectors[i].begin(), word_vectors[i].end(), table.row(i).begin());
  }
  for (auto& [index, values] : bucket_vectors) {
    std::copy(values.begin(), values.end(), table.row(table.vocab_size() + index).begin());
  }
  return table;
}

void save_embeddings(std::ostream& out, const EmbeddingTable& table) {
  out << table.vocab_size() << ' ' << table.dim() << '\n';
  for (std::size_t i = 0; i < table.vocab_size(); ++i) {
    out << table.vocab()[i];
    write_values(out, table.row(i));
    out << '\n';
  }
  out << "#buckets " << table.bucket_count() << ' ' << table.min_n() << ' '
      << table.max_n() << '\n';
  for (std::size_t b = 0; b < table.bucket_count(); ++b) {
    auto r = table.row(table.vocab_size() + b);
    if (std::all_of(r.begin(), r.end(), [](double v) { return v == 0.0 && !std::signbit(v); })) {
      continue;
    }
    out << b;
    write_values(out, r);
    out << '\n';
  }
}

ContextualEmbeddingFile load_contextual(std::istream& in) {
  ContextualEmbeddingFile file;
  std::string line;
  std::size_t line_no = 0;
  while (next_content_line(in, line, line_no)) {
    std::istringstream ss(line);
    std::int64_t id;
    std::size_t dim;
    if (!(ss >> id >> dim) || dim == 0) {
      throw ParseError(line_no, "expected '<id> <dim> values...'");
    }
    auto values = read_values(ss, line_no);
    if (values.size() != dim) {
      throw ValidationError(line_no, "declared dim " + std::to_string(dim) + " but got " +
                                         std::to_string(values.size()) + " values");
    }
    if (file.dim == 0) {
      file.dim = dim;
    } else if (dim != file.dim) {
      throw ValidationError(line_no, "dimension " + std::to_string(dim) +
                                         " differs from file dimension " +
                                         std::to_string(file.dim));
    }
    if (!file.vectors.emplace(id, std::move(values)).second) {
      throw ValidationError(line_no, "duplicate id " + std::to_string(id));
    }
  }
  return file;
}

void save_contextual(std::ostream& out, const ContextualEmbeddingFile& file) {
  for (const auto& [id, v] : file.vectors) {
    out << id << ' ' << v.size();
    write_values(out, v);
    out << '\n';
  }
}

ContextualSequenceFile load_contextual_sequences(std::istream& in) {
  ContextualSequenceFile file;
  std::string line;
  std::size_t line_no = 0;
  while (next_content_line(in, line, line_no)) {
    std::istringstream ss(line);
    std::int64_t id;
    std::size_t t, dim;
    if (!(ss >> id >> t >> dim) || dim == 0) {
      throw ParseError(line_no, "expected '<id> <t> <dim> values...'");
    }
    auto values = read_values(ss, line_no);
    if (values.size() != dim) {
      throw ValidationError(line_no, "declared dim " + std::to_string(dim) + " but got " +
                                         std::to_string(values.size()) + " values");
    }
    if (file.dim == 0) {
      file.dim = dim;
    } else if (dim != file.dim) {
      throw ValidationError(line_no, "dimension " + std::to_string(dim) +
                                         " differs from file dimension " +
                                         std::to_string(file.dim));
    }
    auto& seq = file.sequences[id];
    if (t != seq.size()) {
      throw ValidationError(line_no, "token index " + std::to_string(t) + " for id " +
                                         std::to_string(id) + " out of order");
    }
    seq.push_back(std::move(values));
  }
  return file;
}

void save_contextual_sequences(std::ostream& out, const ContextualSequenceFile& file) {
  for (const auto& [id, seq] : file.sequences) {
    for (std::size_t t = 0; t < seq.size(); ++t) {
      out << id << ' ' << t << ' ' << seq[t].size();
      write_values(out, seq[t]);
      out << '\n';
    }
  }
}

}  // namespace lyricmood::textfeat
