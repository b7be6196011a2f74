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

// Lyric text normalization and subword-averaged embeddings.
//
// A lyric is mapped to the mean of the vectors of every subword unit of every
// token, where a token contributes its whole-word vector plus one hashed
// bucket per character n-gram of `<token>`.

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace lyricmood::textfeat {

inline constexpr std::size_t kDefaultDim = 300;
inline constexpr std::size_t kDefaultBuckets = 2'000'000;
inline constexpr int kDefaultMinN = 3;
inline constexpr int kDefaultMaxN = 6;

// NFKC, lowercase, punctuation to spaces, split on whitespace.
std::vector<std::string> normalize(std::string_view text);

// Whole token first, then every n-gram of `<token>` ordered by n and then by
// position. n-grams are taken over code points, not bytes. Throws
// ValidationError for an empty token or an invalid range.
std::vector<std::string> subwords(std::string_view token, int n_min = kDefaultMinN,
                                  int n_max = kDefaultMaxN);

// FNV-1a, 64 bit, over the UTF-8 bytes.
std::uint64_t fnv1a64(std::string_view s);

inline std::size_t hash_bucket(std::string_view subword, std::size_t buckets) {
  return static_cast<std::size_t>(fnv1a64(subword) % buckets);
}

// Word vectors for a fixed vocabulary followed by `buckets` hashed n-gram
// vectors, stored row-major as (|vocab| + buckets) x dim.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  EmbeddingTable(std::size_t dim, std::size_t buckets, std::vector<std::string> vocab,
                 int n_min = kDefaultMinN, int n_max = kDefaultMaxN);

  // Uniform(-scale, scale) initialization, deterministic under seed.
  static EmbeddingTable random(std::size_t dim, std::size_t buckets,
                               std::vector<std::string> vocab, std::uint64_t seed,
                               double scale, int n_min = kDefaultMinN,
                               int n_max = kDefaultMaxN);

  std::size_t dim() const { return dim_; }
  std::size_t bucket_count() const { return buckets_; }
  std::size_t vocab_size() const { return vocab_.size(); }
  std::size_t rows() const { return vocab_.size() + buckets_; }
  int min_n() const { return n_min_; }
  int max_n() const { return n_max_; }
  const std::vector<std::string>& vocab() const { return vocab_; }

  std::optional<std::size_t> word_row(std::string_view token) const;

  // Rows of every subword unit of one token: the vocabulary row for an
  // in-vocabulary token (a hashed bucket otherwise), then one bucket row per
  // n-gram. Never empty for a non-empty token.
  std::vector<std::size_t> unit_rows(std::string_view token) const;

  std::span<const double> row(std::size_t r) const {
    return {values_.data() + r * dim_, dim_};
  }
  std::span<double> row(std::size_t r) { return {values_.data() + r * dim_, dim_}; }

  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }

  friend bool operator==(const EmbeddingTable& a, const EmbeddingTable& b);

 private:
  std::size_t dim_ = 0;
  std::size_t buckets_ = 0;
  int n_min_ = kDefaultMinN;
  int n_max_ = kDefaultMaxN;
  std::vector<std::string> vocab_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<double> values_;
};

struct TextFeature {
  std::vector<double> vector;
  std::size_t subword_count = 0;  // 0 flags empty text; vector is zero then

  bool empty() const { return subword_count == 0; }
};

TextFeature embed_text(std::string_view text, const EmbeddingTable& table);

// Text-vec format:
//   <count> <dim>
//   <token> v1 ... v_dim                       (count lines)
//   #buckets <B> <n_min> <n_max>               (optional section)
//   <bucket index> v1 ... v_dim                (non-zero buckets only)
// Without a bucket section the table gets `default_buckets` zero buckets.
// Values are written in shortest round-trip form, so save/load is exact.
EmbeddingTable load_embeddings(std::istream& in,
                               std::size_t default_buckets = kDefaultBuckets);
void save_embeddings(std::ostream& out, const EmbeddingTable& table);

// One fixed vector per dataset row id (mean-pooled sentence embeddings).
struct ContextualEmbeddingFile {
  std::size_t dim = 0;
  std::map<std::int64_t, std::vector<double>> vectors;
};

// Records `id dim v1 ... v_dim`, one per line. Duplicate ids and mixed
// dimensions are rejected with the offending line number.
ContextualEmbeddingFile load_contextual(std::istream& in);
void save_contextual(std::ostream& out, const ContextualEmbeddingFile& file);

// Per-token contextual sequences for recurrent heads.
struct ContextualSequenceFile {
  std::size_t dim = 0;
  std::map<std::int64_t, std::vector<std::vector<double>>> sequences;
};

// Records `id t dim v1 ... v_dim`; t counts 0, 1, 2, ... within an id.
ContextualSequenceFile load_contextual_sequences(std::istream& in);
void save_contextual_sequences(std::ostream& out, const ContextualSequenceFile& file);

}  // namespace lyricmood::textfeat
