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

// Naive reference implementations that the library is checked against.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "lyricmood/textfeat.hpp"

namespace lyricmood::testing {

struct NaiveStats {
  double min, max, mean, std, perc_70, perc_90;
};

inline double naive_percentile(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  const double rank = p / 100.0 * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const auto hi = static_cast<std::size_t>(std::ceil(rank));
  return v[lo] + (rank - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline NaiveStats naive_stats(const std::vector<double>& v) {
  NaiveStats s{};
  s.min = *std::min_element(v.begin(), v.end());
  s.max = *std::max_element(v.begin(), v.end());
  long double total = 0;
  for (double x : v) total += x;
  s.mean = static_cast<double>(total / v.size());
  long double sq = 0;
  for (double x : v) sq += (x - s.mean) * (x - s.mean);
  s.std = std::sqrt(static_cast<double>(sq / v.size()));
  s.perc_70 = naive_percentile(v, 70);
  s.perc_90 = naive_percentile(v, 90);
  return s;
}

struct NaiveMetrics {
  std::vector<std::vector<std::size_t>> counts;
  double accuracy = 0;
  std::vector<double> precision, recall, f1;
  double macro_p = 0, macro_r = 0, macro_f1 = 0;
};

// Counts by scanning all pairs once per class; percentages.
inline NaiveMetrics naive_metrics(const std::vector<int>& truth, const std::vector<int>& pred,
                                  std::size_t C) {
  NaiveMetrics m;
  m.counts.assign(C, std::vector<std::size_t>(C, 0));
  for (std::size_t t = 0; t < C; ++t) {
    for (std::size_t p = 0; p < C; ++p) {
      for (std::size_t n = 0; n < truth.size(); ++n) {
        if (truth[n] == static_cast<int>(t) && pred[n] == static_cast<int>(p)) ++m.counts[t][p];
      }
    }
  }
  std::size_t hits = 0;
  for (std::size_t n = 0; n < truth.size(); ++n) hits += truth[n] == pred[n];
  m.accuracy = 100.0 * static_cast<double>(hits) / static_cast<double>(truth.size());
  std::size_t present = 0;
  for (std::size_t c = 0; c < C; ++c) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t n = 0; n < truth.size(); ++n) {
      const bool is_t = truth[n] == static_cast<int>(c), is_p = pred[n] == static_cast<int>(c);
      tp += is_t && is_p;
      fp += !is_t && is_p;
      fn += is_t && !is_p;
    }
    const double p = tp + fp ? 100.0 * tp / static_cast<double>(tp + fp) : 0.0;
    const double r = tp + fn ? 100.0 * tp / static_cast<double>(tp + fn) : 0.0;
    const double f = p + r > 0 ? 2 * p * r / (p + r) : 0.0;
    m.precision.push_back(p);
    m.recall.push_back(r);
    m.f1.push_back(f);
    if (tp + fn) {
      ++present;
      m.macro_p += p;
      m.macro_r += r;
      m.macro_f1 += f;
    }
  }
  if (present) {
    m.macro_p /= present;
    m.macro_r /= present;
    m.macro_f1 /= present;
  }
  return m;
}

// Mean of every subword unit vector, summed in long double then divided.
inline std::vector<double> brute_embed(const std::string& text, const textfeat::EmbeddingTable& t) {
  std::vector<long double> acc(t.dim(), 0.0L);
  std::size_t units = 0;
  for (const auto& token : textfeat::normalize(text)) {
    auto parts = textfeat::subwords(token, t.min_n(), t.max_n());
    for (std::size_t i = 0; i < parts.size(); ++i) {
      std::size_t row;
      if (i == 0 && t.word_row(parts[0])) {
        row = *t.word_row(parts[0]);
      } else {
        row = t.vocab_size() + textfeat::hash_bucket(parts[i], t.bucket_count());
      }
      auto v = t.row(row);
      for (std::size_t d = 0; d < t.dim(); ++d) acc[d] += v[d];
      ++units;
    }
  }
  std::vector<double> out(t.dim(), 0.0);
  if (units == 0) return out;
  for (std::size_t d = 0; d < t.dim(); ++d) out[d] = static_cast<double>(acc[d] / units);
  return out;
}

// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("lyricmood-" + tag + "-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace lyricmood::testing
