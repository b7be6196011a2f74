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

// Splitting, training, evaluation and report rendering.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lyricmood/models.hpp"

namespace lyricmood::harness {

struct SplitRatios {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
};

// Sample indices per partition.
struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
  std::uint64_t seed = 0;
  SplitRatios ratios;
  std::vector<std::string> warnings;
};

// Samples sharing a group id (a track) always land together. Groups are
// stratified by their majority label and assigned greedily to the partition
// furthest below its target share of that class; the first group of every
// class goes to train. Classes with fewer than 3 groups produce a warning.
Split make_split(std::span<const int> labels, std::span<const std::int64_t> groups,
                 const SplitRatios& ratios, std::uint64_t seed);

// total / (present_classes * count_c); 0 for classes without samples.
std::vector<double> class_weights(std::span<const int> labels, std::size_t classes);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;  // NaN without a validation set
  double val_acc = 0.0;   // percent, NaN without a validation set
};

struct TrainOptions {
  double lr = 1e-3;
  std::size_t batch = 32;
  std::size_t epochs = 30;
  // Stop once this many epochs pass without a new best validation loss.
  std::optional<std::size_t> patience;
  bool class_weighting = false;
  std::uint64_t seed = 0;
  double clip_norm = 5.0;
  // Samples per forward pass; 0 runs each batch at once. Batch statistics
  // in normalization layers are then taken per micro-batch.
  std::size_t micro_batch = 0;
  // Called after every epoch; returning false ends training.
  std::function<bool(const EpochRecord&)> on_epoch;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_val_loss = 0.0;
  bool stopped_early = false;
};

// Mini-batch Adam on split.train with a seeded shuffle per epoch. With a
// validation set the weights of the epoch with the lowest validation loss
// are restored at the end. Throws NumericError when the loss diverges.
TrainResult train(models::Model& model, std::span<const models::Sample> samples,
                  std::span<const int> labels, const Split& split, const TrainOptions& opts);

// Mean cross-entropy and percent accuracy at inference time.
std::pair<double, double> loss_and_accuracy(models::Model& model,
                                            std::span<const models::Sample> samples,
                                            std::span<const int> labels,
                                            std::span<const std::size_t> index,
                                            std::size_t batch = 64);

std::vector<int> predict(models::Model& model, std::span<const models::Sample> samples,
                         std::span<const std::size_t> index, std::size_t batch = 64);

void write_history(std::ostream& out, std::span<const EpochRecord> history);

// Percentages throughout. Classes absent from the evaluated labels report
// zero and are left out of the macro averages.
struct EvalReport {
  std::vector<std::string> class_names;
  std::size_t samples = 0;
  double accuracy = 0.0;
  std::vector<double> precision;
  std::vector<double> recall;
  std::vector<double> f1;
  std::vector<std::size_t> support;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  std::vector<std::vector<std::size_t>> counts;  // [true][predicted]
  std::vector<std::vector<double>> confusion;    // row-normalized counts

  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

EvalReport make_report(std::span<const int> truth, std::span<const int> predicted,
                       std::vector<std::string> class_names);

EvalReport evaluate(models::Model& model, std::span<const models::Sample> samples,
                    std::span<const int> labels, std::span<const std::size_t> index,
                    std::vector<std::string> class_names);

// Default class names: the first `classes` emotions.
std::vector<std::string> emotion_class_names(std::size_t classes);

enum class ReportFormat { kText, kJson, kCsv };
ReportFormat parse_report_format(std::string_view s);

std::string render_report(const EvalReport& report, ReportFormat format,
                          const std::string& model_name = "model");
EvalReport report_from_json(const std::string& text);

// One row per model with A, P, R, F1.
std::string render_results_table(std::span<const std::pair<std::string, EvalReport>> rows);

// Two decimals, as in the result tables.
std::string format_percent(double v);

}  // namespace lyricmood::harness
