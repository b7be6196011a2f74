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

#include "lyricmood/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "lyricmood/error.hpp"
#include "lyricmood/ops.hpp"
#include "lyricmood/optim.hpp"
#include "lyricmood/syncdata.hpp"

namespace lyricmood::harness {

using models::Batch;
using models::Model;
using models::Sample;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Group {
  std::vector<std::size_t> members;
  std::map<int, std::size_t> label_counts;
  int label = 0;
};

std::string pad(std::string s, std::size_t width, bool left = false) {
  if (s.size() >= width) return s;
  return left ? s + std::string(width - s.size(), ' ') : std::string(width - s.size(), ' ') + s;
}

}  // namespace

Split make_split(std::span<const int> labels, std::span<const std::int64_t> groups,
                 const SplitRatios& ratios, std::uint64_t seed) {
  if (labels.size() != groups.size()) throw ValidationError("labels and group ids differ in length");
  if (ratios.train < 0 || ratios.val < 0 || ratios.test < 0 ||
      std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9) {
    throw ValidationError("split ratios must be non-negative and sum to 1");
  }
  Split split;
  split.seed = seed;
  split.ratios = ratios;

  std::map<std::int64_t, Group> by_id;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto& g = by_id[groups[i]];
    g.members.push_back(i);
    ++g.label_counts[labels[i]];
  }
  std::map<int, std::vector<const Group*>> by_class;
  for (auto& [id, g] : by_id) {
    std::size_t best = 0;
    for (const auto& [label, count] : g.label_counts) {
      if (count > best) {
        best = count;
        g.label = label;
      }
    }
    by_class[g.label].push_back(&g);
  }

  Rng rng(seed);
  const double share[3] = {ratios.train, ratios.val, ratios.test};
  std::vector<std::size_t>* parts[3] = {&split.train, &split.val, &split.test};
  for (auto& [label, members] : by_class) {
    rng.shuffle(members);
    if (members.size() < 3) {
      split.warnings.push_back("class " + std::to_string(label) + " has only " +
                               std::to_string(members.size()) +
                               " track(s); its split is best effort");
    }
    double total = 0.0;
    for (const Group* g : members) total += static_cast<double>(g->members.size());
    double filled[3] = {0.0, 0.0, 0.0};
    for (std::size_t k = 0; k < members.size(); ++k) {
      const Group* g = members[k];
      std::size_t target = 0;
      if (k > 0) {
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t s = 0; s < 3; ++s) {
          if (share[s] <= 0.0) continue;
          const double deficit = share[s] * total - filled[s];
          if (deficit > best) {
            best = deficit;
            target = s;
          }
        }
      }
      filled[target] += static_cast<double>(g->members.size());
      parts[target]->insert(parts[target]->end(), g->members.begin(), g->members.end());
    }
  }
  for (auto* p : parts) std::sort(p->begin(), p->end());
  return split;
}

std::vector<double> class_weights(std::span<const int> labels, std::size_t classes) {
  if (labels.empty()) throw ValidationError("class weights need at least one sample");
  std::vector<std::size_t> counts(classes, 0);
  for (int l : labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= classes) {
      throw ValidationError("label " + std::to_string(l) + " outside " + std::to_string(classes) + " classes");
    }
    ++counts[static_cast<std::size_t>(l)];
  }
  const auto present = static_cast<double>(std::count_if(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; }));
  std::vector<double> w(classes, 0.0);
  for (std::size_t c = 0; c < classes; ++c) {
    if (counts[c]) w[c] = static_cast<double>(labels.size()) / (present * static_cast<double>(counts[c]));
  }
  return w;
}

std::pair<double, double> loss_and_accuracy(Model& model, std::span<const Sample> samples,
                                            std::span<const int> labels,
                                            std::span<const std::size_t> index, std::size_t batch) {
  if (index.empty()) return {kNaN, kNaN};
  nn::NoGradGuard guard;
  double loss = 0.0;
  std::size_t correct = 0;
  for (std::size_t at = 0; at < index.size(); at += batch) {
    auto idx = index.subspan(at, std::min(batch, index.size() - at));
    Batch b = model.collate(samples, idx);
    nn::Tensor logits = model.forward(b, false);
    std::vector<int> y;
    for (auto i : idx) y.push_back(labels[i]);
    loss += nn::cross_entropy(logits, y).item() * static_cast<double>(idx.size());
    const std::size_t C = logits.dim(1);
    for (std::size_t n = 0; n < idx.size(); ++n) {
      auto row = logits.values().begin() + static_cast<std::ptrdiff_t>(n * C);
      if (std::max_element(row, row + static_cast<std::ptrdiff_t>(C)) - row == y[n]) ++correct;
    }
  }
  const auto n = static_cast<double>(index.size());
  return {loss / n, 100.0 * static_cast<double>(correct) / n};
}

std::vector<int> predict(Model& model, std::span<const Sample> samples,
                         std::span<const std::size_t> index, std::size_t batch) {
  std::vector<int> out;
  out.reserve(index.size());
  for (std::size_t at = 0; at < index.size(); at += batch) {
    auto idx = index.subspan(at, std::min(batch, index.size() - at));
    for (const auto& p : model.predict_proba(model.collate(samples, idx))) {
      out.push_back(static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin()));
    }
  }
  return out;
}

TrainResult train(Model& model, std::span<const Sample> samples, std::span<const int> labels,
                  const Split& split, const TrainOptions& opts) {
  if (samples.size() != labels.size()) throw ValidationError("samples and labels differ in length");
  if (split.train.empty()) throw ValidationError("training split is empty");
  if (opts.batch == 0) throw ValidationError("batch size must be positive");
  const std::size_t C = model.classes();
  for (auto i : split.train) {
    if (i >= samples.size()) throw ValidationError("split refers to sample " + std::to_string(i));
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= C) {
      throw ValidationError("label " + std::to_string(labels[i]) + " outside the model's " +
                            std::to_string(C) + " classes");
    }
  }

  std::vector<double> weights;
  if (opts.class_weighting) {
    std::vector<int> train_labels;
    for (auto i : split.train) train_labels.push_back(labels[i]);
    weights = class_weights(train_labels, C);
  }

  auto trainable = model.params().trainable();
  nn::Adam adam(trainable, {.lr = opts.lr});
  Rng order_rng(opts.seed);
  model.rng() = Rng(opts.seed ^ 0xd1b54a32d192ed03ULL);
  const bool has_val = !split.val.empty();

  TrainResult result;
  result.best_val_loss = std::numeric_limits<double>::infinity();
  nn::ParameterSet::Snapshot best;
  std::vector<std::size_t> order = split.train;
  for (std::size_t epoch = 1; epoch <= opts.epochs; ++epoch) {
    order_rng.shuffle(order);
    double total = 0.0;
    for (std::size_t at = 0; at < order.size(); at += opts.batch) {
      std::span<const std::size_t> idx(order.data() + at, std::min(opts.batch, order.size() - at));
      // Gradients accumulate over micro-batches; each partial loss is scaled
      // by its share of the batch so the sum equals the full-batch mean.
      const std::size_t micro = opts.micro_batch == 0 ? idx.size() : opts.micro_batch;
      adam.zero_grad();
      double value = 0.0;
      for (std::size_t m = 0; m < idx.size(); m += micro) {
        auto part = idx.subspan(m, std::min(micro, idx.size() - m));
        Batch b = model.collate(samples, part);
        std::vector<int> y;
        std::vector<double> w;
        for (auto i : part) {
          y.push_back(labels[i]);
          if (!weights.empty()) w.push_back(weights[static_cast<std::size_t>(labels[i])]);
        }
        nn::Tensor loss;
        try {
          loss = nn::cross_entropy(model.forward(b, true), y, w);
        } catch (const NumericError& e) {
          throw NumericError("training diverged at epoch " + std::to_string(epoch) + ": " + e.what());
        }
        const double share = static_cast<double>(part.size()) / static_cast<double>(idx.size());
        const double part_value = loss.item();
        if (!std::isfinite(part_value)) {
          throw NumericError("training diverged at epoch " + std::to_string(epoch) + ": loss is " +
                             std::to_string(part_value));
        }
        value += share * part_value;
        if (part.size() == idx.size()) {
          loss.backward();
        } else {
          nn::scale(loss, share).backward();
        }
      }
      if (model.clip_gradients()) nn::clip_grad_norm(trainable, opts.clip_norm);
      adam.step();
      total += value * static_cast<double>(idx.size());
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = total / static_cast<double>(order.size());
    std::tie(rec.val_loss, rec.val_acc) = loss_and_accuracy(model, samples, labels, split.val);
    result.history.push_back(rec);
    if (has_val) {
      if (!std::isfinite(rec.val_loss)) {
        throw NumericError("validation loss diverged at epoch " + std::to_string(epoch));
      }
      if (rec.val_loss < result.best_val_loss) {
        result.best_val_loss = rec.val_loss;
        result.best_epoch = epoch;
        best = model.params().snapshot();
      }
    } else {
      result.best_epoch = epoch;
      result.best_val_loss = kNaN;
    }
    if (opts.on_epoch && !opts.on_epoch(rec)) break;
    if (has_val && opts.patience && epoch - result.best_epoch > *opts.patience) {
      result.stopped_early = true;
      break;
    }
  }
  if (has_val && !best.empty()) model.params().restore(best);
  return result;
}

void write_history(std::ostream& out, std::span<const EpochRecord> history) {
  auto num = [](double v) {
    if (std::isnan(v)) return std::string("nan");
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  out << "epoch,train_loss,val_loss,val_acc\n";
  for (const auto& r : history) {
    out << r.epoch << ',' << num(r.train_loss) << ',' << num(r.val_loss) << ',' << num(r.val_acc) << '\n';
  }
}

EvalReport make_report(std::span<const int> truth, std::span<const int> predicted,
                       std::vector<std::string> class_names) {
  if (truth.size() != predicted.size()) throw ValidationError("truth and predictions differ in length");
  const std::size_t C = class_names.size();
  EvalReport r;
  r.class_names = std::move(class_names);
  r.samples = truth.size();
  r.counts.assign(C, std::vector<std::size_t>(C, 0));
  for (std::size_t n = 0; n < truth.size(); ++n) {
    if (truth[n] < 0 || predicted[n] < 0 || static_cast<std::size_t>(truth[n]) >= C ||
        static_cast<std::size_t>(predicted[n]) >= C) {
      throw ValidationError("label outside " + std::to_string(C) + " classes at sample " + std::to_string(n));
    }
    ++r.counts[static_cast<std::size_t>(truth[n])][static_cast<std::size_t>(predicted[n])];
  }
  r.precision.assign(C, 0.0);
  r.recall.assign(C, 0.0);
  r.f1.assign(C, 0.0);
  r.support.assign(C, 0);
  r.confusion.assign(C, std::vector<double>(C, 0.0));
  std::size_t correct = 0, present = 0;
  for (std::size_t c = 0; c < C; ++c) {
    std::size_t predicted_c = 0;
    for (std::size_t k = 0; k < C; ++k) {
      r.support[c] += r.counts[c][k];
      predicted_c += r.counts[k][c];
    }
    const auto tp = static_cast<double>(r.counts[c][c]);
    correct += r.counts[c][c];
    if (predicted_c) r.precision[c] = 100.0 * tp / static_cast<double>(predicted_c);
    if (r.support[c]) {
      r.recall[c] = 100.0 * tp / static_cast<double>(r.support[c]);
      for (std::size_t k = 0; k < C; ++k) {
        r.confusion[c][k] = 100.0 * static_cast<double>(r.counts[c][k]) / static_cast<double>(r.support[c]);
      }
    }
    if (r.precision[c] + r.recall[c] > 0.0) {
      r.f1[c] = 2.0 * r.precision[c] * r.recall[c] / (r.precision[c] + r.recall[c]);
    }
    if (r.support[c]) {
      ++present;
      r.macro_precision += r.precision[c];
      r.macro_recall += r.recall[c];
      r.macro_f1 += r.f1[c];
    }
  }
  if (present) {
    r.macro_precision /= static_cast<double>(present);
    r.macro_recall /= static_cast<double>(present);
    r.macro_f1 /= static_cast<double>(present);
  }
  if (r.samples) r.accuracy = 100.0 * static_cast<double>(correct) / static_cast<double>(r.samples);
  return r;
}

EvalReport evaluate(Model& model, std::span<const Sample> samples, std::span<const int> labels,
                    std::span<const std::size_t> index, std::vector<std::string> class_names) {
  if (index.empty()) throw ValidationError("evaluation set is empty");
  auto pred = predict(model, samples, index);
  std::vector<int> truth;
  for (auto i : index) truth.push_back(labels[i]);
  return make_report(truth, pred, std::move(class_names));
}

std::vector<std::string> emotion_class_names(std::size_t classes) {
  std::vector<std::string> names;
  for (std::size_t c = 0; c < classes; ++c) {
    if (c < syncdata::kNumEmotions) {
      names.emplace_back(syncdata::emotion_name(syncdata::emotion_from_code(static_cast<int>(c))));
    } else {
      names.push_back("class" + std::to_string(c));
    }
  }
  return names;
}

ReportFormat parse_report_format(std::string_view s) {
  if (s == "text") return ReportFormat::kText;
  if (s == "json") return ReportFormat::kJson;
  if (s == "csv") return ReportFormat::kCsv;
  throw ValidationError("unknown report format '" + std::string(s) + "' (expected text, json or csv)");
}

std::string format_percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string render_results_table(std::span<const std::pair<std::string, EvalReport>> rows) {
  std::size_t width = 5;
  for (const auto& [name, r] : rows) width = std::max(width, name.size());
  std::ostringstream out;
  out << pad("Model", width, true) << pad("A", 8) << pad("P", 8) << pad("R", 8) << pad("F1", 8) << '\n';
  for (const auto& [name, r] : rows) {
    out << pad(name, width, true) << pad(format_percent(r.accuracy), 8)
        << pad(format_percent(r.macro_precision), 8) << pad(format_percent(r.macro_recall), 8)
        << pad(format_percent(r.macro_f1), 8) << '\n';
  }
  return out.str();
}

namespace {

std::string render_text(const EvalReport& r, const std::string& model_name) {
  std::ostringstream out;
  const std::pair<std::string, EvalReport> row{model_name, r};
  out << render_results_table(std::span(&row, 1)) << '\n';
  std::size_t width = 9;
  for (const auto& n : r.class_names) width = std::max(width, n.size() + 1);
  out << pad("class", width, true) << pad("P", 8) << pad("R", 8) << pad("F1", 8) << pad("support", 9) << '\n';
  for (std::size_t c = 0; c < r.class_names.size(); ++c) {
    out << pad(r.class_names[c], width, true) << pad(format_percent(r.precision[c]), 8)
        << pad(format_percent(r.recall[c]), 8) << pad(format_percent(r.f1[c]), 8)
        << pad(std::to_string(r.support[c]), 9) << '\n';
  }
  out << "\nconfusion (rows true, columns predicted, %)\n" << pad("", width, true);
  for (const auto& n : r.class_names) out << pad(n, width);
  out << '\n';
  for (std::size_t c = 0; c < r.class_names.size(); ++c) {
    out << pad(r.class_names[c], width, true);
    for (double v : r.confusion[c]) out << pad(format_percent(v), width);
    out << '\n';
  }
  return out.str();
}

std::string render_csv(const EvalReport& r) {
  auto num = [](double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  std::ostringstream out;
  out << "true\\predicted";
  for (const auto& n : r.class_names) out << ',' << n;
  out << '\n';
  for (std::size_t c = 0; c < r.class_names.size(); ++c) {
    out << r.class_names[c];
    for (double v : r.confusion[c]) out << ',' << num(v);
    out << '\n';
  }
  out << "\nclass,precision,recall,f1,support\n";
  for (std::size_t c = 0; c < r.class_names.size(); ++c) {
    out << r.class_names[c] << ',' << num(r.precision[c]) << ',' << num(r.recall[c]) << ','
        << num(r.f1[c]) << ',' << r.support[c] << '\n';
  }
  out << "macro," << num(r.macro_precision) << ',' << num(r.macro_recall) << ',' << num(r.macro_f1)
      << ',' << r.samples << '\n';
  out << "accuracy," << num(r.accuracy) << '\n';
  return out.str();
}

}  // namespace

std::string render_report(const EvalReport& r, ReportFormat format, const std::string& model_name) {
  switch (format) {
    case ReportFormat::kText:
      return render_text(r, model_name);
    case ReportFormat::kCsv:
      return render_csv(r);
    case ReportFormat::kJson: {
      nlohmann::ordered_json j;
      j["model"] = model_name;
      j["classes"] = r.class_names;
      j["samples"] = r.samples;
      j["accuracy"] = r.accuracy;
      j["precision"] = r.precision;
      j["recall"] = r.recall;
      j["f1"] = r.f1;
      j["support"] = r.support;
      j["macro_precision"] = r.macro_precision;
      j["macro_recall"] = r.macro_recall;
      j["macro_f1"] = r.macro_f1;
      j["counts"] = r.counts;
      j["confusion"] = r.confusion;
      return j.dump(2) + "\n";
    }
  }
  return {};
}

EvalReport report_from_json(const std::string& text) {
  EvalReport r;
  try {
    auto j = nlohmann::json::parse(text);
    r.class_names = j.at("classes").get<std::vector<std::string>>();
    r.samples = j.at("samples").get<std::size_t>();
    r.accuracy = j.at("accuracy").get<double>();
    r.precision = j.at("precision").get<std::vector<double>>();
    r.recall = j.at("recall").get<std::vector<double>>();
    r.f1 = j.at("f1").get<std::vector<double>>();
    r.support = j.at("support").get<std::vector<std::size_t>>();
    r.macro_precision = j.at("macro_precision").get<double>();
    r.macro_recall = j.at("macro_recall").get<double>();
    r.macro_f1 = j.at("macro_f1").get<double>();
    r.counts = j.at("counts").get<std::vector<std::vector<std::size_t>>>();
    r.confusion = j.at("confusion").get<std::vector<std::vector<double>>>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed report: ") + e.what());
  }
  return r;
}

}  // namespace lyricmood::harness
