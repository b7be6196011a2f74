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

// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on failure.

#include <malloc.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <map>
#include <nlohmann/json.hpp>
#include <numbers>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "lyricmood/audiofeat.hpp"
#include "lyricmood/harness.hpp"
#include "lyricmood/models.hpp"
#include "lyricmood/ops.hpp"
#include "lyricmood/pipeline.hpp"
#include "lyricmood/syncdata.hpp"
#include "lyricmood/synthgen.hpp"
#include "lyricmood/textfeat.hpp"
#include "support/cli.hpp"
#include "support/model_checks.hpp"
#include "support/oracles.hpp"

namespace lyricmood {
namespace {

namespace fs = std::filesystem;
using models::TextVariant;
using nn::Tensor;
using testing::GradCheckResult;
using testing::grad_check;
using testing::random_tensor;

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
  void note(const std::string& what) {
    if (!detail.empty()) detail += "; ";
    detail += what;
  }
};

std::string fmt(double v, int digits = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string sci(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Tensor probe(const Tensor& y, std::uint64_t seed = 99) {
  Rng rng(seed);
  return nn::dot(y, random_tensor(y.shape(), rng, -1, 1, false));
}

// ---- 2: gradients ---------------------------------------------------------

Outcome gradients() {
  using namespace nn;
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  double worst = 0;
  std::size_t checks = 0;
  auto check = [&](const std::string& name, const std::function<Tensor()>& f, std::vector<Tensor> in) {
    auto r = grad_check(f, std::move(in));
    ++checks;
    worst = std::max(worst, r.max_rel_error);
    o.require(r.checked > 0 && r.max_rel_error < 1e-4, name + " " + sci(r.max_rel_error) + " at " + r.worst);
  };

  Rng rng(11);
  auto a = random_tensor({3, 4}, rng);
  auto b = random_tensor({3, 4}, rng);
  check("add", [&] { return probe(add(a, b)); }, {a, b});
  check("sub", [&] { return probe(sub(a, b)); }, {a, b});
  check("mul", [&] { return probe(mul(a, b)); }, {a, b});
  check("scale", [&] { return probe(scale(a, -1.7)); }, {a});
  check("tanh", [&] { return probe(tanh(a)); }, {a});
  check("sigmoid", [&] { return probe(sigmoid(a)); }, {a});
  check("elu", [&] { return probe(elu(a)); }, {a});
  check("sum", [&] { return scale(sum(a), 0.3); }, {a});
  check("mean", [&] { return mean(a); }, {a});
  check("dot", [&] { return dot(a, b); }, {a, b});
  auto r = random_tensor({20}, rng);
  for (auto& v : r.values()) v = v < 0 ? v - 0.1 : v + 0.1;
  check("relu", [&] { return probe(relu(r)); }, {r});

  auto x = random_tensor({4, 5}, rng);
  auto w = random_tensor({5, 3}, rng);
  auto bias = random_tensor({3}, rng);
  auto y = random_tensor({4, 3}, rng);
  check("matmul", [&] { return probe(matmul(x, w)); }, {x, w});
  check("dense", [&] { return probe(dense(x, w, bias)); }, {x, w, bias});
  check("add_bias", [&] { return probe(add_bias(y, bias)); }, {y, bias});
  check("softmax", [&] { return probe(softmax(y)); }, {y});

  auto s = random_tensor({2, 3, 4}, rng);
  auto s2 = random_tensor({2, 3, 2}, rng);
  std::vector<std::size_t> len{3, 1};
  check("reshape", [&] { return probe(reshape(s, {6, 4})); }, {s});
  check("flatten", [&] { return probe(flatten(s)); }, {s});
  check("slice_last", [&] { return probe(slice_last(s, 1, 2)); }, {s});
  check("concat_last", [&] { return probe(concat_last({s, s2})); }, {s, s2});
  check("select_step", [&] { return probe(select_step(s, 2)); }, {s});
  auto st0 = random_tensor({2, 4}, rng);
  auto st1 = random_tensor({2, 4}, rng);
  check("stack_steps", [&] { return probe(stack_steps({st0, st1, st0})); }, {st0, st1});
  check("pack_steps", [&] { return probe(pack_steps(s, len)); }, {s});
  auto packed = random_tensor({4, 4}, rng);
  check("unpack_steps", [&] { return probe(unpack_steps(packed, len, 3)); }, {packed});
  auto wts = random_tensor({2, 3}, rng);
  check("weighted_step_sum", [&] { return probe(weighted_step_sum(s, wts)); }, {s, wts});
  auto table = random_tensor({10, 4}, rng);
  check("embedding_bag_mean", [&] { return probe(embedding_bag_mean(table, {{1, 3, 3}, {}, {9, 0}})); }, {table});

  auto logits = random_tensor({5, 4}, rng, -2, 2);
  std::vector<int> labels{0, 3, 1, 1, 2};
  std::vector<double> sw{1.0, 0.5, 2.0, 1.0, 0.25};
  auto soft = random_tensor({5, 4}, rng, 0, 1, false);
  check("cross_entropy", [&] { return cross_entropy(logits, labels); }, {logits});
  check("cross_entropy weighted", [&] { return cross_entropy(logits, labels, sw); }, {logits});
  check("cross_entropy soft", [&] { return cross_entropy(logits, soft, sw); }, {logits});

  auto bx = random_tensor({4, 3, 5}, rng, -2, 2);
  auto g = random_tensor({3}, rng, 0.5, 1.5);
  auto be = random_tensor({3}, rng);
  std::vector<double> mu{0.1, -0.2, 0.3}, var{1.5, 0.7, 2.0};
  check("batch_norm_train", [&] { return probe(batch_norm_train(bx, g, be, 1, 1e-5)); }, {bx, g, be});
  check("batch_norm_eval", [&] { return probe(batch_norm_eval(bx, g, be, 1, mu, var, 1e-5)); }, {bx, g, be});
  check(
      "dropout",
      [&] {
        Rng mask(1);
        return probe(dropout(bx, 0.4, true, mask));
      },
      {bx});

  auto cx = random_tensor({2, 2, 6, 7}, rng);
  auto k = random_tensor({3, 2, 3, 3}, rng);
  check("conv2d", [&] { return probe(conv2d(cx, k)); }, {cx, k});
  auto p = random_tensor({2, 2, 6, 7}, rng);
  for (std::size_t i = 0; i < p.numel(); ++i) p.values()[i] = std::sin(1.0 + 7.3 * static_cast<double>(i));
  check("maxpool2d", [&] { return probe(maxpool2d(p, 2, 3)); }, {p});
  auto kx = random_tensor({2, 2, 6, 8}, rng);
  auto kk = random_tensor({3, 2, 3, 3}, rng);
  auto kg = random_tensor({3}, rng, 0.5, 1.5);
  auto kb = random_tensor({3}, rng, -0.5, 0.5);
  check("conv_block", [&] { return probe(conv_block(kx, kk, kg, kb, 2, 2, {})); }, {kx, kk, kg, kb});

  for (auto type : {CellType::kLstm, CellType::kGru}) {
    Rng lr(38);
    ParameterSet ps;
    Rnn rnn(ps, "rnn", type, 3, 4, true, lr);
    auto seq = random_tensor({2, 8, 3}, lr);
    std::vector<std::size_t> lengths{8, 5};
    Rng coeff(1);
    auto w1 = random_tensor({2, 8, 8}, coeff, -1, 1, false);
    auto w2 = random_tensor({2, 8}, coeff, -1, 1, false);
    auto in = ps.trainable();
    in.push_back(seq);
    check(type == CellType::kLstm ? "bilstm layer" : "bigru layer",
          [&] {
            auto out = rnn(seq, lengths);
            return add(dot(out.sequence, w1), dot(out.last, w2));
          },
          in);
  }
  {
    Rng ar(39);
    ParameterSet ps;
    Attention att(ps, "att", 4, ar);
    auto h = random_tensor({3, 5, 4}, ar);
    std::vector<std::size_t> lengths{5, 2, 4};
    Rng coeff(2);
    auto cw = random_tensor({3, 4}, coeff, -1, 1, false);
    check("attention", [&] { return dot(att(h, lengths), cw); }, {h, att.context});
  }

  for (auto v : models::kAllTextVariants) {
    auto res = testing::text_model_gradcheck(v, 8);
    ++checks;
    worst = std::max(worst, res.max_rel_error);
    o.require(res.max_rel_error < 1e-4, std::string(models::variant_name(v)) + " " + sci(res.max_rel_error));
  }
  auto audio = testing::audio_model_gradcheck();
  ++checks;
  worst = std::max(worst, audio.max_rel_error);
  o.require(audio.max_rel_error < 1e-4, "audio cnn " + sci(audio.max_rel_error));

  const double elapsed = seconds_since(t0);
  o.require(elapsed < 300, "took " + fmt(elapsed, 1) + " s");
  o.note(std::to_string(checks) + " checks, worst relative error " + sci(worst));
  return o;
}

// ---- 3: DSP ---------------------------------------------------------------

// Sum of |X_k|^2 over all n DFT bins, rebuilt from the one-sided power.
double full_energy(const audio::Matrix& power, std::size_t frame, std::size_t n) {
  double e = power.at(0, frame) + power.at(n / 2, frame);
  for (std::size_t k = 1; k < n / 2; ++k) e += 2 * power.at(k, frame);
  return e / static_cast<double>(n);
}

Outcome dsp() {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  audio::AudioClip clip;
  clip.samples.resize(30 * 12000);
  for (std::size_t i = 0; i < clip.size(); ++i) {
    clip.samples[i] = 0.5 * std::sin(2 * std::numbers::pi * 440.0 * static_cast<double>(i) / 12000.0);
  }
  auto mel = audio::mel_spectrogram(clip);
  o.require(mel.n_mels() == 128 && mel.frames() == 1405,
            "shape " + std::to_string(mel.n_mels()) + "x" + std::to_string(mel.frames()));

  // Nearest triangle center on the HTK mel scale, from the closed form.
  auto to_mel = [](double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); };
  const double top = to_mel(6000.0);
  std::size_t expected = 0;
  double best = 1e300;
  for (std::size_t m = 0; m < 128; ++m) {
    const double center_mel = top * static_cast<double>(m + 1) / 129.0;
    const double hz = 700.0 * (std::pow(10.0, center_mel / 2595.0) - 1.0);
    if (std::abs(hz - 440.0) < best) {
      best = std::abs(hz - 440.0);
      expected = m;
    }
  }
  std::vector<double> totals(128, 0.0);
  for (std::size_t m = 0; m < 128; ++m) {
    for (std::size_t t = 0; t < mel.frames(); ++t) totals[m] += mel.values.at(m, t);
  }
  const auto argmax = static_cast<std::size_t>(std::max_element(totals.begin(), totals.end()) - totals.begin());
  o.require(argmax == expected, "440 Hz band " + std::to_string(argmax) + " vs " + std::to_string(expected));

  audio::AudioClip impulse;
  impulse.samples.assign(512, 0.0);
  impulse.samples[200] = 1.0;
  const auto w = audio::hann_window(512);
  const double e = full_energy(audio::stft_power(impulse), 0, 512);
  const double want = w[200] * w[200];
  const double rel = std::abs(e - want) / want;
  o.require(rel < 1e-6, "Parseval relative error " + sci(rel));

  const double elapsed = seconds_since(t0);
  o.require(elapsed < 30, "took " + fmt(elapsed, 1) + " s");
  o.note("128x1405, 440 Hz in band " + std::to_string(argmax) + ", Parseval " + sci(rel));
  return o;
}

// ---- 4: lyric embedding ---------------------------------------------------

Outcome embedding_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  const std::vector<std::string> words = {"love", "night", "cold", "fire", "Rain!", "\xc3\xa9t\xc3\xa9", "don't",
                                          "x",    "tomorrow", "TEARS", "sunshine", "\xef\xbc\xa1\xef\xbc\xa2",
                                          "heart-break", "42", "oh", "grief"};
  auto table = textfeat::EmbeddingTable::random(300, 20000, {"love", "night", "fire", "tears", "oh"}, 4, 0.1);
  Rng rng(2);
  double worst = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::string text;
    const std::size_t n = rng.below(25);
    for (std::size_t i = 0; i < n; ++i) text += words[rng.below(words.size())] + (rng.below(4) ? " " : ",  ");
    auto f = textfeat::embed_text(text, table);
    auto b = testing::brute_embed(text, table);
    for (std::size_t d = 0; d < table.dim(); ++d) worst = std::max(worst, std::abs(f.vector[d] - b[d]));
  }
  o.require(worst <= 1e-12, "max deviation " + sci(worst));
  const double elapsed = seconds_since(t0);
  o.require(elapsed < 30, "took " + fmt(elapsed, 1) + " s");
  o.note("1000 lyrics, max deviation " + sci(worst));
  return o;
}

// ---- 5: untrained loss ----------------------------------------------------

models::TextModelConfig default_config(TextVariant v) {
  models::TextModelConfig cfg;
  cfg.variant = v;
  if (!models::uses_subword_table(v)) cfg.embed_dim = v == TextVariant::kBertDense ? 768 : 1024;
  return cfg;
}

textfeat::EmbeddingTable default_table(TextVariant v, std::vector<std::string> vocab, std::uint64_t seed) {
  if (!models::uses_subword_table(v)) return {};
  return textfeat::EmbeddingTable::random(300, 2000, std::move(vocab), seed, 0.1);
}

// Random inputs of the right kind, with token rows below `rows`.
std::vector<models::Sample> random_samples(const models::Model& m, std::size_t n, std::size_t rows, Rng& rng) {
  std::vector<models::Sample> out(n);
  for (auto& s : out) {
    const std::size_t steps = 1 + rng.below(12);
    switch (m.input_kind()) {
      case models::InputKind::kTokenBags:
        s.tokens.resize(steps);
        for (auto& bag : s.tokens) {
          bag.resize(1 + rng.below(6));
          for (auto& r : bag) r = rng.below(rows);
        }
        break;
      case models::InputKind::kVector:
        s.values.resize(m.input_dim());
        for (auto& v : s.values) v = rng.normal();
        break;
      case models::InputKind::kSequence:
        s.steps = steps;
        s.values.resize(steps * m.input_dim());
        for (auto& v : s.values) v = rng.normal();
        break;
      case models::InputKind::kSpectrogram:
        s.steps = 1405;
        s.values.resize(128 * 1405);
        for (auto& v : s.values) v = rng.uniform(-10, 2);
        break;
    }
  }
  return out;
}

double untrained_loss(models::Model& m, std::size_t rows, std::uint64_t seed) {
  Rng rng(seed);
  auto samples = random_samples(m, m.input_kind() == models::InputKind::kSpectrogram ? 4 : 8, rows, rng);
  std::vector<int> labels(samples.size());
  for (auto& l : labels) l = static_cast<int>(rng.below(m.classes()));
  std::vector<std::size_t> idx(samples.size());
  std::iota(idx.begin(), idx.end(), 0);
  return harness::loss_and_accuracy(m, samples, labels, idx).first;
}

Outcome loss_sanity() {
  Outcome o;
  double worst_text = 0, worst_audio = 0;
  for (auto v : models::kAllTextVariants) {
    auto cfg = default_config(v);
    auto table = default_table(v, {"love", "rain"}, 3);
    models::TextModel m(cfg, 9, table);
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      const double loss = untrained_loss(m, table.rows() ? table.rows() : 1, seed);
      worst_text = std::max(worst_text, std::abs(loss - std::log(5.0)));
      o.require(std::abs(loss - std::log(5.0)) < 0.1,
                std::string(models::variant_name(v)) + " loss " + fmt(loss, 4));
    }
  }
  models::AudioModel audio({}, 9);
  for (std::uint64_t seed = 1; seed <= 2; ++seed) {
    const double loss = untrained_loss(audio, 0, seed);
    worst_audio = std::max(worst_audio, std::abs(loss - std::log(4.0)));
    o.require(std::abs(loss - std::log(4.0)) < 0.1, "audio loss " + fmt(loss, 4));
  }
  o.note("max |loss - ln 5| " + sci(worst_text) + ", max |loss - ln 4| " + sci(worst_audio));
  return o;
}

// ---- 6: overfitting -------------------------------------------------------

// Trains on every sample and reports the epoch at which train accuracy hit
// 100%, or 0 when it never did.
std::size_t epochs_to_fit(models::Model& m, const pipeline::LabeledSamples& data, std::size_t max_epochs,
                          const harness::TrainOptions& base) {
  harness::Split split;
  split.train.resize(data.samples.size());
  std::iota(split.train.begin(), split.train.end(), 0);
  auto opts = base;
  opts.epochs = max_epochs;
  std::size_t fitted = 0;
  opts.on_epoch = [&](const harness::EpochRecord& r) {
    if (harness::predict(m, data.samples, split.train) == data.labels) fitted = r.epoch;
    return fitted == 0;
  };
  harness::train(m, data.samples, data.labels, split, opts);
  return fitted;
}

// Class-dependent means with unit noise; sequences repeat the mean per step.
pipeline::LabeledSamples separable_vectors(std::size_t n, std::size_t dim, bool sequences, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::vector<double>> means(5, std::vector<double>(dim));
  for (auto& mu : means)
    for (auto& v : mu) v = rng.normal();
  pipeline::LabeledSamples out;
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % 5);
    models::Sample s;
    s.steps = sequences ? 2 + rng.below(7) : 0;
    const std::size_t steps = sequences ? s.steps : 1;
    for (std::size_t t = 0; t < steps; ++t)
      for (std::size_t d = 0; d < dim; ++d) s.values.push_back(means[label][d] + 0.5 * rng.normal());
    out.samples.push_back(std::move(s));
    out.labels.push_back(label);
    out.groups.push_back(static_cast<std::int64_t>(i));
  }
  return out;
}

audio::AudioClip class_clip(syncdata::Emotion e, Rng& rng) {
  const auto [lo, hi] = synth::class_band(e);
  const double f0 = rng.uniform(lo, hi);
  audio::AudioClip c;
  c.samples.resize(30 * 12000);
  for (std::size_t i = 0; i < c.size(); ++i) {
    const double t = static_cast<double>(i) / 12000.0;
    double v = 0;
    for (int h = 1; h <= 3; ++h) v += std::sin(2 * std::numbers::pi * f0 * h * t) / h;
    c.samples[i] = 0.2 * v + 0.02 * rng.normal();
  }
  return c;
}

Outcome overfit() {
  Outcome o;
  synth::SynthSpec spec;
  spec.tracks = 8;
  spec.lines_per_track = 4;
  spec.noise = 0.0;
  spec.proportions = {20, 20, 20, 20, 20};
  spec.seed = 5;
  const auto corpus = synth::gen_text_corpus(spec);
  harness::TrainOptions opts;
  opts.batch = 8;
  opts.lr = 1e-3;
  opts.seed = 3;
  std::string epochs;
  for (auto v : models::kAllTextVariants) {
    models::TextModel m(default_config(v), 4, default_table(v, pipeline::build_vocab(corpus.rows), 4));
    pipeline::LabeledSamples data;
    switch (m.input_kind()) {
      case models::InputKind::kTokenBags:
        data = pipeline::token_samples(m, corpus.rows);
        break;
      case models::InputKind::kVector:
        data = separable_vectors(32, m.input_dim(), false, 6);
        break;
      default:
        data = separable_vectors(32, m.input_dim(), true, 6);
    }
    if (data.samples.size() != 32) o.require(false, "expected 32 rows");
    const auto fitted = epochs_to_fit(m, data, 200, opts);
    o.require(fitted > 0, std::string(models::variant_name(v)) + " never reached 100%");
    epochs += std::string(epochs.empty() ? "" : ", ") + std::string(models::variant_name(v)) + " " +
              std::to_string(fitted);
  }

  Rng rng(8);
  pipeline::LabeledSamples clips;
  for (std::size_t i = 0; i < 16; ++i) {
    const auto e = syncdata::emotion_from_code(static_cast<int>(i % 4));
    auto mel = audio::mel_spectrogram(class_clip(e, rng));
    models::Sample s;
    s.steps = mel.frames();
    s.values = std::move(mel.values.values);
    clips.samples.push_back(std::move(s));
    clips.labels.push_back(static_cast<int>(i % 4));
  }
  models::AudioModel cnn({}, 4);
  harness::TrainOptions aopts;
  aopts.batch = 16;
  aopts.micro_batch = 8;
  aopts.lr = 0.005;
  aopts.seed = 3;
  const auto fitted = epochs_to_fit(cnn, clips, 100, aopts);
  o.require(fitted > 0, "audio cnn never reached 100%");
  o.note("epochs to 100%: " + epochs + ", audio cnn " + std::to_string(fitted));
  return o;
}

// ---- CLI helpers ----------------------------------------------------------

std::string q(const fs::path& p) { return testing::quote(p.string()); }

nlohmann::json run_json(const std::string& args, const fs::path& scratch, const fs::path& report, Outcome& o) {
  auto r = testing::run_cli(args, scratch);
  if (r.code != 0) {
    o.require(false, "lyricmood exited " + std::to_string(r.code) + ": " + r.err.substr(0, 200));
    return {};
  }
  return nlohmann::json::parse(testing::slurp(report));
}

// ---- 7: synthetic text end to end -----------------------------------------

Outcome synthetic_text() {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  testing::TempDir dir("accept-text");
  auto r = testing::run_cli("synth --out " + q(dir / "corpus") + " --tracks 100 --lines 20 --noise 0.2 --seed 7",
                            dir.path());
  if (r.code != 0) {
    o.require(false, "synth failed: " + r.err);
    return o;
  }
  const auto report = run_json("train-text --dataset " + q(dir / "corpus/dataset.jsonl") + " --out " +
                                   q(dir / "run") + " --variant bilstm_attn --seed 7",
                               dir.path(), dir / "run/report.json", o);
  if (!o.pass) return o;
  const double acc = report["accuracy"], f1 = report["macro_f1"];
  o.require(acc >= 90.0, "accuracy " + fmt(acc));
  o.require(f1 >= 85.0, "macro-F1 " + fmt(f1));
  const double elapsed = seconds_since(t0);
  o.require(elapsed < 900, "took " + fmt(elapsed, 1) + " s");
  o.note("test accuracy " + fmt(acc) + "%, macro-F1 " + fmt(f1) + "%, " +
         std::to_string(report["samples"].get<std::size_t>()) + " test rows, " + fmt(elapsed, 0) + " s");
  return o;
}

// ---- 8: vocals against mixtures -------------------------------------------

Outcome vocals_vs_mixture() {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  testing::TempDir dir("accept-audio");
  std::string per_seed;
  for (int seed = 1; seed <= 3; ++seed) {
    const auto corpus = dir / ("corpus" + std::to_string(seed));
    auto r = testing::run_cli("synth --out " + q(corpus) +
                                  " --tracks 80 --lines 20 --proportions 25,25,25,25,0 --snr-db 0 --audio --seed " +
                                  std::to_string(seed),
                              dir.path());
    if (r.code != 0) {
      o.require(false, "synth failed: " + r.err);
      return o;
    }
    std::map<std::string, double> acc;
    for (const std::string sep : {"identity", "stems"}) {
      const auto out = dir / (sep + std::to_string(seed));
      const auto report =
          run_json("train-audio --dataset " + q(corpus / "dataset.jsonl") + " --meta " + q(corpus / "meta.csv") +
                       " --separator " + sep +
                       " --excerpt-seconds 6 --epochs 15 --batch 16 --lr 0.005 --seed " + std::to_string(seed) +
                       " --out " + q(out),
                   dir.path(), out / "report.json", o);
      if (!o.pass) return o;
      acc[sep] = report["accuracy"];
    }
    const double gap = acc["stems"] - acc["identity"];
    o.require(gap >= 5.0, "seed " + std::to_string(seed) + " gap " + fmt(gap));
    o.require(acc["identity"] > 25.0 && acc["stems"] > 25.0, "seed " + std::to_string(seed) + " at chance");
    per_seed += (per_seed.empty() ? "" : ", ") + std::string("seed ") + std::to_string(seed) + " stems " +
                fmt(acc["stems"]) + "% vs mixture " + fmt(acc["identity"]) + "%";
  }
  const double elapsed = seconds_since(t0);
  o.require(elapsed < 1800, "took " + fmt(elapsed, 1) + " s");
  o.note(per_seed + ", " + fmt(elapsed, 0) + " s");
  return o;
}

// ---- 9: metrics and statistics --------------------------------------------

Outcome metric_oracles() {
  Outcome o;
  Rng rng(31);
  std::size_t count_mismatch = 0;
  double worst_pct = 0, worst_stat = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t C = 2 + rng.below(4);
    const std::size_t n = 1 + rng.below(80);
    std::vector<int> truth(n), pred(n);
    for (auto& t : truth) t = static_cast<int>(rng.below(C));
    for (std::size_t i = 0; i < n; ++i) pred[i] = rng.below(3) ? truth[i] : static_cast<int>(rng.below(C));
    auto rep = harness::make_report(truth, pred, harness::emotion_class_names(C));
    auto naive = testing::naive_metrics(truth, pred, C);
    count_mismatch += rep.counts != naive.counts;
    auto track = [&](double a, double b) { worst_pct = std::max(worst_pct, std::abs(a - b)); };
    track(rep.accuracy, naive.accuracy);
    track(rep.macro_precision, naive.macro_p);
    track(rep.macro_recall, naive.macro_r);
    track(rep.macro_f1, naive.macro_f1);
    for (std::size_t c = 0; c < C; ++c) {
      track(rep.precision[c], naive.precision[c]);
      track(rep.recall[c], naive.recall[c]);
      track(rep.f1[c], naive.f1[c]);
    }

    std::vector<double> durations(1 + rng.below(200));
    for (auto& d : durations) d = rng.uniform(0, 400);
    auto s = syncdata::compute_stats(durations);
    auto ns = testing::naive_stats(durations);
    for (auto [a, b] : {std::pair{s.min, ns.min}, {s.max, ns.max}, {s.mean, ns.mean}, {s.std, ns.std},
                        {s.perc_70, ns.perc_70}, {s.perc_90, ns.perc_90}}) {
      worst_stat = std::max(worst_stat, std::abs(a - b));
    }
  }
  o.require(count_mismatch == 0, std::to_string(count_mismatch) + " confusion count mismatches");
  o.require(worst_pct <= 1e-9, "metric deviation " + sci(worst_pct));
  o.require(worst_stat <= 1e-9, "statistic deviation " + sci(worst_stat));
  o.note("1000 instances, metric deviation " + sci(worst_pct) + ", statistic deviation " + sci(worst_stat));
  return o;
}

// ---- 10: determinism and persistence --------------------------------------

std::string train_history(const std::vector<syncdata::DatasetRow>& rows, nn::ParameterSet::Snapshot* weights) {
  auto cfg = default_config(TextVariant::kBigruAttn);
  cfg.hidden = 16;
  cfg.dense_hidden = 16;
  models::TextModel m(cfg, 2, default_table(TextVariant::kBigruAttn, pipeline::build_vocab(rows), 2));
  auto data = pipeline::token_samples(m, rows);
  auto split = harness::make_split(data.labels, data.groups, {}, 5);
  harness::TrainOptions opts;
  opts.epochs = 4;
  opts.batch = 16;
  opts.seed = 5;
  auto result = harness::train(m, data.samples, data.labels, split, opts);
  std::ostringstream out;
  harness::write_history(out, result.history);
  *weights = m.params().snapshot();
  return out.str();
}

bool bit_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

Outcome determinism() {
  Outcome o;
  synth::SynthSpec spec;
  spec.tracks = 12;
  spec.lines_per_track = 10;
  spec.seed = 9;
  const auto corpus = synth::gen_text_corpus(spec);
  nn::ParameterSet::Snapshot wa, wb;
  const auto ha = train_history(corpus.rows, &wa);
  const auto hb = train_history(corpus.rows, &wb);
  o.require(ha == hb, "training histories differ");
  o.require(wa == wb, "trained weights differ");

  testing::TempDir dir("accept-ck");
  Rng rng(4);
  std::size_t models_checked = 0;
  auto round_trip = [&](models::Model& m, std::size_t rows, const std::string& name) {
    testing::randomize_output(m, rng);
    auto samples = random_samples(m, 4, rows, rng);
    std::vector<std::size_t> idx{0, 1, 2, 3};
    auto batch = m.collate(samples, idx);
    const auto before = m.forward(batch, false).values();
    const auto path = (dir / (name + ".ck")).string();
    models::save_model(path, m);
    auto loaded = models::load_model(path);
    const auto after = loaded->forward(loaded->collate(samples, idx), false).values();
    o.require(bit_equal(std::vector<double>(before.begin(), before.end()),
                        std::vector<double>(after.begin(), after.end())),
              name + " checkpoint forward differs");
    ++models_checked;
  };
  for (auto v : models::kAllTextVariants) {
    auto cfg = default_config(v);
    cfg.hidden = 16;
    cfg.dense_hidden = 16;
    auto table = default_table(v, {"love", "rain"}, 3);
    models::TextModel m(cfg, 6, table);
    round_trip(m, table.rows() ? table.rows() : 1, std::string(models::variant_name(v)));
  }
  models::AudioModel cnn(testing::small_audio_config(1405), 6);
  round_trip(cnn, 0, "audio");

  const fs::path fixtures = LYRICMOOD_FIXTURES;
  for (auto [name, format] : {std::pair{"dataset.jsonl", syncdata::DatasetFormat::kJsonl},
                              std::pair{"dataset.csv", syncdata::DatasetFormat::kCsv}}) {
    const auto original = testing::slurp(fixtures / name);
    std::istringstream in(original);
    auto rows = syncdata::parse_dataset(in, format);
    std::ostringstream out;
    syncdata::write_dataset(out, rows, format);
    o.require(out.str() == original, std::string(name) + " round trip differs");
  }
  {
    // Metadata is keyed by track id, so only its content survives the trip.
    std::ifstream in(fixtures / "meta.csv");
    const auto parsed = syncdata::parse_track_meta(in);
    std::vector<syncdata::TrackMeta> tracks;
    for (const auto& [id, t] : parsed) tracks.push_back(t);
    std::stringstream out;
    syncdata::write_track_meta(out, tracks);
    o.require(syncdata::parse_track_meta(out) == parsed, "meta.csv round trip differs");
  }
  if (o.pass) {
    o.note("identical histories, " + std::to_string(models_checked) + " checkpoints bit-exact, fixtures identical");
  }
  return o;
}

// ---- 11: segmentation -----------------------------------------------------

Outcome segmentation() {
  Outcome o;
  Rng rng(77);
  std::size_t failures = 0, chunks_seen = 0, oversize = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<syncdata::DatasetRow> rows;
    double t = rng.below(4) == 0 ? 0.0 : rng.uniform(0, 25);
    const std::size_t n = 1 + rng.below(30);
    for (std::size_t i = 0; i < n; ++i) {
      const double len = rng.below(10) == 0 ? rng.uniform(25, 60) : rng.uniform(0.5, 12);
      rows.push_back({trial, "line " + std::to_string(i), t, t + len,
                      syncdata::emotion_from_code(static_cast<int>(rng.below(rng.below(2) ? 2 : 5)))});
      t += len + (rng.below(3) == 0 ? 0.0 : rng.uniform(0, 6));
    }
    const double duration = t + (rng.below(4) == 0 ? 0.0 : rng.uniform(0, 30));
    std::vector<syncdata::DatasetRow> shuffled = rows;
    rng.shuffle(shuffled);
    auto seg = syncdata::segment_track(shuffled, duration);
    bool ok = seg.intro.begin == 0.0 && seg.intro.end == seg.synch.begin && seg.synch.end == seg.outro.begin &&
              seg.outro.end == duration && seg.synch.begin == rows.front().start &&
              seg.synch.end == rows.back().end && seg.rows == rows &&
              std::abs(seg.intro.length() + seg.synch.length() + seg.outro.length() - duration) < 1e-9;

    auto chunks = syncdata::chunk_segments(seg);
    std::vector<syncdata::DatasetRow> rebuilt;
    for (const auto& c : chunks) {
      ++chunks_seen;
      ok = ok && c.row_count >= 1 && c.first_row == rebuilt.size();
      if (!ok) break;
      std::string text;
      for (std::size_t r = c.first_row; r < c.first_row + c.row_count; ++r) {
        ok = ok && seg.rows[r].emotion == c.label;
        text += (text.empty() ? "" : " ") + seg.rows[r].text;
        rebuilt.push_back(seg.rows[r]);
      }
      ok = ok && text == c.text && c.start == seg.rows[c.first_row].start &&
           c.end == seg.rows[c.first_row + c.row_count - 1].end;
      if (c.oversize) {
        ++oversize;
        ok = ok && c.row_count == 1 && c.duration() > syncdata::kChunkSeconds;
      } else {
        ok = ok && c.duration() <= syncdata::kChunkSeconds;
      }
    }
    ok = ok && rebuilt == seg.rows;
    failures += !ok;
  }
  o.require(failures == 0, std::to_string(failures) + " tracks broke an invariant");
  o.note("1000 tracks, " + std::to_string(chunks_seen) + " chunks, " + std::to_string(oversize) + " oversize");
  return o;
}

}  // namespace
}  // namespace lyricmood

int main() {
  // The audio criteria churn through large short-lived buffers; keep them in
  // the heap instead of mapping and unmapping pages on every batch.
  mallopt(M_MMAP_MAX, 0);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
  mallopt(M_TOP_PAD, 64 << 20);

  using namespace lyricmood;
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"2 gradient checks", gradients},
      {"3 mel front end", dsp},
      {"4 lyric embedding oracle", embedding_oracle},
      {"5 untrained loss", loss_sanity},
      {"6 overfit gate", overfit},
      {"7 synthetic lyrics end to end", synthetic_text},
      {"8 vocals beat mixtures", vocals_vs_mixture},
      {"9 metric and statistic oracles", metric_oracles},
      {"10 determinism and persistence", determinism},
      {"11 segmentation invariants", segmentation},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    failed += !o.pass;
    std::printf("%s criterion %s (%.1f s): %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), seconds_since(t0),
                o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
