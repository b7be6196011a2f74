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

#include "lyricmood/models.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "lyricmood/error.hpp"
#include "support/model_checks.hpp"
#include "support/oracles.hpp"

namespace lyricmood::models {
namespace {

using nn::CellType;
using testing::random_tensor;

textfeat::EmbeddingTable tiny_table(std::uint64_t seed = 1) {
  return textfeat::EmbeddingTable::random(300, 40, {"love", "rain", "night", "gone"}, seed, 0.1);
}

TextModelConfig text_config(TextVariant v, std::size_t hidden = 16) {
  TextModelConfig cfg;
  cfg.variant = v;
  cfg.hidden = hidden;
  cfg.dense_hidden = 32;
  cfg.embed_dim = uses_subword_table(v) ? 300 : 1024;
  return cfg;
}

std::vector<Sample> lyric_samples(const TextModel& m, std::size_t n) {
  const char* lines[] = {"love in the rain", "gone tonight", "night after night after night", "rain",
                         "the love is gone now"};
  std::vector<Sample> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(m.featurize(lines[i % 5]));
  return out;
}

std::vector<Sample> vector_samples(const TextModelConfig& cfg, std::size_t n, Rng& rng) {
  std::vector<Sample> out(n);
  for (auto& s : out) {
    if (input_kind(cfg.variant) == InputKind::kSequence) s.steps = 1 + rng.below(6);
    s.values.resize((s.steps ? s.steps : 1) * cfg.embed_dim);
    for (auto& v : s.values) v = rng.uniform(-1, 1);
  }
  return out;
}

std::vector<Sample> samples_for(TextModel& m, std::size_t n, Rng& rng) {
  return uses_subword_table(m.config().variant) ? lyric_samples(m, n) : vector_samples(m.config(), n, rng);
}

std::vector<std::size_t> iota(std::size_t n) {
  std::vector<std::size_t> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = i;
  return v;
}

std::size_t recurrent_count(CellType t, std::size_t in, std::size_t h) {
  return t == CellType::kLstm ? in * 4 * h + h * 4 * h + 4 * h : in * 3 * h + h * 2 * h + h * h + 3 * h;
}

TEST(TextModel, ShapesAndUniformStart) {
  for (auto v : kAllTextVariants) {
    SCOPED_TRACE(std::string(variant_name(v)));
    TextModel m(text_config(v), 7, tiny_table());
    Rng rng(2);
    auto samples = samples_for(m, 32, rng);
    auto batch = m.collate(samples, iota(32));
    auto logits = m.forward(batch, false);
    EXPECT_EQ(logits.shape(), (nn::Shape{32, 5}));
    for (const auto& row : m.predict_proba(batch)) {
      double s = 0;
      for (double p : row) s += p;
      EXPECT_NEAR(s, 1.0, 1e-6);
    }
    std::vector<int> labels(32);
    for (std::size_t i = 0; i < 32; ++i) labels[i] = static_cast<int>(i % 5);
    EXPECT_NEAR(nn::cross_entropy(logits, labels).item(), std::log(5.0), 1e-12);
  }
}

TEST(TextModel, ParameterCountsClosedForm) {
  const std::size_t rows = 44, h = 16, C = 5;
  const std::size_t embed = rows * 300;
  struct Case {
    TextVariant v;
    CellType cell;
    std::size_t dirs;
  };
  for (auto c : {Case{TextVariant::kGruAttn, CellType::kGru, 1}, Case{TextVariant::kBigruAttn, CellType::kGru, 2},
                 Case{TextVariant::kLstmAttn, CellType::kLstm, 1},
                 Case{TextVariant::kBilstmAttn, CellType::kLstm, 2}}) {
    TextModel m(text_config(c.v), 1, tiny_table());
    const std::size_t out = c.dirs * h;
    EXPECT_EQ(m.params().parameter_count(),
              embed + c.dirs * recurrent_count(c.cell, 300, h) + out + out * C + C)
        << variant_name(c.v);
  }
  TextModel dense(text_config(TextVariant::kContextualDense), 1);
  EXPECT_EQ(dense.params().parameter_count(), 1024 * 32 + 32 + 32 * C + C);
  TextModel lstm(text_config(TextVariant::kContextualLstm), 1);
  EXPECT_EQ(lstm.params().parameter_count(),
            2 * 1024 + recurrent_count(CellType::kLstm, 1024, h) + h * 32 + 32 + 32 * C + C);
  auto bert_cfg = text_config(TextVariant::kBertDense);
  bert_cfg.embed_dim = 768;
  TextModel bert(bert_cfg, 1);
  EXPECT_EQ(bert.params().parameter_count(), 768 * 32 + 32 + 32 * C + C);

  TextModel uni(text_config(TextVariant::kLstmAttn), 1, tiny_table());
  TextModel bi(text_config(TextVariant::kBilstmAttn), 1, tiny_table());
  auto recurrent = [](const TextModel& m) {
    std::size_t n = 0;
    for (const auto& p : m.params().parameters())
      if (p.name.rfind("rnn.", 0) == 0) n += p.tensor.numel();
    return n;
  };
  EXPECT_EQ(recurrent(bi), 2 * recurrent(uni));
}

TEST(TextModel, ConfigValidation) {
  auto cfg = text_config(TextVariant::kBilstmAttn);
  cfg.embed_dim = 1024;
  EXPECT_THROW(cfg.validate(), ValidationError);
  auto ctx = text_config(TextVariant::kContextualDense);
  ctx.embed_dim = 300;
  EXPECT_THROW(ctx.validate(), ValidationError);
  ctx.embed_dim = 768;
  EXPECT_NO_THROW(ctx.validate());
  auto bad_table = textfeat::EmbeddingTable::random(50, 4, {}, 1, 0.1);
  EXPECT_THROW(TextModel(text_config(TextVariant::kGruAttn), 1, bad_table), ValidationError);
  EXPECT_THROW(parse_variant("transformer"), ValidationError);
  for (auto v : kAllTextVariants) EXPECT_EQ(parse_variant(variant_name(v)), v);
  auto kv = text_config(TextVariant::kContextualLstm).to_kv();
  auto back = TextModelConfig::from_kv(kv);
  EXPECT_EQ(back.variant, TextVariant::kContextualLstm);
  EXPECT_EQ(back.hidden, 16u);
  EXPECT_EQ(back.embed_dim, 1024u);
}

TEST(TextModel, FeaturizeUsesTableRows) {
  auto table = tiny_table();
  TextModel m(text_config(TextVariant::kGruAttn), 1, table);
  auto s = m.featurize("Love, RAIN!");
  ASSERT_EQ(s.tokens.size(), 2u);
  EXPECT_EQ(s.tokens[0], table.unit_rows("love"));
  EXPECT_EQ(s.tokens[1], table.unit_rows("rain"));
  TextModel dense(text_config(TextVariant::kContextualDense), 1);
  EXPECT_THROW(dense.featurize("x"), ValidationError);
}

TEST(TextModel, EmbeddingsStartFromTable) {
  auto table = tiny_table(4);
  TextModel m(text_config(TextVariant::kBilstmAttn), 1, table);
  ASSERT_EQ(m.embedding().numel(), table.values().size());
  for (std::size_t i = 0; i < table.values().size(); ++i) {
    EXPECT_EQ(m.embedding().values()[i], static_cast<double>(static_cast<float>(table.values()[i])));
  }
}

TEST(TextModel, LengthOneDirectionsAgree) {
  // One step reversed is the same step, so equal cell weights give equal
  // halves of the bidirectional state.
  Rng rng(1);
  nn::ParameterSet ps;
  nn::Rnn rnn(ps, "rnn", CellType::kLstm, 5, 8, true, rng);
  rnn.backward_cell.input_kernel.values() = rnn.forward_cell.input_kernel.values();
  rnn.backward_cell.recurrent_kernel.values() = rnn.forward_cell.recurrent_kernel.values();
  rnn.backward_cell.bias.values() = rnn.forward_cell.bias.values();
  auto x = random_tensor({2, 1, 5}, rng, -1, 1, false);
  auto out = rnn(x, {1, 1});
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t u = 0; u < 8; ++u) EXPECT_EQ(out.last.values()[b * 16 + u], out.last.values()[b * 16 + 8 + u]);
}

TEST(TextModel, DeterministicAndCheckpointExact) {
  for (auto v : kAllTextVariants) {
    SCOPED_TRACE(std::string(variant_name(v)));
    auto cfg = text_config(v);
    if (v == TextVariant::kBertDense) cfg.embed_dim = 768;
    TextModel a(cfg, 9, tiny_table());
    TextModel b(cfg, 9, tiny_table());
    Rng rng(3);
    auto samples = samples_for(a, 6, rng);
    auto batch = a.collate(samples, iota(6));
    Rng out_rng(4);
    testing::randomize_output(a, out_rng);
    Rng out_rng2(4);
    testing::randomize_output(b, out_rng2);
    auto pa = a.predict_proba(batch);
    EXPECT_EQ(pa, b.predict_proba(batch));

    testing::TempDir dir("ck");
    const auto path = (dir.path() / "m.ck").string();
    save_model(path, a);
    auto loaded = load_model(path);
    EXPECT_EQ(loaded->predict_proba(batch), pa);
    EXPECT_EQ(loaded->metadata(), a.metadata());
  }
}

TEST(AudioModel, FullSizeShapesAndSilence) {
  AudioModelConfig cfg;
  EXPECT_EQ(cfg.final_map(1405), (std::pair<std::size_t, std::size_t>{1, 1}));
  EXPECT_LE(cfg.flattened_units(), 1024u);
  AudioModel m(cfg, 3);
  std::vector<Sample> s(2);
  for (auto& x : s) x.values.assign(128 * 1405, -10.0);
  auto batch = m.collate(s, iota(2));
  EXPECT_EQ(batch.input.shape(), (nn::Shape{2, 1, 128, 1405}));
  auto logits = m.forward(batch, false);
  EXPECT_EQ(logits.shape(), (nn::Shape{2, 4}));
  std::vector<int> labels{0, 2};
  EXPECT_NEAR(nn::cross_entropy(logits, labels).item(), std::log(4.0), 1e-12);
  EXPECT_NEAR(nn::cross_entropy(m.forward(batch, true), labels).item(), std::log(4.0), 1e-12);
}

TEST(AudioModel, ParameterCountClosedForm) {
  AudioModelConfig cfg;
  AudioModel m(cfg, 1);
  std::size_t expect = 2 * 128;
  std::size_t in = 1;
  for (auto c : cfg.channels) {
    expect += c * in * 9 + 2 * c;
    in = c;
  }
  expect += cfg.flattened_units() * 4 + 4;
  EXPECT_EQ(m.params().parameter_count(), expect);
}

TEST(AudioModel, RejectsWrongInput) {
  auto cfg = testing::small_audio_config();
  AudioModel m(cfg, 1);
  Batch b;
  b.kind = InputKind::kSpectrogram;
  b.size = 1;
  b.input = nn::Tensor::zeros({1, 1, 64, 64});
  EXPECT_THROW(m.forward(b, false), ShapeError);
  AudioModelConfig wide;
  wide.pools = {{2, 2}, {2, 2}, {2, 2}, {2, 2}, {2, 2}};
  EXPECT_THROW(wide.validate(), ValidationError);
  EXPECT_EQ(join_pools(parse_pools("2x4,4x5")), "2x4,4x5");
  EXPECT_THROW(parse_pools("2x"), ValidationError);
}

TEST(AudioModel, CheckpointExactAfterTrainingStep) {
  auto cfg = testing::small_audio_config();
  AudioModel m(cfg, 2);
  Rng rng(5);
  std::vector<Sample> s(3);
  for (auto& x : s) {
    x.values.resize(128 * 64);
    for (auto& v : x.values) v = rng.uniform(-4, 1);
  }
  auto batch = m.collate(s, iota(3));
  std::vector<int> labels{0, 1, 3};
  nn::cross_entropy(m.forward(batch, true), labels).backward();  // moves running statistics
  testing::TempDir dir("ck");
  const auto path = (dir.path() / "a.ck").string();
  save_model(path, m);
  auto loaded = load_model(path);
  EXPECT_EQ(loaded->predict_proba(batch), m.predict_proba(batch));
}

TEST(GradCheck, TextVariants) {
  for (auto v : kAllTextVariants) {
    auto r = testing::text_model_gradcheck(v);
    EXPECT_LT(r.max_rel_error, 1e-4) << variant_name(v) << " " << r.worst;
  }
}

TEST(GradCheck, AudioModel) {
  auto r = testing::audio_model_gradcheck();
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst;
}

}  // namespace
}  // namespace lyricmood::models
