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

#include <algorithm>
#include <sstream>

#include "lyricmood/error.hpp"
#include "lyricmood/ops.hpp"

namespace lyricmood::models {

using namespace nn;

namespace {

constexpr std::pair<TextVariant, std::string_view> kVariantNames[] = {
    {TextVariant::kGruAttn, "gru_attn"},
    {TextVariant::kBigruAttn, "bigru_attn"},
    {TextVariant::kLstmAttn, "lstm_attn"},
    {TextVariant::kBilstmAttn, "bilstm_attn"},
    {TextVariant::kContextualDense, "contextual_dense"},
    {TextVariant::kContextualLstm, "contextual_lstm"},
    {TextVariant::kBertDense, "bert_dense"},
};

std::string join_lines(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) {
    out += s;
    out += '\n';
  }
  return out;
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) out.push_back(line);
  return out;
}

std::size_t positive(const KeyValues& kv, const std::string& key, std::size_t fallback) {
  const auto v = kv.get_int(key, static_cast<std::int64_t>(fallback));
  if (v <= 0) throw ValidationError("config key '" + key + "' must be positive");
  return static_cast<std::size_t>(v);
}

std::string format_number(double v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

}  // namespace

std::string_view variant_name(TextVariant v) {
  for (const auto& [k, name] : kVariantNames) {
    if (k == v) return name;
  }
  return "unknown";
}

std::optional<TextVariant> try_parse_variant(std::string_view s) {
  for (const auto& [k, name] : kVariantNames) {
    if (name == s) return k;
  }
  return std::nullopt;
}

TextVariant parse_variant(std::string_view s) {
  if (auto v = try_parse_variant(s)) return *v;
  std::string names;
  for (const auto& [k, name] : kVariantNames) names += (names.empty() ? "" : ", ") + std::string(name);
  throw ValidationError("unknown model variant '" + std::string(s) + "' (expected one of " + names + ")");
}

InputKind input_kind(TextVariant v) {
  switch (v) {
    case TextVariant::kContextualDense:
    case TextVariant::kBertDense:
      return InputKind::kVector;
    case TextVariant::kContextualLstm:
      return InputKind::kSequence;
    default:
      return InputKind::kTokenBags;
  }
}

bool uses_subword_table(TextVariant v) { return input_kind(v) == InputKind::kTokenBags; }

void TextModelConfig::validate() const {
  if (hidden == 0 || classes < 2 || dense_hidden == 0 || max_tokens == 0) {
    throw ValidationError("text model sizes must be positive with at least 2 classes");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ValidationError("dropout must lie in [0, 1)");
  if (uses_subword_table(variant)) {
    if (embed_dim != 300) {
      throw ValidationError(std::string(variant_name(variant)) + " needs 300-dimensional embeddings, got " +
                            std::to_string(embed_dim));
    }
  } else if (embed_dim != 1024 && embed_dim != 768) {
    throw ValidationError(std::string(variant_name(variant)) +
                          " needs 1024- or 768-dimensional embeddings, got " + std::to_string(embed_dim));
  }
}

KeyValues TextModelConfig::to_kv() const {
  KeyValues kv;
  kv.set("variant", std::string(variant_name(variant)));
  kv.set("hidden", std::to_string(hidden));
  kv.set("classes", std::to_string(classes));
  kv.set("embed_dim", std::to_string(embed_dim));
  kv.set("dropout", format_number(dropout));
  kv.set("dense_hidden", std::to_string(dense_hidden));
  kv.set("max_tokens", std::to_string(max_tokens));
  kv.set("train_embeddings", train_embeddings ? "1" : "0");
  return kv;
}

TextModelConfig TextModelConfig::from_kv(const KeyValues& kv) {
  kv.require_known({"variant", "hidden", "classes", "embed_dim", "dropout", "dense_hidden",
                    "max_tokens", "train_embeddings"});
  TextModelConfig c;
  if (auto v = kv.find("variant")) c.variant = parse_variant(*v);
  if (!uses_subword_table(c.variant)) c.embed_dim = c.variant == TextVariant::kBertDense ? 768 : 1024;
  c.hidden = positive(kv, "hidden", c.hidden);
  c.classes = positive(kv, "classes", c.classes);
  c.embed_dim = positive(kv, "embed_dim", c.embed_dim);
  c.dropout = kv.get_double("dropout", c.dropout);
  c.dense_hidden = positive(kv, "dense_hidden", c.dense_hidden);
  c.max_tokens = positive(kv, "max_tokens", c.max_tokens);
  c.train_embeddings = kv.get_bool("train_embeddings", c.train_embeddings);
  c.validate();
  return c;
}

std::vector<std::pair<std::size_t, std::size_t>> parse_pools(std::string_view text) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto comma = text.find(',', pos);
    if (comma == std::string_view::npos) comma = text.size();
    auto item = text.substr(pos, comma - pos);
    const auto x = item.find('x');
    if (x == std::string_view::npos) {
      throw ValidationError("pool '" + std::string(item) + "' is not of the form FxT");
    }
    auto f = parse_size_list(item.substr(0, x));
    auto t = parse_size_list(item.substr(x + 1));
    if (f.size() != 1 || t.size() != 1) {
      throw ValidationError("pool '" + std::string(item) + "' is not of the form FxT");
    }
    out.emplace_back(f[0], t[0]);
    pos = comma + 1;
  }
  return out;
}

std::string join_pools(const std::vector<std::pair<std::size_t, std::size_t>>& pools) {
  std::string out;
  for (std::size_t i = 0; i < pools.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(pools[i].first) + "x" + std::to_string(pools[i].second);
  }
  return out;
}

std::pair<std::size_t, std::size_t> AudioModelConfig::final_map(std::size_t t) const {
  std::size_t f = n_mels;
  for (const auto& [pf, pt] : pools) {
    f /= std::min(pf, f);
    t /= std::min(pt, t);
  }
  return {f, t};
}

std::size_t AudioModelConfig::flattened_units() const {
  auto [f, t] = final_map(frames);
  return channels.empty() ? 0 : channels.back() * f * t;
}

void AudioModelConfig::validate() const {
  if (channels.empty() || channels.size() != pools.size()) {
    throw ValidationError("audio model needs one pool per convolution block");
  }
  if (kernel % 2 == 0) throw ValidationError("convolution kernel must be odd");
  if (classes < 2 || n_mels == 0 || frames == 0) {
    throw ValidationError("audio model sizes must be positive with at least 2 classes");
  }
  if (flattened_units() > 1024) {
    throw ValidationError("pool schedule leaves " + std::to_string(flattened_units()) +
                          " flattened units, more than 1024");
  }
}

KeyValues AudioModelConfig::to_kv() const {
  KeyValues kv;
  kv.set("channels", join_size_list(channels));
  kv.set("pools", join_pools(pools));
  kv.set("kernel", std::to_string(kernel));
  kv.set("classes", std::to_string(classes));
  kv.set("n_mels", std::to_string(n_mels));
  kv.set("frames", std::to_string(frames));
  return kv;
}

AudioModelConfig AudioModelConfig::from_kv(const KeyValues& kv) {
  kv.require_known({"channels", "pools", "kernel", "classes", "n_mels", "frames"});
  AudioModelConfig c;
  if (auto v = kv.find("channels")) c.channels = parse_size_list(*v);
  if (auto v = kv.find("pools")) c.pools = parse_pools(*v);
  c.kernel = positive(kv, "kernel", c.kernel);
  c.classes = positive(kv, "classes", c.classes);
  c.n_mels = positive(kv, "n_mels", c.n_mels);
  c.frames = positive(kv, "frames", c.frames);
  c.validate();
  return c;
}

Batch collate(InputKind kind, std::size_t dim, std::span<const Sample> samples,
              std::span<const std::size_t> index) {
  if (index.empty()) throw ShapeError("collate: empty batch");
  Batch b;
  b.kind = kind;
  b.size = index.size();
  const std::size_t B = b.size;
  switch (kind) {
    case InputKind::kTokenBags: {
      for (auto i : index) b.lengths.push_back(samples[i].tokens.size());
      b.steps = std::max<std::size_t>(1, *std::max_element(b.lengths.begin(), b.lengths.end()));
      b.bags.resize(B * b.steps);
      for (std::size_t k = 0; k < B; ++k) {
        const auto& toks = samples[index[k]].tokens;
        std::copy(toks.begin(), toks.end(), b.bags.begin() + static_cast<std::ptrdiff_t>(k * b.steps));
      }
      break;
    }
    case InputKind::kVector: {
      std::vector<double> v(B * dim);
      for (std::size_t k = 0; k < B; ++k) {
        const auto& s = samples[index[k]];
        if (s.values.size() != dim) {
          throw ShapeError("collate: sample has " + std::to_string(s.values.size()) +
                           " values, model expects " + std::to_string(dim));
        }
        std::copy(s.values.begin(), s.values.end(), v.begin() + static_cast<std::ptrdiff_t>(k * dim));
      }
      b.input = Tensor::from({B, dim}, std::move(v));
      break;
    }
    case InputKind::kSequence: {
      for (auto i : index) {
        const auto& s = samples[i];
        if (s.values.size() != s.steps * dim) {
          throw ShapeError("collate: sequence sample does not have " + std::to_string(dim) +
                           " values per step");
        }
        b.lengths.push_back(s.steps);
      }
      b.steps = std::max<std::size_t>(1, *std::max_element(b.lengths.begin(), b.lengths.end()));
      std::vector<double> v(B * b.steps * dim, 0.0);
      for (std::size_t k = 0; k < B; ++k) {
        const auto& s = samples[index[k]];
        std::copy(s.values.begin(), s.values.end(),
                  v.begin() + static_cast<std::ptrdiff_t>(k * b.steps * dim));
      }
      b.input = Tensor::from({B, b.steps, dim}, std::move(v));
      break;
    }
    case InputKind::kSpectrogram: {
      const std::size_t frames = samples[index[0]].values.size() / dim;
      std::vector<double> v;
      v.reserve(B * dim * frames);
      for (auto i : index) {
        const auto& s = samples[i];
        if (s.values.size() != dim * frames || frames == 0) {
          throw ShapeError("collate: spectrograms must share one " + std::to_string(dim) +
                           " x T shape");
        }
        v.insert(v.end(), s.values.begin(), s.values.end());
      }
      b.steps = frames;
      b.input = Tensor::from({B, 1, dim, frames}, std::move(v));
      break;
    }
  }
  return b;
}

std::vector<std::vector<double>> Model::predict_proba(const Batch& batch) {
  NoGradGuard guard;
  Tensor p = softmax(forward(batch, false));
  const std::size_t C = p.dim(1);
  std::vector<std::vector<double>> out(p.dim(0));
  for (std::size_t n = 0; n < out.size(); ++n) {
    out[n].assign(p.values().begin() + static_cast<std::ptrdiff_t>(n * C),
                  p.values().begin() + static_cast<std::ptrdiff_t>((n + 1) * C));
  }
  return out;
}

TextModel::TextModel(const TextModelConfig& cfg, std::uint64_t seed, textfeat::EmbeddingTable table)
    : cfg_(cfg) {
  cfg_.validate();
  Rng init(seed);
  rng_ = Rng(seed ^ 0x9e3779b97f4a7c15ULL);
  const std::size_t C = cfg_.classes;
  switch (cfg_.variant) {
    case TextVariant::kGruAttn:
    case TextVariant::kBigruAttn:
    case TextVariant::kLstmAttn:
    case TextVariant::kBilstmAttn: {
      if (table.dim() != cfg_.embed_dim) {
        throw ValidationError("embedding table has dimension " + std::to_string(table.dim()) +
                              ", model expects " + std::to_string(cfg_.embed_dim));
      }
      const std::size_t rows = table.rows();
      embedding_ = params_.add_parameter(
          "embedding", Tensor::from({rows, cfg_.embed_dim}, std::move(table.values())));
      embedding_.node()->sparse_rows = true;
      if (!cfg_.train_embeddings) embedding_.set_requires_grad(false);
      table.values().clear();
      table.values().shrink_to_fit();
      index_ = std::move(table);
      const bool gru = cfg_.variant == TextVariant::kGruAttn || cfg_.variant == TextVariant::kBigruAttn;
      const bool bi = cfg_.variant == TextVariant::kBigruAttn || cfg_.variant == TextVariant::kBilstmAttn;
      rnn_ = Rnn(params_, "rnn", gru ? CellType::kGru : CellType::kLstm, cfg_.embed_dim, cfg_.hidden, bi,
                 init);
      attention_ = Attention(params_, "attention", rnn_.output_size(), init);
      out_ = Dense(params_, "output", rnn_.output_size(), C, init, true);
      break;
    }
    case TextVariant::kContextualDense:
    case TextVariant::kBertDense:
      hidden_ = Dense(params_, "hidden", cfg_.embed_dim, cfg_.dense_hidden, init);
      out_ = Dense(params_, "output", cfg_.dense_hidden, C, init, true);
      break;
    case TextVariant::kContextualLstm:
      norm_ = BatchNorm(params_, "norm", cfg_.embed_dim, 1);
      rnn_ = Rnn(params_, "rnn", CellType::kLstm, cfg_.embed_dim, cfg_.hidden, false, init);
      hidden_ = Dense(params_, "hidden", cfg_.hidden, cfg_.dense_hidden, init);
      out_ = Dense(params_, "output", cfg_.dense_hidden, C, init, true);
      break;
  }
}

bool TextModel::clip_gradients() const {
  return cfg_.variant != TextVariant::kContextualDense && cfg_.variant != TextVariant::kBertDense;
}

Tensor TextModel::forward(const Batch& batch, bool training) {
  if (batch.kind != input_kind()) {
    throw ShapeError(std::string(variant_name(cfg_.variant)) + ": batch holds the wrong input kind");
  }
  const std::size_t B = batch.size;
  switch (cfg_.variant) {
    case TextVariant::kContextualDense: {
      Tensor x = dropout(batch.input, cfg_.dropout, training, rng_);
      return out_(relu(hidden_(x)));
    }
    case TextVariant::kBertDense:
      return out_(relu(hidden_(batch.input)));
    case TextVariant::kContextualLstm: {
      if (batch.input.rank() != 3 || batch.input.dim(2) != cfg_.embed_dim) {
        throw ShapeError("contextual_lstm: input " + shape_str(batch.input.shape()) +
                         " does not have " + std::to_string(cfg_.embed_dim) + " features");
      }
      std::vector<std::size_t> lengths = batch.lengths;
      Tensor x = batch.input;
      const bool any = std::any_of(lengths.begin(), lengths.end(), [](std::size_t l) { return l > 0; });
      if (any) x = unpack_steps(norm_(pack_steps(x, lengths), training), lengths, batch.steps);
      x = dropout(x, cfg_.dropout, training, rng_);
      return out_(relu(hidden_(rnn_(x, lengths).last)));
    }
    default: {
      Tensor tokens = embedding_bag_mean(embedding_, batch.bags);
      Tensor seq = reshape(tokens, {B, batch.steps, cfg_.embed_dim});
      seq = dropout(seq, cfg_.dropout, training, rng_);
      RnnOutput h = rnn_(seq, batch.lengths);
      return out_(attention_(h.sequence, batch.lengths));
    }
  }
}

Sample TextModel::featurize(std::string_view text) const {
  if (!uses_subword_table(cfg_.variant)) {
    throw ValidationError(std::string(variant_name(cfg_.variant)) +
                          " reads precomputed embeddings, not raw text");
  }
  Sample s;
  auto tokens = textfeat::normalize(text);
  if (tokens.size() > cfg_.max_tokens) tokens.resize(cfg_.max_tokens);
  for (const auto& t : tokens) s.tokens.push_back(index_.unit_rows(t));
  s.steps = s.tokens.size();
  return s;
}

std::map<std::string, std::string> TextModel::metadata() const {
  std::map<std::string, std::string> m;
  m["kind"] = "text";
  m["config"] = cfg_.to_kv().to_string();
  if (uses_subword_table(cfg_.variant)) {
    m["vocab"] = join_lines(index_.vocab());
    m["buckets"] = std::to_string(index_.bucket_count());
    m["ngram"] = std::to_string(index_.min_n()) + "," + std::to_string(index_.max_n());
  }
  return m;
}

AudioModel::AudioModel(const AudioModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  Rng init(seed);
  rng_ = Rng(seed ^ 0x9e3779b97f4a7c15ULL);
  freq_norm_ = BatchNorm(params_, "freq_norm", cfg_.n_mels, 2);
  std::size_t in = 1;
  for (std::size_t i = 0; i < cfg_.channels.size(); ++i) {
    const std::string name = "block" + std::to_string(i + 1);
    convs_.emplace_back(params_, name + ".conv", in, cfg_.channels[i], cfg_.kernel, init);
    norms_.emplace_back(params_, name + ".norm", cfg_.channels[i], 1);
    in = cfg_.channels[i];
  }
  out_ = Dense(params_, "output", cfg_.flattened_units(), cfg_.classes, init, true);
}

Tensor AudioModel::forward(const Batch& batch, bool training) {
  const Tensor& x0 = batch.input;
  if (batch.kind != InputKind::kSpectrogram || x0.rank() != 4 || x0.dim(1) != 1 ||
      x0.dim(2) != cfg_.n_mels) {
    throw ShapeError("audio model expects [B,1," + std::to_string(cfg_.n_mels) + ",T] input, got " +
                     (x0.defined() ? shape_str(x0.shape()) : std::string("nothing")));
  }
  auto [ff, ft] = cfg_.final_map(x0.dim(3));
  if (cfg_.channels.back() * ff * ft != cfg_.flattened_units()) {
    throw ShapeError("audio model built for " + std::to_string(cfg_.frames) + " frames, got " +
                     std::to_string(x0.dim(3)));
  }
  Tensor x = freq_norm_(x0, training);
  for (std::size_t i = 0; i < convs_.size(); ++i) {
    x = conv_block(x, convs_[i], norms_[i], cfg_.pools[i].first, cfg_.pools[i].second, training);
  }
  return out_(flatten(x));
}

std::map<std::string, std::string> AudioModel::metadata() const {
  return {{"kind", "audio"}, {"config", cfg_.to_kv().to_string()}};
}

void save_model(const std::string& path, const Model& model) {
  save_checkpoint_file(path, model.metadata(), model.params());
}

std::unique_ptr<Model> load_model(const Checkpoint& ck) {
  auto get = [&](const std::string& key) -> const std::string& {
    auto it = ck.metadata.find(key);
    if (it == ck.metadata.end()) throw ValidationError("checkpoint lacks '" + key + "' metadata");
    return it->second;
  };
  const auto& kind = get("kind");
  const auto kv = KeyValues::parse_string(get("config"));
  std::unique_ptr<Model> model;
  if (kind == "audio") {
    model = std::make_unique<AudioModel>(AudioModelConfig::from_kv(kv), 0);
  } else if (kind == "text") {
    const auto cfg = TextModelConfig::from_kv(kv);
    textfeat::EmbeddingTable table;
    if (uses_subword_table(cfg.variant)) {
      const auto ngram = parse_size_list(get("ngram"));
      const auto buckets = parse_size_list(get("buckets"));
      if (ngram.size() != 2 || buckets.size() != 1) throw ValidationError("malformed subword metadata");
      table = textfeat::EmbeddingTable(cfg.embed_dim, buckets[0], split_lines(get("vocab")),
                                       static_cast<int>(ngram[0]), static_cast<int>(ngram[1]));
    }
    model = std::make_unique<TextModel>(cfg, 0, std::move(table));
  } else {
    throw ValidationError("unknown model kind '" + kind + "'");
  }
  load_state(ck, model->params());
  return model;
}

std::unique_ptr<Model> load_model(const std::string& path) { return load_model(read_checkpoint_file(path)); }

}  // namespace lyricmood::models
