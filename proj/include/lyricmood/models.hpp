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

// The text and audio classifiers.

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lyricmood/checkpoint.hpp"
#include "lyricmood/config.hpp"
#include "lyricmood/layers.hpp"
#include "lyricmood/random.hpp"
#include "lyricmood/textfeat.hpp"

namespace lyricmood::models {

using nn::Tensor;

enum class TextVariant {
  kGruAttn,
  kBigruAttn,
  kLstmAttn,
  kBilstmAttn,
  kContextualDense,
  kContextualLstm,
  kBertDense,
};

inline constexpr TextVariant kAllTextVariants[] = {
    TextVariant::kGruAttn,          TextVariant::kBigruAttn,       TextVariant::kLstmAttn,
    TextVariant::kBilstmAttn,       TextVariant::kContextualDense, TextVariant::kContextualLstm,
    TextVariant::kBertDense,
};

std::string_view variant_name(TextVariant v);
std::optional<TextVariant> try_parse_variant(std::string_view s);
TextVariant parse_variant(std::string_view s);  // ValidationError when unknown

// What a model consumes per sample.
enum class InputKind {
  kTokenBags,    // subword rows per token, looked up in the model's table
  kVector,       // one fixed vector
  kSequence,     // [steps, dim] per-token vectors
  kSpectrogram,  // [n_mels, frames]
};

InputKind input_kind(TextVariant v);
bool uses_subword_table(TextVariant v);

struct TextModelConfig {
  TextVariant variant = TextVariant::kBilstmAttn;
  std::size_t hidden = 128;
  std::size_t classes = 5;
  std::size_t embed_dim = 300;
  double dropout = 0.2;
  std::size_t dense_hidden = 256;
  std::size_t max_tokens = 64;
  bool train_embeddings = true;

  // Throws ValidationError on an inconsistent configuration.
  void validate() const;
  KeyValues to_kv() const;
  static TextModelConfig from_kv(const KeyValues& kv);
};

struct AudioModelConfig {
  std::vector<std::size_t> channels = {32, 64, 64, 128, 128};
  std::vector<std::pair<std::size_t, std::size_t>> pools = {{2, 4}, {2, 4}, {2, 4}, {4, 5}, {4, 4}};
  std::size_t kernel = 3;
  std::size_t classes = 4;
  std::size_t n_mels = 128;
  std::size_t frames = 1405;

  // Final map extent after the pool schedule; pools larger than the
  // remaining extent shrink to it.
  std::pair<std::size_t, std::size_t> final_map(std::size_t frames) const;
  std::size_t flattened_units() const;

  void validate() const;
  KeyValues to_kv() const;
  static AudioModelConfig from_kv(const KeyValues& kv);
};

// "2x4,2x4" <-> pool list.
std::vector<std::pair<std::size_t, std::size_t>> parse_pools(std::string_view text);
std::string join_pools(const std::vector<std::pair<std::size_t, std::size_t>>& pools);

// One model input. Token bags are used by subword models, `values` by the
// others (a vector, a row-major [steps, dim] sequence, or a row-major
// [n_mels, frames] spectrogram).
struct Sample {
  std::vector<std::vector<std::size_t>> tokens;
  std::vector<double> values;
  std::size_t steps = 0;
};

struct Batch {
  InputKind kind = InputKind::kVector;
  std::size_t size = 0;
  std::size_t steps = 0;
  std::vector<std::size_t> lengths;
  std::vector<std::vector<std::size_t>> bags;  // [size * steps], empty bags pad
  Tensor input;  // [B,d], [B,T,d] or [B,1,F,T]
};

// Pads sequences to the longest one in the selection.
Batch collate(InputKind kind, std::size_t dim, std::span<const Sample> samples,
              std::span<const std::size_t> index);

class Model {
 public:
  virtual ~Model() = default;

  // Unnormalized class scores [B, C].
  virtual Tensor forward(const Batch& batch, bool training) = 0;

  virtual InputKind input_kind() const = 0;
  virtual std::size_t input_dim() const = 0;
  virtual std::size_t classes() const = 0;
  virtual bool clip_gradients() const { return false; }
  // Everything besides tensors that a checkpoint needs to rebuild the model.
  virtual std::map<std::string, std::string> metadata() const = 0;

  nn::ParameterSet& params() { return params_; }
  const nn::ParameterSet& params() const { return params_; }

  // Dropout stream; reseeded by the trainer for reproducible runs.
  Rng& rng() { return rng_; }

  // Softmax probabilities at inference time, one row per sample.
  std::vector<std::vector<double>> predict_proba(const Batch& batch);

  Batch collate(std::span<const Sample> samples, std::span<const std::size_t> index) const {
    return models::collate(input_kind(), input_dim(), samples, index);
  }

 protected:
  nn::ParameterSet params_;
  Rng rng_{0};
};

class TextModel : public Model {
 public:
  // Subword variants take their table (values become the trainable
  // embedding); other variants ignore `table`.
  TextModel(const TextModelConfig& cfg, std::uint64_t seed, textfeat::EmbeddingTable table = {});

  Tensor forward(const Batch& batch, bool training) override;
  InputKind input_kind() const override { return models::input_kind(cfg_.variant); }
  std::size_t input_dim() const override { return cfg_.embed_dim; }
  std::size_t classes() const override { return cfg_.classes; }
  bool clip_gradients() const override;
  std::map<std::string, std::string> metadata() const override;

  const TextModelConfig& config() const { return cfg_; }
  // Subword model input for one lyric; ValidationError for other variants.
  Sample featurize(std::string_view text) const;
  const nn::Attention& attention() const { return attention_; }
  Tensor embedding() const { return embedding_; }

 private:
  TextModelConfig cfg_;
  textfeat::EmbeddingTable index_;  // vocabulary and buckets only
  Tensor embedding_;
  nn::Rnn rnn_;
  nn::Attention attention_;
  nn::BatchNorm norm_;
  nn::Dense hidden_;
  nn::Dense out_;
};

class AudioModel : public Model {
 public:
  AudioModel(const AudioModelConfig& cfg, std::uint64_t seed);

  Tensor forward(const Batch& batch, bool training) override;
  InputKind input_kind() const override { return InputKind::kSpectrogram; }
  std::size_t input_dim() const override { return cfg_.n_mels; }
  std::size_t classes() const override { return cfg_.classes; }
  std::map<std::string, std::string> metadata() const override;

  const AudioModelConfig& config() const { return cfg_; }

 private:
  AudioModelConfig cfg_;
  nn::BatchNorm freq_norm_;
  std::vector<nn::Conv2d> convs_;
  std::vector<nn::BatchNorm> norms_;
  nn::Dense out_;
};

// Checkpoint round trip through the model metadata.
void save_model(const std::string& path, const Model& model);
std::unique_ptr<Model> load_model(const nn::Checkpoint& ck);
std::unique_ptr<Model> load_model(const std::string& path);

}  // namespace lyricmood::models
