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

// Dataset rows to model samples, for the lyrics and the audio branch.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lyricmood/audiofeat.hpp"
#include "lyricmood/models.hpp"
#include "lyricmood/syncdata.hpp"
#include "lyricmood/textfeat.hpp"

namespace lyricmood::pipeline {

struct LabeledSamples {
  std::vector<models::Sample> samples;
  std::vector<int> labels;
  std::vector<std::int64_t> groups;  // track ids
};

// Normalized tokens seen at least `min_count` times, in first-seen order.
std::vector<std::string> build_vocab(std::span<const syncdata::DatasetRow> rows,
                                     std::size_t min_count = 1);

// Subword token bags looked up in the model's own table.
LabeledSamples token_samples(const models::TextModel& model,
                             std::span<const syncdata::DatasetRow> rows);

// Contextual inputs are keyed by the row's position in the dataset. Rows
// without an entry are a ValidationError.
LabeledSamples vector_samples(std::span<const syncdata::DatasetRow> rows,
                              const textfeat::ContextualEmbeddingFile& file);
LabeledSamples sequence_samples(std::span<const syncdata::DatasetRow> rows,
                                const textfeat::ContextualSequenceFile& file,
                                std::size_t max_steps);

// One label-pure excerpt of a track.
struct AudioChunk {
  std::int64_t track_id = 0;
  double start = 0.0;
  double end = 0.0;
  syncdata::Emotion label = syncdata::Emotion::kSadness;
  std::filesystem::path audio_path;
};

// Segments every track, chunks it and drops chunks whose label is at or
// above `classes` (disgust for the 4-class audio model). Audio paths are
// resolved against `audio_dir`.
std::vector<AudioChunk> audio_chunks(std::span<const syncdata::DatasetRow> rows,
                                     const std::map<std::int64_t, syncdata::TrackMeta>& meta,
                                     const std::filesystem::path& audio_dir,
                                     std::size_t classes = 4,
                                     double max_seconds = syncdata::kChunkSeconds);

struct AudioFeatureOptions {
  audio::SourceSeparator separator;
  double excerpt_seconds = audio::kExcerptSeconds;
  std::size_t jobs = 1;
  // Mel cache directory; empty disables caching.
  std::filesystem::path cache_dir;
};

// Frames of one excerpt at 12 kHz.
std::size_t excerpt_frames(double excerpt_seconds);

// Cache file name for a chunk under the given options.
std::string cache_key(const AudioChunk& chunk, const AudioFeatureOptions& opts);

// Log-mel spectrograms of every chunk, values rounded to f32 so cached and
// fresh features agree bit for bit. Tracks are processed `jobs` at a time.
std::vector<audio::MelSpectrogram> audio_features(std::span<const AudioChunk> chunks,
                                                  const AudioFeatureOptions& opts);

LabeledSamples audio_samples(std::span<const AudioChunk> chunks,
                             std::span<const audio::MelSpectrogram> mels);

}  // namespace lyricmood::pipeline
