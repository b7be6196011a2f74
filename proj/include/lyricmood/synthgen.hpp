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

// Synthetic synchronized-lyrics corpora with matching audio.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lyricmood/audiofeat.hpp"
#include "lyricmood/syncdata.hpp"

namespace lyricmood::synth {

struct SynthSpec {
  std::size_t tracks = 100;
  std::size_t lines_per_track = 20;
  // Probability that a word is replaced by a filler or by another class's
  // keyword.
  double noise = 0.2;
  std::uint64_t seed = 1;
  // Target share of rows per class, indexed by emotion code. Its length is
  // the number of classes.
  std::vector<double> proportions = {43.9, 40.2, 7.7, 6.0, 2.1};
  std::size_t min_words = 4;
  std::size_t max_words = 8;

  int sample_rate = audio::kTargetRate;
  // Vocal-to-accompaniment power ratio over the whole track; infinity
  // leaves the accompaniment silent.
  double snr_db = 0.0;
  double vocal_amplitude = 0.3;
};

struct SynthCorpus {
  std::vector<syncdata::DatasetRow> rows;
  std::vector<syncdata::TrackMeta> tracks;
};

// Keywords used only by class `c`, and the shared fillers.
const std::vector<std::string>& keyword_pool(syncdata::Emotion e);
const std::vector<std::string>& filler_words();

// Frequency band [lo, hi) in Hz that carries the vocal fundamental of each
// class.
std::pair<double, double> class_band(syncdata::Emotion e);

// Rows and track metadata. Every track carries one label; track labels
// follow the proportions by largest-remainder allocation. Audio paths are
// `<id>.wav`.
SynthCorpus gen_text_corpus(const SynthSpec& spec);

struct TrackAudio {
  std::int64_t track_id = 0;
  audio::AudioClip stem;           // vocals only
  audio::AudioClip accompaniment;  // label-independent tones and noise
  audio::AudioClip mixture;        // stem + accompaniment
};

// Vocals sound only inside sung rows, with a fundamental drawn from the
// row label's band. The accompaniment holds tones of the same timbre in
// randomly chosen class bands plus white noise.
TrackAudio gen_track_audio(const SynthSpec& spec, const syncdata::TrackMeta& track,
                           std::span<const syncdata::DatasetRow> rows);

// Writes `<dir>/<id>.wav` mixtures and `<stems_dir>/<id>.vocals.wav` stems
// as 32-bit float WAV for every track, `jobs` tracks at a time.
void gen_audio(const SynthSpec& spec, const SynthCorpus& corpus, const std::filesystem::path& dir,
               const std::filesystem::path& stems_dir, std::size_t jobs = 1);

}  // namespace lyricmood::synth
