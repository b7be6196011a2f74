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

#include "lyricmood/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "lyricmood/error.hpp"
#include "lyricmood/parallel.hpp"
#include "lyricmood/random.hpp"

namespace lyricmood::synth {

using syncdata::DatasetRow;
using syncdata::Emotion;
using syncdata::TrackMeta;

namespace {

constexpr double kHarmonics[] = {1.0, 0.5, 0.3, 0.2, 0.12, 0.08};
constexpr double kEdgeSeconds = 0.03;

double round_centi(double t) { return std::round(t * 100.0) / 100.0; }

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Adds one vibrato tone with the shared harmonic timbre to out[n0, n1).
void add_tone(std::vector<double>& out, int rate, std::size_t n0, std::size_t n1, double f0,
              double amplitude, Rng& rng) {
  n1 = std::min(n1, out.size());
  if (n0 >= n1) return;
  const double sr = rate;
  const double vib_rate = rng.uniform(4.5, 6.5);
  const double vib_depth = rng.uniform(0.005, 0.015);
  const double vib_phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  double norm = 0.0;
  for (double a : kHarmonics) norm += a;
  const double dur = static_cast<double>(n1 - n0) / sr;
  double phase = 0.0;
  for (std::size_t n = n0; n < n1; ++n) {
    const double t = static_cast<double>(n - n0) / sr;
    const double f = f0 * (1.0 + vib_depth * std::sin(2.0 * std::numbers::pi * vib_rate * t + vib_phase));
    double v = 0.0;
    for (std::size_t k = 0; k < std::size(kHarmonics); ++k) {
      if (f * static_cast<double>(k + 1) >= 0.45 * sr) break;
      v += kHarmonics[k] * std::sin(static_cast<double>(k + 1) * phase);
    }
    const double env = std::min({1.0, t / kEdgeSeconds, (dur - t) / kEdgeSeconds});
    out[n] += amplitude * env * v / norm;
    phase += 2.0 * std::numbers::pi * f / sr;
  }
}

double mean_square(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x * x;
  return s / static_cast<double>(v.size());
}

}  // namespace

const std::vector<std::string>& keyword_pool(Emotion e) {
  static const std::vector<std::string> pools[syncdata::kNumEmotions] = {
      {"tears", "lonely", "grief", "sorrow", "weeping", "mourning", "empty", "gone", "farewell",
       "broken", "grey", "lost", "regret", "ache", "silent", "cold"},
      {"sunshine", "dancing", "smile", "laughter", "bright", "celebrate", "delight", "happy", "golden",
       "sweet", "cheer", "glow", "summer", "party", "shine", "bliss"},
      {"terror", "shadows", "trembling", "scream", "haunted", "panic", "dread", "nightmare", "creeping",
       "afraid", "hiding", "danger", "shiver", "ghost", "hunted", "alarm"},
      {"rage", "fury", "burning", "fight", "hatred", "revenge", "smash", "wrath", "violent", "enemy",
       "storm", "fists", "betray", "blame", "roar", "war"},
      {"filth", "rotten", "disgusting", "vile", "sickening", "greasy", "stench", "slime", "gross",
       "nasty", "putrid", "spit", "sewer", "maggots", "foul", "crude"},
  };
  return pools[syncdata::emotion_code(e)];
}

const std::vector<std::string>& filler_words() {
  static const std::vector<std::string> words = {
      "the", "and", "you", "i", "we", "night", "day", "road", "heart", "time",
      "my", "your", "in", "on", "again", "here", "there", "with", "all", "now"};
  return words;
}

std::pair<double, double> class_band(Emotion e) {
  static constexpr std::pair<double, double> bands[syncdata::kNumEmotions] = {
      {150.0, 210.0}, {260.0, 370.0}, {450.0, 630.0}, {780.0, 1100.0}, {1350.0, 1900.0}};
  return bands[syncdata::emotion_code(e)];
}

SynthCorpus gen_text_corpus(const SynthSpec& spec) {
  const std::size_t C = spec.proportions.size();
  if (C < 2 || C > static_cast<std::size_t>(syncdata::kNumEmotions)) {
    throw ValidationError("synthetic corpora need between 2 and 5 classes");
  }
  if (spec.tracks == 0 || spec.lines_per_track == 0) {
    throw ValidationError("synthetic corpora need at least one track and one line");
  }
  if (!(spec.noise >= 0.0 && spec.noise <= 1.0)) throw ValidationError("noise must lie in [0, 1]");
  if (spec.min_words == 0 || spec.max_words < spec.min_words) {
    throw ValidationError("invalid words-per-line range");
  }
  const double total = std::accumulate(spec.proportions.begin(), spec.proportions.end(), 0.0);
  if (!(total > 0.0) || std::any_of(spec.proportions.begin(), spec.proportions.end(),
                                    [](double p) { return p < 0.0; })) {
    throw ValidationError("class proportions must be non-negative with a positive sum");
  }

  // Largest-remainder allocation of track labels.
  std::vector<std::size_t> quota(C);
  std::vector<std::pair<double, std::size_t>> remainder;
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < C; ++c) {
    const double exact = static_cast<double>(spec.tracks) * spec.proportions[c] / total;
    quota[c] = static_cast<std::size_t>(std::floor(exact));
    assigned += quota[c];
    remainder.emplace_back(exact - std::floor(exact), c);
  }
  std::stable_sort(remainder.begin(), remainder.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < spec.tracks; ++k, ++assigned) ++quota[remainder[k].second];

  std::vector<Emotion> track_labels;
  for (std::size_t c = 0; c < C; ++c) {
    track_labels.insert(track_labels.end(), quota[c], syncdata::emotion_from_code(static_cast<int>(c)));
  }
  Rng rng(spec.seed);
  rng.shuffle(track_labels);

  SynthCorpus corpus;
  const auto& fillers = filler_words();
  for (std::size_t k = 0; k < spec.tracks; ++k) {
    const auto id = static_cast<std::int64_t>(k + 1);
    const Emotion label = track_labels[k];
    const auto& own = keyword_pool(label);
    double t = round_centi(rng.uniform(0.0, 12.0));
    for (std::size_t line = 0; line < spec.lines_per_track; ++line) {
      DatasetRow row;
      row.id = id;
      row.emotion = label;
      row.start = t;
      row.end = round_centi(t + rng.uniform(1.5, 5.5));
      const std::size_t words = spec.min_words + rng.below(spec.max_words - spec.min_words + 1);
      for (std::size_t w = 0; w < words; ++w) {
        std::string word;
        if (rng.uniform() < spec.noise) {
          if (rng.uniform() < 0.5) {
            word = fillers[rng.below(fillers.size())];
          } else {
            std::size_t other = rng.below(C - 1);
            if (other >= static_cast<std::size_t>(syncdata::emotion_code(label))) ++other;
            const auto& pool = keyword_pool(syncdata::emotion_from_code(static_cast<int>(other)));
            word = pool[rng.below(pool.size())];
          }
        } else {
          word = own[rng.below(own.size())];
        }
        if (!row.text.empty()) row.text += ' ';
        row.text += word;
      }
      t = round_centi(row.end + rng.uniform(0.2, 1.5));
      corpus.rows.push_back(std::move(row));
    }
    TrackMeta meta;
    meta.id = id;
    meta.duration_seconds = round_centi(corpus.rows.back().end + rng.uniform(0.0, 15.0));
    meta.audio_path = std::to_string(id) + ".wav";
    corpus.tracks.push_back(meta);
  }
  return corpus;
}

TrackAudio gen_track_audio(const SynthSpec& spec, const TrackMeta& track,
                           std::span<const DatasetRow> rows) {
  if (spec.sample_rate < 8000) throw ValidationError("synthetic audio needs at least 8 kHz");
  if (std::isnan(spec.snr_db) || spec.snr_db == -std::numeric_limits<double>::infinity()) {
    throw ValidationError("SNR must be a number or +inf");
  }
  const std::size_t C = std::max<std::size_t>(2, spec.proportions.size());
  const int sr = spec.sample_rate;
  const auto n = static_cast<std::size_t>(std::llround(track.duration_seconds * sr));
  auto at = [sr](double seconds) { return static_cast<std::size_t>(std::llround(seconds * sr)); };
  Rng rng(mix_seed(spec.seed, static_cast<std::uint64_t>(track.id)));

  TrackAudio out;
  out.track_id = track.id;
  std::vector<double> stem(n, 0.0);
  for (const auto& row : rows) {
    if (row.id != track.id) throw ValidationError("row of track " + std::to_string(row.id) + " passed for track " + std::to_string(track.id));
    const auto [lo, hi] = class_band(row.emotion);
    add_tone(stem, sr, at(row.start), at(row.end), rng.uniform(lo, hi), spec.vocal_amplitude, rng);
  }

  std::vector<double> acc(n, 0.0);
  if (!std::isinf(spec.snr_db)) {
    std::vector<double> tones(n, 0.0), noise(n, 0.0);
    for (double t = 0.0; t < track.duration_seconds;) {
      const double len = rng.uniform(1.5, 4.0);
      const auto [lo, hi] = class_band(syncdata::emotion_from_code(static_cast<int>(rng.below(C))));
      // Segment levels spread over +-6 dB.
      const double level = std::pow(10.0, rng.uniform(-6.0, 6.0) / 20.0);
      add_tone(tones, sr, at(t), at(t + len), rng.uniform(lo, hi), level, rng);
      t += len;
    }
    for (double& v : noise) v = rng.normal();
    const double pt = mean_square(tones), pn = mean_square(noise);
    // Tones carry 70% of the accompaniment power.
    const double gt = pt > 0 ? std::sqrt(0.7 / pt) : 0.0;
    const double gn = pn > 0 ? std::sqrt(0.3 / pn) : 0.0;
    for (std::size_t i = 0; i < n; ++i) acc[i] = gt * tones[i] + gn * noise[i];
    // The ratio is taken over sung samples only, where vocals are present.
    double pv = 0.0, pa = 0.0;
    std::size_t sung = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (stem[i] == 0.0) continue;
      pv += stem[i] * stem[i];
      pa += acc[i] * acc[i];
      ++sung;
    }
    if (sung == 0) {
      pv = 1e-2;
      pa = mean_square(acc);
    }
    const double gain = pa > 0 ? std::sqrt(pv / pa / std::pow(10.0, spec.snr_db / 10.0)) : 0.0;
    for (double& v : acc) v *= gain;
  }

  double peak = 0.0;
  for (std::size_t i = 0; i < n; ++i) peak = std::max(peak, std::abs(stem[i] + acc[i]));
  if (peak > 0.9) {
    const double s = 0.9 / peak;
    for (double& v : stem) v *= s;
    for (double& v : acc) v *= s;
  }
  std::vector<double> mix(n);
  for (std::size_t i = 0; i < n; ++i) mix[i] = stem[i] + acc[i];
  out.stem = {std::move(stem), sr};
  out.accompaniment = {std::move(acc), sr};
  out.mixture = {std::move(mix), sr};
  return out;
}

void gen_audio(const SynthSpec& spec, const SynthCorpus& corpus, const std::filesystem::path& dir,
               const std::filesystem::path& stems_dir, std::size_t jobs) {
  std::filesystem::create_directories(dir);
  std::filesystem::create_directories(stems_dir);
  auto grouped = syncdata::group_by_track(corpus.rows);
  parallel_for(corpus.tracks.size(), jobs, [&](std::size_t i) {
    const auto& meta = corpus.tracks[i];
    auto it = grouped.find(meta.id);
    std::span<const DatasetRow> rows;
    if (it != grouped.end()) rows = it->second;
    auto audio = gen_track_audio(spec, meta, rows);
    audio::write_wav(dir / meta.audio_path, audio.mixture);
    audio::write_wav(audio::stem_path(stems_dir, meta.id), audio.stem);
  });
}

}  // namespace lyricmood::synth
