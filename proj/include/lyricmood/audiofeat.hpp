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

// Audio front end: WAV I/O, resampling to 12 kHz, power STFT, log-mel
// spectrograms, source separation and the binary feature cache.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

namespace lyricmood::audio {

inline constexpr int kTargetRate = 12000;
inline constexpr std::size_t kNumMels = 128;
inline constexpr std::size_t kNDft = 512;
inline constexpr std::size_t kNHop = 256;
inline constexpr double kLogFloor = 1e-10;
inline constexpr double kExcerptSeconds = 30.0;

// Mono samples in [-1, 1].
struct AudioClip {
  std::vector<double> samples;
  int sample_rate = kTargetRate;

  std::size_t size() const { return samples.size(); }
  double duration() const {
    return static_cast<double>(samples.size()) / static_cast<double>(sample_rate);
  }
};

// RIFF/WAVE, PCM 16-bit or IEEE float 32-bit, 1 or 2 channels. Stereo is
// averaged to mono and 16-bit values are divided by 32768. Throws
// UnsupportedFormat for other codecs and ParseError for truncated data.
AudioClip decode_wav(std::istream& in);
AudioClip read_wav(const std::filesystem::path& path);

enum class WavEncoding { kPcm16, kFloat32 };

void encode_wav(std::ostream& out, const AudioClip& clip,
                WavEncoding encoding = WavEncoding::kFloat32);
void write_wav(const std::filesystem::path& path, const AudioClip& clip,
               WavEncoding encoding = WavEncoding::kFloat32);

// Kaiser-windowed sinc interpolation evaluated polyphase over the rational
// rate ratio. Output length is round(N * target / source). Same-rate input
// is copied unchanged. Requires source rate >= 8000 Hz.
AudioClip resample(const AudioClip& clip, int target_rate = kTargetRate);

// floor((n - n_dft) / n_hop) + 1 for n >= n_dft, else 0 (no padding).
std::size_t frame_count(std::size_t n, std::size_t n_dft = kNDft,
                        std::size_t n_hop = kNHop);

// Periodic Hann window.
std::vector<double> hann_window(std::size_t n);

// Row-major rows x cols real matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  double& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
};

// |DFT(hann * frame)|^2 for every full frame; (n_dft/2 + 1) x T.
// Throws ValidationError when the clip is shorter than one frame.
Matrix stft_power(const AudioClip& clip, std::size_t n_dft = kNDft,
                  std::size_t n_hop = kNHop);

double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Center frequencies (Hz) of n_mels triangles spaced evenly on the mel scale
// between fmin and fmax.
std::vector<double> mel_center_frequencies(std::size_t n_mels, double fmin, double fmax);

// n_mels x (n_dft/2 + 1) triangular filters with unit peaks. Adjacent
// triangles cross at half height, so each bin's total weight is at most 1.
Matrix mel_filterbank(std::size_t n_mels, std::size_t n_dft, int sample_rate,
                      double fmin, double fmax);

struct MelParams {
  std::size_t n_mels = kNumMels;
  std::size_t n_dft = kNDft;
  std::size_t n_hop = kNHop;
  int sample_rate = kTargetRate;
  double fmin = 0.0;
  double fmax = kTargetRate / 2.0;
};

// log10(mel power + 1e-10), n_mels x T.
struct MelSpectrogram {
  MelParams params;
  Matrix values;

  std::size_t n_mels() const { return values.rows; }
  std::size_t frames() const { return values.cols; }
};

MelSpectrogram mel_spectrogram(const AudioClip& clip, const MelParams& params = {});

// Truncate to the first `seconds` or zero-pad the tail to exactly that length.
AudioClip crop_or_pad(const AudioClip& clip, double seconds = kExcerptSeconds);

// Samples of [start, end) seconds, clamped to the clip.
AudioClip slice_seconds(const AudioClip& clip, double start, double end);

enum class SeparatorKind { kIdentity, kSpectralMask, kExternalStems };

struct SourceSeparator {
  SeparatorKind kind = SeparatorKind::kIdentity;
  std::filesystem::path stems_dir;  // external stems only

  static SourceSeparator identity() { return {}; }
  static SourceSeparator spectral_mask() { return {SeparatorKind::kSpectralMask, {}}; }
  static SourceSeparator external_stems(std::filesystem::path dir) {
    return {SeparatorKind::kExternalStems, std::move(dir)};
  }
};

// Parses identity | baseline | stems.
SeparatorKind parse_separator_kind(std::string_view s);

// Where a clip sits inside its track; external stems are cropped to it.
struct ClipOrigin {
  std::int64_t track_id = 0;
  double start_seconds = 0.0;
};

std::filesystem::path stem_path(const std::filesystem::path& stems_dir,
                                std::int64_t track_id);

// Vocal estimate with the same rate and length as the input.
//   identity        returns the input unchanged
//   spectral mask   STFT-domain soft band-pass mask over 200-4000 Hz with a
//                   harmonic-peak emphasis, resynthesized by overlap-add
//   external stems  `<stems_dir>/<track_id>.vocals.wav`, cropped to the clip
// Throws Error naming the track when a stem file is missing.
AudioClip separate(const AudioClip& clip, const SourceSeparator& sep,
                   const ClipOrigin& origin = {});

// Full per-chunk front end: resample to 12 kHz, slice [start, end), separate,
// crop/pad to 30 s, log-mel.
MelSpectrogram featurize_segment(const AudioClip& track_audio, double start, double end,
                                 const SourceSeparator& sep, std::int64_t track_id,
                                 double excerpt_seconds = kExcerptSeconds);

// Cache file: "MELS", u32 version, u32 n_mels, u32 T, then n_mels*T
// little-endian f32 values, row-major.
inline constexpr std::uint32_t kMelCacheVersion = 1;

void write_mel_cache(std::ostream& out, const MelSpectrogram& mel);
MelSpectrogram read_mel_cache(std::istream& in);

}  // namespace lyricmood::audio
