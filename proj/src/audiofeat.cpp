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

#include "lyricmood/audiofeat.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <numbers>
#include <numeric>
#include <string>

#include <Eigen/Core>

#include "binio.hpp"
#include "fft.hpp"
#include "lyricmood/error.hpp"

namespace lyricmood::audio {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::string chunk_id(const char* id) { return std::string(id, 4); }

double sinc(double x) {
  if (std::abs(x) < 1e-12) return 1.0;
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

double kaiser(double x, double beta) {
  if (std::abs(x) > 1.0) return 0.0;
  return std::cyl_bessel_i(0.0, beta * std::sqrt(1.0 - x * x)) / std::cyl_bessel_i(0.0, beta);
}

// Raised-cosine step from 0 at `lo` to 1 at `hi`.
double smooth_step(double f, double lo, double hi) {
  if (f <= lo) return 0.0;
  if (f >= hi) return 1.0;
  return 0.5 - 0.5 * std::cos(std::numbers::pi * (f - lo) / (hi - lo));
}

double vocal_band_weight(double f) {
  return smooth_step(f, 100.0, 200.0) * (1.0 - smooth_step(f, 4000.0, 5000.0));
}

double median_of(std::vector<double>& v) {
  auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  return *mid;
}

AudioClip spectral_mask_separate(const AudioClip& clip) {
  const std::size_t n = clip.size();
  if (n == 0) return clip;
  std::size_t n_fft = 256;
  while (static_cast<double>(n_fft) < 0.04 * clip.sample_rate) n_fft *= 2;
  const std::size_t hop = n_fft / 4;
  const std::size_t pad = n_fft / 2;
  const std::size_t bins = n_fft / 2 + 1;

  std::vector<double> padded(n + 2 * pad + n_fft, 0.0);
  std::copy(clip.samples.begin(), clip.samples.end(), padded.begin() + static_cast<std::ptrdiff_t>(pad));
  const std::size_t frames = (n + 2 * pad - n_fft) / hop + 1;

  auto window = hann_window(n_fft);
  detail::RealFft fft(n_fft);
  std::vector<std::complex<double>> spec(frames * bins);
  std::vector<double> power(frames * bins);
  std::vector<double> frame(n_fft);
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t i = 0; i < n_fft; ++i) frame[i] = padded[t * hop + i] * window[i];
    fft.forward(frame, std::span(spec).subspan(t * bins, bins));
    for (std::size_t k = 0; k < bins; ++k) power[t * bins + k] = std::norm(spec[t * bins + k]);
  }

  // Harmonic/percussive soft mask: steady partials survive the median along
  // time, broadband events survive the median along frequency.
  constexpr std::size_t kHalf = 8;
  std::vector<double> scratch;
  std::vector<double> mask(frames * bins);
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t k = 0; k < bins; ++k) {
      scratch.clear();
      for (std::size_t u = t >= kHalf ? t - kHalf : 0; u <= std::min(frames - 1, t + kHalf); ++u) {
        scratch.push_back(power[u * bins + k]);
      }
      double harmonic = median_of(scratch);
      scratch.clear();
      for (std::size_t q = k >= kHalf ? k - kHalf : 0; q <= std::min(bins - 1, k + kHalf); ++q) {
        scratch.push_back(power[t * bins + q]);
      }
      double percussive = median_of(scratch);
      double h2 = harmonic * harmonic;
      double p2 = percussive * percussive;
      double soft = h2 + p2 > 0.0 ? h2 / (h2 + p2) : 0.0;
      double f = static_cast<double>(k) * clip.sample_rate / static_cast<double>(n_fft);
      mask[t * bins + k] = vocal_band_weight(f) * soft;
    }
  }

  std::vector<double> out(padded.size(), 0.0);
  std::vector<double> norm(padded.size(), 0.0);
  std::vector<std::complex<double>> masked(bins);
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t k = 0; k < bins; ++k) masked[k] = spec[t * bins + k] * mask[t * bins + k];
    fft.inverse(masked, frame);
    for (std::size_t i = 0; i < n_fft; ++i) {
      out[t * hop + i] += frame[i] * window[i];
      norm[t * hop + i] += window[i] * window[i];
    }
  }
  AudioClip result;
  result.sample_rate = clip.sample_rate;
  result.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double w = norm[i + pad];
    result.samples[i] = w > 1e-8 ? out[i + pad] / w : 0.0;
  }
  return result;
}

}  // namespace

AudioClip decode_wav(std::istream& in) {
  char riff[4];
  if (!in.read(riff, 4) || chunk_id(riff) != "RIFF") {
    throw UnsupportedFormat("not a RIFF file");
  }
  detail::read_u32(in, "RIFF size");
  char wave[4];
  if (!in.read(wave, 4) || chunk_id(wave) != "WAVE") {
    throw UnsupportedFormat("RIFF file is not WAVE");
  }
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  while (true) {
    char id[4];
    if (!in.read(id, 4)) throw ParseError("WAV has no data chunk");
    std::uint32_t size = detail::read_u32(in, "chunk size");
    const std::string name = chunk_id(id);
    if (name == "fmt ") {
      if (size < 16) throw ParseError("fmt chunk too short");
      format = detail::read_u16(in, "fmt");
      channels = detail::read_u16(in, "fmt");
      rate = detail::read_u32(in, "fmt");
      detail::read_u32(in, "fmt");  // byte rate
      detail::read_u16(in, "fmt");  // block align
      bits = detail::read_u16(in, "fmt");
      std::uint32_t rest = size - 16;
      if (format == kFormatExtensible && rest >= 10) {
        detail::read_u16(in, "fmt");  // cbSize
        detail::read_u16(in, "fmt");  // valid bits
        detail::read_u32(in, "fmt");  // channel mask
        format = detail::read_u16(in, "fmt");  // first two bytes of the subformat GUID
        rest -= 10;
      }
      in.ignore(rest + (size & 1U));
      if (!in) throw ParseError("truncated fmt chunk");
      have_fmt = true;
      continue;
    }
    if (name != "data") {
      in.ignore(size + (size & 1U));
      if (!in) throw ParseError("truncated chunk '" + name + "'");
      continue;
    }
    if (!have_fmt) throw ParseError("data chunk before fmt chunk");
    const bool pcm16 = format == kFormatPcm && bits == 16;
    const bool float32 = format == kFormatFloat && bits == 32;
    if (!pcm16 && !float32) {
      throw UnsupportedFormat("unsupported WAV encoding (format " + std::to_string(format) +
                              ", " + std::to_string(bits) + " bit); need PCM16 or float32");
    }
    if (channels < 1 || channels > 2) {
      throw UnsupportedFormat("unsupported channel count " + std::to_string(channels));
    }
    if (rate == 0) throw ParseError("sample rate is zero");
    const std::size_t bytes_per_sample = bits / 8;
    const std::size_t frame_bytes = bytes_per_sample * channels;
    std::string payload(size, '\0');
    if (!in.read(payload.data(), size)) throw ParseError("truncated data chunk");
    if (size % frame_bytes != 0) throw ParseError("data chunk is not a whole number of frames");
    const std::size_t frames = size / frame_bytes;
    AudioClip clip;
    clip.sample_rate = static_cast<int>(rate);
    clip.samples.resize(frames);
    auto sample_at = [&](std::size_t offset) -> double {
      const auto* p = reinterpret_cast<const unsigned char*>(payload.data() + offset);
      if (pcm16) {
        auto v = static_cast<std::int16_t>(p[0] | (p[1] << 8));
        return static_cast<double>(v) / 32768.0;
      }
      std::uint32_t u = static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
                        (static_cast<std::uint32_t>(p[2]) << 16) |
                        (static_cast<std::uint32_t>(p[3]) << 24);
      return static_cast<double>(std::bit_cast<float>(u));
    };
    for (std::size_t f = 0; f < frames; ++f) {
      double acc = 0.0;
      for (std::size_t c = 0; c < channels; ++c) acc += sample_at(f * frame_bytes + c * bytes_per_sample);
      double v = acc / channels;
      if (!std::isfinite(v)) throw ParseError("non-finite sample in WAV data");
      clip.samples[f] = v;
    }
    return clip;
  }
}

AudioClip read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open audio file " + path.string());
  return decode_wav(in);
}

void encode_wav(std::ostream& out, const AudioClip& clip, WavEncoding encoding) {
  const bool pcm = encoding == WavEncoding::kPcm16;
  const std::uint16_t bits = pcm ? 16 : 32;
  const std::uint32_t data_size = static_cast<std::uint32_t>(clip.size() * (bits / 8));
  out.write("RIFF", 4);
  detail::write_u32(out, 36 + data_size);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  detail::write_u32(out, 16);
  detail::write_u16(out, pcm ? kFormatPcm : kFormatFloat);
  detail::write_u16(out, 1);
  detail::write_u32(out, static_cast<std::uint32_t>(clip.sample_rate));
  detail::write_u32(out, static_cast<std::uint32_t>(clip.sample_rate) * (bits / 8));
  detail::write_u16(out, bits / 8);
  detail::write_u16(out, bits);
  out.write("data", 4);
  detail::write_u32(out, data_size);
  for (double s : clip.samples) {
    if (pcm) {
      double scaled = std::round(std::clamp(s, -1.0, 1.0) * 32768.0);
      auto v = static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0));
      detail::write_u16(out, static_cast<std::uint16_t>(v));
    } else {
      detail::write_f32(out, static_cast<float>(s));
    }
  }
}

void write_wav(const std::filesystem::path& path, const AudioClip& clip, WavEncoding encoding) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write audio file " + path.string());
  encode_wav(out, clip, encoding);
}

AudioClip resample(const AudioClip& clip, int target_rate) {
  if (target_rate <= 0) throw ValidationError("target rate must be positive");
  if (clip.sample_rate == target_rate) return clip;
  if (clip.sample_rate < 8000) {
    throw ValidationError("source rate " + std::to_string(clip.sample_rate) +
                          " Hz is below 8000 Hz");
  }
  const std::int64_t g = std::gcd(clip.sample_rate, target_rate);
  const std::int64_t up = target_rate / g;
  const std::int64_t down = clip.sample_rate / g;

  constexpr double kRolloff = 0.945;
  constexpr double kBeta = 8.6;
  constexpr double kZeroCrossings = 16.0;
  const double fc = 0.5 * std::min(1.0, static_cast<double>(up) / static_cast<double>(down)) * kRolloff;
  const auto half = static_cast<std::int64_t>(std::ceil(kZeroCrossings / (2.0 * fc)));
  const std::int64_t taps = 2 * half;

  // Tap j of phase p weights input sample base + j - half + 1.
  std::vector<double> table(static_cast<std::size_t>(up * taps));
  for (std::int64_t p = 0; p < up; ++p) {
    const double frac = static_cast<double>(p) / static_cast<double>(up);
    double sum = 0.0;
    for (std::int64_t j = 0; j < taps; ++j) {
      const double tau = frac - static_cast<double>(j - half + 1);
      const double h = 2.0 * fc * sinc(2.0 * fc * tau) * kaiser(tau / static_cast<double>(half), kBeta);
      table[static_cast<std::size_t>(p * taps + j)] = h;
      sum += h;
    }
    for (std::int64_t j = 0; j < taps; ++j) table[static_cast<std::size_t>(p * taps + j)] /= sum;
  }

  const auto n_in = static_cast<std::int64_t>(clip.size());
  const auto n_out = static_cast<std::int64_t>(
      std::llround(static_cast<double>(n_in) * static_cast<double>(up) / static_cast<double>(down)));
  AudioClip out;
  out.sample_rate = target_rate;
  out.samples.resize(static_cast<std::size_t>(n_out));
  for (std::int64_t n = 0; n < n_out; ++n) {
    const std::int64_t pos = n * down;
    const std::int64_t base = pos / up;
    const std::int64_t phase = pos % up;
    const double* h = table.data() + phase * taps;
    const std::int64_t first = base - half + 1;
    const std::int64_t j0 = std::max<std::int64_t>(0, -first);
    const std::int64_t j1 = std::min<std::int64_t>(taps, n_in - first);
    double acc = 0.0;
    for (std::int64_t j = j0; j < j1; ++j) acc += h[j] * clip.samples[static_cast<std::size_t>(first + j)];
    out.samples[static_cast<std::size_t>(n)] = acc;
  }
  return out;
}

std::size_t frame_count(std::size_t n, std::size_t n_dft, std::size_t n_hop) {
  if (n < n_dft) return 0;
  return (n - n_dft) / n_hop + 1;
}

std::vector<double> hann_window(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
  }
  return w;
}

Matrix stft_power(const AudioClip& clip, std::size_t n_dft, std::size_t n_hop) {
  if (n_dft == 0 || n_hop == 0) throw ValidationError("n_dft and n_hop must be positive");
  const std::size_t frames = frame_count(clip.size(), n_dft, n_hop);
  if (frames == 0) {
    throw ValidationError("clip has " + std::to_string(clip.size()) +
                          " samples, fewer than one " + std::to_string(n_dft) + "-sample frame");
  }
  const std::size_t bins = n_dft / 2 + 1;
  Matrix out{bins, frames, std::vector<double>(bins * frames)};
  auto window = hann_window(n_dft);
  detail::RealFft fft(n_dft);
  std::vector<double> frame(n_dft), power(bins);
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t i = 0; i < n_dft; ++i) frame[i] = clip.samples[t * n_hop + i] * window[i];
    fft.power(frame, power);
    for (std::size_t k = 0; k < bins; ++k) out.values[k * frames + t] = power[k];
  }
  return out;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::vector<double> mel_center_frequencies(std::size_t n_mels, double fmin, double fmax) {
  const double lo = hz_to_mel(fmin);
  const double hi = hz_to_mel(fmax);
  std::vector<double> centers(n_mels);
  for (std::size_t m = 0; m < n_mels; ++m) {
    centers[m] = mel_to_hz(lo + (hi - lo) * static_cast<double>(m + 1) / static_cast<double>(n_mels + 1));
  }
  return centers;
}

Matrix mel_filterbank(std::size_t n_mels, std::size_t n_dft, int sample_rate, double fmin,
                      double fmax) {
  const std::size_t bins = n_dft / 2 + 1;
  const double lo = hz_to_mel(fmin);
  const double hi = hz_to_mel(fmax);
  std::vector<double> edges(n_mels + 2);
  for (std::size_t m = 0; m < edges.size(); ++m) {
    edges[m] = mel_to_hz(lo + (hi - lo) * static_cast<double>(m) / static_cast<double>(n_mels + 1));
  }
  Matrix fb{n_mels, bins, std::vector<double>(n_mels * bins, 0.0)};
  for (std::size_t m = 0; m < n_mels; ++m) {
    const double left = edges[m], center = edges[m + 1], right = edges[m + 2];
    for (std::size_t k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate / static_cast<double>(n_dft);
      const double rise = (f - left) / (center - left);
      const double fall = (right - f) / (right - center);
      fb.at(m, k) = std::max(0.0, std::min(rise, fall));
    }
  }
  return fb;
}

MelSpectrogram mel_spectrogram(const AudioClip& clip, const MelParams& params) {
  if (clip.sample_rate != params.sample_rate) {
    throw ValidationError("mel_spectrogram expects " + std::to_string(params.sample_rate) +
                          " Hz audio, got " + std::to_string(clip.sample_rate) + " Hz");
  }
  Matrix power = stft_power(clip, params.n_dft, params.n_hop);
  Matrix fb = mel_filterbank(params.n_mels, params.n_dft, params.sample_rate, params.fmin, params.fmax);
  using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<const RowMat> p(power.values.data(), static_cast<Eigen::Index>(power.rows),
                             static_cast<Eigen::Index>(power.cols));
  Eigen::Map<const RowMat> w(fb.values.data(), static_cast<Eigen::Index>(fb.rows),
                             static_cast<Eigen::Index>(fb.cols));
  MelSpectrogram mel;
  mel.params = params;
  mel.values = {params.n_mels, power.cols, std::vector<double>(params.n_mels * power.cols)};
  Eigen::Map<RowMat> out(mel.values.values.data(), static_cast<Eigen::Index>(params.n_mels),
                         static_cast<Eigen::Index>(power.cols));
  out.noalias() = w * p;
  for (double& v : mel.values.values) v = std::log10(v + kLogFloor);
  return mel;
}

AudioClip crop_or_pad(const AudioClip& clip, double seconds) {
  const auto target = static_cast<std::size_t>(std::llround(seconds * clip.sample_rate));
  AudioClip out;
  out.sample_rate = clip.sample_rate;
  out.samples.assign(target, 0.0);
  std::copy_n(clip.samples.begin(), std::min(target, clip.size()), out.samples.begin());
  return out;
}

AudioClip slice_seconds(const AudioClip& clip, double start, double end) {
  auto to_index = [&](double t) {
    auto i = static_cast<std::int64_t>(std::llround(t * clip.sample_rate));
    return static_cast<std::size_t>(std::clamp<std::int64_t>(i, 0, static_cast<std::int64_t>(clip.size())));
  };
  const std::size_t b = to_index(start);
  const std::size_t e = std::max(b, to_index(end));
  AudioClip out;
  out.sample_rate = clip.sample_rate;
  out.samples.assign(clip.samples.begin() + static_cast<std::ptrdiff_t>(b),
                     clip.samples.begin() + static_cast<std::ptrdiff_t>(e));
  return out;
}

SeparatorKind parse_separator_kind(std::string_view s) {
  if (s == "identity") return SeparatorKind::kIdentity;
  if (s == "baseline") return SeparatorKind::kSpectralMask;
  if (s == "stems") return SeparatorKind::kExternalStems;
  throw ValidationError("unknown separator '" + std::string(s) +
                        "' (expected identity, baseline or stems)");
}

std::filesystem::path stem_path(const std::filesystem::path& stems_dir, std::int64_t track_id) {
  return stems_dir / (std::to_string(track_id) + ".vocals.wav");
}

AudioClip separate(const AudioClip& clip, const SourceSeparator& sep, const ClipOrigin& origin) {
  switch (sep.kind) {
    case SeparatorKind::kIdentity:
      return clip;
    case SeparatorKind::kSpectralMask:
      return spectral_mask_separate(clip);
    case SeparatorKind::kExternalStems: {
      auto path = stem_path(sep.stems_dir, origin.track_id);
      if (!std::filesystem::exists(path)) {
        throw Error("no vocal stem for track " + std::to_string(origin.track_id) + " (" +
                    path.string() + ")");
      }
      AudioClip stem = resample(read_wav(path), clip.sample_rate);
      AudioClip out = slice_seconds(stem, origin.start_seconds,
                                    origin.start_seconds + clip.duration());
      out.samples.resize(clip.size(), 0.0);
      return out;
    }
  }
  throw Error("unknown separator kind");
}

MelSpectrogram featurize_segment(const AudioClip& track_audio, double start, double end,
                                 const SourceSeparator& sep, std::int64_t track_id,
                                 double excerpt_seconds) {
  AudioClip audio = resample(track_audio, kTargetRate);
  AudioClip segment = slice_seconds(audio, start, end);
  AudioClip vocals = separate(segment, sep, {track_id, start});
  return mel_spectrogram(crop_or_pad(vocals, excerpt_seconds));
}

void write_mel_cache(std::ostream& out, const MelSpectrogram& mel) {
  out.write("MELS", 4);
  detail::write_u32(out, kMelCacheVersion);
  detail::write_u32(out, static_cast<std::uint32_t>(mel.n_mels()));
  detail::write_u32(out, static_cast<std::uint32_t>(mel.frames()));
  for (double v : mel.values.values) detail::write_f32(out, static_cast<float>(v));
}

MelSpectrogram read_mel_cache(std::istream& in) {
  detail::expect_magic(in, "MELS");
  const std::uint32_t version = detail::read_u32(in, "version");
  if (version != kMelCacheVersion) {
    throw UnsupportedFormat("mel cache version " + std::to_string(version));
  }
  MelSpectrogram mel;
  const std::uint32_t n_mels = detail::read_u32(in, "n_mels");
  const std::uint32_t frames = detail::read_u32(in, "frames");
  mel.params.n_mels = n_mels;
  mel.values = {n_mels, frames, std::vector<double>(static_cast<std::size_t>(n_mels) * frames)};
  for (double& v : mel.values.values) v = detail::read_f32(in, "mel values");
  return mel;
}

}  // namespace lyricmood::audio
