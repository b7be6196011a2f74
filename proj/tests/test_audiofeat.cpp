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

#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <sstream>

#include "lyricmood/error.hpp"
#include "lyricmood/random.hpp"
#include "support/oracles.hpp"

namespace lyricmood::audio {
namespace {

constexpr double kPi = std::numbers::pi;

void put_u32(std::string& s, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_u16(std::string& s, std::uint16_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>(v >> 8));
}

// Hand-assembled PCM16 file.
std::string pcm16_wav(const std::vector<std::int16_t>& interleaved, int channels, int rate) {
  std::string data;
  for (auto v : interleaved) put_u16(data, static_cast<std::uint16_t>(v));
  std::string s = "RIFF";
  put_u32(s, static_cast<std::uint32_t>(36 + data.size()));
  s += "WAVEfmt ";
  put_u32(s, 16);
  put_u16(s, 1);
  put_u16(s, static_cast<std::uint16_t>(channels));
  put_u32(s, static_cast<std::uint32_t>(rate));
  put_u32(s, static_cast<std::uint32_t>(rate * channels * 2));
  put_u16(s, static_cast<std::uint16_t>(channels * 2));
  put_u16(s, 16);
  s += "data";
  put_u32(s, static_cast<std::uint32_t>(data.size()));
  return s + data;
}

AudioClip sine(double hz, double seconds, int rate, double amp = 0.5) {
  AudioClip c;
  c.sample_rate = rate;
  c.samples.resize(static_cast<std::size_t>(std::llround(seconds * rate)));
  for (std::size_t i = 0; i < c.size(); ++i) c.samples[i] = amp * std::sin(2 * kPi * hz * i / rate);
  return c;
}

double rms(const std::vector<double>& v, std::size_t from = 0, std::size_t to = 0) {
  if (to == 0) to = v.size();
  double s = 0;
  for (std::size_t i = from; i < to; ++i) s += v[i] * v[i];
  return std::sqrt(s / static_cast<double>(to - from));
}

TEST(Wav, SilenceAt441k) {
  std::istringstream in(pcm16_wav(std::vector<std::int16_t>(44100, 0), 1, 44100));
  auto c = decode_wav(in);
  EXPECT_EQ(c.sample_rate, 44100);
  ASSERT_EQ(c.size(), 44100u);
  for (double v : c.samples) EXPECT_EQ(v, 0.0);
}

TEST(Wav, StereoCancels) {
  std::vector<std::int16_t> lr;
  for (int i = 0; i < 100; ++i) {
    lr.push_back(static_cast<std::int16_t>(i * 100));
    lr.push_back(static_cast<std::int16_t>(-i * 100));
  }
  std::istringstream in(pcm16_wav(lr, 2, 8000));
  auto c = decode_wav(in);
  ASSERT_EQ(c.size(), 100u);
  for (double v : c.samples) EXPECT_EQ(v, 0.0);
}

TEST(Wav, FullScaleSquare) {
  std::vector<std::int16_t> sq;
  for (int i = 0; i < 64; ++i) sq.push_back(i % 8 < 4 ? 32767 : -32768);
  std::istringstream in(pcm16_wav(sq, 1, 16000));
  auto c = decode_wav(in);
  for (int i = 0; i < 64; ++i) EXPECT_EQ(c.samples[i], i % 8 < 4 ? 32767.0 / 32768.0 : -1.0);
}

TEST(Wav, ErrorsAndFloatRoundTrip) {
  std::string bytes = pcm16_wav({1, 2, 3, 4}, 1, 8000);
  std::string alaw = bytes;
  alaw[20] = 6;
  std::istringstream a(alaw);
  EXPECT_THROW(decode_wav(a), UnsupportedFormat);
  std::istringstream cut(bytes.substr(0, bytes.size() - 3));
  EXPECT_THROW(decode_wav(cut), ParseError);
  std::istringstream junk("not a wav file at all");
  EXPECT_THROW(decode_wav(junk), UnsupportedFormat);

  auto c = sine(300, 0.1, 12000);
  for (auto& v : c.samples) v = static_cast<float>(v);
  std::stringstream io;
  encode_wav(io, c);
  auto back = decode_wav(io);
  EXPECT_EQ(back.samples, c.samples);
  EXPECT_EQ(back.sample_rate, 12000);
}

TEST(Resample, SameRateIsExact) {
  auto c = sine(440, 0.2, 12000);
  EXPECT_EQ(resample(c, 12000).samples, c.samples);
}

TEST(Resample, DcPreservedAndLength) {
  AudioClip c;
  c.sample_rate = 48000;
  c.samples.assign(48000, 0.5);
  auto r = resample(c, 12000);
  EXPECT_EQ(r.sample_rate, 12000);
  EXPECT_EQ(r.size(), 12000u);
  for (std::size_t i = 200; i + 200 < r.size(); ++i) EXPECT_NEAR(r.samples[i], 0.5, 1e-3) << i;

  AudioClip odd;
  odd.sample_rate = 44100;
  odd.samples.assign(10001, 0.0);
  EXPECT_EQ(resample(odd, 12000).size(),
            static_cast<std::size_t>(std::llround(10001.0 * 12000 / 44100)));
}

TEST(Resample, SinePeakSurvives) {
  auto r = resample(sine(440, 1.0, 48000), 12000);
  // Direct DFT magnitude at integer-Hz bins around the tone.
  auto mag = [&](double hz) {
    std::complex<double> acc = 0;
    for (std::size_t i = 0; i < r.size(); ++i) acc += r.samples[i] * std::polar(1.0, -2 * kPi * hz * i / 12000);
    return std::abs(acc);
  };
  const double peak = mag(440);
  for (double hz : {300.0, 400.0, 430.0, 450.0, 500.0, 880.0}) EXPECT_LT(mag(hz), 0.1 * peak) << hz;
  EXPECT_NEAR(rms(r.samples, 100, r.size() - 100), 0.5 / std::sqrt(2.0), 1e-3);
}

TEST(Stft, FrameCountFormula) {
  EXPECT_EQ(frame_count(360000), 1405u);
  EXPECT_EQ(frame_count(511), 0u);
  EXPECT_EQ(frame_count(512), 1u);
  Rng rng(1);
  for (int i = 0; i < 200; ++i) {
    const std::size_t n = 512 + rng.below(20000);
    AudioClip c;
    c.samples.assign(n, 0.0);
    EXPECT_EQ(stft_power(c).cols, (n - 512) / 256 + 1);
  }
  AudioClip tiny;
  tiny.samples.assign(100, 0.0);
  EXPECT_THROW(stft_power(tiny), ValidationError);
}

TEST(Stft, ZeroInZeroOut) {
  AudioClip c;
  c.samples.assign(4096, 0.0);
  auto p = stft_power(c);
  EXPECT_EQ(p.rows, 257u);
  for (double v : p.values) EXPECT_EQ(v, 0.0);
}

// (1/N) sum over the full spectrum = sum of |x w|^2 in the frame.
double full_spectrum_energy(const Matrix& p, std::size_t t, std::size_t n) {
  double e = p.at(0, t) + p.at(n / 2, t);
  for (std::size_t k = 1; k < n / 2; ++k) e += 2 * p.at(k, t);
  return e / static_cast<double>(n);
}

TEST(Stft, ParsevalImpulseAndDc) {
  AudioClip c;
  c.samples.assign(512, 0.0);
  c.samples[256] = 1.0;
  auto w = hann_window(512);
  EXPECT_NEAR(full_spectrum_energy(stft_power(c), 0, 512), w[256] * w[256], 1e-6);

  c.samples.assign(512, 1.0);
  double sum_w2 = 0;
  for (double x : w) sum_w2 += x * x;
  EXPECT_NEAR(full_spectrum_energy(stft_power(c), 0, 512) / sum_w2, 1.0, 1e-6);
}

TEST(Mel, HtkScale) {
  EXPECT_NEAR(hz_to_mel(700.0), 2595.0 * std::log10(2.0), 1e-9);
  EXPECT_NEAR(mel_to_hz(hz_to_mel(1234.5)), 1234.5, 1e-9);
}

TEST(Mel, FilterbankWeights) {
  auto fb = mel_filterbank(128, 512, 12000, 0, 6000);
  EXPECT_EQ(fb.rows, 128u);
  EXPECT_EQ(fb.cols, 257u);
  for (std::size_t k = 0; k < fb.cols; ++k) {
    double total = 0;
    for (std::size_t m = 0; m < fb.rows; ++m) {
      EXPECT_GE(fb.at(m, k), 0.0);
      total += fb.at(m, k);
    }
    EXPECT_LE(total, 1.0 + 1e-12);
  }
}

TEST(Mel, ThirtySecondShape) {
  auto mel = mel_spectrogram(sine(1000, 30.0, 12000));
  EXPECT_EQ(mel.n_mels(), 128u);
  EXPECT_EQ(mel.frames(), 1405u);
}

TEST(Mel, SilenceHitsFloor) {
  AudioClip c;
  c.samples.assign(6000, 0.0);
  auto mel = mel_spectrogram(c);
  for (double v : mel.values.values) EXPECT_DOUBLE_EQ(v, -10.0);
}

TEST(Mel, ToneLandsInNearestBand) {
  // Centers of 128 triangles spread evenly in mel over 0-6000 Hz.
  const double top = 2595.0 * std::log10(1.0 + 6000.0 / 700.0);
  std::size_t nearest = 0;
  double best = 1e300;
  for (std::size_t m = 0; m < 128; ++m) {
    const double mel = top * static_cast<double>(m + 1) / 129.0;
    const double hz = 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
    if (std::abs(hz - 440.0) < best) {
      best = std::abs(hz - 440.0);
      nearest = m;
    }
  }
  auto mel = mel_spectrogram(sine(440, 2.0, 12000));
  for (std::size_t t = 0; t < mel.frames(); ++t) {
    std::size_t arg = 0;
    for (std::size_t m = 1; m < 128; ++m) {
      if (mel.values.at(m, t) > mel.values.at(arg, t)) arg = m;
    }
    EXPECT_EQ(arg, nearest) << "frame " << t;
  }
}

TEST(Mel, DoublingAmplitude) {
  auto a = mel_spectrogram(sine(900, 1.0, 12000, 0.2));
  auto b = mel_spectrogram(sine(900, 1.0, 12000, 0.4));
  const double l4 = std::log10(4.0);
  std::size_t peak = 0;
  for (std::size_t i = 0; i < a.values.values.size(); ++i) {
    EXPECT_LE(b.values.values[i] - a.values.values[i], l4 + 1e-9);
    if (a.values.values[i] > a.values.values[peak]) peak = i;
  }
  EXPECT_NEAR(b.values.values[peak] - a.values.values[peak], l4, 1e-6);
}

TEST(Mel, TrailingSamplesBeyondLastFrameIgnored) {
  auto c = sine(700, 0.5, 12000);
  c.samples.resize(512 + 256 * 20);
  auto base = mel_spectrogram(c);
  c.samples.insert(c.samples.end(), 255, 0.3);
  auto more = mel_spectrogram(c);
  EXPECT_EQ(base.values.values, more.values.values);
}

TEST(Separate, IdentityIsExact) {
  auto c = sine(440, 0.3, 12000);
  auto out = separate(c, SourceSeparator::identity());
  EXPECT_EQ(out.samples, c.samples);
}

TEST(Separate, BaselineSuppressesOutOfBand) {
  auto high = sine(10000, 1.0, 44100);
  auto out = separate(high, SourceSeparator::spectral_mask());
  EXPECT_EQ(out.size(), high.size());
  EXPECT_EQ(out.sample_rate, high.sample_rate);
  EXPECT_LT(rms(out.samples), 0.1 * rms(high.samples));

  auto mid = sine(440, 1.0, 12000);
  auto kept = separate(mid, SourceSeparator::spectral_mask());
  EXPECT_EQ(kept.size(), mid.size());
  EXPECT_GT(rms(kept.samples), 0.5 * rms(mid.samples));
}

TEST(Separate, ExternalStemsCropAndMissing) {
  testing::TempDir dir("stems");
  auto stem = sine(300, 3.0, 12000);
  for (auto& v : stem.samples) v = static_cast<float>(v);
  write_wav(stem_path(dir.path(), 42), stem);
  EXPECT_EQ(stem_path(dir.path(), 42).filename(), "42.vocals.wav");

  AudioClip clip;
  clip.samples.assign(6000, 0.0);
  auto out = separate(clip, SourceSeparator::external_stems(dir.path()), {42, 1.0});
  ASSERT_EQ(out.size(), 6000u);
  for (std::size_t i = 0; i < 6000; ++i) ASSERT_EQ(out.samples[i], stem.samples[12000 + i]);

  try {
    separate(clip, SourceSeparator::external_stems(dir.path()), {7, 0.0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find('7'), std::string::npos);
  }
  EXPECT_EQ(parse_separator_kind("stems"), SeparatorKind::kExternalStems);
  EXPECT_EQ(parse_separator_kind("baseline"), SeparatorKind::kSpectralMask);
  EXPECT_THROW(parse_separator_kind("wave-u-net"), ValidationError);
}

TEST(CropOrPad, Cases) {
  auto c45 = sine(200, 45.0, 12000);
  auto a = crop_or_pad(c45);
  ASSERT_EQ(a.size(), 360000u);
  EXPECT_TRUE(std::equal(a.samples.begin(), a.samples.end(), c45.samples.begin()));

  auto c12 = sine(200, 12.0, 12000);
  auto b = crop_or_pad(c12);
  ASSERT_EQ(b.size(), 360000u);
  EXPECT_TRUE(std::equal(c12.samples.begin(), c12.samples.end(), b.samples.begin()));
  for (std::size_t i = c12.size(); i < b.size(); ++i) ASSERT_EQ(b.samples[i], 0.0);

  auto c30 = sine(200, 30.0, 12000);
  EXPECT_EQ(crop_or_pad(c30).samples, c30.samples);
}

TEST(Slice, ClampsToClip) {
  auto c = sine(200, 2.0, 12000);
  EXPECT_EQ(slice_seconds(c, 0.5, 1.0).size(), 6000u);
  EXPECT_EQ(slice_seconds(c, 1.5, 9.0).size(), 6000u);
}

TEST(MelCache, RoundTripAndVersion) {
  auto mel = mel_spectrogram(sine(500, 0.5, 12000));
  std::stringstream io;
  write_mel_cache(io, mel);
  const std::string bytes = io.str();
  EXPECT_EQ(bytes.substr(0, 4), "MELS");
  EXPECT_EQ(bytes.size(), 16 + 4 * mel.values.values.size());
  auto back = read_mel_cache(io);
  ASSERT_EQ(back.frames(), mel.frames());
  for (std::size_t i = 0; i < mel.values.values.size(); ++i) {
    EXPECT_EQ(back.values.values[i], static_cast<double>(static_cast<float>(mel.values.values[i])));
  }
  std::string wrong = bytes;
  wrong[4] = 9;
  std::istringstream w(wrong);
  EXPECT_THROW(read_mel_cache(w), UnsupportedFormat);
}

TEST(Featurize, SegmentPipelineShape) {
  auto track = sine(440, 40.0, 24000);
  auto mel = featurize_segment(track, 5.0, 20.0, SourceSeparator::identity(), 1);
  EXPECT_EQ(mel.n_mels(), 128u);
  EXPECT_EQ(mel.frames(), 1405u);
  auto short_mel = featurize_segment(track, 5.0, 20.0, SourceSeparator::identity(), 1, 6.0);
  EXPECT_EQ(short_mel.frames(), frame_count(72000));
}

}  // namespace
}  // namespace lyricmood::audio
