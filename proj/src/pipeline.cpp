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

#include "lyricmood/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <unordered_map>
#include <unordered_set>

#include "lyricmood/error.hpp"
#include "lyricmood/parallel.hpp"

namespace lyricmood::pipeline {

namespace fs = std::filesystem;
using syncdata::DatasetRow;

std::vector<std::string> build_vocab(std::span<const DatasetRow> rows, std::size_t min_count) {
  std::unordered_map<std::string, std::size_t> counts;
  std::vector<std::string> order;
  for (const auto& row : rows) {
    for (auto& tok : textfeat::normalize(row.text)) {
      if (counts[tok]++ == 0) order.push_back(tok);
    }
  }
  std::vector<std::string> vocab;
  for (auto& tok : order) {
    if (counts[tok] >= min_count) vocab.push_back(std::move(tok));
  }
  return vocab;
}

namespace {

void push_row(LabeledSamples& out, const DatasetRow& row, models::Sample sample) {
  out.samples.push_back(std::move(sample));
  out.labels.push_back(syncdata::emotion_code(row.emotion));
  out.groups.push_back(row.id);
}

}  // namespace

LabeledSamples token_samples(const models::TextModel& model, std::span<const DatasetRow> rows) {
  LabeledSamples out;
  for (const auto& row : rows) push_row(out, row, model.featurize(row.text));
  return out;
}

LabeledSamples vector_samples(std::span<const DatasetRow> rows,
                              const textfeat::ContextualEmbeddingFile& file) {
  LabeledSamples out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto it = file.vectors.find(static_cast<std::int64_t>(i));
    if (it == file.vectors.end()) {
      throw ValidationError("no contextual vector for row " + std::to_string(i));
    }
    models::Sample s;
    s.values = it->second;
    push_row(out, rows[i], std::move(s));
  }
  return out;
}

LabeledSamples sequence_samples(std::span<const DatasetRow> rows,
                                const textfeat::ContextualSequenceFile& file,
                                std::size_t max_steps) {
  LabeledSamples out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto it = file.sequences.find(static_cast<std::int64_t>(i));
    if (it == file.sequences.end() || it->second.empty()) {
      throw ValidationError("no contextual sequence for row " + std::to_string(i));
    }
    models::Sample s;
    s.steps = std::min(max_steps, it->second.size());
    for (std::size_t t = 0; t < s.steps; ++t) {
      s.values.insert(s.values.end(), it->second[t].begin(), it->second[t].end());
    }
    push_row(out, rows[i], std::move(s));
  }
  return out;
}

std::vector<AudioChunk> audio_chunks(std::span<const DatasetRow> rows,
                                     const std::map<std::int64_t, syncdata::TrackMeta>& meta,
                                     const fs::path& audio_dir, std::size_t classes,
                                     double max_seconds) {
  std::vector<AudioChunk> out;
  for (auto& [id, track_rows] : syncdata::group_by_track(rows)) {
    auto m = meta.find(id);
    if (m == meta.end()) throw ValidationError("track " + std::to_string(id) + " has no metadata");
    auto seg = syncdata::segment_track(std::move(track_rows), m->second.duration_seconds);
    fs::path path = audio_dir / m->second.audio_path;
    for (const auto& c : syncdata::chunk_segments(seg, max_seconds)) {
      if (static_cast<std::size_t>(syncdata::emotion_code(c.label)) >= classes) continue;
      out.push_back({id, c.start, c.end, c.label, path});
    }
  }
  return out;
}

std::size_t excerpt_frames(double excerpt_seconds) {
  const auto n = static_cast<std::size_t>(std::llround(excerpt_seconds * audio::kTargetRate));
  return audio::frame_count(n);
}

std::string cache_key(const AudioChunk& chunk, const AudioFeatureOptions& opts) {
  std::error_code ec;
  const auto size = fs::file_size(chunk.audio_path, ec);
  const auto stamp = fs::last_write_time(chunk.audio_path, ec).time_since_epoch().count();
  char buf[512];
  std::snprintf(buf, sizeof buf, "%lld|%.17g|%.17g|%d|%.17g|%llu|%lld",
                static_cast<long long>(chunk.track_id), chunk.start, chunk.end,
                static_cast<int>(opts.separator.kind), opts.excerpt_seconds,
                static_cast<unsigned long long>(ec ? 0 : size), static_cast<long long>(stamp));
  std::string id = fs::absolute(chunk.audio_path).string() + "|" + buf;
  if (opts.separator.kind == audio::SeparatorKind::kExternalStems) {
    id += "|" + fs::absolute(opts.separator.stems_dir).string();
  }
  std::snprintf(buf, sizeof buf, "%016llx.mel",
                static_cast<unsigned long long>(textfeat::fnv1a64(id)));
  return buf;
}

namespace {

void round_to_f32(audio::MelSpectrogram& mel) {
  for (auto& v : mel.values.values) v = static_cast<double>(static_cast<float>(v));
}

std::optional<audio::MelSpectrogram> load_cached(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  try {
    return audio::read_mel_cache(in);
  } catch (const Error&) {
    return std::nullopt;  // stale or partial entry; recompute it
  }
}

void store_cached(const fs::path& path, const audio::MelSpectrogram& mel) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error("cannot write feature cache " + tmp.string());
    audio::write_mel_cache(out, mel);
  }
  fs::rename(tmp, path);
}

}  // namespace

std::vector<audio::MelSpectrogram> audio_features(std::span<const AudioChunk> chunks,
                                                  const AudioFeatureOptions& opts) {
  std::vector<audio::MelSpectrogram> out(chunks.size());
  std::vector<std::vector<std::size_t>> by_track;
  std::map<fs::path, std::size_t> track_index;
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    auto [it, fresh] = track_index.try_emplace(chunks[i].audio_path, by_track.size());
    if (fresh) by_track.emplace_back();
    by_track[it->second].push_back(i);
  }
  if (!opts.cache_dir.empty()) fs::create_directories(opts.cache_dir);

  parallel_for(by_track.size(), opts.jobs, [&](std::size_t t) {
    std::optional<audio::AudioClip> track;
    for (std::size_t i : by_track[t]) {
      const AudioChunk& c = chunks[i];
      fs::path cached;
      if (!opts.cache_dir.empty()) {
        cached = opts.cache_dir / cache_key(c, opts);
        if (auto hit = load_cached(cached)) {
          out[i] = std::move(*hit);
          continue;
        }
      }
      if (!track) track = audio::resample(audio::read_wav(c.audio_path), audio::kTargetRate);
      out[i] = audio::featurize_segment(*track, c.start, c.end, opts.separator, c.track_id,
                                        opts.excerpt_seconds);
      round_to_f32(out[i]);
      if (!cached.empty()) store_cached(cached, out[i]);
    }
  });
  return out;
}

LabeledSamples audio_samples(std::span<const AudioChunk> chunks,
                             std::span<const audio::MelSpectrogram> mels) {
  if (chunks.size() != mels.size()) throw ValidationError("chunks and features differ in length");
  LabeledSamples out;
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    models::Sample s;
    s.values = mels[i].values.values;
    s.steps = mels[i].frames();
    out.samples.push_back(std::move(s));
    out.labels.push_back(syncdata::emotion_code(chunks[i].label));
    out.groups.push_back(chunks[i].track_id);
  }
  return out;
}

}  // namespace lyricmood::pipeline
