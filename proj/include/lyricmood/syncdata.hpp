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

// Synchronized-lyrics datasets: parsing, validation, intro/synch/outro
// segmentation, ~30 s chunking and duration statistics.

#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace lyricmood::syncdata {

// Stable integer codes; checkpoints and reports rely on this order.
enum class Emotion : int {
  kSadness = 0,
  kJoy = 1,
  kFear = 2,
  kAnger = 3,
  kDisgust = 4,
};

inline constexpr int kNumEmotions = 5;

inline constexpr std::array<Emotion, kNumEmotions> kAllEmotions = {
    Emotion::kSadness, Emotion::kJoy, Emotion::kFear, Emotion::kAnger,
    Emotion::kDisgust};

std::string_view emotion_name(Emotion e);

// Case-insensitive. Returns nullopt for anything outside the five labels.
std::optional<Emotion> try_parse_emotion(std::string_view s);

// Throws ValidationError for unknown labels.
Emotion parse_emotion(std::string_view s);

inline int emotion_code(Emotion e) { return static_cast<int>(e); }
Emotion emotion_from_code(int code);

struct DatasetRow {
  std::int64_t id = 0;
  std::string text;
  double start = 0.0;
  double end = 0.0;
  Emotion emotion = Emotion::kSadness;

  double duration() const { return end - start; }
  friend bool operator==(const DatasetRow&, const DatasetRow&) = default;
};

// Throws ValidationError when the row breaks an invariant (negative id or
// start, end <= start, blank text). `line` is attached to the message.
void validate_row(const DatasetRow& row, std::size_t line = 0);

enum class DatasetFormat { kJsonl, kCsv };

// Picks the format from a file extension (.jsonl/.json -> jsonl, .csv -> csv).
DatasetFormat format_from_path(std::string_view path);

// Parses a whole dataset. Row order is preserved. Malformed records raise
// ParseError and invariant violations raise ValidationError, both carrying
// the 1-based line number where the record starts.
std::vector<DatasetRow> parse_dataset(std::istream& in, DatasetFormat format);

void write_dataset(std::ostream& out, std::span<const DatasetRow> rows,
                   DatasetFormat format);

// Median line duration used for the last LRC line when the file has only
// one timed line.
inline constexpr double kDefaultLrcLineSeconds = 5.0;

// Reads `[mm:ss.xx] text` lines. Each row ends where the next timed line
// starts; the final row lasts the median of the preceding line durations.
// Lines with a timestamp and no text close the previous line without
// producing a row. Standard ID tags ([ar:], [ti:], ...) are skipped.
std::vector<DatasetRow> parse_lrc(std::istream& in, Emotion default_label,
                                  std::int64_t track_id);

struct TrackMeta {
  std::int64_t id = 0;
  double duration_seconds = 0.0;
  std::string audio_path;

  friend bool operator==(const TrackMeta&, const TrackMeta&) = default;
};

// Sidecar CSV with header `id,duration_seconds,audio_path`.
std::map<std::int64_t, TrackMeta> parse_track_meta(std::istream& in);
void write_track_meta(std::ostream& out, std::span<const TrackMeta> tracks);

struct Interval {
  double begin = 0.0;
  double end = 0.0;

  double length() const { return end - begin; }
};

// intro = [0, first_start), synch = [first_start, last_end],
// outro = (last_end, duration]. Gaps between sung lines belong to synch.
struct TrackSegmentation {
  std::int64_t track_id = 0;
  Interval intro;
  Interval synch;
  Interval outro;
  std::vector<DatasetRow> rows;  // sorted by start, non-overlapping

  double duration() const { return outro.end; }
};

// Groups rows by track id, keeping input order within a track.
std::map<std::int64_t, std::vector<DatasetRow>> group_by_track(
    std::span<const DatasetRow> rows);

// Sorts rows by start and splits the track into intro/synch/outro. Throws
// ValidationError for empty input, mixed track ids, overlapping rows (both
// rows are named) or a duration shorter than the last row end.
TrackSegmentation segment_track(std::vector<DatasetRow> rows,
                                double track_duration);

inline constexpr double kChunkSeconds = 30.0;

struct Chunk {
  std::int64_t track_id = 0;
  double start = 0.0;
  double end = 0.0;
  std::string text;  // contributing lines joined by a single space
  Emotion label = Emotion::kSadness;
  std::size_t first_row = 0;  // index into TrackSegmentation::rows
  std::size_t row_count = 0;
  bool oversize = false;  // a single row longer than the chunk limit

  double duration() const { return end - start; }
};

// Greedy left-to-right accumulation of consecutive same-label rows. A chunk
// closes when the next row has a different label or would stretch the chunk
// past `max_seconds` (measured from the first row start to the last row end).
std::vector<Chunk> chunk_segments(const TrackSegmentation& seg,
                                  double max_seconds = kChunkSeconds);

struct SegmentStats {
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;
  double std = 0.0;  // population
  double perc_70 = 0.0;
  double perc_90 = 0.0;
};

// Percentiles interpolate linearly between closest ranks:
// rank = p/100 * (n - 1) over the sorted values.
SegmentStats compute_stats(std::span<const double> durations);

// Linear-interpolation percentile of already sorted values, p in [0, 100].
double percentile_sorted(std::span<const double> sorted, double p);

// Which duration population a statistics column summarizes:
//   kSynch  every sung row duration (end - start)
//   kIntro  one intro length per track
//   kOutro  one outro length per track
//   kAll    the three populations above pooled together
enum class SegmentKind { kAll, kSynch, kIntro, kOutro };

std::optional<SegmentKind> try_parse_segment_kind(std::string_view s);

std::vector<double> collect_durations(
    std::span<const TrackSegmentation> tracks, SegmentKind which);

// Percentage of rows per label, indexed by emotion code. Throws
// ValidationError on empty input.
std::array<double, kNumEmotions> class_distribution(
    std::span<const DatasetRow> rows);

}  // namespace lyricmood::syncdata
