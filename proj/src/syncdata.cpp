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

#include "lyricmood/syncdata.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "csv.hpp"
#include "lyricmood/error.hpp"

namespace lyricmood::syncdata {

namespace {

constexpr std::array<std::string_view, kNumEmotions> kNames = {
    "sadness", "joy", "fear", "anger", "disgust"};

bool is_blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) {
    return std::isspace(c) != 0;
  });
}

std::string lower_ascii(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

DatasetRow row_from_json(const nlohmann::json& j, std::size_t line) {
  if (!j.is_object()) throw ParseError(line, "expected a JSON object");
  for (const char* key : {"id", "text", "start", "end", "emotion"}) {
    if (!j.contains(key)) {
      throw ParseError(line, std::string("missing key '") + key + "'");
    }
  }
  DatasetRow row;
  const auto& id = j["id"];
  if (id.is_number_integer()) {
    row.id = id.get<std::int64_t>();
  } else if (id.is_string()) {
    if (!detail::parse_int64(id.get<std::string>(), row.id)) {
      throw ParseError(line, "id is not an integer");
    }
  } else {
    throw ParseError(line, "id is not an integer");
  }
  if (!j["text"].is_string()) throw ParseError(line, "text is not a string");
  row.text = j["text"].get<std::string>();
  for (auto [key, dst] : {std::pair{"start", &row.start}, std::pair{"end", &row.end}}) {
    const auto& v = j[key];
    if (v.is_number()) {
      *dst = v.get<double>();
    } else if (v.is_string()) {
      if (!detail::parse_double(v.get<std::string>(), *dst)) {
        throw ParseError(line, std::string(key) + " is not a number");
      }
    } else {
      throw ParseError(line, std::string(key) + " is not a number");
    }
  }
  if (!j["emotion"].is_string()) throw ParseError(line, "emotion is not a string");
  auto label = try_parse_emotion(j["emotion"].get<std::string>());
  if (!label) {
    throw ValidationError(line, "unknown emotion '" + j["emotion"].get<std::string>() + "'");
  }
  row.emotion = *label;
  return row;
}

std::vector<DatasetRow> parse_jsonl(std::istream& in) {
  std::vector<DatasetRow> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(line_no, std::string("invalid JSON: ") + e.what());
    }
    DatasetRow row = row_from_json(j, line_no);
    validate_row(row, line_no);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<DatasetRow> parse_csv(std::istream& in) {
  std::vector<DatasetRow> rows;
  detail::CsvReader reader(in);
  detail::CsvRecord rec;
  if (!reader.next(rec)) return rows;
  std::vector<std::string> header;
  for (auto& f : rec.fields) header.push_back(lower_ascii(trim(f)));
  const std::vector<std::string> expected = {"id", "text", "start", "end", "emotion"};
  if (header != expected) {
    throw ParseError(rec.line, "expected header id,text,start,end,emotion");
  }
  while (reader.next(rec)) {
    if (rec.fields.size() != 5) {
      throw ParseError(rec.line, "expected 5 fields, got " + std::to_string(rec.fields.size()));
    }
    DatasetRow row;
    if (!detail::parse_int64(rec.fields[0], row.id)) {
      throw ParseError(rec.line, "id is not an integer: '" + rec.fields[0] + "'");
    }
    row.text = rec.fields[1];
    if (!detail::parse_double(rec.fields[2], row.start)) {
      throw ParseError(rec.line, "start is not a number: '" + rec.fields[2] + "'");
    }
    if (!detail::parse_double(rec.fields[3], row.end)) {
      throw ParseError(rec.line, "end is not a number: '" + rec.fields[3] + "'");
    }
    auto label = try_parse_emotion(trim(rec.fields[4]));
    if (!label) {
      throw ValidationError(rec.line, "unknown emotion '" + rec.fields[4] + "'");
    }
    row.emotion = *label;
    validate_row(row, rec.line);
    rows.push_back(std::move(row));
  }
  return rows;
}

// Parses `mm:ss.xx` (minutes may exceed 59, fraction optional).
std::optional<double> parse_lrc_time(std::string_view s) {
  auto colon = s.find(':');
  if (colon == std::string_view::npos || colon == 0) return std::nullopt;
  auto digits = [](std::string_view d) {
    return !d.empty() && std::all_of(d.begin(), d.end(), [](unsigned char c) {
      return std::isdigit(c) != 0;
    });
  };
  std::string_view mm = s.substr(0, colon);
  std::string_view rest = s.substr(colon + 1);
  std::string_view ss = rest, frac;
  if (auto dot = rest.find_first_of(".:"); dot != std::string_view::npos) {
    ss = rest.substr(0, dot);
    frac = rest.substr(dot + 1);
    if (!digits(frac)) return std::nullopt;
  }
  if (!digits(mm) || !digits(ss) || ss.size() > 2) return std::nullopt;
  double minutes = std::stod(std::string(mm));
  double seconds = std::stod(std::string(ss));
  if (seconds >= 60.0) return std::nullopt;
  double fraction = frac.empty() ? 0.0 : std::stod("0." + std::string(frac));
  return minutes * 60.0 + seconds + fraction;
}

bool is_lrc_id_tag(std::string_view inner) {
  auto colon = inner.find(':');
  if (colon == std::string_view::npos) return false;
  std::string key = lower_ascii(inner.substr(0, colon));
  static const std::array<std::string_view, 10> kTags = {
      "ar", "ti", "al", "au", "by", "offset", "length", "re", "ve", "#"};
  return std::find(kTags.begin(), kTags.end(), key) != kTags.end();
}

}  // namespace

std::string_view emotion_name(Emotion e) {
  return kNames.at(static_cast<std::size_t>(e));
}

std::optional<Emotion> try_parse_emotion(std::string_view s) {
  std::string lower = lower_ascii(s);
  for (std::size_t i = 0; i < kNames.size(); ++i) {
    if (lower == kNames[i]) return static_cast<Emotion>(i);
  }
  return std::nullopt;
}

Emotion parse_emotion(std::string_view s) {
  if (auto e = try_parse_emotion(s)) return *e;
  throw ValidationError("unknown emotion '" + std::string(s) + "'");
}

Emotion emotion_from_code(int code) {
  if (code < 0 || code >= kNumEmotions) {
    throw ValidationError("emotion code out of range: " + std::to_string(code));
  }
  return static_cast<Emotion>(code);
}

void validate_row(const DatasetRow& row, std::size_t line) {
  auto fail = [&](const std::string& why) -> void {
    if (line > 0) throw ValidationError(line, why);
    throw ValidationError(why);
  };
  if (row.id < 0) fail("id must be non-negative");
  if (!std::isfinite(row.start) || !std::isfinite(row.end)) fail("non-finite timestamp");
  if (row.start < 0.0) fail("start must be non-negative");
  if (!(row.end > row.start)) {
    fail("end (" + detail::format_double(row.end) + ") must be greater than start (" +
         detail::format_double(row.start) + ")");
  }
  if (is_blank(row.text)) fail("text is empty");
}

DatasetFormat format_from_path(std::string_view path) {
  std::string lower = lower_ascii(path);
  auto ends_with = [&](std::string_view suffix) {
    return lower.size() >= suffix.size() &&
           lower.compare(lower.size() - suffix.size(), suffix.size(), suffix) == 0;
  };
  if (ends_with(".csv")) return DatasetFormat::kCsv;
  if (ends_with(".jsonl") || ends_with(".json")) return DatasetFormat::kJsonl;
  throw UnsupportedFormat("cannot infer dataset format from '" + std::string(path) + "'");
}

std::vector<DatasetRow> parse_dataset(std::istream& in, DatasetFormat format) {
  return format == DatasetFormat::kCsv ? parse_csv(in) : parse_jsonl(in);
}

void write_dataset(std::ostream& out, std::span<const DatasetRow> rows,
                   DatasetFormat format) {
  if (format == DatasetFormat::kJsonl) {
    for (const auto& r : rows) {
      nlohmann::ordered_json j;
      j["id"] = r.id;
      j["text"] = r.text;
      j["start"] = r.start;
      j["end"] = r.end;
      j["emotion"] = emotion_name(r.emotion);
      try {
        out << j.dump() << '\n';
      } catch (const nlohmann::json::type_error&) {
        throw ValidationError("row of track " + std::to_string(r.id) + ": text is not valid UTF-8");
      }
    }
    return;
  }
  out << "id,text,start,end,emotion\n";
  for (const auto& r : rows) {
    out << r.id << ',';
    detail::write_csv_field(out, r.text);
    out << ',' << detail::format_double(r.start) << ',' << detail::format_double(r.end)
        << ',' << emotion_name(r.emotion) << '\n';
  }
}

std::vector<DatasetRow> parse_lrc(std::istream& in, Emotion default_label,
                                  std::int64_t track_id) {
  struct Timed {
    double t;
    std::string text;
    std::size_t line;
  };
  std::vector<Timed> timed;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string_view sv = line;
    while (!sv.empty() && std::isspace(static_cast<unsigned char>(sv.front()))) sv.remove_prefix(1);
    if (sv.empty()) continue;
    if (sv.front() != '[') {
      throw ParseError(line_no, "expected a [mm:ss.xx] timestamp");
    }
    auto close = sv.find(']');
    if (close == std::string_view::npos) {
      throw ParseError(line_no, "unterminated timestamp bracket");
    }
    std::string_view inner = sv.substr(1, close - 1);
    auto t = parse_lrc_time(inner);
    if (!t) {
      if (is_lrc_id_tag(inner)) continue;
      throw ParseError(line_no, "cannot parse timestamp '[" + std::string(inner) + "]'");
    }
    if (!timed.empty() && *t < timed.back().t) {
      throw ValidationError(line_no, "timestamp goes backwards");
    }
    timed.push_back({*t, trim(sv.substr(close + 1)), line_no});
  }

  std::vector<double> gaps;
  for (std::size_t i = 0; i + 1 < timed.size(); ++i) {
    if (!timed[i].text.empty()) gaps.push_back(timed[i + 1].t - timed[i].t);
  }
  double tail = kDefaultLrcLineSeconds;
  if (!gaps.empty()) {
    std::sort(gaps.begin(), gaps.end());
    std::size_t n = gaps.size();
    tail = n % 2 == 1 ? gaps[n / 2] : 0.5 * (gaps[n / 2 - 1] + gaps[n / 2]);
    if (!(tail > 0.0)) tail = kDefaultLrcLineSeconds;
  }

  std::vector<DatasetRow> rows;
  for (std::size_t i = 0; i < timed.size(); ++i) {
    if (timed[i].text.empty()) continue;
    DatasetRow row;
    row.id = track_id;
    row.text = timed[i].text;
    row.start = timed[i].t;
    row.end = i + 1 < timed.size() ? timed[i + 1].t : timed[i].t + tail;
    row.emotion = default_label;
    validate_row(row, timed[i].line);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::map<std::int64_t, TrackMeta> parse_track_meta(std::istream& in) {
  std::map<std::int64_t, TrackMeta> out;
  detail::CsvReader reader(in);
  detail::CsvRecord rec;
  if (!reader.next(rec)) return out;
  std::vector<std::string> header;
  for (auto& f : rec.fields) header.push_back(lower_ascii(trim(f)));
  const std::vector<std::string> expected = {"id", "duration_seconds", "audio_path"};
  if (header != expected) {
    throw ParseError(rec.line, "expected header id,duration_seconds,audio_path");
  }
  while (reader.next(rec)) {
    if (rec.fields.size() != 3) {
      throw ParseError(rec.line, "expected 3 fields, got " + std::to_string(rec.fields.size()));
    }
    TrackMeta m;
    if (!detail::parse_int64(rec.fields[0], m.id) || m.id < 0) {
      throw ParseError(rec.line, "id is not a non-negative integer");
    }
    if (!detail::parse_double(rec.fields[1], m.duration_seconds) ||
        !(m.duration_seconds >= 0.0)) {
      throw ParseError(rec.line, "duration_seconds is not a non-negative number");
    }
    m.audio_path = rec.fields[2];
    if (!out.emplace(m.id, m).second) {
      throw ValidationError(rec.line, "duplicate track id " + std::to_string(m.id));
    }
  }
  return out;
}

void write_track_meta(std::ostream& out, std::span<const TrackMeta> tracks) {
  out << "id,duration_seconds,audio_path\n";
  for (const auto& t : tracks) {
    out << t.id << ',' << detail::format_double(t.duration_seconds) << ',';
    detail::write_csv_field(out, t.audio_path);
    out << '\n';
  }
}

std::map<std::int64_t, std::vector<DatasetRow>> group_by_track(
    std::span<const DatasetRow> rows) {
  std::map<std::int64_t, std::vector<DatasetRow>> out;
  for (const auto& r : rows) out[r.id].push_back(r);
  return out;
}

TrackSegmentation segment_track(std::vector<DatasetRow> rows, double track_duration) {
  if (rows.empty()) throw ValidationError("segment_track: no rows");
  const std::int64_t id = rows.front().id;
  for (const auto& r : rows) {
    if (r.id != id) {
      throw ValidationError("segment_track: rows from tracks " + std::to_string(id) +
                            " and " + std::to_string(r.id));
    }
    validate_row(r);
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const DatasetRow& a, const DatasetRow& b) { return a.start < b.start; });
  for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
    if (rows[i + 1].start < rows[i].end) {
      std::ostringstream msg;
      msg << "track " << id << ": row " << i << " [" << rows[i].start << ", "
          << rows[i].end << "] overlaps row " << i + 1 << " [" << rows[i + 1].start
          << ", " << rows[i + 1].end << "]";
      throw ValidationError(msg.str());
    }
  }
  double first_start = rows.front().start;
  double last_end = rows.back().end;
  if (track_duration < last_end) {
    throw ValidationError("track " + std::to_string(id) + ": duration " +
                          detail::format_double(track_duration) +
                          " is shorter than the last line end " +
                          detail::format_double(last_end));
  }
  TrackSegmentation seg;
  seg.track_id = id;
  seg.intro = {0.0, first_start};
  seg.synch = {first_start, last_end};
  seg.outro = {last_end, track_duration};
  seg.rows = std::move(rows);
  return seg;
}

std::vector<Chunk> chunk_segments(const TrackSegmentation& seg, double max_seconds) {
  std::vector<Chunk> chunks;
  const auto& rows = seg.rows;
  std::size_t i = 0;
  while (i < rows.size()) {
    Chunk c;
    c.track_id = seg.track_id;
    c.start = rows[i].start;
    c.end = rows[i].end;
    c.label = rows[i].emotion;
    c.first_row = i;
    c.row_count = 1;
    c.text = rows[i].text;
    std::size_t j = i + 1;
    while (j < rows.size() && rows[j].emotion == c.label &&
           rows[j].end - c.start <= max_seconds) {
      c.end = rows[j].end;
      c.text += ' ';
      c.text += rows[j].text;
      ++c.row_count;
      ++j;
    }
    c.oversize = c.row_count == 1 && c.duration() > max_seconds;
    chunks.push_back(std::move(c));
    i = j;
  }
  return chunks;
}

double percentile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw ValidationError("percentile of empty data");
  double rank = p / 100.0 * static_cast<double>(sorted.size() - 1);
  auto lo = static_cast<std::size_t>(std::floor(rank));
  auto hi = std::min(lo + 1, sorted.size() - 1);
  double frac = rank - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

SegmentStats compute_stats(std::span<const double> durations) {
  if (durations.empty()) throw ValidationError("compute_stats: empty input");
  std::vector<double> sorted(durations.begin(), durations.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  SegmentStats s;
  s.min = sorted.front();
  s.max = sorted.back();
  s.mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / n;
  double ss = 0.0;
  for (double d : sorted) ss += (d - s.mean) * (d - s.mean);
  s.std = std::sqrt(ss / n);
  s.perc_70 = percentile_sorted(sorted, 70.0);
  s.perc_90 = percentile_sorted(sorted, 90.0);
  return s;
}

std::optional<SegmentKind> try_parse_segment_kind(std::string_view s) {
  std::string lower = lower_ascii(s);
  if (lower == "all") return SegmentKind::kAll;
  if (lower == "synch" || lower == "sync") return SegmentKind::kSynch;
  if (lower == "intro") return SegmentKind::kIntro;
  if (lower == "outro") return SegmentKind::kOutro;
  return std::nullopt;
}

std::vector<double> collect_durations(std::span<const TrackSegmentation> tracks,
                                      SegmentKind which) {
  std::vector<double> out;
  const bool synch = which == SegmentKind::kAll || which == SegmentKind::kSynch;
  const bool intro = which == SegmentKind::kAll || which == SegmentKind::kIntro;
  const bool outro = which == SegmentKind::kAll || which == SegmentKind::kOutro;
  for (const auto& t : tracks) {
    if (synch) {
      for (const auto& r : t.rows) out.push_back(r.duration());
    }
    if (intro) out.push_back(t.intro.length());
    if (outro) out.push_back(t.outro.length());
  }
  return out;
}

std::array<double, kNumEmotions> class_distribution(std::span<const DatasetRow> rows) {
  if (rows.empty()) throw ValidationError("class_distribution: empty input");
  std::array<std::size_t, kNumEmotions> counts{};
  for (const auto& r : rows) ++counts[static_cast<std::size_t>(r.emotion)];
  std::array<double, kNumEmotions> pct{};
  for (std::size_t i = 0; i < pct.size(); ++i) {
    pct[i] = 100.0 * static_cast<double>(counts[i]) / static_cast<double>(rows.size());
  }
  return pct;
}

}  // namespace lyricmood::syncdata
