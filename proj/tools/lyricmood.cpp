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

// lyricmood: one binary, one subcommand per pipeline step.
//
// Every subcommand resolves its settings as defaults <- --config file <-
// flags, rejects unknown config keys and writes the resolved settings next
// to its outputs. Exit codes: 0 ok, 1 usage, 2 data validation, 3 runtime.

#include <malloc.h>

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <nlohmann/json.hpp>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "lyricmood/audiofeat.hpp"
#include "lyricmood/config.hpp"
#include "lyricmood/error.hpp"
#include "lyricmood/harness.hpp"
#include "lyricmood/models.hpp"
#include "lyricmood/parallel.hpp"
#include "lyricmood/pipeline.hpp"
#include "lyricmood/syncdata.hpp"
#include "lyricmood/synthgen.hpp"
#include "lyricmood/textfeat.hpp"

namespace {

namespace fs = std::filesystem;
using namespace lyricmood;

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitRuntime = 3;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Settings

struct OptSpec {
  std::string key;
  std::string help;
  std::string fallback;
  bool flag = false;
  bool required = false;
};

struct Command {
  std::string name;
  std::string help;
  std::vector<OptSpec> opts;
  std::function<void(const KeyValues&)> run;
};

const std::vector<OptSpec> kCommonOpts = {
    {"seed", "random seed", "1"},
    {"jobs", "worker threads for featurization (0 = all cores)", "1"},
};

std::vector<OptSpec> with_common(std::vector<OptSpec> opts) {
  opts.insert(opts.end(), kCommonOpts.begin(), kCommonOpts.end());
  return opts;
}

std::string require(const KeyValues& kv, const std::string& key) {
  auto v = kv.find(key);
  if (!v || v->empty()) throw UsageError("--" + key + " is required");
  return *v;
}

std::optional<std::string> optional_value(const KeyValues& kv, const std::string& key) {
  auto v = kv.find(key);
  if (!v || v->empty()) return std::nullopt;
  return v;
}

std::size_t get_size(const KeyValues& kv, const std::string& key) {
  const auto v = kv.get_int(key, 0);
  if (v < 0) throw ValidationError(key + " must not be negative");
  return static_cast<std::size_t>(v);
}

std::uint64_t get_seed(const KeyValues& kv) {
  return static_cast<std::uint64_t>(kv.get_int("seed", 1));
}

std::vector<double> parse_double_list(const std::string& key, const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    KeyValues one;
    one.set(key, item);
    out.push_back(one.get_double(key, 0.0));
  }
  return out;
}

// The resolved settings of one run, beside its outputs.
void write_resolved(const fs::path& path, const std::string& command, const KeyValues& kv) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "# lyricmood " << command << "\n";
  kv.write(out);
}

// ---------------------------------------------------------------------------
// File helpers

std::ifstream open_input(const fs::path& path, bool binary = false) {
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) throw ValidationError("cannot open " + path.string());
  return in;
}

std::ofstream open_output(const fs::path& path, bool binary = false) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

// Prefixes parse and validation messages with the file they came from.
template <typename F>
auto with_path(const fs::path& path, F&& f) {
  try {
    return f();
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

std::vector<syncdata::DatasetRow> load_dataset(const fs::path& path) {
  auto in = open_input(path);
  return with_path(path, [&] {
    return syncdata::parse_dataset(in, syncdata::format_from_path(path.string()));
  });
}

std::map<std::int64_t, syncdata::TrackMeta> load_meta(const fs::path& path) {
  auto in = open_input(path);
  return with_path(path, [&] { return syncdata::parse_track_meta(in); });
}

void save_dataset(const fs::path& path, const std::vector<syncdata::DatasetRow>& rows) {
  auto out = open_output(path);
  syncdata::write_dataset(out, rows, syncdata::format_from_path(path.string()));
}

std::vector<syncdata::TrackSegmentation> segment_all(
    const std::vector<syncdata::DatasetRow>& rows,
    const std::map<std::int64_t, syncdata::TrackMeta>& meta) {
  std::vector<syncdata::TrackSegmentation> out;
  for (auto& [id, track_rows] : syncdata::group_by_track(rows)) {
    auto m = meta.find(id);
    if (m == meta.end()) throw ValidationError("track " + std::to_string(id) + " has no metadata");
    out.push_back(syncdata::segment_track(std::move(track_rows), m->second.duration_seconds));
  }
  return out;
}

std::string fixed(double v, int digits = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string exact(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// Splits

harness::SplitRatios parse_ratios(const std::string& text) {
  auto v = parse_double_list("split", text);
  if (v.size() != 3) throw ValidationError("split needs three ratios train,val,test");
  return {v[0], v[1], v[2]};
}

void write_split(const fs::path& path, const harness::Split& split,
                 const std::vector<std::int64_t>& groups) {
  std::vector<std::string> part(groups.size());
  for (auto i : split.train) part[i] = "train";
  for (auto i : split.val) part[i] = "val";
  for (auto i : split.test) part[i] = "test";
  auto out = open_output(path);
  out << "index,track_id,partition\n";
  for (std::size_t i = 0; i < groups.size(); ++i) {
    out << i << ',' << groups[i] << ',' << part[i] << '\n';
  }
}

// Indices of one partition of a split file written by train-*.
std::vector<std::size_t> read_partition(const fs::path& path, const std::string& partition,
                                        std::size_t samples) {
  auto in = open_input(path);
  std::string line;
  std::getline(in, line);
  if (line != "index,track_id,partition") throw ParseError(1, path.string() + ": not a split file");
  std::vector<std::size_t> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto a = line.find(',');
    auto b = line.rfind(',');
    if (a == std::string::npos || a == b) throw ParseError(lineno, path.string() + ": bad record");
    KeyValues one;
    one.set("index", line.substr(0, a));
    const auto index = one.get_int("index", -1);
    if (index < 0 || static_cast<std::size_t>(index) >= samples) {
      throw ValidationError(lineno, path.string() + ": index outside the dataset");
    }
    if (partition == "all" || line.substr(b + 1) == partition) {
      out.push_back(static_cast<std::size_t>(index));
    }
  }
  return out;
}

std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = i;
  return v;
}

// ---------------------------------------------------------------------------
// Text inputs

textfeat::EmbeddingTable text_table(const KeyValues& kv, std::size_t dim,
                                    const std::vector<syncdata::DatasetRow>& vocab_rows) {
  const std::size_t buckets = get_size(kv, "buckets");
  if (auto path = optional_value(kv, "embeddings")) {
    auto in = open_input(*path);
    auto table = with_path(*path, [&] { return textfeat::load_embeddings(in, buckets); });
    if (table.dim() != dim) {
      throw ValidationError(*path + ": embeddings have dimension " + std::to_string(table.dim()) +
                            ", expected " + std::to_string(dim));
    }
    return table;
  }
  return textfeat::EmbeddingTable::random(dim, buckets, pipeline::build_vocab(vocab_rows),
                                          get_seed(kv), kv.get_double("embed-scale", 0.1));
}

// Samples for any text model over the full dataset.
pipeline::LabeledSamples text_inputs(const models::TextModel& model, const KeyValues& kv,
                                     const std::vector<syncdata::DatasetRow>& rows) {
  switch (model.input_kind()) {
    case models::InputKind::kTokenBags:
      return pipeline::token_samples(model, rows);
    case models::InputKind::kVector: {
      const auto path = require(kv, "contextual");
      auto in = open_input(path);
      auto file = with_path(path, [&] { return textfeat::load_contextual(in); });
      if (file.dim != model.input_dim()) {
        throw ValidationError(path + ": vectors have dimension " + std::to_string(file.dim) +
                              ", model expects " + std::to_string(model.input_dim()));
      }
      return with_path(path, [&] { return pipeline::vector_samples(rows, file); });
    }
    case models::InputKind::kSequence: {
      const auto path = require(kv, "sequences");
      auto in = open_input(path);
      auto file = with_path(path, [&] { return textfeat::load_contextual_sequences(in); });
      if (file.dim != model.input_dim()) {
        throw ValidationError(path + ": sequences have dimension " + std::to_string(file.dim) +
                              ", model expects " + std::to_string(model.input_dim()));
      }
      return with_path(path, [&] {
        return pipeline::sequence_samples(rows, file, model.config().max_tokens);
      });
    }
    case models::InputKind::kSpectrogram:
      break;
  }
  throw ValidationError("not a text model");
}

// ---------------------------------------------------------------------------
// Audio inputs

fs::path cache_dir(const KeyValues& kv, const KeyValues& flags_only, const fs::path& fallback) {
  if (auto flag = optional_value(flags_only, "cache")) return *flag;
  if (const char* env = std::getenv("LYRICMOOD_CACHE"); env && *env) return env;
  if (auto v = optional_value(kv, "cache")) return *v;
  return fallback;
}

fs::path meta_dir(const KeyValues& kv) {
  fs::path meta = require(kv, "meta");
  return meta.has_parent_path() ? meta.parent_path() : fs::path(".");
}

audio::SourceSeparator separator(const KeyValues& kv) {
  const auto kind = audio::parse_separator_kind(kv.get("separator", "identity"));
  if (kind != audio::SeparatorKind::kExternalStems) return {kind, {}};
  auto dir = optional_value(kv, "stems-dir");
  return audio::SourceSeparator::external_stems(dir ? fs::path(*dir) : meta_dir(kv) / "stems");
}

std::vector<pipeline::AudioChunk> chunks_for(const KeyValues& kv,
                                             const std::vector<syncdata::DatasetRow>& rows,
                                             std::size_t classes) {
  auto meta = load_meta(require(kv, "meta"));
  auto dir = optional_value(kv, "audio-dir");
  return pipeline::audio_chunks(rows, meta, dir ? fs::path(*dir) : meta_dir(kv), classes,
                                kv.get_double("max-seconds", syncdata::kChunkSeconds));
}

pipeline::AudioFeatureOptions feature_options(const KeyValues& kv, const fs::path& cache) {
  pipeline::AudioFeatureOptions o;
  o.separator = separator(kv);
  o.excerpt_seconds = kv.get_double("excerpt-seconds", audio::kExcerptSeconds);
  if (!(o.excerpt_seconds > 0.0)) throw ValidationError("excerpt-seconds must be positive");
  o.jobs = get_size(kv, "jobs");
  o.cache_dir = cache;
  return o;
}

const std::vector<OptSpec> kAudioInputOpts = {
    {"dataset", "dataset rows (.jsonl or .csv)", ""},
    {"meta", "track metadata CSV", ""},
    {"audio-dir", "directory the metadata audio paths are relative to (default: next to --meta)", ""},
    {"separator", "identity | baseline | stems", "identity"},
    {"stems-dir", "vocal stems for --separator stems (default: <meta dir>/stems)", ""},
    {"excerpt-seconds", "excerpt length fed to the spectrogram", "30"},
    {"max-seconds", "chunk length limit", "30"},
    {"cache", "feature cache directory (LYRICMOOD_CACHE overrides the config file)", ""},
};

std::vector<OptSpec> concat(std::vector<OptSpec> a, const std::vector<OptSpec>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

// ---------------------------------------------------------------------------
// Subcommands

void run_ingest(const KeyValues& kv) {
  const fs::path input = require(kv, "input");
  const fs::path output = require(kv, "out");
  std::string format = kv.get("format", "auto");
  if (format == "auto") format = input.extension() == ".lrc" ? "lrc" : "dataset";
  std::vector<syncdata::DatasetRow> rows;
  if (format == "lrc") {
    auto in = open_input(input);
    const auto label = syncdata::parse_emotion(kv.get("label", "sadness"));
    rows = with_path(input, [&] { return syncdata::parse_lrc(in, label, kv.get_int("track-id", 0)); });
  } else if (format == "dataset" || format == "jsonl" || format == "csv") {
    auto in = open_input(input);
    auto f = format == "dataset" ? syncdata::format_from_path(input.string())
             : format == "jsonl"  ? syncdata::DatasetFormat::kJsonl
                                  : syncdata::DatasetFormat::kCsv;
    rows = with_path(input, [&] { return syncdata::parse_dataset(in, f); });
  } else {
    throw UsageError("--format must be auto, jsonl, csv or lrc");
  }
  std::size_t tracks = syncdata::group_by_track(rows).size();
  if (auto meta = optional_value(kv, "meta")) segment_all(rows, load_meta(*meta));
  save_dataset(output, rows);
  write_resolved(fs::path(output) += ".conf", "ingest", kv);
  std::cout << "ingested " << rows.size() << " rows from " << tracks << " tracks\n";
}

void run_stats(const KeyValues& kv) {
  auto rows = load_dataset(require(kv, "dataset"));
  auto tracks = segment_all(rows, load_meta(require(kv, "meta")));
  const std::vector<std::pair<std::string, syncdata::SegmentKind>> columns = {
      {"all", syncdata::SegmentKind::kAll},
      {"synch", syncdata::SegmentKind::kSynch},
      {"intro", syncdata::SegmentKind::kIntro},
      {"outro", syncdata::SegmentKind::kOutro}};
  std::vector<syncdata::SegmentStats> stats;
  for (auto& [name, which] : columns) {
    stats.push_back(syncdata::compute_stats(syncdata::collect_durations(tracks, which)));
  }
  const std::vector<std::pair<std::string, double syncdata::SegmentStats::*>> rows_of = {
      {"min", &syncdata::SegmentStats::min},         {"max", &syncdata::SegmentStats::max},
      {"mean", &syncdata::SegmentStats::mean},       {"std", &syncdata::SegmentStats::std},
      {"perc_70", &syncdata::SegmentStats::perc_70}, {"perc_90", &syncdata::SegmentStats::perc_90}};

  std::ostringstream out;
  const auto format = kv.get("format", "text");
  if (format == "text") {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%-8s", "");
    out << buf;
    for (auto& c : columns) {
      std::snprintf(buf, sizeof buf, " %10s", c.first.c_str());
      out << buf;
    }
    out << '\n';
    for (auto& [name, field] : rows_of) {
      std::snprintf(buf, sizeof buf, "%-8s", name.c_str());
      out << buf;
      for (auto& s : stats) {
        std::snprintf(buf, sizeof buf, " %10.2f", s.*field);
        out << buf;
      }
      out << '\n';
    }
  } else if (format == "csv") {
    out << "statistic";
    for (auto& c : columns) out << ',' << c.first;
    out << '\n';
    for (auto& [name, field] : rows_of) {
      out << name;
      for (auto& s : stats) out << ',' << exact(s.*field);
      out << '\n';
    }
  } else if (format == "json") {
    nlohmann::ordered_json j;
    for (std::size_t c = 0; c < columns.size(); ++c) {
      for (auto& [name, field] : rows_of) j[columns[c].first][name] = stats[c].*field;
    }
    out << j.dump(2) << '\n';
  } else {
    throw UsageError("--format must be text, json or csv");
  }
  if (auto path = optional_value(kv, "out")) {
    open_output(*path) << out.str();
    write_resolved(fs::path(*path) += ".conf", "stats", kv);
  } else {
    std::cout << out.str();
  }
}

void run_segment(const KeyValues& kv) {
  auto rows = load_dataset(require(kv, "dataset"));
  auto tracks = segment_all(rows, load_meta(require(kv, "meta")));
  const double max_seconds = kv.get_double("max-seconds", syncdata::kChunkSeconds);
  std::ostringstream out;
  out << "track_id,start,end,label,first_row,rows,oversize,text\n";
  for (const auto& seg : tracks) {
    for (const auto& c : syncdata::chunk_segments(seg, max_seconds)) {
      std::string text = c.text;
      std::string quoted = "\"";
      for (char ch : text) {
        if (ch == '"') quoted += '"';
        quoted += ch;
      }
      quoted += '"';
      out << c.track_id << ',' << exact(c.start) << ',' << exact(c.end) << ','
          << syncdata::emotion_name(c.label) << ',' << c.first_row << ',' << c.row_count << ','
          << (c.oversize ? "true" : "false") << ',' << quoted << '\n';
    }
  }
  if (auto path = optional_value(kv, "out")) {
    open_output(*path) << out.str();
    write_resolved(fs::path(*path) += ".conf", "segment", kv);
  } else {
    std::cout << out.str();
  }
}

void run_synth(const KeyValues& kv) {
  const fs::path dir = require(kv, "out");
  synth::SynthSpec spec;
  spec.tracks = get_size(kv, "tracks");
  spec.lines_per_track = get_size(kv, "lines");
  spec.noise = kv.get_double("noise", spec.noise);
  spec.seed = get_seed(kv);
  spec.proportions = parse_double_list("proportions", kv.get("proportions", ""));
  spec.min_words = get_size(kv, "min-words");
  spec.max_words = get_size(kv, "max-words");
  spec.snr_db = kv.get_double("snr-db", spec.snr_db);
  auto corpus = synth::gen_text_corpus(spec);
  const bool with_audio = kv.get_bool("audio", false);
  for (auto& t : corpus.tracks) t.audio_path = (fs::path("audio") / t.audio_path).string();
  save_dataset(dir / "dataset.jsonl", corpus.rows);
  {
    auto out = open_output(dir / "meta.csv");
    syncdata::write_track_meta(out, corpus.tracks);
  }
  if (with_audio) {
    auto tracks = corpus.tracks;
    for (auto& t : tracks) t.audio_path = fs::path(t.audio_path).filename().string();
    synth::SynthCorpus local{corpus.rows, tracks};
    synth::gen_audio(spec, local, dir / "audio", dir / "stems", get_size(kv, "jobs"));
  }
  write_resolved(dir / "synth.conf", "synth", kv);
  std::cout << "wrote " << corpus.rows.size() << " rows over " << corpus.tracks.size()
            << " tracks to " << dir.string() << (with_audio ? " with audio" : "") << "\n";
}

void run_featurize_text(const KeyValues& kv) {
  auto rows = load_dataset(require(kv, "dataset"));
  const fs::path output = require(kv, "out");
  auto table = text_table(kv, get_size(kv, "dim"), rows);
  textfeat::ContextualEmbeddingFile file;
  file.dim = table.dim();
  std::vector<std::vector<double>> vectors(rows.size());
  parallel_for(rows.size(), get_size(kv, "jobs"),
               [&](std::size_t i) { vectors[i] = textfeat::embed_text(rows[i].text, table).vector; });
  for (std::size_t i = 0; i < rows.size(); ++i) {
    file.vectors[static_cast<std::int64_t>(i)] = std::move(vectors[i]);
  }
  auto out = open_output(output);
  textfeat::save_contextual(out, file);
  write_resolved(fs::path(output) += ".conf", "featurize-text", kv);
  std::cout << "embedded " << rows.size() << " rows (dim " << file.dim << ")\n";
}

void run_featurize_audio(const KeyValues& kv, const KeyValues& flags) {
  const fs::path dir = require(kv, "out");
  auto rows = load_dataset(require(kv, "dataset"));
  auto chunks = chunks_for(kv, rows, get_size(kv, "classes"));
  auto opts = feature_options(kv, cache_dir(kv, flags, {}));
  auto mels = pipeline::audio_features(chunks, opts);
  fs::create_directories(dir / "features");
  auto index = open_output(dir / "index.csv");
  index << "file,track_id,start,end,label\n";
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "%06zu.mel", i);
    auto out = open_output(dir / "features" / name, true);
    audio::write_mel_cache(out, mels[i]);
    index << "features/" << name << ',' << chunks[i].track_id << ',' << exact(chunks[i].start) << ','
          << exact(chunks[i].end) << ',' << syncdata::emotion_name(chunks[i].label) << '\n';
  }
  write_resolved(dir / "featurize-audio.conf", "featurize-audio", kv);
  std::cout << "featurized " << chunks.size() << " chunks\n";
}

harness::TrainOptions train_options(const KeyValues& kv) {
  harness::TrainOptions o;
  o.lr = kv.get_double("lr", o.lr);
  o.batch = get_size(kv, "batch");
  o.epochs = get_size(kv, "epochs");
  if (auto p = optional_value(kv, "patience")) o.patience = get_size(kv, "patience");
  o.class_weighting = kv.get_bool("class-weighting", false);
  o.seed = get_seed(kv);
  o.micro_batch = get_size(kv, "micro-batch");
  o.on_epoch = [](const harness::EpochRecord& r) {
    std::fprintf(stderr, "epoch %zu train_loss %.6f val_loss %.6f val_acc %.2f\n", r.epoch,
                 r.train_loss, r.val_loss, r.val_acc);
    return true;
  };
  return o;
}

void write_reports(const fs::path& dir, const harness::EvalReport& report, const std::string& name) {
  open_output(dir / "report.txt") << harness::render_report(report, harness::ReportFormat::kText, name);
  open_output(dir / "report.json") << harness::render_report(report, harness::ReportFormat::kJson, name);
  open_output(dir / "report.csv") << harness::render_report(report, harness::ReportFormat::kCsv, name);
}

// Shared tail of both trainers: split, train, persist, report on test.
void train_and_save(models::Model& model, const pipeline::LabeledSamples& data,
                    const harness::Split& split, const KeyValues& kv, const fs::path& dir,
                    const std::string& command, const std::string& name) {
  for (const auto& w : split.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  write_split(dir / "split.csv", split, data.groups);
  auto result = harness::train(model, data.samples, data.labels, split, train_options(kv));
  {
    auto history = open_output(dir / "history.csv");
    harness::write_history(history, result.history);
  }
  models::save_model((dir / "model.ck").string(), model);
  write_resolved(dir / (command + ".conf"), command, kv);
  if (!split.test.empty()) {
    auto report = harness::evaluate(model, data.samples, data.labels, split.test,
                                    harness::emotion_class_names(model.classes()));
    write_reports(dir, report, name);
    std::cout << harness::render_report(report, harness::ReportFormat::kText, name);
  }
  std::cout << "best epoch " << result.best_epoch << ", model written to "
            << (dir / "model.ck").string() << "\n";
}

void run_train_text(const KeyValues& kv) {
  const fs::path dir = require(kv, "out");
  auto rows = load_dataset(require(kv, "dataset"));
  models::TextModelConfig cfg;
  cfg.variant = models::parse_variant(kv.get("variant", "bilstm_attn"));
  cfg.hidden = get_size(kv, "hidden");
  cfg.embed_dim = get_size(kv, "embed-dim");
  cfg.dropout = kv.get_double("dropout", cfg.dropout);
  cfg.dense_hidden = get_size(kv, "dense-hidden");
  cfg.max_tokens = get_size(kv, "max-tokens");
  cfg.train_embeddings = kv.get_bool("train-embeddings", true);
  cfg.validate();

  std::vector<int> labels;
  std::vector<std::int64_t> groups;
  for (const auto& r : rows) {
    labels.push_back(syncdata::emotion_code(r.emotion));
    groups.push_back(r.id);
  }
  const auto seed = get_seed(kv);
  auto split = harness::make_split(labels, groups, parse_ratios(kv.get("split", "")), seed);
  std::vector<syncdata::DatasetRow> train_rows;
  for (auto i : split.train) train_rows.push_back(rows[i]);

  textfeat::EmbeddingTable table;
  if (models::uses_subword_table(cfg.variant)) table = text_table(kv, cfg.embed_dim, train_rows);
  models::TextModel model(cfg, seed, std::move(table));
  auto data = text_inputs(model, kv, rows);
  train_and_save(model, data, split, kv, dir, "train-text", std::string(models::variant_name(cfg.variant)));
}

// Features for an audio model, read from a featurize-audio directory or
// computed from the dataset.
pipeline::LabeledSamples audio_inputs(const KeyValues& kv, const KeyValues& flags,
                                      std::size_t classes, const fs::path& fallback_cache) {
  if (auto dir = optional_value(kv, "features")) {
    auto index = open_input(fs::path(*dir) / "index.csv");
    std::string line;
    std::getline(index, line);
    pipeline::LabeledSamples data;
    std::size_t lineno = 1;
    while (std::getline(index, line)) {
      ++lineno;
      if (line.empty()) continue;
      std::vector<std::string> f;
      std::stringstream ss(line);
      for (std::string item; std::getline(ss, item, ',');) f.push_back(item);
      if (f.size() != 5) throw ParseError(lineno, *dir + "/index.csv: expected 5 fields");
      const auto label = syncdata::parse_emotion(f[4]);
      if (static_cast<std::size_t>(syncdata::emotion_code(label)) >= classes) continue;
      auto in = open_input(fs::path(*dir) / f[0], true);
      auto mel = audio::read_mel_cache(in);
      KeyValues one;
      one.set("track_id", f[1]);
      models::Sample s;
      s.values = std::move(mel.values.values);
      s.steps = mel.frames();
      data.samples.push_back(std::move(s));
      data.labels.push_back(syncdata::emotion_code(label));
      data.groups.push_back(one.get_int("track_id", 0));
    }
    return data;
  }
  require(kv, "dataset");
  auto rows = load_dataset(require(kv, "dataset"));
  auto chunks = chunks_for(kv, rows, classes);
  auto mels = pipeline::audio_features(chunks, feature_options(kv, cache_dir(kv, flags, fallback_cache)));
  return pipeline::audio_samples(chunks, mels);
}

void run_train_audio(const KeyValues& kv, const KeyValues& flags) {
  const fs::path dir = require(kv, "out");
  models::AudioModelConfig cfg;
  cfg.channels = parse_size_list(kv.get("channels", ""));
  cfg.pools = models::parse_pools(kv.get("pools", ""));
  cfg.kernel = get_size(kv, "kernel");
  cfg.classes = get_size(kv, "classes");
  auto data = audio_inputs(kv, flags, cfg.classes, dir / "cache");
  if (data.samples.empty()) throw ValidationError("no audio chunks to train on");
  cfg.frames = data.samples.front().steps;
  cfg.validate();
  const auto seed = get_seed(kv);
  auto split = harness::make_split(data.labels, data.groups, parse_ratios(kv.get("split", "")), seed);
  models::AudioModel model(cfg, seed);
  train_and_save(model, data, split, kv, dir, "train-audio", "cnn-" + kv.get("separator", "identity"));
}

void run_eval(const KeyValues& kv, const KeyValues& flags) {
  auto model = models::load_model(require(kv, "model"));
  pipeline::LabeledSamples data;
  if (auto* text = dynamic_cast<models::TextModel*>(model.get())) {
    auto rows = load_dataset(require(kv, "dataset"));
    data = text_inputs(*text, kv, rows);
  } else {
    data = audio_inputs(kv, flags, model->classes(), {});
  }
  std::vector<std::size_t> index;
  if (auto split = optional_value(kv, "split")) {
    index = read_partition(*split, kv.get("partition", "test"), data.samples.size());
  } else {
    index = all_indices(data.samples.size());
  }
  if (index.empty()) throw ValidationError("nothing to evaluate");
  auto report = harness::evaluate(*model, data.samples, data.labels, index,
                                  harness::emotion_class_names(model->classes()));
  const std::string name = kv.get("name", "model");
  if (auto out = optional_value(kv, "out")) {
    write_reports(*out, report, name);
    write_resolved(fs::path(*out) / "eval.conf", "eval", kv);
  }
  std::cout << harness::render_report(report, harness::parse_report_format(kv.get("format", "text")), name);
}

void run_predict(const KeyValues& kv) {
  auto model = models::load_model(require(kv, "model"));
  models::Sample sample;
  auto text = optional_value(kv, "text");
  auto wav = optional_value(kv, "audio");
  if (text.has_value() == wav.has_value()) throw UsageError("give exactly one of --text and --audio");
  if (text) {
    auto* tm = dynamic_cast<models::TextModel*>(model.get());
    if (!tm || !models::uses_subword_table(tm->config().variant)) {
      throw UsageError("--text needs a subword text model");
    }
    sample = tm->featurize(*text);
  } else {
    auto* am = dynamic_cast<models::AudioModel*>(model.get());
    if (!am) throw UsageError("--audio needs an audio model");
    auto clip = audio::resample(audio::read_wav(*wav), audio::kTargetRate);
    const double start = kv.get_double("start", 0.0);
    const double end = optional_value(kv, "end") ? kv.get_double("end", 0.0) : clip.duration();
    const double excerpt = kv.get_double("excerpt-seconds", audio::kExcerptSeconds);
    auto sep = audio::SourceSeparator{audio::parse_separator_kind(kv.get("separator", "identity")), {}};
    if (sep.kind == audio::SeparatorKind::kExternalStems) sep.stems_dir = require(kv, "stems-dir");
    auto mel = audio::featurize_segment(clip, start, end, sep, kv.get_int("track-id", 0), excerpt);
    for (auto& v : mel.values.values) v = static_cast<double>(static_cast<float>(v));
    sample.values = std::move(mel.values.values);
    sample.steps = mel.frames();
  }
  std::vector<models::Sample> one{std::move(sample)};
  std::vector<std::size_t> idx{0};
  auto probs = model->predict_proba(model->collate(one, idx)).front();
  std::size_t best = 0;
  for (std::size_t c = 1; c < probs.size(); ++c) {
    if (probs[c] > probs[best]) best = c;
  }
  const auto names = harness::emotion_class_names(model->classes());
  std::cout << "label\t" << names[best] << "\n";
  for (std::size_t c = 0; c < probs.size(); ++c) {
    std::cout << names[c] << '\t' << fixed(probs[c], 6) << '\n';
  }
}

std::vector<Command> commands(const KeyValues& flags) {
  const std::vector<OptSpec> model_text = {
      {"variant", "gru_attn | bigru_attn | lstm_attn | bilstm_attn | contextual_dense | "
                  "contextual_lstm | bert_dense", "bilstm_attn"},
      {"hidden", "recurrent units", "128"},
      {"embed-dim", "input embedding dimension", "300"},
      {"dropout", "dropout rate", "0.2"},
      {"dense-hidden", "hidden units of the dense heads", "256"},
      {"max-tokens", "tokens kept per lyric", "64"},
      {"train-embeddings", "fine-tune the subword table", "true"},
      {"embeddings", "subword embeddings in text-vec format (random when absent)", ""},
      {"buckets", "hashed n-gram buckets when the embeddings carry none", "50000"},
      {"embed-scale", "uniform init range of a random table", "0.1"},
      {"contextual", "per-row vectors for contextual_dense and bert_dense", ""},
      {"sequences", "per-row token sequences for contextual_lstm", ""},
  };
  const std::vector<OptSpec> training = {
      {"lr", "learning rate", ""},
      {"batch", "batch size", ""},
      {"micro-batch", "samples per forward pass (0 = whole batch)", "0"},
      {"epochs", "maximum epochs", ""},
      {"patience", "early-stopping patience in epochs (empty = off)", ""},
      {"class-weighting", "weight samples by inverse class frequency", "false", true},
      {"split", "train,val,test ratios", "0.8,0.1,0.1"},
  };
  auto with_defaults = [](std::vector<OptSpec> opts, std::map<std::string, std::string> d) {
    for (auto& o : opts) {
      if (auto it = d.find(o.key); it != d.end()) o.fallback = it->second;
    }
    return opts;
  };

  std::vector<Command> out;
  out.push_back({"ingest", "validate a dataset (.jsonl, .csv or .lrc) and write it normalized",
                 with_common({{"input", "input file", "", false, true},
                              {"out", "output dataset (.jsonl or .csv)", "", false, true},
                              {"format", "auto | jsonl | csv | lrc", "auto"},
                              {"label", "emotion of every LRC line", "sadness"},
                              {"track-id", "track id of an LRC file", "0"},
                              {"meta", "track metadata; also checks segmentation", ""}}),
                 run_ingest});
  out.push_back({"stats", "duration statistics of sung lines, intros and outros",
                 with_common({{"dataset", "dataset rows", "", false, true},
                              {"meta", "track metadata CSV", "", false, true},
                              {"format", "text | json | csv", "text"},
                              {"out", "write here instead of standard output", ""}}),
                 run_stats});
  out.push_back({"segment", "emit the label-pure chunk list",
                 with_common({{"dataset", "dataset rows", "", false, true},
                              {"meta", "track metadata CSV", "", false, true},
                              {"max-seconds", "chunk length limit", "30"},
                              {"out", "CSV output (standard output when absent)", ""}}),
                 run_segment});
  out.push_back({"synth", "generate a synthetic corpus, optionally with audio and vocal stems",
                 with_common({{"out", "output directory", "", false, true},
                              {"tracks", "number of tracks", "100"},
                              {"lines", "sung lines per track", "20"},
                              {"noise", "word contamination probability", "0.2"},
                              {"proportions", "class shares in emotion order", "43.9,40.2,7.7,6.0,2.1"},
                              {"min-words", "shortest line", "4"},
                              {"max-words", "longest line", "8"},
                              {"snr-db", "vocal to accompaniment ratio (inf = vocals only)", "0"},
                              {"audio", "also write mixtures and stems", "false", true}}),
                 run_synth});
  out.push_back({"featurize-text", "averaged subword embedding per row",
                 with_common({{"dataset", "dataset rows", "", false, true},
                              {"out", "output vectors (id dim values...)", "", false, true},
                              {"embeddings", "subword embeddings (random when absent)", ""},
                              {"dim", "dimension of a random table", "300"},
                              {"buckets", "hashed n-gram buckets", "50000"},
                              {"embed-scale", "uniform init range of a random table", "0.1"}}),
                 run_featurize_text});
  out.push_back({"featurize-audio", "log-mel spectrogram per chunk",
                 with_common(concat({{"out", "output directory", "", false, true},
                                     {"classes", "keep labels below this code", "4"}},
                                    kAudioInputOpts)),
                 [&flags](const KeyValues& kv) { run_featurize_audio(kv, flags); }});
  out.push_back({"train-text", "train a lyrics classifier",
                 with_common(concat(concat({{"dataset", "dataset rows", "", false, true},
                                            {"out", "output directory", "", false, true}},
                                           model_text),
                                    with_defaults(training, {{"lr", "0.001"}, {"batch", "32"}, {"epochs", "30"}}))),
                 run_train_text});
  out.push_back({"train-audio", "train the spectrogram CNN",
                 with_common(concat(
                     concat({{"out", "output directory", "", false, true},
                             {"features", "featurize-audio directory instead of --dataset", ""},
                             {"channels", "channels per conv block", "32,64,64,128,128"},
                             {"pools", "pool per block as FxT", "2x4,2x4,2x4,4x5,4x4"},
                             {"kernel", "square kernel size", "3"},
                             {"classes", "output classes", "4"}},
                            kAudioInputOpts),
                     with_defaults(training, {{"lr", "0.005"}, {"batch", "64"}, {"micro-batch", "8"},
                                              {"epochs", "50"}, {"patience", "15"}}))),
                 [&flags](const KeyValues& kv) { run_train_audio(kv, flags); }});
  out.push_back({"eval", "evaluate a checkpoint and write text, JSON and CSV reports",
                 with_common(concat({{"model", "checkpoint", "", false, true},
                                     {"split", "split file from train-*", ""},
                                     {"partition", "train | val | test | all", "test"},
                                     {"features", "featurize-audio directory", ""},
                                     {"contextual", "per-row vectors", ""},
                                     {"sequences", "per-row token sequences", ""},
                                     {"format", "text | json | csv on standard output", "text"},
                                     {"name", "model name in the reports", "model"},
                                     {"out", "report directory", ""}},
                                    kAudioInputOpts)),
                 [&flags](const KeyValues& kv) { run_eval(kv, flags); }});
  out.push_back({"predict", "label and class probabilities for one lyric or audio file",
                 with_common({{"model", "checkpoint", "", false, true},
                              {"text", "lyric line", ""},
                              {"audio", "WAV file", ""},
                              {"start", "excerpt start in seconds", "0"},
                              {"end", "excerpt end in seconds (default: end of file)", ""},
                              {"excerpt-seconds", "excerpt length fed to the spectrogram", "30"},
                              {"separator", "identity | baseline | stems", "identity"},
                              {"stems-dir", "vocal stems for --separator stems", ""},
                              {"track-id", "track id for stem lookup", "0"}}),
                 run_predict});
  return out;
}

int exit_with(int code, const std::string& message) {
  std::cerr << "ERROR " << code << ": " << message << "\n";
  return code;
}

int run(int argc, char** argv) {
  KeyValues flags_only;
  auto cmds = commands(flags_only);

  CLI::App app{"Emotion classification from synchronized lyrics and audio"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "lyricmood 1.0.0");
  struct Bound {
    std::map<std::string, std::string> values;
    std::map<std::string, bool> switches;
    std::map<std::string, CLI::Option*> options;
    std::string config;
  };
  std::vector<Bound> bound(cmds.size());
  std::vector<CLI::App*> subs;
  for (std::size_t c = 0; c < cmds.size(); ++c) {
    auto* sub = app.add_subcommand(cmds[c].name, cmds[c].help);
    sub->add_option("--config", bound[c].config, "key = value settings file; flags win");
    for (const auto& o : cmds[c].opts) {
      std::string help = o.help;
      if (!o.fallback.empty()) help += " [" + o.fallback + "]";
      if (o.required) help += " (required)";
      if (o.flag) {
        bound[c].options[o.key] = sub->add_flag("--" + o.key, bound[c].switches[o.key], help);
      } else {
        bound[c].options[o.key] = sub->add_option("--" + o.key, bound[c].values[o.key], help);
      }
    }
    subs.push_back(sub);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return exit_with(kExitUsage, e.what());
  }

  for (std::size_t c = 0; c < cmds.size(); ++c) {
    if (!subs[c]->parsed()) continue;
    const auto& cmd = cmds[c];
    auto& b = bound[c];
    std::vector<std::string> known;
    KeyValues resolved;
    for (const auto& o : cmd.opts) {
      known.push_back(o.key);
      resolved.set(o.key, o.fallback);
    }
    if (!b.config.empty()) {
      auto file = with_path(b.config, [&] { return KeyValues::read_file(b.config); });
      try {
        file.require_known(known);
      } catch (const ValidationError& e) {
        throw UsageError(b.config + ": " + e.what());
      }
      resolved.merge(file);
    }
    for (const auto& o : cmd.opts) {
      if (b.options[o.key]->count() == 0) continue;
      const std::string v = o.flag ? (b.switches[o.key] ? "true" : "false") : b.values[o.key];
      resolved.set(o.key, v);
      flags_only.set(o.key, v);
    }
    for (const auto& o : cmd.opts) {
      if (o.required) require(resolved, o.key);
    }
    cmd.run(resolved);
    return 0;
  }
  return exit_with(kExitUsage, "no subcommand");
}

}  // namespace

int main(int argc, char** argv) {
  // Keep freed pages mapped: training allocates and releases the same large
  // activation buffers every step.
  mallopt(M_MMAP_MAX, 0);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
  mallopt(M_TOP_PAD, 64 << 20);
  try {
    return run(argc, argv);
  } catch (const UsageError& e) {
    return exit_with(kExitUsage, e.what());
  } catch (const ParseError& e) {
    return exit_with(kExitData, e.what());
  } catch (const ValidationError& e) {
    return exit_with(kExitData, e.what());
  } catch (const UnsupportedFormat& e) {
    return exit_with(kExitData, e.what());
  } catch (const std::exception& e) {
    return exit_with(kExitRuntime, e.what());
  }
}
