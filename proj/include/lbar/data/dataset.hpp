/* Copyright 2026 The lbar Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

// Paired audio/caption datasets: manifest loading (Clotho-style CSV or JSONL)
// and a seeded synthetic generator for desk-scale experiments.

#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include "lbar/data/waveform.hpp"
#include "lbar/error.hpp"
#include "lbar/rng.hpp"

namespace lbar {

enum class Split { kTrain, kVal, kTest };

inline const char* to_string(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "?";
}

inline Split split_from_string(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "val") return Split::kVal;
  if (s == "test") return Split::kTest;
  throw std::invalid_argument("unknown split '" + s + "' (expected train|val|test)");
}

struct AudioItem {
  std::string audio_id;
  Waveform audio;
  std::vector<std::string> captions;  // non-empty
};

struct PairedDataset {
  std::vector<AudioItem> items;
  Split split = Split::kTrain;

  std::size_t size() const { return items.size(); }
  bool empty() const { return items.empty(); }

  void validate() const {
    for (const auto& it : items)
      if (it.captions.empty()) throw std::invalid_argument("item '" + it.audio_id + "' has no captions");
  }
};

// ---------------------------------------------------------------------------
// Synthetic data

struct SynthOptions {
  int sample_rate = 32000;
  double min_duration = 0.6;  // seconds
  double max_duration = 1.0;
  int captions_per_item = 5;
  double noise_level = 0.05;
};

namespace detail {

inline const std::vector<std::string>& synth_class_words() {
  static const std::vector<std::string> words = {
      "dog",   "barks",   "engine",  "rumbles", "bird",   "chirps",  "water",    "flows",
      "bell",  "rings",   "wind",    "howls",   "crowd",  "cheers",  "door",     "creaks",
      "rain",  "patters", "car",     "honks",   "baby",   "cries",   "clock",    "ticks",
      "piano", "plays",   "thunder", "rolls",   "train",  "whistles", "phone",   "buzzes",
      "fire",  "crackles", "saw",    "grinds",  "siren",  "wails",   "frog",     "croaks",
      "drum",  "beats",   "kettle",  "hisses",  "cat",    "meows",   "hammer",   "knocks"};
  return words;
}

inline const std::vector<std::string>& synth_distractors() {
  static const std::vector<std::string> words = {
      "the",    "a",      "in",      "background", "distance", "while",      "and",     "someone",
      "outside", "nearby", "loudly", "softly",     "slowly",   "quickly",    "then",    "again",
      "repeatedly", "briefly", "room", "street"};
  return words;
}

struct SynthClass {
  std::vector<double> freqs;
  std::vector<double> amps;
  std::vector<std::string> words;
};

inline std::vector<SynthClass> synth_classes(int n_classes, std::uint64_t seed) {
  Rng rng = Rng::stream(seed, {0xC1A55ULL});
  std::vector<std::string> bank = synth_class_words();
  rng.shuffle(bank.begin(), bank.end());
  std::vector<SynthClass> classes(static_cast<std::size_t>(n_classes));
  for (int k = 0; k < n_classes; ++k) {
    auto& c = classes[std::size_t(k)];
    for (int j = 0; j < 3; ++j) {
      c.freqs.push_back(std::exp(rng.uniform(std::log(150.0), std::log(12000.0))));
      c.amps.push_back(rng.uniform(0.4, 1.0));
      const std::size_t w = std::size_t(3 * k + j);
      c.words.push_back(w < bank.size() ? bank[w] : "class" + std::to_string(k) + "word" + std::to_string(j));
    }
  }
  return classes;
}

}  // namespace detail

// Items draw a latent class; audio is a class-specific sine mixture plus
// noise, captions contain the class word set plus distractor words. Class
// templates depend only on (n_classes, seed), so splits generated with the
// same seed share them.
inline PairedDataset synth_dataset(int n_classes, int n_items, std::uint64_t seed, Split split = Split::kTrain,
                                   const SynthOptions& opt = {}) {
  if (n_classes < 2) throw std::invalid_argument("synth_dataset needs at least 2 classes");
  if (n_items < 0) throw std::invalid_argument("synth_dataset needs a non-negative item count");
  if (opt.captions_per_item < 1) throw std::invalid_argument("captions_per_item must be at least 1");
  const auto classes = detail::synth_classes(n_classes, seed);
  const auto& distractors = detail::synth_distractors();

  PairedDataset ds;
  ds.split = split;
  ds.items.reserve(std::size_t(n_items));
  for (int i = 0; i < n_items; ++i) {
    Rng rng = Rng::stream(seed, {std::uint64_t(split) + 1, std::uint64_t(i)});
    const auto& cls = classes[rng.index(classes.size())];
    AudioItem item;
    item.audio_id = std::string("synth_") + to_string(split) + "_" + std::to_string(i);

    const double duration = rng.uniform(opt.min_duration, opt.max_duration);
    const auto n = std::size_t(duration * opt.sample_rate);
    item.audio.sample_rate = opt.sample_rate;
    item.audio.samples.assign(n, 0.0);
    double amp_sum = 0.0;
    for (std::size_t c = 0; c < cls.freqs.size(); ++c) {
      const double f = cls.freqs[c] * rng.uniform(0.98, 1.02);
      const double a = cls.amps[c] * rng.uniform(0.8, 1.2);
      const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
      amp_sum += a;
      for (std::size_t t = 0; t < n; ++t)
        item.audio.samples[t] += (a * std::sin(2.0 * std::numbers::pi * f * double(t) / opt.sample_rate + phase));
    }
    const double gain = rng.uniform(0.2, 0.6) / amp_sum;
    for (auto& s : item.audio.samples) s = s * gain + rng.normal(0.0, opt.noise_level);

    for (int c = 0; c < opt.captions_per_item; ++c) {
      std::vector<std::string> words = cls.words;
      const auto n_extra = rng.uniform_int(2, 4);
      for (std::int64_t e = 0; e < n_extra; ++e) words.push_back(distractors[rng.index(distractors.size())]);
      rng.shuffle(words.begin(), words.end());
      std::string caption;
      for (const auto& w : words) caption += (caption.empty() ? "" : " ") + w;
      caption[0] = char(std::toupper(static_cast<unsigned char>(caption[0])));
      item.captions.push_back(caption + ".");
    }
    ds.items.push_back(std::move(item));
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Manifests

// RFC 4180 records: quoted fields, doubled quotes, embedded newlines.
inline std::vector<std::vector<std::string>> parse_csv(std::istream& in) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false, any = false;
  char ch;
  while (in.get(ch)) {
    any = true;
    if (quoted) {
      if (ch == '"') {
        if (in.peek() == '"') {
          in.get(ch);
          field.push_back('"');
        } else {
          quoted = false;
        }
      } else {
        field.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      row.push_back(std::move(field));
      field.clear();
    } else if (ch == '\n' || ch == '\r') {
      if (ch == '\r' && in.peek() == '\n') in.get(ch);
      row.push_back(std::move(field));
      field.clear();
      rows.push_back(std::move(row));
      row.clear();
      any = false;
    } else {
      field.push_back(ch);
    }
  }
  if (quoted) throw FormatError("unterminated quoted CSV field");
  if (any) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  return out + "\"";
}

// Loads a manifest: CSV with header `file_name,caption_1,...` or JSONL with
// {"audio": path, "captions": [...]}. Relative audio paths resolve against
// `audio_root` (the manifest's directory when empty).
inline PairedDataset load_manifest(const std::filesystem::path& path, Split split,
                                   std::filesystem::path audio_root = {}) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open manifest '" + path.string() + "'");
  if (audio_root.empty()) audio_root = path.parent_path();
  auto resolve = [&](const std::string& p) {
    std::filesystem::path fp(p);
    return fp.is_absolute() ? fp : audio_root / fp;
  };
  PairedDataset ds;
  ds.split = split;
  if (path.extension() == ".jsonl") {
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      nlohmann::json rec;
      try {
        rec = nlohmann::json::parse(line);
      } catch (const nlohmann::json::exception& e) {
        throw FormatError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
      }
      if (!rec.contains("audio") || !rec.contains("captions") || !rec["captions"].is_array())
        throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected {\"audio\", \"captions\"}");
      AudioItem item;
      const auto audio = rec["audio"].get<std::string>();
      item.audio_id = std::filesystem::path(audio).filename().string();
      item.audio = load_wav(resolve(audio));
      item.captions = rec["captions"].get<std::vector<std::string>>();
      ds.items.push_back(std::move(item));
    }
  } else {
    auto rows = parse_csv(in);
    if (rows.empty() || rows.front().empty() || rows.front().front() != "file_name")
      throw FormatError(path.string() + ": CSV header must start with 'file_name'");
    for (std::size_t r = 1; r < rows.size(); ++r) {
      const auto& row = rows[r];
      if (row.size() == 1 && row[0].empty()) continue;
      AudioItem item;
      item.audio_id = row[0];
      item.audio = load_wav(resolve(row[0]));
      for (std::size_t c = 1; c < row.size(); ++c)
        if (!row[c].empty()) item.captions.push_back(row[c]);
      ds.items.push_back(std::move(item));
    }
  }
  ds.validate();
  return ds;
}

// Writes audio as 64-bit float WAV files under `dir` and a Clotho-style CSV
// manifest.
inline void write_manifest(const PairedDataset& ds, const std::filesystem::path& dir,
                           const std::string& manifest_name) {
  std::filesystem::create_directories(dir);
  std::size_t max_caps = 0;
  for (const auto& it : ds.items) max_caps = std::max(max_caps, it.captions.size());
  std::ofstream out(dir / manifest_name);
  if (!out) throw FormatError("cannot write manifest in '" + dir.string() + "'");
  out << "file_name";
  for (std::size_t c = 0; c < max_caps; ++c) out << ",caption_" << (c + 1);
  out << "\n";
  for (const auto& it : ds.items) {
    const std::string file = it.audio_id.ends_with(".wav") ? it.audio_id : it.audio_id + ".wav";
    save_wav(dir / file, it.audio, WavEncoding::kFloat64);
    out << csv_escape(file);
    for (std::size_t c = 0; c < max_caps; ++c) out << "," << (c < it.captions.size() ? csv_escape(it.captions[c]) : "");
    out << "\n";
  }
}

}  // namespace lbar
