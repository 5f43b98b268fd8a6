// End-to-end generation pipeline: structure -> chords -> melody & bass, with
// per-module seed songs, exact-repeat section copying, and deterministic
// per-section random streams.
#ifndef SEEDSONG_PIPELINE_HPP
#define SEEDSONG_PIPELINE_HPP

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "seedsong/bass.hpp"
#include "seedsong/chords.hpp"
#include "seedsong/contour.hpp"
#include "seedsong/core.hpp"
#include "seedsong/evaluate.hpp"
#include "seedsong/melody.hpp"
#include "seedsong/midi.hpp"
#include "seedsong/rng.hpp"
#include "seedsong/stats.hpp"
#include "seedsong/structure.hpp"
#include "seedsong/text_score.hpp"

namespace seedsong {

struct PipelineParams {
  StructureMode structure = StructureMode::copy();
  double alpha_melody = 0.5;
  double alpha_chords = 0.5;
  double distinctive_threshold = kDefaultDistinctiveThreshold;
  double rhythm_threshold = kDefaultRhythmThreshold;
  double max_section_distance = kDefaultMaxSectionDistance;
  int candidates = kDefaultCandidates;
  uint64_t rng_seed = 0;
};

struct GenerationInputs {
  Song melody_seed;
  Song chord_seed;
  Song bass_seed;
  Song structure_seed;
  StatTables general;
  std::string melody_id = "melody-seed";
  std::string chord_id = "chord-seed";
  std::string bass_id = "bass-seed";
  std::string structure_id = "structure-seed";

  static GenerationInputs single(Song seed, StatTables general,
                                 const std::string& id = "seed") {
    GenerationInputs in;
    in.melody_seed = seed;
    in.chord_seed = seed;
    in.bass_seed = std::move(seed);
    in.structure_seed = in.melody_seed;
    in.general = std::move(general);
    in.melody_id = in.chord_id = in.bass_id = in.structure_id = id;
    return in;
  }
};

struct GenerationResult {
  Song song;
  std::string text;
  std::vector<uint8_t> midi;
  AlignmentPlan melody_plan;
  AlignmentPlan chord_plan;
  AlignmentPlan bass_plan;
  std::map<std::string, std::string> module_seeds;  // module -> seed id
};

namespace pipeline_detail {

// Notes of one section, onsets already bar-relative.
inline std::vector<Note> section_notes(const std::vector<Note>& track,
                                       int start_bar, int bars) {
  std::vector<Note> out;
  int pos = 0;
  const int lo = start_bar * kSlotsPerBar;
  const int hi = (start_bar + bars) * kSlotsPerBar;
  for (const Note& n : track) {
    if (pos >= lo && pos < hi) out.push_back(n);
    pos += n.duration;
  }
  return out;
}

template <typename Fn>
auto with_context(const char* module, int section, Fn&& fn) {
  try {
    return fn();
  } catch (const std::exception& e) {
    throw InvariantError(std::string(module) + ": section " +
                         std::to_string(section) + ": " + e.what());
  }
}

// Index of an earlier section this one repeats exactly, or -1.
inline int exact_repeat_of(const std::vector<SectionSpec>& sections, int i) {
  if (sections[i].is_variation) return -1;
  for (int j = 0; j < i; ++j) {
    if (sections[j].name == sections[i].name &&
        sections[j].length == sections[i].length) {
      return j;
    }
  }
  return -1;
}

}  // namespace pipeline_detail

inline GenerationResult generate_song(const GenerationInputs& in,
                                      const PipelineParams& params) {
  using namespace pipeline_detail;
  in.melody_seed.validate();
  in.chord_seed.validate();
  in.bass_seed.validate();
  in.structure_seed.validate();

  GenerationResult res;
  res.module_seeds = {{"structure", in.structure_id},
                      {"chords", in.chord_id},
                      {"melody", in.melody_id},
                      {"bass", in.bass_id}};

  // 1. Structure.
  Rng structure_rng = Rng::derive(params.rng_seed, 0x737472756374ULL);
  const std::vector<SectionSpec> sections =
      generate_structure(params.structure, in.structure_seed, structure_rng);
  if (sections.empty()) throw InvariantError("generated structure is empty");

  // 2. Per-module alignment.
  res.melody_plan =
      align(sections, in.melody_seed.sections, params.max_section_distance);
  res.chord_plan =
      align(sections, in.chord_seed.sections, params.max_section_distance);
  res.bass_plan =
      align(sections, in.bass_seed.sections, params.max_section_distance);

  // 3. Seed statistics per module.
  const StatTables melody_tables = build_seed_stats(in.melody_seed);
  const StatTables chord_tables = build_seed_stats(in.chord_seed);
  const StatTables bass_tables = build_seed_stats(in.bass_seed);

  // 4. Chords.
  const auto distinctive = detect_distinctive(chord_tables, in.general,
                                              params.distinctive_threshold);
  const ChordChain chain =
      build_chain(chord_tables, in.general, params.alpha_chords, distinctive);
  // Fresh sections fall back to pure general statistics.
  const ChordChain fresh_chain = build_chain(chord_tables, in.general, 0.0, {});

  const int n_sections = static_cast<int>(sections.size());
  std::vector<std::vector<Chord>> sec_chords(n_sections);
  for (int i = 0; i < n_sections; ++i) {
    const int repeat = exact_repeat_of(sections, i);
    if (repeat >= 0) {
      sec_chords[i] = sec_chords[repeat];
      continue;
    }
    const AlignmentRef ref = res.chord_plan[i];
    std::optional<Chord> first;
    if (ref.is_seed()) {
      const int bar = in.chord_seed.section_start_bar(ref.index);
      first = in.chord_seed.chords[bar];
    } else if (ref.is_prior()) {
      first = sec_chords[ref.index].front();
    }
    Rng rng = Rng::derive(params.rng_seed, 0x63686f726473ULL,
                          static_cast<uint64_t>(i));
    sec_chords[i] = with_context("chordgen", i, [&] {
      return generate_chords(sections[i].length,
                             ref.is_fresh() ? fresh_chain : chain, first, rng);
    });
  }

  // 5. Melody.
  const bool allow_span = spanning_allowed(melody_tables);
  std::vector<std::vector<Note>> sec_melody(n_sections);
  std::vector<std::vector<int>> ref_frames(n_sections);
  std::vector<std::vector<int>> ref_onsets(n_sections);
  for (int i = 0; i < n_sections; ++i) {
    const int repeat = exact_repeat_of(sections, i);
    if (repeat >= 0) {
      sec_melody[i] = sec_melody[repeat];
      continue;
    }
    const AlignmentRef ref = res.melody_plan[i];
    SectionTask task;
    task.chords = sec_chords[i];
    task.pac = is_pac(task.chords);
    task.allow_span = allow_span;
    MelodyParams mp;
    mp.rhythm_threshold = params.rhythm_threshold;
    mp.candidates = params.candidates;
    mp.alpha = params.alpha_melody;
    if (ref.is_seed()) {
      const auto notes = section_notes(
          in.melody_seed.melody, in.melody_seed.section_start_bar(ref.index),
          in.melody_seed.sections[ref.index].length);
      ref_frames[i] = track_frames(notes);
      ref_onsets[i] = frame_onsets(notes);
      task.ref_frames = &ref_frames[i];
      task.ref_onsets = &ref_onsets[i];
    } else if (ref.is_prior()) {
      ref_frames[i] = track_frames(sec_melody[ref.index]);
      ref_onsets[i] = frame_onsets(sec_melody[ref.index]);
      task.ref_frames = &ref_frames[i];
      task.ref_onsets = &ref_onsets[i];
    } else {
      mp.alpha = 0.0;  // fresh: general statistics only
    }
    RatingTables rt{&melody_tables, &in.general, mp.alpha,
                    tempo_bucket(in.melody_seed.tempo)};
    sec_melody[i] = with_context("melodygen", i, [&] {
      return generate_section_melody(task, rt, mp, params.rng_seed,
                                     static_cast<uint64_t>(i))
          .notes;
    });
  }

  // 6. Bass.
  std::vector<std::vector<Note>> sec_bass(n_sections);
  for (int i = 0; i < n_sections; ++i) {
    const int repeat = exact_repeat_of(sections, i);
    if (repeat >= 0) {
      sec_bass[i] = sec_bass[repeat];
      continue;
    }
    const AlignmentRef ref = res.bass_plan[i];
    BassStyle style = with_context("bassgen", i, [&]() -> BassStyle {
      if (ref.is_seed()) {
        const int start = in.bass_seed.section_start_bar(ref.index);
        const int len = in.bass_seed.sections[ref.index].length;
        const auto notes = section_notes(in.bass_seed.bass, start, len);
        std::span<const Chord> chords(in.bass_seed.chords.data() + start,
                                      static_cast<size_t>(len));
        return extract_bass_style(notes, chords);
      }
      if (ref.is_prior()) {
        return extract_bass_style(sec_bass[ref.index],
                                  sec_chords[ref.index]);
      }
      return pooled_bass_style(bass_tables);
    });
    sec_bass[i] = with_context("bassgen", i, [&] {
      return generate_bass(sec_chords[i], style);
    });
  }

  // 7. Assemble.
  Song song;
  song.sections = sections;
  song.tempo = in.melody_seed.tempo;
  song.mode = in.melody_seed.mode;
  song.bass_octave = in.bass_seed.bass_octave;
  for (int i = 0; i < n_sections; ++i) {
    song.chords.insert(song.chords.end(), sec_chords[i].begin(),
                       sec_chords[i].end());
    song.melody.insert(song.melody.end(), sec_melody[i].begin(),
                       sec_melody[i].end());
    song.bass.insert(song.bass.end(), sec_bass[i].begin(), sec_bass[i].end());
  }
  song.validate();
  res.song = std::move(song);
  res.text = render_text_score(res.song);
  res.midi = export_midi(res.song);
  return res;
}

// --- file-level helpers -------------------------------------------------------------

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline void write_file_atomic(const std::string& path,
                              std::span<const uint8_t> data) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ParseError("cannot write " + tmp);
    out.write(reinterpret_cast<const char*>(data.data()),
              static_cast<std::streamsize>(data.size()));
  }
  std::filesystem::rename(tmp, path);
}

inline void write_file_atomic(const std::string& path, const std::string& text) {
  write_file_atomic(path,
                    std::span<const uint8_t>(
                        reinterpret_cast<const uint8_t*>(text.data()),
                        text.size()));
}

// Loads a .txt text score or a .mid/.midi file with a .json sidecar next to
// it (or at `sidecar` if nonempty).
inline Song load_song(const std::string& path, const std::string& sidecar = "") {
  const std::filesystem::path p(path);
  const std::string ext = p.extension().string();
  if (ext == ".txt") {
    return parse_text_score(read_file(path));
  }
  if (ext == ".mid" || ext == ".midi") {
    std::string side = sidecar;
    if (side.empty()) {
      side = (std::filesystem::path(p).replace_extension(".json")).string();
    }
    const Annotation ann = parse_annotation(read_file(side));
    const std::string bytes = read_file(path);
    return import_midi(
        std::span<const uint8_t>(
            reinterpret_cast<const uint8_t*>(bytes.data()), bytes.size()),
        ann);
  }
  throw ParseError("unsupported score file " + path +
                   " (expected .txt or .mid)");
}

inline StatTables load_stats(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("stats: ") + e.what());
  }
  return stats_from_json(j);
}

inline void save_stats(const std::string& path, const StatTables& t) {
  write_file_atomic(path, stats_to_json(t).dump(1));
}

// Builds general statistics from every .txt / .chords / .mid file in a
// directory (sorted by path for reproducibility).
inline StatTables build_stats_from_dir(const std::string& dir) {
  std::vector<std::string> paths;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file()) paths.push_back(e.path().string());
  }
  std::sort(paths.begin(), paths.end());
  std::vector<Song> songs;
  std::vector<ChordCorpusFile> chord_files;
  for (const auto& path : paths) {
    const std::string ext = std::filesystem::path(path).extension().string();
    if (ext == ".txt") {
      songs.push_back(parse_text_score(read_file(path)));
    } else if (ext == ".chords") {
      chord_files.push_back(parse_chord_annotation(read_file(path)));
    } else if (ext == ".mid" || ext == ".midi") {
      songs.push_back(load_song(path));
    }
  }
  return build_general_stats(songs, chord_files);
}

struct GenerationConfig {
  std::string melody_seed;
  std::string chord_seed;      // empty: use melody_seed
  std::string bass_seed;       // empty: use melody_seed
  std::string structure_seed;  // empty: use melody_seed
  std::string stats_path;
  std::string structure = "copy";
  double alpha_melody = 0.5;
  double alpha_chords = 0.5;
  double distinctive_threshold = kDefaultDistinctiveThreshold;
  double rhythm_threshold = kDefaultRhythmThreshold;
  double max_section_distance = kDefaultMaxSectionDistance;
  int candidates = kDefaultCandidates;
  uint64_t rng_seed = 0;
  std::string out;  // basename; writes <out>.mid and <out>.txt
};

inline GenerationResult run_generate(const GenerationConfig& cfg) {
  if (cfg.melody_seed.empty()) throw ParseError("no seed song given");
  GenerationInputs in;
  in.melody_seed = load_song(cfg.melody_seed);
  in.melody_id = cfg.melody_seed;
  const auto pick = [&](const std::string& path, Song& slot, std::string& id) {
    if (path.empty() || path == cfg.melody_seed) {
      slot = in.melody_seed;
      id = cfg.melody_seed;
    } else {
      slot = load_song(path);
      id = path;
    }
  };
  pick(cfg.chord_seed, in.chord_seed, in.chord_id);
  pick(cfg.bass_seed, in.bass_seed, in.bass_id);
  pick(cfg.structure_seed, in.structure_seed, in.structure_id);
  in.general = load_stats(cfg.stats_path);

  PipelineParams params;
  params.structure = StructureMode::from_string(cfg.structure);
  params.alpha_melody = cfg.alpha_melody;
  params.alpha_chords = cfg.alpha_chords;
  params.distinctive_threshold = cfg.distinctive_threshold;
  params.rhythm_threshold = cfg.rhythm_threshold;
  params.max_section_distance = cfg.max_section_distance;
  params.candidates = cfg.candidates;
  params.rng_seed = cfg.rng_seed;

  GenerationResult res = generate_song(in, params);
  if (!cfg.out.empty()) {
    write_file_atomic(cfg.out + ".mid", res.midi);
    write_file_atomic(cfg.out + ".txt", res.text);
  }
  return res;
}

// Seed-statistics summary used by the `analyze` command.
inline std::string run_analyze(const std::string& path) {
  const Song song = load_song(path);
  const StatTables t = build_seed_stats(song);
  std::ostringstream out;
  out << "song: " << path << "\n";
  out << "sections: " << song.sections.size() << ", bars: " << song.total_bars()
      << ", tempo: " << song.tempo << " bpm, mode: " << mode_name(song.mode)
      << "\n";
  auto top_row = [&](const char* label, const auto& row, auto name_of) {
    double total = 0;
    for (double v : row) total += v;
    out << label << ":";
    if (total <= 0) {
      out << " (none)\n";
      return;
    }
    std::vector<std::pair<double, int>> items;
    for (size_t i = 0; i < row.size(); ++i) {
      if (row[i] > 0) items.push_back({row[i], static_cast<int>(i)});
    }
    std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });
    const size_t k = std::min<size_t>(items.size(), 5);
    for (size_t i = 0; i < k; ++i) {
      out << ' ' << name_of(items[i].second) << '='
          << items[i].first / total;
    }
    out << "\n";
  };
  top_row("pitch_freq", t.pitch_freq, [](int i) { return std::to_string(i + 1); });
  top_row("dur_freq", t.dur_freq, [](int i) { return std::to_string(i + 1); });
  top_row("interval_freq", t.interval_freq,
          [](int i) { return std::to_string(i - 14); });
  top_row("rest_dur", t.rest_dur, [](int i) { return std::to_string(i + 1); });
  out << "chord n-grams: " << t.chord_ngrams.size()
      << ", cadence runs: " << t.cadences.size() << "\n";
  out << "bass patterns:";
  for (const auto& [mask, count] : t.bass_patterns) {
    out << ' ' << mask << "(x" << count << ")";
  }
  out << "\n";
  out << "melody notes crossing barlines: " << t.span_count << "\n";
  return out.str();
}

}  // namespace seedsong

#endif  // SEEDSONG_PIPELINE_HPP
