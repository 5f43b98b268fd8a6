// Corpus statistics: counts extracted from a seed song or pooled over a
// general corpus, and the alpha-blend that mixes the two. Tables hold raw
// counts; probability views normalize on demand so that a row with no data
// stays recognizably empty.
#ifndef SEEDSONG_STATS_HPP
#define SEEDSONG_STATS_HPP

#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "seedsong/core.hpp"

namespace seedsong {

// Pseudo-count applied when reading general-corpus tables. Seed tables are
// read raw so distinctive seed features are not diluted.
inline constexpr double kGeneralEps = 1e-4;

inline constexpr int kNumIntervals = 29;  // diatonic intervals -14..14
inline int interval_index(int delta) { return delta + 14; }

inline constexpr int kNumTempoBuckets = 3;
inline int tempo_bucket(int bpm) {
  if (bpm < 90) return 0;
  if (bpm <= 120) return 1;
  return 2;
}

// Bass note categories relative to the sounding chord.
enum class BassCat : uint8_t { kRoot = 0, kThird, kFifth, kOther };
inline constexpr int kNumBassCats = 4;

inline BassCat classify_bass(int degree, Chord chord) {
  const int pc = degree_class(degree);
  const int r = static_cast<int>(chord);
  if (pc == r) return BassCat::kRoot;
  if (pc == (r + 2) % 7) return BassCat::kThird;
  if (pc == (r + 4) % 7) return BassCat::kFifth;
  return BassCat::kOther;
}

template <size_t N>
using Row = std::array<double, N>;

struct StatTables {
  // Chords.
  std::array<Row<kNumChords>, kNumChords> chord_trans{};
  std::map<std::string, double> chord_ngrams;  // keys like "I.IV.V"
  std::array<double, 3> ngram_totals{};        // totals for n = 2, 3, 4
  std::map<std::string, double> cadences;      // section-final runs, len 2..6
  double cadence_total = 0;

  // Melody.
  Row<kMaxDegree> pitch_freq{};
  std::array<Row<kMaxDegree>, kNumChords> pitch_given_chord{};
  Row<kNumIntervals> interval_freq{};
  Row<kMaxDuration> dur_freq{};
  std::array<Row<kMaxDuration>, kNumTempoBuckets> dur_freq_tempo{};
  std::array<Row<kMaxDuration>, kMaxDuration> dur_trans{};  // [prev][next]
  Row<kMaxDuration> rest_dur{};
  std::array<Row<kMaxDuration>, kSlotsPerBar> pos_dur{};  // [onset][dur]
  std::array<Row<kNumIntervals>, kMaxDuration> interval_given_dur{};
  Row<kMaxDuration> downbeat_nonchord{};  // non-chord downbeat notes by dur
  Row<kMaxDuration> downbeat_total{};     // all downbeat notes by dur
  double span_count = 0;  // melody notes crossing a barline

  // Bass.
  std::map<std::string, double> bass_patterns;  // 16-char onset masks
  std::array<Row<kNumBassCats>, kSlotsPerBar> bass_ctf{};
  std::array<std::array<Row<kNumBassCats>, kNumBassCats>, kSlotsPerBar>
      bass_ctt{};  // [onset][prev cat][next cat]
};

// --- probability views --------------------------------------------------------

template <size_t N>
inline std::optional<double> row_prob(const Row<N>& row, int i,
                                      double eps = 0.0) {
  double total = 0;
  for (double v : row) total += v;
  total += eps * static_cast<double>(N);
  if (total <= 0) return std::nullopt;
  return (row[static_cast<size_t>(i)] + eps) / total;
}

// Convex blend with empty-row fallbacks; 1.0 when neither side has data.
inline double blend_value(std::optional<double> seed,
                          std::optional<double> general, double alpha) {
  if (seed && general) return alpha * *seed + (1.0 - alpha) * *general;
  if (seed) return *seed;
  if (general) return *general;
  return 1.0;
}

// --- accumulation --------------------------------------------------------------

namespace stats_detail {

inline std::string gram_key(std::span<const Chord> gram) {
  std::string key;
  for (size_t i = 0; i < gram.size(); ++i) {
    if (i) key += '.';
    key += chord_name(gram[i]);
  }
  return key;
}

inline std::vector<Chord> parse_gram_key(const std::string& key) {
  std::vector<Chord> out;
  std::istringstream in(key);
  std::string tok;
  while (std::getline(in, tok, '.')) {
    auto c = chord_from_name(tok);
    if (!c) throw ParseError("bad chord in gram key '" + key + "'");
    out.push_back(*c);
  }
  return out;
}

// Transitions, 2/3/4-grams, and final cadence runs of one chord phrase.
inline void accumulate_chord_phrase(StatTables& t, std::span<const Chord> ph) {
  const int n = static_cast<int>(ph.size());
  for (int i = 0; i + 1 < n; ++i) {
    t.chord_trans[static_cast<int>(ph[i])][static_cast<int>(ph[i + 1])] += 1;
  }
  for (int len = 2; len <= 4; ++len) {
    for (int i = 0; i + len <= n; ++i) {
      t.chord_ngrams[gram_key(ph.subspan(i, len))] += 1;
      t.ngram_totals[len - 2] += 1;
    }
  }
  for (int len = 2; len <= 6 && len <= n; ++len) {
    t.cadences[gram_key(ph.subspan(n - len, len))] += 1;
    t.cadence_total += 1;
  }
}

struct PlacedNote {
  const Note* note;
  int pos;  // absolute frame
  int section;
};

inline std::vector<PlacedNote> place_track(const Song& song,
                                           const std::vector<Note>& track) {
  std::vector<PlacedNote> placed;
  int pos = 0;
  for (const Note& n : track) {
    placed.push_back({&n, pos, song.section_of_bar(pos / kSlotsPerBar)});
    pos += n.duration;
  }
  return placed;
}

inline void accumulate_melody(StatTables& t, const Song& song) {
  const auto placed = place_track(song, song.melody);
  const int bucket = tempo_bucket(song.tempo);
  // Previous pitched note within the current section.
  int prev_pitch = 0, prev_dur = 0, prev_section = -1;
  for (const auto& pn : placed) {
    const Note& n = *pn.note;
    if (pn.section != prev_section) {
      prev_pitch = 0;
      prev_section = pn.section;
    }
    if (n.pitch.is_rest()) {
      t.rest_dur[n.duration - 1] += 1;
      continue;
    }
    const int p = n.pitch.degree();
    const Chord c = song.chords[pn.pos / kSlotsPerBar];
    t.pitch_freq[p - 1] += 1;
    t.pitch_given_chord[static_cast<int>(c)][p - 1] += 1;
    t.dur_freq[n.duration - 1] += 1;
    t.dur_freq_tempo[bucket][n.duration - 1] += 1;
    t.pos_dur[n.onset][n.duration - 1] += 1;
    if (n.onset == 0 || n.onset == 8) {
      t.downbeat_total[n.duration - 1] += 1;
      if (!is_chord_tone(p, c)) t.downbeat_nonchord[n.duration - 1] += 1;
    }
    if (n.onset + n.duration > kSlotsPerBar) t.span_count += 1;
    if (prev_pitch > 0) {
      const int delta = p - prev_pitch;
      t.interval_freq[interval_index(delta)] += 1;
      t.interval_given_dur[prev_dur - 1][interval_index(delta)] += 1;
      t.dur_trans[prev_dur - 1][n.duration - 1] += 1;
    }
    prev_pitch = p;
    prev_dur = n.duration;
  }
}

inline std::string pattern_mask(std::span<const int> onsets) {
  std::string mask(kSlotsPerBar, '_');
  for (int o : onsets) mask[o] = '0';
  return mask;
}

inline void accumulate_bass(StatTables& t, const Song& song) {
  const auto placed = place_track(song, song.bass);
  std::vector<std::vector<int>> bar_onsets(song.total_bars());
  struct Onset {
    int pos;
    BassCat cat;
    int section;
  };
  std::vector<Onset> onsets;
  for (const auto& pn : placed) {
    if (pn.note->pitch.is_rest()) continue;
    const int bar = pn.pos / kSlotsPerBar;
    bar_onsets[bar].push_back(pn.pos % kSlotsPerBar);
    onsets.push_back({pn.pos,
                      classify_bass(pn.note->pitch.degree(), song.chords[bar]),
                      pn.section});
  }
  for (const auto& v : bar_onsets) t.bass_patterns[pattern_mask(v)] += 1;
  for (size_t i = 0; i < onsets.size(); ++i) {
    const int slot = onsets[i].pos % kSlotsPerBar;
    t.bass_ctf[slot][static_cast<int>(onsets[i].cat)] += 1;
    if (i + 1 < onsets.size() && onsets[i + 1].section == onsets[i].section) {
      t.bass_ctt[slot][static_cast<int>(onsets[i].cat)]
                [static_cast<int>(onsets[i + 1].cat)] += 1;
    }
  }
}

inline void accumulate_song(StatTables& t, const Song& song) {
  int bar = 0;
  for (const auto& sec : song.sections) {
    accumulate_chord_phrase(
        t, std::span<const Chord>(song.chords).subspan(bar, sec.length));
    bar += sec.length;
  }
  accumulate_melody(t, song);
  accumulate_bass(t, song);
}

}  // namespace stats_detail

inline StatTables build_seed_stats(const Song& song) {
  song.validate();
  StatTables t;
  stats_detail::accumulate_song(t, song);
  return t;
}

// Chord-only corpus file: one chord symbol per bar per line, blank lines
// separating phrases.
struct ChordCorpusFile {
  std::vector<std::vector<Chord>> phrases;
};

inline ChordCorpusFile parse_chord_annotation(const std::string& text) {
  ChordCorpusFile file;
  std::vector<Chord> phrase;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = raw;
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) {
      line.pop_back();
    }
    if (line.empty()) {
      if (!phrase.empty()) file.phrases.push_back(std::move(phrase));
      phrase.clear();
      continue;
    }
    auto c = chord_from_name(line);
    if (!c) throw ParseError("unknown chord '" + line + "'", line_no, 1);
    phrase.push_back(*c);
  }
  if (!phrase.empty()) file.phrases.push_back(std::move(phrase));
  return file;
}

inline StatTables build_general_stats(
    std::span<const Song> songs,
    std::span<const ChordCorpusFile> chord_files = {}) {
  if (songs.empty() && chord_files.empty()) {
    throw InvariantError("empty corpus");
  }
  StatTables t;
  for (const Song& s : songs) {
    s.validate();
    stats_detail::accumulate_song(t, s);
  }
  for (const auto& f : chord_files) {
    for (const auto& ph : f.phrases) {
      stats_detail::accumulate_chord_phrase(t, ph);
    }
  }
  return t;
}

// --- blend ---------------------------------------------------------------------

namespace stats_detail {

template <size_t N>
inline Row<N> blend_row(const Row<N>& seed, const Row<N>& general,
                        double alpha) {
  double st = 0, gt = 0;
  for (double v : seed) st += v;
  for (double v : general) gt += v;
  Row<N> out{};
  if (st <= 0 && gt <= 0) return out;  // stays flagged empty
  for (size_t i = 0; i < N; ++i) {
    const double s = st > 0 ? seed[i] / st : 0.0;
    const double g = gt > 0 ? general[i] / gt : 0.0;
    if (st > 0 && gt > 0) {
      out[i] = alpha * s + (1.0 - alpha) * g;
    } else if (st > 0) {
      out[i] = s;
    } else {
      out[i] = g;
    }
  }
  return out;
}

inline std::map<std::string, double> blend_map(
    const std::map<std::string, double>& seed, double seed_total,
    const std::map<std::string, double>& general, double general_total,
    double alpha) {
  std::map<std::string, double> out;
  const bool has_s = seed_total > 0, has_g = general_total > 0;
  if (!has_s && !has_g) return out;
  auto weight = [&](const std::string& k) {
    const auto si = seed.find(k);
    const auto gi = general.find(k);
    const double s = si == seed.end() ? 0.0 : si->second / seed_total;
    const double g = gi == general.end() ? 0.0 : gi->second / general_total;
    if (has_s && has_g) return alpha * s + (1.0 - alpha) * g;
    return has_s ? s : g;
  };
  for (const auto& [k, v] : seed) out[k] = weight(k);
  for (const auto& [k, v] : general) {
    if (!out.count(k)) out[k] = weight(k);
  }
  return out;
}

inline double map_total(const std::map<std::string, double>& m) {
  double t = 0;
  for (const auto& [k, v] : m) t += v;
  return t;
}

}  // namespace stats_detail

// Entry-wise convex combination of the two tables' distributions. Rows that
// are empty on one side fall back to the other side alone. The result holds
// probabilities (each nonempty row sums to 1).
inline StatTables blend(const StatTables& seed, const StatTables& general,
                        double alpha) {
  if (alpha < 0.0 || alpha > 1.0) {
    throw InvariantError("alpha must lie in [0,1]");
  }
  using namespace stats_detail;
  StatTables out;
  for (int i = 0; i < kNumChords; ++i) {
    out.chord_trans[i] = blend_row(seed.chord_trans[i], general.chord_trans[i],
                                   alpha);
    out.pitch_given_chord[i] =
        blend_row(seed.pitch_given_chord[i], general.pitch_given_chord[i],
                  alpha);
  }
  // n-gram maps blend per n so the three gram lengths stay comparable.
  for (int n = 2; n <= 4; ++n) {
    std::map<std::string, double> s, g;
    auto pick = [&](const std::map<std::string, double>& src, int len) {
      std::map<std::string, double> dst;
      for (const auto& [k, v] : src) {
        if (static_cast<int>(std::count(k.begin(), k.end(), '.')) + 1 == len) {
          dst[k] = v;
        }
      }
      return dst;
    };
    s = pick(seed.chord_ngrams, n);
    g = pick(general.chord_ngrams, n);
    auto blended = blend_map(s, seed.ngram_totals[n - 2], g,
                             general.ngram_totals[n - 2], alpha);
    for (auto& [k, v] : blended) out.chord_ngrams[k] = v;
    out.ngram_totals[n - 2] = stats_detail::map_total(pick(out.chord_ngrams, n));
  }
  out.cadences = blend_map(seed.cadences, seed.cadence_total, general.cadences,
                           general.cadence_total, alpha);
  out.cadence_total = map_total(out.cadences);

  out.pitch_freq = blend_row(seed.pitch_freq, general.pitch_freq, alpha);
  out.interval_freq =
      blend_row(seed.interval_freq, general.interval_freq, alpha);
  out.dur_freq = blend_row(seed.dur_freq, general.dur_freq, alpha);
  for (int b = 0; b < kNumTempoBuckets; ++b) {
    out.dur_freq_tempo[b] =
        blend_row(seed.dur_freq_tempo[b], general.dur_freq_tempo[b], alpha);
  }
  for (int d = 0; d < kMaxDuration; ++d) {
    out.dur_trans[d] = blend_row(seed.dur_trans[d], general.dur_trans[d], alpha);
    out.interval_given_dur[d] = blend_row(seed.interval_given_dur[d],
                                          general.interval_given_dur[d], alpha);
  }
  out.rest_dur = blend_row(seed.rest_dur, general.rest_dur, alpha);
  for (int o = 0; o < kSlotsPerBar; ++o) {
    out.pos_dur[o] = blend_row(seed.pos_dur[o], general.pos_dur[o], alpha);
    out.bass_ctf[o] = blend_row(seed.bass_ctf[o], general.bass_ctf[o], alpha);
    for (int c = 0; c < kNumBassCats; ++c) {
      out.bass_ctt[o][c] =
          blend_row(seed.bass_ctt[o][c], general.bass_ctt[o][c], alpha);
    }
  }
  out.downbeat_nonchord =
      blend_row(seed.downbeat_nonchord, general.downbeat_nonchord, alpha);
  out.downbeat_total =
      blend_row(seed.downbeat_total, general.downbeat_total, alpha);
  out.span_count = alpha * seed.span_count + (1.0 - alpha) * general.span_count;
  out.bass_patterns =
      blend_map(seed.bass_patterns, map_total(seed.bass_patterns),
                general.bass_patterns, map_total(general.bass_patterns), alpha);
  return out;
}

// --- serialization ---------------------------------------------------------------

inline constexpr int kStatsVersion = 1;

namespace stats_detail {

template <size_t N>
inline nlohmann::json row_json(const Row<N>& r) {
  return nlohmann::json(std::vector<double>(r.begin(), r.end()));
}
template <size_t N>
inline void row_from_json(const nlohmann::json& j, Row<N>& r) {
  auto v = j.get<std::vector<double>>();
  if (v.size() != N) throw ParseError("stats row has wrong width");
  std::copy(v.begin(), v.end(), r.begin());
}

}  // namespace stats_detail

inline nlohmann::json stats_to_json(const StatTables& t) {
  using namespace stats_detail;
  nlohmann::json j;
  j["version"] = kStatsVersion;
  auto rows2d = [](const auto& rows) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : rows) arr.push_back(row_json(r));
    return arr;
  };
  j["chord_trans"] = rows2d(t.chord_trans);
  j["chord_ngrams"] = t.chord_ngrams;
  j["ngram_totals"] = t.ngram_totals;
  j["cadences"] = t.cadences;
  j["cadence_total"] = t.cadence_total;
  j["pitch_freq"] = row_json(t.pitch_freq);
  j["pitch_given_chord"] = rows2d(t.pitch_given_chord);
  j["interval_freq"] = row_json(t.interval_freq);
  j["dur_freq"] = row_json(t.dur_freq);
  j["dur_freq_tempo"] = rows2d(t.dur_freq_tempo);
  j["dur_trans"] = rows2d(t.dur_trans);
  j["rest_dur"] = row_json(t.rest_dur);
  j["pos_dur"] = rows2d(t.pos_dur);
  j["interval_given_dur"] = rows2d(t.interval_given_dur);
  j["downbeat_nonchord"] = row_json(t.downbeat_nonchord);
  j["downbeat_total"] = row_json(t.downbeat_total);
  j["span_count"] = t.span_count;
  j["bass_patterns"] = t.bass_patterns;
  j["bass_ctf"] = rows2d(t.bass_ctf);
  nlohmann::json ctt = nlohmann::json::array();
  for (const auto& per_onset : t.bass_ctt) ctt.push_back(rows2d(per_onset));
  j["bass_ctt"] = ctt;
  return j;
}

inline StatTables stats_from_json(const nlohmann::json& j) {
  using namespace stats_detail;
  if (!j.contains("version") || j.at("version").get<int>() != kStatsVersion) {
    throw ParseError("unsupported stats file version");
  }
  StatTables t;
  auto rows2d = [](const nlohmann::json& arr, auto& rows) {
    if (arr.size() != rows.size()) throw ParseError("stats table wrong height");
    for (size_t i = 0; i < rows.size(); ++i) row_from_json(arr[i], rows[i]);
  };
  rows2d(j.at("chord_trans"), t.chord_trans);
  t.chord_ngrams = j.at("chord_ngrams").get<std::map<std::string, double>>();
  t.ngram_totals = j.at("ngram_totals").get<std::array<double, 3>>();
  t.cadences = j.at("cadences").get<std::map<std::string, double>>();
  t.cadence_total = j.at("cadence_total").get<double>();
  row_from_json(j.at("pitch_freq"), t.pitch_freq);
  rows2d(j.at("pitch_given_chord"), t.pitch_given_chord);
  row_from_json(j.at("interval_freq"), t.interval_freq);
  row_from_json(j.at("dur_freq"), t.dur_freq);
  rows2d(j.at("dur_freq_tempo"), t.dur_freq_tempo);
  rows2d(j.at("dur_trans"), t.dur_trans);
  row_from_json(j.at("rest_dur"), t.rest_dur);
  rows2d(j.at("pos_dur"), t.pos_dur);
  rows2d(j.at("interval_given_dur"), t.interval_given_dur);
  row_from_json(j.at("downbeat_nonchord"), t.downbeat_nonchord);
  row_from_json(j.at("downbeat_total"), t.downbeat_total);
  t.span_count = j.at("span_count").get<double>();
  t.bass_patterns = j.at("bass_patterns").get<std::map<std::string, double>>();
  rows2d(j.at("bass_ctf"), t.bass_ctf);
  const auto& ctt = j.at("bass_ctt");
  if (ctt.size() != t.bass_ctt.size()) throw ParseError("bad bass_ctt");
  for (size_t i = 0; i < t.bass_ctt.size(); ++i) rows2d(ctt[i], t.bass_ctt[i]);
  return t;
}

}  // namespace seedsong

#endif  // SEEDSONG_STATS_HPP
