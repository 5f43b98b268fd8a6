// Objective evaluation: score a song's melody under a style's rating battery
// and compare score lists with a paired t-test.
#ifndef SEEDSONG_EVALUATE_HPP
#define SEEDSONG_EVALUATE_HPP

#include <cmath>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "seedsong/melody.hpp"
#include "seedsong/stat_math.hpp"
#include "seedsong/stats.hpp"

namespace seedsong {

struct Style {
  const StatTables* seed = nullptr;
  const StatTables* general = nullptr;
  double alpha = 0.5;
};

struct LikelihoodReport {
  std::string song_id;
  std::string style_id;
  std::vector<double> note_logs;          // per melody note
  std::vector<double> section_means;      // mean log per section
  std::map<std::string, double> per_function;  // mean log per rating function
  double mean_log = 0.0;
  double chord_ngram_overlap = 0.0;  // share of song grams present in the seed
};

// Applies the melody rating battery note-by-note, exactly as the sampler
// weights candidates (lookbacks reset at section starts). Factors are
// floored at kTinyWeight so every log stays finite.
inline LikelihoodReport score_song(const Song& song, const Style& style,
                                   const std::string& song_id = "",
                                   const std::string& style_id = "") {
  song.validate();
  LikelihoodReport rep;
  rep.song_id = song_id;
  rep.style_id = style_id;

  RatingTables rt{style.seed, style.general, style.alpha,
                  tempo_bucket(song.tempo)};

  std::array<double, kNumRatingFns> fn_logs{};
  int pos = 0;
  int section = 0;
  int section_end_bar = song.sections.empty() ? 0 : song.sections[0].length;
  double section_sum = 0.0;
  int section_notes = 0;
  std::optional<int> prev_pitch, prev_pitch_dur;

  auto close_section = [&]() {
    rep.section_means.push_back(section_notes > 0 ? section_sum / section_notes
                                                  : 0.0);
    section_sum = 0.0;
    section_notes = 0;
  };

  for (const Note& n : song.melody) {
    const int bar = pos / kSlotsPerBar;
    while (section < static_cast<int>(song.sections.size()) &&
           bar >= section_end_bar) {
      close_section();
      ++section;
      if (section < static_cast<int>(song.sections.size())) {
        section_end_bar += song.sections[section].length;
      }
      prev_pitch.reset();
      prev_pitch_dur.reset();
    }
    NoteContext ctx;
    ctx.chord = song.chords[bar];
    ctx.onset_in_bar = n.onset;
    ctx.in_last_bar = bar == section_end_bar - 1;
    ctx.prev_pitch = prev_pitch;
    ctx.prev_pitch_dur = prev_pitch_dur;

    const double w = note_weight(n.pitch, n.duration, ctx, rt, &fn_logs);
    const double logw = std::log(std::max(w, kTinyWeight));
    rep.note_logs.push_back(logw);
    section_sum += logw;
    ++section_notes;
    if (!n.pitch.is_rest()) {
      prev_pitch = n.pitch.degree();
      prev_pitch_dur = n.duration;
    }
    pos += n.duration;
  }
  if (!song.sections.empty()) close_section();

  const double notes = rep.note_logs.empty()
                           ? 1.0
                           : static_cast<double>(rep.note_logs.size());
  double total = 0.0;
  for (double v : rep.note_logs) total += v;
  rep.mean_log = total / notes;
  for (int i = 0; i < kNumRatingFns; ++i) {
    rep.per_function[rating_fn_name(i)] = fn_logs[i] / notes;
  }

  // Chord n-gram overlap with the style's seed tables.
  std::vector<std::string> grams;
  int bar0 = 0;
  for (const auto& sec : song.sections) {
    std::span<const Chord> ph(song.chords.data() + bar0,
                              static_cast<size_t>(sec.length));
    for (int len = 2; len <= 4; ++len) {
      for (int i = 0; i + len <= sec.length; ++i) {
        grams.push_back(stats_detail::gram_key(ph.subspan(i, len)));
      }
    }
    bar0 += sec.length;
  }
  std::sort(grams.begin(), grams.end());
  grams.erase(std::unique(grams.begin(), grams.end()), grams.end());
  if (!grams.empty() && style.seed) {
    int hit = 0;
    for (const auto& g : grams) hit += style.seed->chord_ngrams.count(g) > 0;
    rep.chord_ngram_overlap = static_cast<double>(hit) / grams.size();
  }
  return rep;
}

struct TTestResult {
  double t = 0.0;
  double p = 1.0;
  bool degenerate = false;  // zero variance of differences
  size_t n = 0;
};

// Standard paired t-test, two-sided.
inline TTestResult paired_compare(std::span<const double> a,
                                  std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) {
    throw InvariantError("paired_compare needs equal lengths >= 2");
  }
  const size_t n = a.size();
  double mean = 0.0;
  for (size_t i = 0; i < n; ++i) mean += a[i] - b[i];
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double d = (a[i] - b[i]) - mean;
    ss += d * d;
  }
  const double var = ss / static_cast<double>(n - 1);
  TTestResult res;
  res.n = n;
  if (var <= 0.0) {
    res.degenerate = true;
    if (mean == 0.0) {
      res.t = 0.0;
      res.p = 1.0;
    } else {
      res.t = mean > 0 ? HUGE_VAL : -HUGE_VAL;
      res.p = 0.0;
    }
    return res;
  }
  res.t = mean / std::sqrt(var / static_cast<double>(n));
  res.p = t_two_sided_p(res.t, static_cast<int>(n) - 1);
  return res;
}

// One row per song per function, plus the total and the chord-gram overlap.
inline std::string report_csv(std::span<const LikelihoodReport> reports) {
  std::ostringstream out;
  out << "song,style,function,mean_log\n";
  out.precision(10);
  for (const auto& r : reports) {
    for (const auto& [fn, v] : r.per_function) {
      out << r.song_id << ',' << r.style_id << ',' << fn << ',' << v << '\n';
    }
    out << r.song_id << ',' << r.style_id << ",total," << r.mean_log << '\n';
    out << r.song_id << ',' << r.style_id << ",chord_ngram_overlap,"
        << r.chord_ngram_overlap << '\n';
  }
  return out.str();
}

}  // namespace seedsong

#endif  // SEEDSONG_EVALUATE_HPP
