// Stylistic melody generation: a battery of rating functions scores every
// possible next note, the products form sampling weights, a DTW contour
// factor and a rhythm-onset gate tie the melody to the aligned reference
// section, and the best of N sampled candidates wins.
#ifndef SEEDSONG_MELODY_HPP
#define SEEDSONG_MELODY_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "seedsong/contour.hpp"
#include "seedsong/core.hpp"
#include "seedsong/rng.hpp"
#include "seedsong/stats.hpp"

namespace seedsong {

inline constexpr double kDefaultRhythmThreshold = 0.6;
inline constexpr double kContourFloor = 0.05;
inline constexpr int kDefaultCandidates = 30;
inline constexpr double kTinyWeight = 1e-12;  // log floor for reports

struct RatingTables {
  const StatTables* seed = nullptr;
  const StatTables* general = nullptr;
  double alpha = 0.5;
  int tempo_bucket = 1;
};

// --- rating functions -------------------------------------------------------------

inline double rate_pitch_freq(int p, const RatingTables& rt) {
  return blend_value(row_prob(rt.seed->pitch_freq, p - 1),
                     row_prob(rt.general->pitch_freq, p - 1, kGeneralEps),
                     rt.alpha);
}

inline double rate_pitch_harmony(int p, Chord c, const RatingTables& rt) {
  const int ci = static_cast<int>(c);
  return blend_value(
      row_prob(rt.seed->pitch_given_chord[ci], p - 1),
      row_prob(rt.general->pitch_given_chord[ci], p - 1, kGeneralEps),
      rt.alpha);
}

inline double rate_interval_freq(std::optional<int> prev_p, int p,
                                 const RatingTables& rt) {
  if (!prev_p) return 1.0;
  const int idx = interval_index(p - *prev_p);
  return blend_value(row_prob(rt.seed->interval_freq, idx),
                     row_prob(rt.general->interval_freq, idx, kGeneralEps),
                     rt.alpha);
}

// Hand-crafted interval/harmony interaction: small steps are likely, larger
// leaps prefer to rise and to land on chord tones.
inline double rate_interval_harmony(int p, std::optional<int> prev_p, Chord c,
                                    const RatingTables& rt) {
  if (!prev_p) return 1.0;
  const int delta = p - *prev_p;
  const int mag = std::abs(delta);
  const double base = 1.0 / (1.0 + mag);
  double dir = 1.0;
  if (delta > 4) dir = 1.2;                      // big leaps tend upward
  if (delta < 0 && mag <= 2) dir = 1.2;          // small steps tend downward
  const double phar = rate_pitch_harmony(p, c, rt);
  const double harm = 0.5 + phar * std::min(mag / 4.0, 1.0);
  return base * dir * harm;
}

inline double rate_downbeat(int p, int d, Chord c, int onset_in_bar,
                            const RatingTables& rt) {
  if (onset_in_bar != 0 && onset_in_bar != 8) return 1.0;
  if (is_chord_tone(p, c)) return 1.0;
  const double total = rt.seed->downbeat_total[d - 1];
  const double rule = 1.4 / d;
  if (total <= 0) return rule;
  const double p_non = rt.seed->downbeat_nonchord[d - 1] / total;
  return (1.0 - rt.alpha) * rule + rt.alpha * p_non;
}

inline double rate_dur_freq(int d, const RatingTables& rt) {
  return blend_value(
      row_prob(rt.seed->dur_freq, d - 1),
      row_prob(rt.general->dur_freq_tempo[rt.tempo_bucket], d - 1,
               kGeneralEps),
      rt.alpha);
}

inline double rate_dur_trans(std::optional<int> prev_d, int d,
                             const RatingTables& rt) {
  if (!prev_d) return 1.0;
  return blend_value(
      row_prob(rt.seed->dur_trans[*prev_d - 1], d - 1),
      row_prob(rt.general->dur_trans[*prev_d - 1], d - 1, kGeneralEps),
      rt.alpha);
}

inline double rate_rest_dur(int d, bool section_end, const RatingTables& rt) {
  if (section_end) return 1.0;
  const auto s = row_prob(rt.seed->rest_dur, d - 1);
  const double rule = 1.0 / d;
  if (!s) return rule;
  return rt.alpha * *s + (1.0 - rt.alpha) * rule;
}

// Duration given bar position, with the seed side smoothed over metrically
// equivalent positions (mod 2, 4, 8, 16) at weights 2^i/16.
inline double rate_pos_dur(int d, int onset_in_bar, const RatingTables& rt) {
  double seed_term = 0.0;
  for (int i = 1; i <= 4; ++i) {
    const int mod = 1 << i;
    double level = 0.0;
    for (int j = onset_in_bar % mod; j < kSlotsPerBar; j += mod) {
      if (const auto pr = row_prob(rt.seed->pos_dur[j], d - 1)) {
        level += *pr;
      }
    }
    seed_term += (static_cast<double>(mod) / 16.0) * level;
  }
  const bool syncopated = (onset_in_bar % 2 == 1) && (d % 2 == 0);
  const double general_term = syncopated ? 0.0 : 1.0;
  return rt.alpha * seed_term + (1.0 - rt.alpha) * general_term;
}

inline double rate_harmony_dur(int p, int d, Chord c, const RatingTables& rt) {
  const double phar = rate_pitch_harmony(p, c, rt);
  return ((phar - 0.5) * std::log2(d / 4.0) + 1.0) / 2.0;
}

inline double rate_interval_dur(std::optional<int> prev_p,
                                std::optional<int> prev_pitch_dur, int p,
                                const RatingTables& rt) {
  if (!prev_p || !prev_pitch_dur) return 1.0;
  const int idx = interval_index(p - *prev_p);
  return blend_value(
      row_prob(rt.seed->interval_given_dur[*prev_pitch_dur - 1], idx),
      row_prob(rt.general->interval_given_dur[*prev_pitch_dur - 1], idx,
               kGeneralEps),
      rt.alpha);
}

// --- the per-note battery ----------------------------------------------------------

// Blended share of rest notes among all notes. Rest candidates carry a
// single rating factor while pitched candidates multiply many, so without a
// common scale rests swamp the draw; this prior puts both on one footing.
inline double rest_prior(const RatingTables& rt) {
  auto share = [](const StatTables& t) -> std::optional<double> {
    double rests = 0, pitched = 0;
    for (double v : t.rest_dur) rests += v;
    for (double v : t.pitch_freq) pitched += v;
    if (rests + pitched <= 0) return std::nullopt;
    return rests / (rests + pitched);
  };
  const auto s = share(*rt.seed);
  const auto g = share(*rt.general);
  if (!s && !g) return 0.1;
  return blend_value(s, g, rt.alpha);
}

enum RatingFn {
  kPitchFreq = 0,
  kPitchHarmony,
  kIntervalFreq,
  kIntervalHarmony,
  kDownbeat,
  kDurFreq,
  kDurTrans,
  kRestDur,
  kPosDur,
  kHarmonyDur,
  kIntervalDur,
  kRestPrior,
  kNumRatingFns
};

inline const char* rating_fn_name(int fn) {
  static constexpr const char* names[] = {
      "pitch_freq",    "pitch_harmony", "interval_freq", "interval_harmony",
      "downbeat",      "dur_freq",      "dur_trans",     "rest_dur",
      "pos_dur",       "harmony_dur",   "interval_dur",  "rest_prior"};
  return names[fn];
}

struct NoteContext {
  Chord chord = Chord::I;
  int onset_in_bar = 0;
  bool in_last_bar = false;  // the rest rating's "section end"
  std::optional<int> prev_pitch;      // previous pitched degree
  std::optional<int> prev_pitch_dur;  // its duration
};

// Product of all applicable rating weights for one candidate note. When
// `log_breakdown` is given, each factor's log (floored at kTinyWeight) is
// added to its slot.
inline double note_weight(Pitch pitch, int dur, const NoteContext& ctx,
                          const RatingTables& rt,
                          std::array<double, kNumRatingFns>* log_breakdown =
                              nullptr) {
  std::array<double, kNumRatingFns> f;
  f.fill(1.0);
  const double rp = rest_prior(rt);
  if (pitch.is_rest()) {
    f[kRestDur] = rate_rest_dur(dur, ctx.in_last_bar, rt);
    f[kRestPrior] = rp;
  } else {
    f[kRestPrior] = 1.0 - rp;
    const int p = pitch.degree();
    f[kPitchFreq] = rate_pitch_freq(p, rt);
    f[kPitchHarmony] = rate_pitch_harmony(p, ctx.chord, rt);
    f[kIntervalFreq] = rate_interval_freq(ctx.prev_pitch, p, rt);
    f[kIntervalHarmony] = rate_interval_harmony(p, ctx.prev_pitch, ctx.chord, rt);
    f[kDownbeat] = rate_downbeat(p, dur, ctx.chord, ctx.onset_in_bar, rt);
    f[kDurFreq] = rate_dur_freq(dur, rt);
    f[kDurTrans] = rate_dur_trans(ctx.prev_pitch_dur, dur, rt);
    f[kPosDur] = rate_pos_dur(dur, ctx.onset_in_bar, rt);
    f[kHarmonyDur] = rate_harmony_dur(p, dur, ctx.chord, rt);
    f[kIntervalDur] =
        rate_interval_dur(ctx.prev_pitch, ctx.prev_pitch_dur, p, rt);
  }
  double w = 1.0;
  for (int i = 0; i < kNumRatingFns; ++i) {
    w *= f[i];
    if (log_breakdown) {
      (*log_breakdown)[i] += std::log(std::max(f[i], kTinyWeight));
    }
  }
  return std::max(w, 0.0);
}

// --- section sampling ---------------------------------------------------------------

inline bool spanning_allowed(const StatTables& seed) {
  return seed.span_count > 0;
}

// Perfect authentic cadence: the section closes V -> I.
inline bool is_pac(std::span<const Chord> section_chords) {
  const size_t n = section_chords.size();
  return n >= 2 && section_chords[n - 2] == Chord::V &&
         section_chords[n - 1] == Chord::I;
}

inline bool is_tonic_degree(int p) { return p == 1 || p == 8 || p == 15; }

struct MelodyParams {
  double alpha = 0.5;
  double rhythm_threshold = kDefaultRhythmThreshold;
  double contour_floor = kContourFloor;
  int candidates = kDefaultCandidates;
};

struct SectionTask {
  std::vector<Chord> chords;  // one per bar of the section
  const std::vector<int>* ref_frames = nullptr;  // aligned reference contour
  const std::vector<int>* ref_onsets = nullptr;  // aligned reference onsets
  bool pac = false;
  bool allow_span = false;
};

struct CandidateMelody {
  std::vector<Note> notes;
  double score = 0.0;  // mean per-note log weight
};

class SectionSampler {
 public:
  SectionSampler(const SectionTask& task, const RatingTables& tables,
                 const MelodyParams& params)
      : task_(task),
        tables_(tables),
        params_(params),
        total_frames_(static_cast<int>(task.chords.size()) * kSlotsPerBar),
        rhythm_(task.ref_onsets
                    ? RhythmTracker(*task.ref_onsets, total_frames_)
                    : RhythmTracker({}, 0)),
        use_rhythm_gate_(task.ref_onsets != nullptr) {
    if (task.ref_frames && !task.ref_frames->empty()) {
      contour_.emplace(*task.ref_frames);
      if (!contour_->active()) contour_.reset();
    }
  }

  int position() const { return pos_; }
  bool done() const { return pos_ >= total_frames_; }

  struct Weighted {
    Pitch pitch;
    int dur;
    double weight;
  };

  // Weights of every admissible next note at the current position. Raw
  // battery products are normalized within the pitched and rest families and
  // the families mixed by the blended rest share, so the two compete on one
  // scale (a rest's single rating would otherwise swamp a pitched product of
  // ten sub-unity factors). With relax_gate the rhythm gate is skipped (the
  // all-zero fallback path).
  std::vector<Weighted> candidates(bool relax_gate = false) {
    std::vector<Weighted> out = raw_candidates(relax_gate);
    double pitched_sum = 0.0, rest_sum = 0.0;
    for (const auto& c : out) {
      (c.pitch.is_rest() ? rest_sum : pitched_sum) += c.weight;
    }
    const double rp = rest_prior(tables_);
    for (auto& c : out) {
      if (c.pitch.is_rest()) {
        c.weight = rp * c.weight / rest_sum;
      } else {
        c.weight = (1.0 - rp) * c.weight / pitched_sum;
      }
    }
    return out;
  }

  std::vector<Weighted> raw_candidates(bool relax_gate = false) {
    std::vector<Weighted> out;
    const int rem = total_frames_ - pos_;
    const int slot = pos_ % kSlotsPerBar;
    const int bar = pos_ / kSlotsPerBar;
    const int space_in_bar = kSlotsPerBar - slot;
    const int dmax = std::min(kMaxDuration, rem);

    NoteContext ctx;
    ctx.chord = task_.chords[static_cast<size_t>(bar)];
    ctx.onset_in_bar = slot;
    ctx.in_last_bar = bar == static_cast<int>(task_.chords.size()) - 1;
    ctx.prev_pitch = prev_pitch_;
    ctx.prev_pitch_dur = prev_pitch_dur_;

    if (contour_) contour_->begin_step();
    std::vector<double> sims;

    auto admissible = [&](bool pitched, int p, int d) {
      if (pitched && d > space_in_bar && !task_.allow_span) return false;
      if (!pitched && d > space_in_bar) return false;  // rests stay in the bar
      if (task_.pac) {
        const int left = rem - d;
        if (left > 0 && left < 4) return false;
        if (left == 0 && (!pitched || !is_tonic_degree(p))) return false;
      }
      return true;
    };

    auto push = [&](Pitch pitch, int d, double contour_factor) {
      const bool pitched = !pitch.is_rest();
      if (use_rhythm_gate_ && !relax_gate &&
          rhythm_.sim_after(pitched, d) < params_.rhythm_threshold) {
        return;
      }
      double w = note_weight(pitch, d, ctx, tables_);
      w *= contour_factor;
      if (w > 0.0) out.push_back({pitch, d, w});
    };

    for (int p = kMinDegree; p <= kMaxDegree; ++p) {
      bool any = false;
      for (int d = 1; d <= dmax; ++d) {
        if (admissible(true, p, d)) any = true;
      }
      if (!any) continue;
      double base_factor = 1.0;
      if (contour_) {
        contour_->extension_sims(p, dmax, sims);
      }
      for (int d = 1; d <= dmax; ++d) {
        if (!admissible(true, p, d)) continue;
        const double factor =
            contour_ ? std::max(sims[static_cast<size_t>(d - 1)],
                                params_.contour_floor)
                     : base_factor;
        push(Pitch::of(p), d, factor);
      }
    }
    {
      const int rest_max = std::min(dmax, space_in_bar);
      if (contour_) contour_->extension_sims(kRestFrame, rest_max, sims);
      for (int d = 1; d <= rest_max; ++d) {
        if (!admissible(false, 0, d)) continue;
        const double factor =
            contour_ ? std::max(sims[static_cast<size_t>(d - 1)],
                                params_.contour_floor)
                     : 1.0;
        push(Pitch::rest(), d, factor);
      }
    }
    return out;
  }

  void append(Pitch pitch, int dur, double log_weight) {
    notes_.emplace_back(pitch, dur, pos_ % kSlotsPerBar);
    if (contour_) {
      contour_->append(pitch.is_rest() ? kRestFrame : pitch.degree(), dur);
    }
    rhythm_.append(!pitch.is_rest(), dur);
    if (!pitch.is_rest()) {
      prev_pitch_ = pitch.degree();
      prev_pitch_dur_ = dur;
    }
    pos_ += dur;
    log_sum_ += log_weight;
  }

  // Draws one note: normal weights, then gate-relaxed weights, then the
  // forced chord-tone fallback.
  void sample_step(Rng& rng) {
    auto cands = candidates(false);
    if (cands.empty()) cands = candidates(true);
    if (cands.empty()) {
      const auto [pitch, dur] = forced_note();
      append(pitch, dur, std::log(kTinyWeight));
      return;
    }
    std::vector<double> weights;
    weights.reserve(cands.size());
    for (const auto& c : cands) weights.push_back(c.weight);
    const size_t pick = rng.weighted_choice(weights);
    append(cands[pick].pitch, cands[pick].dur, std::log(cands[pick].weight));
  }

  CandidateMelody take() {
    CandidateMelody cm;
    cm.score = notes_.empty() ? 0.0 : log_sum_ / notes_.size();
    cm.notes = std::move(notes_);
    return cm;
  }

 private:
  // Structurally legal quarter-ish chord tone for the all-zero fallback.
  std::pair<Pitch, int> forced_note() const {
    const int rem = total_frames_ - pos_;
    const int slot = pos_ % kSlotsPerBar;
    const int space = kSlotsPerBar - slot;
    const Chord c = task_.chords[static_cast<size_t>(pos_ / kSlotsPerBar)];
    auto legal = [&](int d) {
      if (d < 1 || d > std::min(kMaxDuration, rem)) return false;
      if (d > space && !task_.allow_span) return false;
      if (task_.pac) {
        const int left = rem - d;
        if (left > 0 && left < 4) return false;
      }
      return true;
    };
    int dur = 0;
    if (legal(4)) {
      dur = 4;
    } else if (rem <= kMaxDuration && legal(rem)) {
      dur = rem;
    } else {
      for (int d = std::min(kMaxDuration, rem); d >= 1; --d) {
        if (legal(d)) {
          dur = d;
          break;
        }
      }
    }
    if (dur == 0) dur = std::min({4, rem, space});  // last resort
    const bool ends = dur == rem;
    const int anchor = prev_pitch_.value_or(8);
    int best_p = chord_root(c);
    int best_dist = 1000;
    for (int p = kMinDegree; p <= kMaxDegree; ++p) {
      const bool ok = (task_.pac && ends) ? is_tonic_degree(p)
                                          : degree_class(p) ==
                                                degree_class(chord_root(c));
      if (!ok) continue;
      const int dist = std::abs(p - anchor);
      if (dist < best_dist) {
        best_dist = dist;
        best_p = p;
      }
    }
    return {Pitch::of(best_p), dur};
  }

  SectionTask task_;
  RatingTables tables_;
  MelodyParams params_;
  int total_frames_;
  int pos_ = 0;
  std::vector<Note> notes_;
  std::optional<int> prev_pitch_;
  std::optional<int> prev_pitch_dur_;
  double log_sum_ = 0.0;
  std::optional<ContourTracker> contour_;
  RhythmTracker rhythm_;
  bool use_rhythm_gate_;
};

inline CandidateMelody sample_section_melody(const SectionTask& task,
                                             const RatingTables& tables,
                                             const MelodyParams& params,
                                             Rng& rng) {
  SectionSampler sampler(task, tables, params);
  while (!sampler.done()) sampler.sample_step(rng);
  return sampler.take();
}

// Samples n candidates on independent derived streams and keeps the best
// mean log weight; ties go to the earliest candidate.
inline CandidateMelody generate_section_melody(const SectionTask& task,
                                               const RatingTables& tables,
                                               const MelodyParams& params,
                                               uint64_t rng_seed,
                                               uint64_t section_salt) {
  CandidateMelody best;
  bool have = false;
  for (int k = 0; k < std::max(1, params.candidates); ++k) {
    Rng rng = Rng::derive(rng_seed, 0x6d656c6f6479ULL, section_salt,
                          static_cast<uint64_t>(k));
    CandidateMelody cm = sample_section_melody(task, tables, params, rng);
    if (!have || cm.score > best.score) {
      best = std::move(cm);
      have = true;
    }
  }
  return best;
}

}  // namespace seedsong

#endif  // SEEDSONG_MELODY_HPP
