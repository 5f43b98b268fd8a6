// Pattern-based bass generation: per-bar onset masks from the seed section,
// chord-tone frequency/transition matrices per onset position, and Viterbi
// decoding of the most likely root/third/fifth/other sequence.
#ifndef SEEDSONG_BASS_HPP
#define SEEDSONG_BASS_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "seedsong/core.hpp"
#include "seedsong/stats.hpp"

namespace seedsong {

struct BassPattern {
  std::string mask = std::string(kSlotsPerBar, '_');  // '0' marks an onset

  static BassPattern from_mask(const std::string& m) {
    if (m.size() != kSlotsPerBar ||
        m.find_first_not_of("0_") != std::string::npos) {
      throw InvariantError("bass pattern mask must be 16 chars of '0'/'_'");
    }
    return {m};
  }

  std::vector<int> onsets() const {
    std::vector<int> out;
    for (int i = 0; i < kSlotsPerBar; ++i) {
      if (mask[i] == '0') out.push_back(i);
    }
    return out;
  }

  bool empty() const { return mask.find('0') == std::string::npos; }

  friend bool operator==(const BassPattern& a, const BassPattern& b) {
    return a.mask == b.mask;
  }
};

struct ChordToneMatrices {
  std::array<Row<kNumBassCats>, kSlotsPerBar> ctf{};
  std::array<std::array<Row<kNumBassCats>, kNumBassCats>, kSlotsPerBar> ctt{};

  // Emission row for an onset slot, falling back to the all-slot pool and
  // then to uniform.
  Row<kNumBassCats> emission(int slot) const {
    Row<kNumBassCats> row = ctf[slot];
    if (row_total(row) <= 0) {
      row.fill(0);
      for (const auto& r : ctf) {
        for (int c = 0; c < kNumBassCats; ++c) row[c] += r[c];
      }
    }
    return normalized(row);
  }

  // Next-category row given the previous onset slot and category.
  Row<kNumBassCats> transition(int prev_slot, int prev_cat) const {
    Row<kNumBassCats> row = ctt[prev_slot][prev_cat];
    if (row_total(row) <= 0) {
      row.fill(0);
      for (const auto& per_slot : ctt) {
        for (int c = 0; c < kNumBassCats; ++c) row[c] += per_slot[prev_cat][c];
      }
    }
    return normalized(row);
  }

 private:
  static double row_total(const Row<kNumBassCats>& r) {
    double t = 0;
    for (double v : r) t += v;
    return t;
  }
  static Row<kNumBassCats> normalized(Row<kNumBassCats> r) {
    const double t = row_total(r);
    if (t <= 0) {
      r.fill(1.0 / kNumBassCats);
    } else {
      for (double& v : r) v /= t;
    }
    return r;
  }
};

struct BassStyle {
  BassPattern most_frequent;
  BassPattern first;
  BassPattern last;
  ChordToneMatrices matrices;
};

// Extracts the rhythm patterns and chord-tone matrices of one section.
// `bass` must tile exactly chords.size() bars.
inline BassStyle extract_bass_style(std::span<const Note> bass,
                                    std::span<const Chord> chords) {
  if (chords.empty() || bass.empty()) {
    throw InvariantError("extract_bass_style: empty bass section");
  }
  const int bars = static_cast<int>(chords.size());
  std::vector<std::string> masks(bars, std::string(kSlotsPerBar, '_'));
  BassStyle style;
  struct Onset {
    int slot;
    BassCat cat;
  };
  std::vector<Onset> onsets;
  int pos = 0;
  for (const Note& n : bass) {
    if (!n.pitch.is_rest()) {
      const int bar = pos / kSlotsPerBar;
      if (bar >= bars) throw InvariantError("bass extends past the section");
      masks[bar][pos % kSlotsPerBar] = '0';
      onsets.push_back({pos % kSlotsPerBar,
                        classify_bass(n.pitch.degree(), chords[bar])});
    }
    pos += n.duration;
  }
  if (pos != bars * kSlotsPerBar) {
    throw InvariantError("bass does not tile the section");
  }
  std::map<std::string, int> counts;
  for (const auto& m : masks) counts[m] += 1;
  int best = 0;
  for (const auto& [mask, count] : counts) {
    if (count > best) {  // ties keep the lexicographically smallest mask
      best = count;
      style.most_frequent.mask = mask;
    }
  }
  style.first.mask = masks.front();
  style.last.mask = masks.back();
  for (size_t i = 0; i < onsets.size(); ++i) {
    style.matrices.ctf[onsets[i].slot][static_cast<int>(onsets[i].cat)] += 1;
    if (i + 1 < onsets.size()) {
      style.matrices.ctt[onsets[i].slot][static_cast<int>(onsets[i].cat)]
                        [static_cast<int>(onsets[i + 1].cat)] += 1;
    }
  }
  return style;
}

// Global fallback style for sections with no reference: the most frequent
// pattern and pooled matrices of the whole seed song.
inline BassStyle pooled_bass_style(const StatTables& seed) {
  BassStyle style;
  double best = 0;
  for (const auto& [mask, count] : seed.bass_patterns) {
    if (count > best && mask.size() == kSlotsPerBar) {
      best = count;
      style.most_frequent.mask = mask;
    }
  }
  if (best <= 0) {
    style.most_frequent = BassPattern::from_mask("0_______________");
  }
  style.first = style.most_frequent;
  style.last = style.most_frequent;
  style.matrices.ctf = seed.bass_ctf;
  style.matrices.ctt = seed.bass_ctt;
  return style;
}

// Maximum-likelihood category sequence for the given onset positions
// (absolute frames within the section), per
//   argmax_p  prod_i P(p_i) P(p_i | p_{i-1}).
// Ties resolve to the lexicographically smallest sequence under the order
// root < third < fifth < other. Scores accumulate as
//   s = log e_0; s += log t_i; s += log e_i
// so an enumeration oracle using the same order reproduces them exactly.
inline std::vector<BassCat> viterbi_bass(const std::vector<int>& onsets,
                                         const ChordToneMatrices& matrices) {
  if (onsets.empty()) throw InvariantError("viterbi_bass: no onsets");
  const size_t k = onsets.size();
  struct Cell {
    double score;
    std::vector<uint8_t> path;
  };
  std::array<Cell, kNumBassCats> cur;
  {
    const auto em = matrices.emission(onsets[0] % kSlotsPerBar);
    for (int c = 0; c < kNumBassCats; ++c) {
      cur[c] = {std::log(em[c]), {static_cast<uint8_t>(c)}};
    }
  }
  for (size_t i = 1; i < k; ++i) {
    const int prev_slot = onsets[i - 1] % kSlotsPerBar;
    const auto em = matrices.emission(onsets[i] % kSlotsPerBar);
    std::array<Cell, kNumBassCats> next;
    std::array<Row<kNumBassCats>, kNumBassCats> trans;
    for (int p = 0; p < kNumBassCats; ++p) {
      trans[p] = matrices.transition(prev_slot, p);
    }
    for (int c = 0; c < kNumBassCats; ++c) {
      int best_p = 0;
      double best_score = -HUGE_VAL;
      for (int p = 0; p < kNumBassCats; ++p) {
        const double s = cur[p].score + std::log(trans[p][c]);
        if (s > best_score ||
            (s == best_score && cur[p].path < cur[best_p].path)) {
          best_score = s;
          best_p = p;
        }
      }
      next[c].score = best_score + std::log(em[c]);
      next[c].path = cur[best_p].path;
      next[c].path.push_back(static_cast<uint8_t>(c));
    }
    cur = std::move(next);
  }
  int best = 0;
  for (int c = 1; c < kNumBassCats; ++c) {
    if (cur[c].score > cur[best].score ||
        (cur[c].score == cur[best].score && cur[c].path < cur[best].path)) {
      best = c;
    }
  }
  std::vector<BassCat> out;
  for (uint8_t v : cur[best].path) out.push_back(static_cast<BassCat>(v));
  return out;
}

namespace bass_detail {

// Concrete degree for a category over the current chord; "other" takes the
// diatonic step toward the next chord's root, or the second above the root
// when no passing motion exists.
inline int realize_category(BassCat cat, Chord chord,
                            std::optional<Chord> next_chord) {
  const int r = chord_root(chord);
  switch (cat) {
    case BassCat::kRoot:
      return r;
    case BassCat::kThird:
      return r + 2;
    case BassCat::kFifth:
      return r + 4;
    case BassCat::kOther: {
      if (next_chord) {
        const int r2 = chord_root(*next_chord);
        if (std::abs(r2 - r) >= 2) return r + (r2 > r ? 1 : -1);
      }
      return r + 1;
    }
  }
  return r;
}

}  // namespace bass_detail

// Generates one section of bass. Bar 1 copies the seed section's first-bar
// rhythm, the final bar its last-bar rhythm, interior bars the most frequent
// pattern; a 1-bar section uses the first-bar pattern.
inline std::vector<Note> generate_bass(std::span<const Chord> section_chords,
                                       const BassStyle& style) {
  const int bars = static_cast<int>(section_chords.size());
  if (bars < 1) throw InvariantError("generate_bass: empty section");

  std::vector<int> onsets;  // absolute frames
  for (int b = 0; b < bars; ++b) {
    const BassPattern& pat = b == 0 ? style.first
                             : b == bars - 1 ? style.last
                                             : style.most_frequent;
    for (int slot : pat.onsets()) onsets.push_back(b * kSlotsPerBar + slot);
  }

  std::vector<BassCat> cats;
  if (!onsets.empty()) cats = viterbi_bass(onsets, style.matrices);

  TrackBuilder tb;
  for (size_t i = 0; i < onsets.size(); ++i) {
    if (tb.position() < onsets[i]) {
      // Rest gaps, split at barlines.
      while (tb.position() < onsets[i]) {
        const int gap = std::min(onsets[i] - tb.position(),
                                 kSlotsPerBar - tb.position() % kSlotsPerBar);
        tb.rest(gap);
      }
    }
    const int bar = onsets[i] / kSlotsPerBar;
    const int bar_end = (bar + 1) * kSlotsPerBar;
    const int next = i + 1 < onsets.size()
                         ? std::min<int>(onsets[i + 1], bar_end)
                         : bar_end;
    std::optional<Chord> next_chord;
    if (i + 1 < onsets.size()) {
      next_chord = section_chords[static_cast<size_t>(onsets[i + 1]) /
                                  kSlotsPerBar];
    }
    const int degree = bass_detail::realize_category(
        cats[i], section_chords[static_cast<size_t>(bar)], next_chord);
    tb.note(degree, next - onsets[i]);
  }
  while (tb.position() < bars * kSlotsPerBar) {
    const int gap = std::min(bars * kSlotsPerBar - tb.position(),
                             kSlotsPerBar - tb.position() % kSlotsPerBar);
    tb.rest(gap);
  }
  return tb.take();
}

}  // namespace seedsong

#endif  // SEEDSONG_BASS_HPP
