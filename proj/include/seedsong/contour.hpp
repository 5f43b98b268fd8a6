// Melody contour similarity via dynamic time warping over per-16th pitch
// frames, and onset-accuracy rhythm similarity. The DTW runs on exact
// integer-scaled costs (pitch distances are integers, insertion costs are
// rationals over the mean pitch) so results are reproducible and directly
// comparable against an exhaustive alignment enumeration.
#ifndef SEEDSONG_CONTOUR_HPP
#define SEEDSONG_CONTOUR_HPP

#include <algorithm>
#include <cstdint>
#include <span>
#include <vector>

#include "seedsong/core.hpp"

namespace seedsong {

inline constexpr int kRestFrame = -1;

inline constexpr int kRestPitchCost = 12;   // substitution against a rest
inline constexpr int kRestInsertCost = 10;  // inserting a rest frame
inline constexpr int kPitchWeight = 1;      // w1
inline constexpr int kDirectionWeight = 2;  // w2

// Expand notes into one value per 16th: the sounding degree or kRestFrame.
inline std::vector<int> track_frames(std::span<const Note> notes) {
  std::vector<int> frames;
  for (const Note& n : notes) {
    const int v = n.pitch.is_rest() ? kRestFrame : n.pitch.degree();
    frames.insert(frames.end(), static_cast<size_t>(n.duration), v);
  }
  return frames;
}

inline std::vector<int> frame_onsets(std::span<const Note> notes) {
  std::vector<int> onsets;
  int pos = 0;
  for (const Note& n : notes) {
    if (!n.pitch.is_rest()) onsets.push_back(pos);
    pos += n.duration;
  }
  return onsets;
}

namespace contour_detail {

// One side of the DTW: frame values as rationals num[i]/den, with the frame
// before the first treated as equal to it (delta 0 at frame 0) and deltas
// undefined next to rests.
struct Side {
  std::vector<int64_t> num;
  std::vector<uint8_t> rest;
  std::vector<int64_t> delta_num;   // prev - cur
  std::vector<uint8_t> delta_rest;  // delta undefined
  int64_t den = 1;
  int64_t mean_num = 0;  // mean of pitched frames
  int64_t mean_den = 1;

  size_t size() const { return num.size(); }
};

inline Side make_side(std::span<const int> frames) {
  Side s;
  s.den = 1;
  int64_t sum = 0, count = 0;
  for (size_t i = 0; i < frames.size(); ++i) {
    const bool rest = frames[i] == kRestFrame;
    s.num.push_back(rest ? 0 : frames[i]);
    s.rest.push_back(rest);
    if (!rest) {
      sum += frames[i];
      ++count;
    }
    if (i == 0) {
      s.delta_num.push_back(0);
      s.delta_rest.push_back(rest);
    } else {
      const bool undef = rest || s.rest[i - 1];
      s.delta_num.push_back(undef ? 0 : s.num[i - 1] - s.num[i]);
      s.delta_rest.push_back(undef);
    }
  }
  if (count > 0) {
    s.mean_num = sum;
    s.mean_den = count;
  }
  return s;
}

// Constant sequence holding the other side's mean pitch.
inline Side make_flat_side(size_t length, int64_t mean_num, int64_t mean_den) {
  Side s;
  s.den = mean_den;
  s.num.assign(length, mean_num);
  s.rest.assign(length, 0);
  s.delta_num.assign(length, 0);
  s.delta_rest.assign(length, 0);
  s.mean_num = mean_num;
  s.mean_den = mean_den;
  return s;
}

inline int direction_cost(int64_t d1, bool r1, int64_t d2, bool r2) {
  if (r1 || r2) return 2;
  if (d1 == 0 && d2 == 0) return 0;
  if ((d1 > 0 && d2 > 0) || (d1 < 0 && d2 < 0)) return 0;
  if ((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) return 2;
  return 1;  // exactly one is zero
}

// Exact costs scaled by x.den * y.den * x.mean_den * y.mean_den.
struct Costs {
  const Side& x;
  const Side& y;
  int64_t scale;

  Costs(const Side& xs, const Side& ys)
      : x(xs), y(ys), scale(xs.den * ys.den * xs.mean_den * ys.mean_den) {}

  int64_t sub(size_t i, size_t j) const {
    int64_t pit;
    if (x.rest[i] || y.rest[j]) {
      pit = kRestPitchCost * scale;
    } else {
      pit = std::abs(x.num[i] * y.den - y.num[j] * x.den) * x.mean_den *
            y.mean_den;
    }
    // Deltas share each side's frame denominator; compare as cross products.
    const int64_t d1 = x.delta_num[i] * y.den;
    const int64_t d2 = y.delta_num[j] * x.den;
    const int dir = direction_cost(d1, x.delta_rest[i], d2, y.delta_rest[j]);
    return kPitchWeight * pit + kDirectionWeight * dir * scale;
  }
  int64_t ins_x(size_t i) const {  // consume X_i against mean(Y)
    if (x.rest[i]) return kRestInsertCost * scale;
    return std::abs(x.num[i] * y.mean_den - y.mean_num * x.den) * y.den *
           x.mean_den;
  }
  int64_t ins_y(size_t j) const {  // consume Y_j against mean(X)
    if (y.rest[j]) return kRestInsertCost * scale;
    return std::abs(y.num[j] * x.mean_den - x.mean_num * y.den) * x.den *
           y.mean_den;
  }
};

struct DtwTable {
  // Row-major (|X|+1) x (|Y|+1) of exact scaled costs.
  std::vector<int64_t> cells;
  size_t cols = 0;
  int64_t scale = 1;

  int64_t at(size_t i, size_t j) const { return cells[i * cols + j]; }
};

inline DtwTable dtw_table(const Side& x, const Side& y) {
  const Costs costs(x, y);
  DtwTable t;
  t.cols = y.size() + 1;
  t.scale = costs.scale;
  t.cells.assign((x.size() + 1) * t.cols, 0);
  auto cell = [&](size_t i, size_t j) -> int64_t& {
    return t.cells[i * t.cols + j];
  };
  for (size_t j = 1; j <= y.size(); ++j) {
    cell(0, j) = cell(0, j - 1) + costs.ins_y(j - 1);
  }
  for (size_t i = 1; i <= x.size(); ++i) {
    cell(i, 0) = cell(i - 1, 0) + costs.ins_x(i - 1);
    for (size_t j = 1; j <= y.size(); ++j) {
      const int64_t diag = cell(i - 1, j - 1) + costs.sub(i - 1, j - 1);
      const int64_t up = cell(i - 1, j) + costs.ins_x(i - 1);
      const int64_t left = cell(i, j - 1) + costs.ins_y(j - 1);
      cell(i, j) = std::min({diag, up, left});
    }
  }
  return t;
}

inline int64_t best_prefix_cost(const DtwTable& t, size_t xn, size_t yn) {
  int64_t best = t.at(xn, 1);
  for (size_t j = 2; j <= yn; ++j) best = std::min(best, t.at(xn, j));
  return best;
}

}  // namespace contour_detail

// Exact DTW distance between two frame sequences as a rational cost.
// With best_prefix, the generated side X is matched against the seed prefix
// giving the lowest distance.
struct DtwDistance {
  int64_t num = 0;
  int64_t den = 1;
  double value() const { return static_cast<double>(num) / den; }
};

inline DtwDistance contour_dtw_distance(std::span<const int> x_frames,
                                        std::span<const int> y_frames,
                                        bool best_prefix = false) {
  using namespace contour_detail;
  if (y_frames.empty()) throw InvariantError("empty reference contour");
  const Side x = make_side(x_frames);
  const Side y = make_side(y_frames);
  const DtwTable t = dtw_table(x, y);
  const int64_t cost = best_prefix && !x_frames.empty()
                           ? best_prefix_cost(t, x.size(), y.size())
                           : t.at(x.size(), y.size());
  return {cost, t.scale};
}

// Similarity in [0, 1]: one minus the ratio of the best-prefix DTW distance
// to the distance of a flat melody (the seed's average pitch) of equal
// length, clamped at zero.
inline double contour_similarity(std::span<const int> generated,
                                 std::span<const int> seed) {
  using namespace contour_detail;
  if (seed.empty()) throw InvariantError("empty seed melody");
  if (generated.empty()) return 1.0;
  const Side x = make_side(generated);
  const Side y = make_side(seed);
  const DtwTable ta = dtw_table(x, y);
  const int64_t a_num = best_prefix_cost(ta, x.size(), y.size());

  const Side flat = make_flat_side(generated.size(), y.mean_num, y.mean_den);
  const DtwTable tb = dtw_table(flat, y);
  const int64_t b_num = best_prefix_cost(tb, flat.size(), y.size());

  const double a = static_cast<double>(a_num) / static_cast<double>(ta.scale);
  const double b = static_cast<double>(b_num) / static_cast<double>(tb.scale);
  if (b <= 0.0) return a <= 0.0 ? 1.0 : 0.0;
  return std::max(1.0 - a / b, 0.0);
}

// Share of grid positions where both or neither sequence has an onset.
inline double rhythm_similarity(const std::vector<int>& a_onsets,
                                const std::vector<int>& b_onsets, int length) {
  if (length <= 0) throw InvariantError("rhythm_similarity needs length > 0");
  std::vector<uint8_t> a(length, 0), b(length, 0);
  for (int o : a_onsets) {
    if (o < 0 || o >= length) throw InvariantError("onset out of range");
    a[o] = 1;
  }
  for (int o : b_onsets) {
    if (o < 0 || o >= length) throw InvariantError("onset out of range");
    b[o] = 1;
  }
  int agree = 0;
  for (int i = 0; i < length; ++i) agree += a[i] == b[i];
  return static_cast<double>(agree) / length;
}

// --- incremental helpers for the sampler -----------------------------------------

// Tracks the DTW similarity of a growing melody prefix against a fixed
// reference contour. Candidate notes extend the prefix by up to 16 equal
// frames and share the committed-prefix DP row. The prefix mean is frozen
// while one step's candidates are scored; a pitched commit invalidates the
// row, a rest commit extends it in place.
class ContourTracker {
 public:
  explicit ContourTracker(std::span<const int> ref_frames)
      : ref_(contour_detail::make_side(ref_frames)) {
    const size_t m = ref_.size();
    active_ = m > 0 && ref_.mean_den > 0;
    if (!active_) return;
    flat_scale_ = ref_.mean_den * ref_.mean_den;
    flat_row_.assign(m + 1, 0);
    for (size_t j = 1; j <= m; ++j) {
      flat_row_[j] = flat_row_[j - 1] + flat_ins_y(j - 1);
    }
    flat_best_.push_back(0);  // length 0, unused
    flat_len_ = 0;
  }

  bool active() const { return active_; }

  void begin_step() {
    if (!active_ || rows_valid_) return;
    rebuild_rows();
  }

  // Similarity after extending the prefix by k = 1..max_ext frames of
  // `frame`; out[k-1] holds the value.
  void extension_sims(int frame, int max_ext, std::vector<double>& out) {
    out.assign(static_cast<size_t>(max_ext), 1.0);
    if (!active_) return;
    extend_flat(prefix_len_ + static_cast<size_t>(max_ext));
    const size_t m = ref_.size();
    scratch_ = row_;
    bool first = true;
    for (int k = 1; k <= max_ext; ++k) {
      advance_row(scratch_, frame, first);
      first = false;
      int64_t best = scratch_[1];
      for (size_t j = 2; j <= m; ++j) best = std::min(best, scratch_[j]);
      const size_t len = prefix_len_ + static_cast<size_t>(k);
      const double a = static_cast<double>(best) / static_cast<double>(scale_);
      const double b = static_cast<double>(flat_best_[len]) /
                       static_cast<double>(flat_scale_);
      double sim;
      if (b <= 0.0) {
        sim = a <= 0.0 ? 1.0 : 0.0;
      } else {
        sim = std::max(1.0 - a / b, 0.0);
      }
      out[static_cast<size_t>(k - 1)] = sim;
    }
  }

  void append(int frame, int count) {
    if (!active_) {
      return;
    }
    if (frame != kRestFrame) {
      sum_x_ += int64_t{frame} * count;
      count_x_ += count;
      // The prefix mean moved; rows must be rebuilt before the next step.
      rows_valid_ = false;
    } else if (rows_valid_) {
      bool first = true;
      for (int k = 0; k < count; ++k) {
        advance_row(row_, kRestFrame, first);
        first = false;
        last_rest_ = true;
      }
    }
    if (frame != kRestFrame) {
      last_value_ = frame;
      last_rest_ = false;
    } else {
      last_rest_ = true;
    }
    prefix_len_ += static_cast<size_t>(count);
    frames_.insert(frames_.end(), static_cast<size_t>(count), frame);
  }

 private:
  int64_t flat_ins_y(size_t j) const {
    // Inserting ref frame j against the flat melody's mean (the ref mean).
    if (ref_.rest[j]) return kRestInsertCost * flat_scale_;
    return std::abs(ref_.num[j] * ref_.mean_den - ref_.mean_num) *
           ref_.mean_den;
  }

  void extend_flat(size_t upto) {
    const size_t m = ref_.size();
    while (flat_len_ < upto) {
      ++flat_len_;
      // Advance the flat DP by one constant frame (delta 0, never a rest).
      std::vector<int64_t>& r = flat_row_;
      int64_t diag_prev = r[0];  // value of previous row at j-1
      r[0] = r[0] + 0;           // inserting a flat frame costs |mean-mean| = 0
      for (size_t j = 1; j <= m; ++j) {
        const int64_t sub = diag_prev + flat_sub(j - 1);
        const int64_t up = r[j] + 0;
        const int64_t left = r[j - 1] + flat_ins_y(j - 1);
        diag_prev = r[j];
        r[j] = std::min({sub, up, left});
      }
      int64_t best = r[1];
      for (size_t j = 2; j <= m; ++j) best = std::min(best, r[j]);
      flat_best_.push_back(best);
    }
  }

  int64_t flat_sub(size_t j) const {
    int64_t pit;
    if (ref_.rest[j]) {
      pit = kRestPitchCost * flat_scale_;
    } else {
      pit = std::abs(ref_.mean_num - ref_.num[j] * ref_.mean_den) *
            ref_.mean_den;
    }
    // Flat delta is 0; ref delta keeps its own sign.
    const int dir = contour_detail::direction_cost(
        0, false, ref_.delta_num[j], ref_.delta_rest[j]);
    return kPitchWeight * pit + kDirectionWeight * dir * flat_scale_;
  }

  // Frozen-mean cost pieces for the generated side (integer frames).
  int64_t gen_sub(int frame, bool first_of_run, size_t j) const {
    int64_t pit;
    const bool xrest = frame == kRestFrame;
    if (xrest || ref_.rest[j]) {
      pit = kRestPitchCost * scale_;
    } else {
      pit = std::abs(int64_t{frame} - ref_.num[j]) * mean_den_ * ref_.mean_den;
    }
    bool drest;
    int64_t dx = 0;
    if (xrest) {
      drest = true;
    } else if (first_of_run) {
      if (prefix_len_ == 0 && !committed_any()) {
        drest = false;  // delta 0 at frame 0
      } else if (last_rest_) {
        drest = true;
      } else {
        drest = false;
        dx = int64_t{last_value_} - frame;
      }
    } else {
      drest = false;  // equal consecutive frames, delta 0
    }
    const int dir = contour_detail::direction_cost(dx, drest, ref_.delta_num[j],
                                                   ref_.delta_rest[j]);
    return kPitchWeight * pit + kDirectionWeight * dir * scale_;
  }

  int64_t gen_ins_x(int frame) const {
    if (frame == kRestFrame) return kRestInsertCost * scale_;
    return std::abs(int64_t{frame} * ref_.mean_den - ref_.mean_num) * mean_den_;
  }

  int64_t gen_ins_y(size_t j) const {
    if (ref_.rest[j]) return kRestInsertCost * scale_;
    return std::abs(ref_.num[j] * mean_den_ - mean_num_) * ref_.mean_den;
  }

  bool committed_any() const { return prefix_len_ > 0; }

  // One DP row advance for appending `frame`. first_of_run selects the delta
  // against the last committed frame; subsequent copies repeat the value.
  void advance_row(std::vector<int64_t>& r, int frame, bool first_of_run) const {
    const size_t m = ref_.size();
    int64_t diag_prev = r[0];
    r[0] = r[0] + gen_ins_x(frame);
    for (size_t j = 1; j <= m; ++j) {
      const int64_t sub = diag_prev + gen_sub(frame, first_of_run, j - 1);
      const int64_t up = r[j] + gen_ins_x(frame);
      const int64_t left = r[j - 1] + gen_ins_y(j - 1);
      diag_prev = r[j];
      r[j] = std::min({sub, up, left});
    }
  }

  void rebuild_rows() {
    // Freeze the prefix mean (ref mean until a pitched frame lands).
    if (count_x_ > 0) {
      mean_num_ = sum_x_;
      mean_den_ = count_x_;
    } else {
      mean_num_ = ref_.mean_num;
      mean_den_ = ref_.mean_den;
    }
    scale_ = mean_den_ * ref_.mean_den;
    const size_t m = ref_.size();
    row_.assign(m + 1, 0);
    for (size_t j = 1; j <= m; ++j) row_[j] = row_[j - 1] + gen_ins_y(j - 1);
    // Replay the committed prefix against the frozen mean. Each frame's
    // delta compares it with the frame before it, so first_of_run with
    // last_* tracking reproduces them all.
    const size_t total = prefix_len_;
    prefix_len_ = 0;
    last_rest_ = false;
    last_value_ = 0;
    for (size_t i = 0; i < total; ++i) {
      const int frame = frames_[i];
      advance_row(row_, frame, true);
      if (frame != kRestFrame) {
        last_value_ = frame;
        last_rest_ = false;
      } else {
        last_rest_ = true;
      }
      ++prefix_len_;
    }
    rows_valid_ = true;
  }

  contour_detail::Side ref_;
  bool active_ = false;

  std::vector<int> frames_;  // committed prefix
  size_t prefix_len_ = 0;
  int64_t sum_x_ = 0, count_x_ = 0;
  int last_value_ = 0;
  bool last_rest_ = false;

  std::vector<int64_t> row_;      // DP row at the committed prefix
  std::vector<int64_t> scratch_;  // extension workspace
  int64_t mean_num_ = 0, mean_den_ = 1;
  int64_t scale_ = 1;
  bool rows_valid_ = false;

  std::vector<int64_t> flat_row_;
  std::vector<int64_t> flat_best_;  // by flat length
  size_t flat_len_ = 0;
  int64_t flat_scale_ = 1;
};

// Tracks onset agreement between the growing melody and the reference,
// for the rhythm gate.
class RhythmTracker {
 public:
  RhythmTracker(std::span<const int> ref_onsets, int ref_length)
      : ref_onset_(static_cast<size_t>(std::max(ref_length, 0)), 0) {
    for (int o : ref_onsets) {
      if (o >= 0 && o < ref_length) ref_onset_[o] = 1;
    }
  }

  // Similarity over the first len_+d frames if a note (or rest) of duration d
  // starts now.
  double sim_after(bool pitched, int d) const {
    int agree = agree_;
    for (int k = 0; k < d; ++k) {
      const bool gen_onset = pitched && k == 0;
      agree += gen_onset == ref_onset_at(len_ + k);
    }
    return static_cast<double>(agree) / (len_ + d);
  }

  void append(bool pitched, int d) {
    for (int k = 0; k < d; ++k) {
      const bool gen_onset = pitched && k == 0;
      agree_ += gen_onset == ref_onset_at(len_ + k);
    }
    len_ += d;
  }

 private:
  bool ref_onset_at(int pos) const {
    return pos < static_cast<int>(ref_onset_.size()) && ref_onset_[pos] != 0;
  }

  std::vector<uint8_t> ref_onset_;
  int len_ = 0;
  int agree_ = 0;
};

}  // namespace seedsong

#endif  // SEEDSONG_CONTOUR_HPP
