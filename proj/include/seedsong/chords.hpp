// Chord progression generation: blended first-order transitions, distinctive
// seed n-gram sequences grafted in as extra states, and cadence candidates
// that close every section.
#ifndef SEEDSONG_CHORDS_HPP
#define SEEDSONG_CHORDS_HPP

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "seedsong/core.hpp"
#include "seedsong/rng.hpp"
#include "seedsong/stats.hpp"

namespace seedsong {

inline constexpr double kDefaultDistinctiveThreshold = 0.05;
inline constexpr double kDistinctiveBoost = 2.0;
// Share of probability mass diverted to section-closing cadence candidates
// inside the final-six-bars window.
inline constexpr double kCadenceMix = 0.4;
inline constexpr int kCadenceWindow = 6;

// Seed 2/3/4-grams whose relative frequency in the general corpus (per gram
// length) is below the threshold.
inline std::vector<std::vector<Chord>> detect_distinctive(
    const StatTables& seed, const StatTables& general,
    double threshold = kDefaultDistinctiveThreshold) {
  std::vector<std::vector<Chord>> out;
  for (const auto& [key, count] : seed.chord_ngrams) {
    if (count <= 0) continue;
    const auto gram = stats_detail::parse_gram_key(key);
    const int n = static_cast<int>(gram.size());
    const double total = general.ngram_totals[n - 2];
    const auto it = general.chord_ngrams.find(key);
    const double freq =
        (total > 0 && it != general.chord_ngrams.end()) ? it->second / total
                                                        : 0.0;
    if (freq < threshold) out.push_back(gram);
  }
  return out;
}

// Markov chain over the 7 triads plus sequence states. A sequence state emits
// its whole chord string and generation resumes from its final chord.
struct ChordChain {
  std::vector<std::vector<Chord>> sequences;  // distinctive states
  // Row per chord over 7 singles followed by the sequence states.
  std::array<std::vector<double>, kNumChords> trans;
  struct Cadence {
    std::vector<Chord> chords;
    double weight;  // blended corpus frequency
  };
  std::vector<Cadence> cadences;
  // Row per chord: transition weight into each cadence candidate.
  std::array<std::vector<double>, kNumChords> cadence_trans;
  std::array<double, kNumChords> initial{};  // stationary distribution

  const std::vector<double>& cadence_row(Chord c) const {
    return cadence_trans[static_cast<int>(c)];
  }
};

namespace chords_detail {

// Occurrences of chord c immediately followed by the given sequence, counted
// inside each section of the accumulated phrases. Works off the n-gram map:
// c+seq is itself a gram of length |seq|+1 when that fits in 2..4... it may
// not, so recount from transitions is not possible here; instead the caller
// passes seed phrase data. To keep the chain constructible from StatTables
// alone, the (c, seq) count is read from the (|seq|+1)-gram table when
// available and approximated by trans(c, seq[0]) * seq-gram share otherwise.
inline double follow_count(const StatTables& seed, Chord c,
                           const std::vector<Chord>& seq) {
  if (seq.size() + 1 <= 4) {
    std::vector<Chord> gram;
    gram.push_back(c);
    gram.insert(gram.end(), seq.begin(), seq.end());
    const auto it = seed.chord_ngrams.find(stats_detail::gram_key(gram));
    return it == seed.chord_ngrams.end() ? 0.0 : it->second;
  }
  // len-4 sequences: use the transition into the sequence head times the
  // sequence's own share among grams of its length.
  const double head =
      seed.chord_trans[static_cast<int>(c)][static_cast<int>(seq[0])];
  const auto it = seed.chord_ngrams.find(stats_detail::gram_key(seq));
  const double total = seed.ngram_totals[seq.size() - 2];
  if (it == seed.chord_ngrams.end() || total <= 0) return 0.0;
  return head * (it->second / total);
}

inline double out_degree(const StatTables& t, Chord c) {
  double total = 0;
  for (double v : t.chord_trans[static_cast<int>(c)]) total += v;
  return total;
}

}  // namespace chords_detail

inline ChordChain build_chain(const StatTables& seed, const StatTables& general,
                              double alpha,
                              const std::vector<std::vector<Chord>>& distinctive) {
  ChordChain chain;
  chain.sequences = distinctive;
  const StatTables blended = blend(seed, general, alpha);

  for (int c = 0; c < kNumChords; ++c) {
    std::vector<double> row(kNumChords + distinctive.size(), 0.0);
    double base_total = 0;
    for (int x = 0; x < kNumChords; ++x) {
      row[x] = blended.chord_trans[c][x];
      base_total += row[x];
    }
    if (base_total <= 0) {
      // Chord unseen everywhere: fall back to a uniform row.
      for (int x = 0; x < kNumChords; ++x) row[x] = 1.0 / kNumChords;
      base_total = 1.0;
    }
    const double outc = chords_detail::out_degree(seed, static_cast<Chord>(c));
    for (size_t s = 0; s < distinctive.size(); ++s) {
      if (outc <= 0) continue;
      const double follows = chords_detail::follow_count(
          seed, static_cast<Chord>(c), distinctive[s]);
      row[kNumChords + s] = (follows / outc) * kDistinctiveBoost;
    }
    double total = 0;
    for (double v : row) total += v;
    for (double& v : row) v /= total;
    chain.trans[c] = std::move(row);
  }

  // Cadence candidates: blended section-final runs, plus a V->I fallback so a
  // length-2 closing draw always exists.
  auto cad_freq = stats_detail::blend_map(
      seed.cadences, seed.cadence_total, general.cadences,
      general.cadence_total, alpha);
  for (const auto& [key, w] : cad_freq) {
    if (w <= 0) continue;
    chain.cadences.push_back({stats_detail::parse_gram_key(key), w});
  }
  const bool has_len2 =
      std::any_of(chain.cadences.begin(), chain.cadences.end(),
                  [](const auto& cd) { return cd.chords.size() == 2; });
  if (!has_len2) {
    chain.cadences.push_back({{Chord::V, Chord::I}, 0.0});
  }
  std::sort(chain.cadences.begin(), chain.cadences.end(),
            [](const auto& a, const auto& b) {
              if (a.chords.size() != b.chords.size())
                return a.chords.size() < b.chords.size();
              return stats_detail::gram_key(a.chords) <
                     stats_detail::gram_key(b.chords);
            });

  // Transition into a cadence: its corpus frequency scaled by how naturally
  // the current chord moves to the cadence's first chord.
  for (int c = 0; c < kNumChords; ++c) {
    std::vector<double> row(chain.cadences.size(), 0.0);
    double total = 0;
    for (size_t k = 0; k < chain.cadences.size(); ++k) {
      const Chord head = chain.cadences[k].chords.front();
      double step = blended.chord_trans[c][static_cast<int>(head)];
      double row_total = 0;
      for (double v : blended.chord_trans[c]) row_total += v;
      if (row_total <= 0) step = 1.0 / kNumChords;
      row[k] = chain.cadences[k].weight * step;
      total += row[k];
    }
    if (total > 0) {
      for (double& v : row) v /= total;
    }
    chain.cadence_trans[c] = std::move(row);
  }

  // Stationary distribution of the single-chord part, for fresh openings.
  std::array<double, kNumChords> pi;
  pi.fill(1.0 / kNumChords);
  for (int iter = 0; iter < 64; ++iter) {
    std::array<double, kNumChords> next{};
    for (int c = 0; c < kNumChords; ++c) {
      double row_total = 0;
      for (int x = 0; x < kNumChords; ++x) row_total += chain.trans[c][x];
      for (int x = 0; x < kNumChords; ++x) {
        next[x] += pi[c] * (row_total > 0 ? chain.trans[c][x] / row_total
                                          : 1.0 / kNumChords);
      }
    }
    double norm = 0;
    for (double v : next) norm += v;
    for (double& v : next) v /= norm;
    pi = next;
  }
  chain.initial = pi;
  return chain;
}

// True when the chord list ends with one of the chain's cadence candidates.
inline bool ends_with_cadence(const std::vector<Chord>& chords,
                              const ChordChain& chain) {
  for (const auto& cd : chain.cadences) {
    const size_t m = cd.chords.size();
    if (m > chords.size()) continue;
    if (std::equal(cd.chords.begin(), cd.chords.end(),
                   chords.end() - static_cast<long>(m))) {
      return true;
    }
  }
  return false;
}

// Generates exactly `section_len` chords. The section always closes with a
// complete cadence candidate; sequence states are masked when they would
// leave no room for one.
inline std::vector<Chord> generate_chords(int section_len,
                                          const ChordChain& chain,
                                          std::optional<Chord> first_chord,
                                          Rng& rng) {
  if (section_len < 2) {
    throw InvariantError("generate_chords requires section_len >= 2");
  }

  auto draw_cadence = [&](int len, std::optional<Chord> from) -> const std::vector<Chord>& {
    std::vector<double> weights(chain.cadences.size(), 0.0);
    double total = 0;
    for (size_t k = 0; k < chain.cadences.size(); ++k) {
      if (static_cast<int>(chain.cadences[k].chords.size()) != len) continue;
      const double w = from ? chain.cadence_row(*from)[k]
                            : chain.cadences[k].weight;
      weights[k] = w;
      total += w;
    }
    if (total <= 0) {  // uniform over candidates of this length
      for (size_t k = 0; k < chain.cadences.size(); ++k) {
        if (static_cast<int>(chain.cadences[k].chords.size()) == len) {
          weights[k] = 1.0;
          total += 1.0;
        }
      }
    }
    if (total <= 0) {
      throw InvariantError("no cadence candidate of length " +
                           std::to_string(len));
    }
    return chain.cadences[rng.weighted_choice(weights)].chords;
  };

  std::vector<Chord> out;
  if (section_len == 2) {
    const auto& cd = draw_cadence(2, first_chord);
    return {cd[0], cd[1]};
  }

  if (first_chord) {
    out.push_back(*first_chord);
  } else {
    out.push_back(static_cast<Chord>(rng.weighted_choice(
        std::span<const double>(chain.initial.data(), kNumChords))));
  }

  while (static_cast<int>(out.size()) < section_len) {
    const int remaining = section_len - static_cast<int>(out.size());
    const Chord cur = out.back();
    if (remaining == 2) {  // force a closing cadence
      const auto& cd = draw_cadence(2, cur);
      out.insert(out.end(), cd.begin(), cd.end());
      break;
    }
    const auto& row = chain.trans[static_cast<int>(cur)];
    // Admissible states: singles need >= 2 bars left afterwards, sequence
    // states likewise; cadences of exactly `remaining` chords may close now.
    std::vector<double> weights;
    std::vector<int> targets;  // 0..6 single, 7+s sequence, -(k+1) cadence k
    double normal_total = 0;
    for (int x = 0; x < kNumChords; ++x) {
      if (remaining - 1 >= 2) {
        weights.push_back(row[x]);
        targets.push_back(x);
        normal_total += row[x];
      }
    }
    for (size_t s = 0; s < chain.sequences.size(); ++s) {
      const int m = static_cast<int>(chain.sequences[s].size());
      if (remaining - m >= 2 && row[kNumChords + s] > 0) {
        weights.push_back(row[kNumChords + s]);
        targets.push_back(kNumChords + static_cast<int>(s));
        normal_total += row[kNumChords + s];
      }
    }
    double cadence_total = 0;
    if (remaining <= kCadenceWindow) {
      const auto& crow = chain.cadence_row(cur);
      for (size_t k = 0; k < chain.cadences.size(); ++k) {
        if (static_cast<int>(chain.cadences[k].chords.size()) != remaining)
          continue;
        if (crow[k] <= 0) continue;
        weights.push_back(crow[k]);
        targets.push_back(-static_cast<int>(k) - 1);
        cadence_total += crow[k];
      }
    }
    // Rescale so cadences take kCadenceMix of the mass when both kinds exist.
    if (normal_total > 0 && cadence_total > 0) {
      for (size_t i = 0; i < weights.size(); ++i) {
        if (targets[i] >= 0) {
          weights[i] *= (1.0 - kCadenceMix) / normal_total;
        } else {
          weights[i] *= kCadenceMix / cadence_total;
        }
      }
    }
    double total = 0;
    for (double w : weights) total += w;
    if (total <= 0) {
      // Nothing admissible carries mass; draw a single chord uniformly.
      out.push_back(static_cast<Chord>(rng.next_below(kNumChords)));
      continue;
    }
    const int pick = targets[rng.weighted_choice(weights)];
    if (pick >= 0 && pick < kNumChords) {
      out.push_back(static_cast<Chord>(pick));
    } else if (pick >= kNumChords) {
      const auto& seq = chain.sequences[pick - kNumChords];
      out.insert(out.end(), seq.begin(), seq.end());
    } else {
      const auto& cd = chain.cadences[-pick - 1].chords;
      out.insert(out.end(), cd.begin(), cd.end());
      break;
    }
  }
  return out;
}

}  // namespace seedsong

#endif  // SEEDSONG_CHORDS_HPP
