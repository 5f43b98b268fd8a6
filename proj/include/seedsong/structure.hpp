// Section structure: the three generation modes (copy the seed, expand a
// letter specification, pick a typical pattern at random) and nearest-
// neighbor alignment of new sections to seed sections.
#ifndef SEEDSONG_STRUCTURE_HPP
#define SEEDSONG_STRUCTURE_HPP

#include <cmath>
#include <string>
#include <vector>

#include "seedsong/core.hpp"
#include "seedsong/rng.hpp"

namespace seedsong {

// Feature weights of the section distance. As published: they sum to 1.1.
inline constexpr double kWeightLength = 0.7;
inline constexpr double kWeightPosition = 0.15;
inline constexpr double kWeightVariation = 0.15;
inline constexpr double kWeightNameCount = 0.1;

inline constexpr double kDefaultMaxSectionDistance = 0.35;
inline constexpr int kSpecSectionBars = 8;

struct SectionFeatures {
  int length = 0;      // L: bars
  int position = 0;    // P: sections before this one
  int variation = 0;   // M: 0/1
  int name_count = 0;  // F: sections sharing this name
};

struct StructureContext {
  int total_bars = 0;
  int section_count = 0;
};

inline SectionFeatures section_features(
    const std::vector<SectionSpec>& sections, size_t index) {
  SectionFeatures f;
  f.length = sections[index].length;
  f.position = static_cast<int>(index);
  f.variation = sections[index].is_variation ? 1 : 0;
  for (const auto& s : sections) {
    if (s.name == sections[index].name) ++f.name_count;
  }
  return f;
}

inline StructureContext structure_context(
    const std::vector<SectionSpec>& sections) {
  StructureContext ctx;
  ctx.section_count = static_cast<int>(sections.size());
  for (const auto& s : sections) ctx.total_bars += s.length;
  return ctx;
}

// Weighted feature distance between two sections in their respective songs.
inline double section_distance(const SectionFeatures& a,
                               const StructureContext& ctx_a,
                               const SectionFeatures& b,
                               const StructureContext& ctx_b) {
  const double la = static_cast<double>(a.length) / ctx_a.total_bars;
  const double lb = static_cast<double>(b.length) / ctx_b.total_bars;
  const double pa = static_cast<double>(a.position + 1) / ctx_a.section_count;
  const double pb = static_cast<double>(b.position + 1) / ctx_b.section_count;
  const double fa = static_cast<double>(a.name_count) / ctx_a.section_count;
  const double fb = static_cast<double>(b.name_count) / ctx_b.section_count;
  return kWeightLength * std::abs(la - lb) +
         kWeightPosition * std::abs(pa - pb) +
         kWeightVariation * std::abs(a.variation - b.variation) +
         kWeightNameCount * std::abs(fa - fb);
}

// --- generation -----------------------------------------------------------------

enum class StructureModeKind { kCopy, kRandom, kSpec };

struct StructureMode {
  StructureModeKind kind = StructureModeKind::kCopy;
  std::string spec;  // for kSpec

  static StructureMode copy() { return {StructureModeKind::kCopy, ""}; }
  static StructureMode random() { return {StructureModeKind::kRandom, ""}; }
  static StructureMode from_string(const std::string& s) {
    if (s == "copy") return copy();
    if (s == "random") return random();
    return {StructureModeKind::kSpec, s};
  }
};

inline const std::vector<std::string>& typical_structures() {
  static const std::vector<std::string> kTypical = {"ABAB", "ABABB", "AABABC",
                                                    "ABABCB", "AABB"};
  return kTypical;
}

// Expands a letter string into 8-bar sections. Later occurrences of a letter
// are exact repeats (var=no); a final letter that immediately repeats the one
// before it becomes a variation (the ABABB reading).
inline std::vector<SectionSpec> sections_from_spec(const std::string& spec) {
  if (spec.empty()) throw ParseError("empty structure specification");
  std::vector<SectionSpec> out;
  for (char c : spec) {
    if (!std::isalpha(static_cast<unsigned char>(c))) {
      throw ParseError("structure specification must contain only letters");
    }
    out.push_back({std::string(1, std::toupper(static_cast<unsigned char>(c))),
                   kSpecSectionBars, false});
  }
  const size_t n = out.size();
  if (n >= 2 && out[n - 1].name == out[n - 2].name) {
    out[n - 1].is_variation = true;
  }
  return out;
}

inline std::vector<SectionSpec> generate_structure(const StructureMode& mode,
                                                   const Song& seed, Rng& rng) {
  switch (mode.kind) {
    case StructureModeKind::kCopy:
      return seed.sections;
    case StructureModeKind::kSpec:
      return sections_from_spec(mode.spec);
    case StructureModeKind::kRandom: {
      const auto& pool = typical_structures();
      return sections_from_spec(pool[rng.next_below(pool.size())]);
    }
  }
  throw InvariantError("unreachable structure mode");
}

// --- alignment ------------------------------------------------------------------

// Where a new section takes its material from: a seed section, an earlier
// new section, or nothing.
struct AlignmentRef {
  enum Kind { kSeed, kPrior, kFresh } kind = kFresh;
  int index = -1;
  double distance = 0.0;

  bool is_seed() const { return kind == kSeed; }
  bool is_prior() const { return kind == kPrior; }
  bool is_fresh() const { return kind == kFresh; }
};

using AlignmentPlan = std::vector<AlignmentRef>;

// Nearest neighbor over seed sections, then over earlier new sections, then
// fresh. Ties pick the earliest candidate.
inline AlignmentPlan align(const std::vector<SectionSpec>& new_sections,
                           const std::vector<SectionSpec>& seed_sections,
                           double max_dist = kDefaultMaxSectionDistance) {
  if (new_sections.empty() || seed_sections.empty()) {
    throw InvariantError("align requires nonempty section lists");
  }
  const StructureContext new_ctx = structure_context(new_sections);
  const StructureContext seed_ctx = structure_context(seed_sections);
  AlignmentPlan plan;
  for (size_t i = 0; i < new_sections.size(); ++i) {
    const SectionFeatures fi = section_features(new_sections, i);
    AlignmentRef ref;
    double best = -1;
    for (size_t j = 0; j < seed_sections.size(); ++j) {
      const double d = section_distance(section_features(seed_sections, j),
                                        seed_ctx, fi, new_ctx);
      if (best < 0 || d < best) {
        best = d;
        ref = {AlignmentRef::kSeed, static_cast<int>(j), d};
      }
    }
    if (best >= 0 && best <= max_dist) {
      plan.push_back(ref);
      continue;
    }
    best = -1;
    for (size_t j = 0; j < i; ++j) {
      const double d = section_distance(section_features(new_sections, j),
                                        new_ctx, fi, new_ctx);
      if (best < 0 || d < best) {
        best = d;
        ref = {AlignmentRef::kPrior, static_cast<int>(j), d};
      }
    }
    if (best >= 0 && best <= max_dist) {
      plan.push_back(ref);
    } else {
      plan.push_back({AlignmentRef::kFresh, -1, 0.0});
    }
  }
  return plan;
}

}  // namespace seedsong

#endif  // SEEDSONG_STRUCTURE_HPP
