// Core domain types for the seedsong library: scale-degree pitches on a
// 16th-note grid, the seven diatonic triads, section structure, and the
// Song container with its validity rules.
#ifndef SEEDSONG_CORE_HPP
#define SEEDSONG_CORE_HPP

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace seedsong {

// Grid constants: 4/4 only, sixteenth-note resolution.
inline constexpr int kSlotsPerBar = 16;
inline constexpr int kMinDegree = 1;
inline constexpr int kMaxDegree = 15;  // two diatonic octaves starting on C
inline constexpr int kMaxDuration = 16;

struct ParseError : std::runtime_error {
  ParseError(const std::string& msg, int line_no = 0, int column_no = 0)
      : std::runtime_error(line_no > 0
                               ? "line " + std::to_string(line_no) + ", col " +
                                     std::to_string(column_no) + ": " + msg
                               : msg),
        line(line_no),
        column(column_no) {}
  int line;
  int column;
};

struct InvariantError : std::runtime_error {
  explicit InvariantError(const std::string& msg) : std::runtime_error(msg) {}
};

// A pitch is either a diatonic scale degree in [1..15] or a rest.
class Pitch {
 public:
  constexpr Pitch() : value_(0) {}

  static constexpr Pitch rest() { return Pitch(); }

  static Pitch of(int degree) {
    if (degree < kMinDegree || degree > kMaxDegree) {
      throw InvariantError("pitch degree out of range [1..15]: " +
                           std::to_string(degree));
    }
    Pitch p;
    p.value_ = static_cast<int8_t>(degree);
    return p;
  }

  constexpr bool is_rest() const { return value_ == 0; }
  constexpr int degree() const { return value_; }  // 0 means rest

  friend constexpr bool operator==(Pitch a, Pitch b) {
    return a.value_ == b.value_;
  }
  friend constexpr bool operator!=(Pitch a, Pitch b) {
    return a.value_ != b.value_;
  }

 private:
  int8_t value_;
};

// A note (or rest) on the grid. `duration` counts sixteenths, `onset` is the
// slot within the bar where the note starts. Pitched notes may cross at most
// one barline; rests always stay within their bar.
struct Note {
  Pitch pitch;
  int duration = 1;  // [1..16]
  int onset = 0;     // [0..15]

  Note() = default;
  Note(Pitch p, int dur, int on = 0) : pitch(p), duration(dur), onset(on) {}

  friend bool operator==(const Note& a, const Note& b) {
    return a.pitch == b.pitch && a.duration == b.duration && a.onset == b.onset;
  }
};

// The seven diatonic triads of C major / A minor, one per bar.
enum class Chord : uint8_t { I = 0, ii, iii, IV, V, vi, viio };

inline constexpr int kNumChords = 7;

inline constexpr const char* chord_name(Chord c) {
  constexpr const char* names[] = {"I", "ii", "iii", "IV", "V", "vi", "viio"};
  return names[static_cast<int>(c)];
}

inline std::optional<Chord> chord_from_name(const std::string& s) {
  for (int i = 0; i < kNumChords; ++i) {
    if (s == chord_name(static_cast<Chord>(i))) return static_cast<Chord>(i);
  }
  return std::nullopt;
}

// Root scale degree of a chord, 1-based in [1..7].
inline constexpr int chord_root(Chord c) { return static_cast<int>(c) + 1; }

// Degree class in [0..6] of a degree in [1..15].
inline constexpr int degree_class(int degree) { return (degree - 1) % 7; }

// True if the degree's pitch class is the root, third or fifth of the chord.
inline constexpr bool is_chord_tone(int degree, Chord c) {
  const int pc = degree_class(degree);
  const int r = static_cast<int>(c);  // root class, 0-based
  return pc == r || pc == (r + 2) % 7 || pc == (r + 4) % 7;
}

// One structural section: a name shared by repeats, a bar count, and whether
// this occurrence varies the first section of the same name.
struct SectionSpec {
  std::string name;
  int length = 0;  // bars
  bool is_variation = false;

  friend bool operator==(const SectionSpec& a, const SectionSpec& b) {
    return a.name == b.name && a.length == b.length &&
           a.is_variation == b.is_variation;
  }
};

enum class Mode : uint8_t { kMajor, kMinor };

inline const char* mode_name(Mode m) {
  return m == Mode::kMajor ? "major" : "minor";
}

// A complete song: structure, one chord per bar, and melody/bass tracks that
// tile every bar of the grid exactly. Everything is in C major / A minor.
struct Song {
  std::vector<SectionSpec> sections;
  std::vector<Note> melody;
  std::vector<Chord> chords;  // one per bar
  std::vector<Note> bass;
  int tempo = 120;  // BPM
  Mode mode = Mode::kMajor;
  int bass_octave = -2;  // octave offset applied to bass on MIDI export

  int total_bars() const {
    int n = 0;
    for (const auto& s : sections) n += s.length;
    return n;
  }

  int section_start_bar(size_t index) const {
    int bar = 0;
    for (size_t i = 0; i < index; ++i) bar += sections[i].length;
    return bar;
  }

  // Section index owning a bar, or -1.
  int section_of_bar(int bar) const {
    int start = 0;
    for (size_t i = 0; i < sections.size(); ++i) {
      if (bar < start + sections[i].length) return static_cast<int>(i);
      start += sections[i].length;
    }
    return -1;
  }

  void validate() const;
};

namespace detail {

inline void validate_track(const std::vector<Note>& track, int total_frames,
                           const std::vector<int>& section_ends,
                           const char* label, bool allow_span) {
  int pos = 0;
  size_t next_end = 0;
  for (size_t i = 0; i < track.size(); ++i) {
    const Note& n = track[i];
    if (n.duration < 1 || n.duration > kMaxDuration) {
      throw InvariantError(std::string(label) + ": note " + std::to_string(i) +
                           " duration out of range [1..16]");
    }
    if (!n.pitch.is_rest() &&
        (n.pitch.degree() < kMinDegree || n.pitch.degree() > kMaxDegree)) {
      throw InvariantError(std::string(label) + ": pitch out of range");
    }
    if (n.onset != pos % kSlotsPerBar) {
      throw InvariantError(std::string(label) + ": note " + std::to_string(i) +
                           " onset " + std::to_string(n.onset) +
                           " inconsistent with position " + std::to_string(pos));
    }
    if (n.pitch.is_rest() && n.onset + n.duration > kSlotsPerBar) {
      throw InvariantError(std::string(label) + ": rest crosses a barline");
    }
    while (next_end < section_ends.size() &&
           pos >= section_ends[next_end] * kSlotsPerBar) {
      ++next_end;
    }
    if (next_end < section_ends.size()) {
      const int end_frame = section_ends[next_end] * kSlotsPerBar;
      if (pos < end_frame && pos + n.duration > end_frame) {
        throw InvariantError(std::string(label) +
                             ": note crosses a section boundary");
      }
    }
    if (!allow_span && n.onset + n.duration > kSlotsPerBar &&
        !n.pitch.is_rest()) {
      // Spanning notes are legal per se; callers enforce style rules.
    }
    pos += n.duration;
  }
  if (pos != total_frames) {
    throw InvariantError(std::string(label) + ": track covers " +
                         std::to_string(pos) + " sixteenths, expected " +
                         std::to_string(total_frames));
  }
}

}  // namespace detail

inline void Song::validate() const {
  if (tempo <= 0) throw InvariantError("tempo must be positive");
  for (size_t i = 0; i < sections.size(); ++i) {
    const auto& s = sections[i];
    if (s.length < 1) throw InvariantError("section length must be >= 1");
    if (s.name.empty()) throw InvariantError("section name empty");
    if (s.is_variation) {
      bool found = false;
      for (size_t j = 0; j < i; ++j) {
        if (sections[j].name == s.name) found = true;
      }
      if (!found) {
        throw InvariantError("variation section '" + s.name +
                             "' has no earlier section of that name");
      }
    }
  }
  const int bars = total_bars();
  if (static_cast<int>(chords.size()) != bars) {
    throw InvariantError("chord count " + std::to_string(chords.size()) +
                         " != bar count " + std::to_string(bars));
  }
  std::vector<int> section_ends;
  int acc = 0;
  for (const auto& s : sections) {
    acc += s.length;
    section_ends.push_back(acc);
  }
  detail::validate_track(melody, bars * kSlotsPerBar, section_ends, "melody",
                         true);
  detail::validate_track(bass, bars * kSlotsPerBar, section_ends, "bass", true);
}

// Appends (pitch, duration) pairs to a track, computing onsets.
class TrackBuilder {
 public:
  TrackBuilder& add(Pitch p, int duration) {
    notes_.emplace_back(p, duration, pos_ % kSlotsPerBar);
    pos_ += duration;
    return *this;
  }
  TrackBuilder& note(int degree, int duration) {
    return add(Pitch::of(degree), duration);
  }
  TrackBuilder& rest(int duration) { return add(Pitch::rest(), duration); }

  int position() const { return pos_; }
  std::vector<Note> take() { return std::move(notes_); }

 private:
  std::vector<Note> notes_;
  int pos_ = 0;
};

}  // namespace seedsong

#endif  // SEEDSONG_CORE_HPP
