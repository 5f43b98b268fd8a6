// Plain-text score format, one line per bar:
//
//   #TEMPO 96
//   #MODE major
//   #SECTION A 2 var=no
//   1 _ _ _ 3 _ _ _ 5 _ _ _ . . . . | I | 1 _ _ _ _ _ _ _ 5 _ _ _ _ _ _ _
//   ...
//
// Each bar has 16 melody slots, a chord symbol, and 16 bass slots. A number
// starts a note, `_` sustains it (a leading `_` continues the previous bar's
// note), `.` is one sixteenth of rest. The canonical form separates slots
// with single spaces; compact strings like "1___1___1___1___" also parse,
// with two-digit degrees consumed greedily.
#ifndef SEEDSONG_TEXT_SCORE_HPP
#define SEEDSONG_TEXT_SCORE_HPP

#include <cctype>
#include <sstream>
#include <string>
#include <vector>

#include "seedsong/core.hpp"

namespace seedsong {

namespace detail {

struct SlotToken {
  enum Kind { kStart, kHold, kRest } kind;
  int degree = 0;  // for kStart
};

inline std::vector<SlotToken> tokenize_slots(const std::string& seg, int line_no,
                                             int col_base) {
  std::vector<SlotToken> out;
  const bool spaced = seg.find_first_of(" \t") != std::string::npos;
  size_t i = 0;
  auto fail = [&](const std::string& msg, size_t at) {
    throw ParseError(msg, line_no, col_base + static_cast<int>(at) + 1);
  };
  while (i < seg.size()) {
    const char c = seg[i];
    if (c == ' ' || c == '\t') {
      ++i;
      continue;
    }
    if (c == '_') {
      out.push_back({SlotToken::kHold});
      ++i;
    } else if (c == '.') {
      out.push_back({SlotToken::kRest});
      ++i;
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      size_t j = i;
      while (j < seg.size() && std::isdigit(static_cast<unsigned char>(seg[j])))
        ++j;
      std::string digits = seg.substr(i, j - i);
      if (spaced) {
        const int v = std::stoi(digits);
        if (v < kMinDegree || v > kMaxDegree) fail("degree out of range", i);
        out.push_back({SlotToken::kStart, v});
        i = j;
      } else {
        // Compact form: consume greedily, two digits when they form 10..15.
        while (i < j) {
          int v = digits[0] - '0';
          size_t used = 1;
          if (digits.size() >= 2) {
            const int two = v * 10 + (digits[1] - '0');
            if (two >= 10 && two <= kMaxDegree) {
              v = two;
              used = 2;
            }
          }
          if (v < kMinDegree || v > kMaxDegree) fail("degree out of range", i);
          out.push_back({SlotToken::kStart, v});
          digits.erase(0, used);
          i += used;
        }
      }
    } else {
      fail(std::string("unexpected character '") + c + "'", i);
    }
  }
  return out;
}

// Per-track parser state carried across bars within one section.
class TrackParser {
 public:
  explicit TrackParser(const char* label) : label_(label) {}

  void parse_bar(const std::vector<SlotToken>& slots, int line_no) {
    int slot = 0;
    for (const auto& tok : slots) {
      switch (tok.kind) {
        case SlotToken::kStart:
          close_rest(slot);
          close_note();
          notes_.emplace_back(Pitch::of(tok.degree), 1, slot);
          open_note_ = true;
          break;
        case SlotToken::kHold:
          if (!open_note_) {
            throw ParseError(std::string(label_) +
                                 ": '_' continues no open note",
                             line_no, slot + 1);
          }
          if (++notes_.back().duration > kMaxDuration) {
            throw ParseError(std::string(label_) + ": note longer than 16",
                             line_no, slot + 1);
          }
          break;
        case SlotToken::kRest:
          close_note();
          if (rest_len_ == 0) rest_onset_ = slot;
          ++rest_len_;
          break;
      }
      ++slot;
    }
    close_rest(kSlotsPerBar);
  }

  void end_section() {
    open_note_ = false;  // notes never cross section boundaries
  }

  std::vector<Note> take() { return std::move(notes_); }

 private:
  void close_note() { open_note_ = false; }
  void close_rest(int /*slot*/) {
    if (rest_len_ > 0) {
      notes_.emplace_back(Pitch::rest(), rest_len_, rest_onset_);
      rest_len_ = 0;
    }
  }

  const char* label_;
  std::vector<Note> notes_;
  bool open_note_ = false;
  int rest_len_ = 0;
  int rest_onset_ = 0;
};

inline std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace detail

inline Song parse_text_score(const std::string& text) {
  Song song;
  detail::TrackParser melody("melody");
  detail::TrackParser bass("bass");
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  int bars_expected = 0;
  int bars_seen = 0;
  bool any_section = false;

  auto check_section_complete = [&](int at_line) {
    if (any_section && bars_seen != bars_expected) {
      throw ParseError("section declares " + std::to_string(bars_expected) +
                           " bars but has " + std::to_string(bars_seen),
                       at_line, 1);
    }
  };

  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = detail::trim(raw);
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream ls(line);
      std::string tag;
      ls >> tag;
      if (tag == "#TEMPO") {
        int t = 0;
        if (!(ls >> t) || t <= 0) throw ParseError("bad tempo", line_no, 1);
        song.tempo = t;
      } else if (tag == "#MODE") {
        std::string m;
        ls >> m;
        if (m == "major") {
          song.mode = Mode::kMajor;
        } else if (m == "minor") {
          song.mode = Mode::kMinor;
        } else {
          throw ParseError("mode must be major or minor", line_no, 1);
        }
      } else if (tag == "#BASS_OCTAVE") {
        int o = 0;
        if (!(ls >> o)) throw ParseError("bad bass octave", line_no, 1);
        song.bass_octave = o;
      } else if (tag == "#SECTION") {
        check_section_complete(line_no);
        std::string name, var;
        int len = 0;
        if (!(ls >> name >> len >> var) || len < 1) {
          throw ParseError("expected '#SECTION <name> <bars> var=yes|no'",
                           line_no, 1);
        }
        bool variation;
        if (var == "var=yes") {
          variation = true;
        } else if (var == "var=no") {
          variation = false;
        } else {
          throw ParseError("expected var=yes or var=no", line_no, 1);
        }
        melody.end_section();
        bass.end_section();
        song.sections.push_back({name, len, variation});
        bars_expected = len;
        bars_seen = 0;
        any_section = true;
      } else {
        throw ParseError("unknown directive " + tag, line_no, 1);
      }
      continue;
    }

    // Bar line: melody | chord | bass.
    if (!any_section) {
      throw ParseError("bar line before any #SECTION header", line_no, 1);
    }
    if (bars_seen >= bars_expected) {
      throw ParseError("more bars than the section declares", line_no, 1);
    }
    const size_t p1 = line.find('|');
    const size_t p2 = p1 == std::string::npos ? std::string::npos
                                              : line.find('|', p1 + 1);
    if (p2 == std::string::npos) {
      throw ParseError("expected 'melody | chord | bass'", line_no, 1);
    }
    const std::string mel_seg = detail::trim(line.substr(0, p1));
    const std::string chord_seg = detail::trim(line.substr(p1 + 1, p2 - p1 - 1));
    const std::string bass_seg = detail::trim(line.substr(p2 + 1));

    auto mel_slots = detail::tokenize_slots(mel_seg, line_no, 0);
    if (mel_slots.size() != kSlotsPerBar) {
      throw ParseError("melody has " + std::to_string(mel_slots.size()) +
                           " slots, expected 16",
                       line_no, 1);
    }
    auto bass_slots =
        detail::tokenize_slots(bass_seg, line_no, static_cast<int>(p2 + 1));
    if (bass_slots.size() != kSlotsPerBar) {
      throw ParseError("bass has " + std::to_string(bass_slots.size()) +
                           " slots, expected 16",
                       line_no, static_cast<int>(p2 + 2));
    }
    auto chord = chord_from_name(chord_seg);
    if (!chord) {
      throw ParseError("unknown chord '" + chord_seg + "'", line_no,
                       static_cast<int>(p1 + 2));
    }
    melody.parse_bar(mel_slots, line_no);
    bass.parse_bar(bass_slots, line_no);
    song.chords.push_back(*chord);
    ++bars_seen;
  }
  check_section_complete(line_no);

  song.melody = melody.take();
  song.bass = bass.take();
  song.validate();
  return song;
}

namespace detail {

inline void render_track(const std::vector<Note>& track,
                         std::vector<std::string>& bars) {
  int pos = 0;
  for (const Note& n : track) {
    for (int k = 0; k < n.duration; ++k) {
      const int bar = (pos + k) / kSlotsPerBar;
      std::string& s = bars[bar];
      if (!s.empty()) s += ' ';
      if (n.pitch.is_rest()) {
        s += '.';
      } else if (k == 0) {
        s += std::to_string(n.pitch.degree());
      } else {
        s += '_';
      }
    }
    pos += n.duration;
  }
}

}  // namespace detail

inline std::string render_text_score(const Song& song) {
  song.validate();
  std::ostringstream out;
  out << "#TEMPO " << song.tempo << "\n";
  out << "#MODE " << mode_name(song.mode) << "\n";
  if (song.bass_octave != -2) out << "#BASS_OCTAVE " << song.bass_octave << "\n";

  const int bars = song.total_bars();
  std::vector<std::string> mel_bars(bars), bass_bars(bars);
  detail::render_track(song.melody, mel_bars);
  detail::render_track(song.bass, bass_bars);

  int bar = 0;
  for (const auto& sec : song.sections) {
    out << "#SECTION " << sec.name << " " << sec.length << " var="
        << (sec.is_variation ? "yes" : "no") << "\n";
    for (int b = 0; b < sec.length; ++b, ++bar) {
      out << mel_bars[bar] << " | " << chord_name(song.chords[bar]) << " | "
          << bass_bars[bar] << "\n";
    }
  }
  return out.str();
}

}  // namespace seedsong

#endif  // SEEDSONG_TEXT_SCORE_HPP
