// Standard MIDI File (format 1) reading and writing, plus the conversion
// between MIDI and the internal scale-degree representation: 16th-note
// quantization, transposition to C major / A minor, and octave folding.
#ifndef SEEDSONG_MIDI_HPP
#define SEEDSONG_MIDI_HPP

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "seedsong/core.hpp"
#include "seedsong/sidecar.hpp"

namespace seedsong {

struct MidiError : std::runtime_error {
  explicit MidiError(const std::string& msg) : std::runtime_error(msg) {}
};

inline constexpr int kTicksPerQuarter = 480;
inline constexpr int kTicksPerSlot = kTicksPerQuarter / 4;

// MIDI pitch of a scale degree at the reference register (degree 1 = C4).
inline int degree_to_midi(int degree) {
  static constexpr int offs[] = {0, 2, 4, 5, 7, 9, 11};
  return 60 + 12 * ((degree - 1) / 7) + offs[(degree - 1) % 7];
}

namespace midi_detail {

struct RawNote {
  int64_t start = 0;  // ticks
  int64_t duration = 0;
  int pitch = 0;
};

struct RawTrack {
  std::string name;
  std::vector<RawNote> notes;
};

struct RawFile {
  int division = kTicksPerQuarter;
  int tempo_us = 500000;
  bool saw_tempo = false;
  std::vector<RawTrack> tracks;
};

class Reader {
 public:
  explicit Reader(std::span<const uint8_t> data) : data_(data) {}

  RawFile read() {
    expect_chunk("MThd");
    const uint32_t hlen = read_u32();
    if (hlen < 6) throw MidiError("bad MThd length");
    const int format = read_u16();
    const int ntrks = read_u16();
    const int division = read_u16();
    skip(hlen - 6);
    if (format > 1) throw MidiError("unsupported SMF format " +
                                    std::to_string(format));
    if (division & 0x8000) throw MidiError("SMPTE division not supported");
    if (division == 0) throw MidiError("zero division");
    RawFile file;
    file.division = division;
    for (int t = 0; t < ntrks; ++t) file.tracks.push_back(read_track(file));
    return file;
  }

 private:
  RawTrack read_track(RawFile& file) {
    expect_chunk("MTrk");
    const uint32_t len = read_u32();
    const size_t end = pos_ + len;
    if (end > data_.size()) throw MidiError("truncated track");

    RawTrack track;
    // Open note-ons per (channel, pitch), FIFO.
    std::vector<std::vector<std::pair<int64_t, int>>> open(16);
    int64_t tick = 0;
    uint8_t running = 0;

    auto note_off = [&](int ch, int pitch) {
      auto& v = open[ch];
      for (size_t i = 0; i < v.size(); ++i) {
        if (v[i].second == pitch) {
          track.notes.push_back({v[i].first, tick - v[i].first, pitch});
          v.erase(v.begin() + i);
          return;
        }
      }
    };

    while (pos_ < end) {
      tick += read_varlen();
      uint8_t status = peek();
      if (status & 0x80) {
        ++pos_;
        if (status < 0xF0) running = status;
      } else {
        if (!(running & 0x80)) throw MidiError("running status without status");
        status = running;
      }
      if (status == 0xFF) {
        const uint8_t type = next();
        const uint32_t mlen = read_varlen();
        if (type == 0x51 && mlen == 3) {
          const int us = (next() << 16) | (next() << 8) | next();
          if (!file.saw_tempo) {
            file.tempo_us = us;
            file.saw_tempo = true;
          }
        } else if (type == 0x58 && mlen >= 2) {
          const int nn = next();
          const int dd = next();
          skip(mlen - 2);
          if (nn != 4 || dd != 2) {
            throw MidiError("time signature is not 4/4");
          }
        } else if (type == 0x03) {
          for (uint32_t i = 0; i < mlen; ++i)
            track.name += static_cast<char>(next());
        } else {
          skip(mlen);
        }
      } else if (status == 0xF0 || status == 0xF7) {
        skip(read_varlen());
      } else {
        const int kind = status >> 4;
        const int ch = status & 0x0F;
        const int a = next();
        if (kind == 0xC || kind == 0xD) continue;  // one data byte
        const int b = next();
        if (kind == 0x9 && b > 0) {
          open[ch].push_back({tick, a});
        } else if (kind == 0x8 || (kind == 0x9 && b == 0)) {
          note_off(ch, a);
        }
      }
    }
    // Unterminated notes end at the final tick.
    for (auto& v : open) {
      for (auto& [start, pitch] : v) {
        track.notes.push_back({start, tick - start, pitch});
      }
    }
    pos_ = end;
    return track;
  }

  uint8_t peek() {
    if (pos_ >= data_.size()) throw MidiError("unexpected end of file");
    return data_[pos_];
  }
  uint8_t next() {
    const uint8_t b = peek();
    ++pos_;
    return b;
  }
  void skip(size_t n) {
    if (pos_ + n > data_.size()) throw MidiError("unexpected end of file");
    pos_ += n;
  }
  uint16_t read_u16() { return (next() << 8) | next(); }
  uint32_t read_u32() {
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | next();
    return v;
  }
  uint32_t read_varlen() {
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      const uint8_t b = next();
      v = (v << 7) | (b & 0x7F);
      if (!(b & 0x80)) return v;
    }
    throw MidiError("bad variable-length quantity");
  }
  void expect_chunk(const char* tag) {
    for (int i = 0; i < 4; ++i) {
      if (next() != static_cast<uint8_t>(tag[i]))
        throw MidiError(std::string("expected ") + tag + " chunk");
    }
  }

  std::span<const uint8_t> data_;
  size_t pos_ = 0;
};

inline void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back((v >> 24) & 0xFF);
  out.push_back((v >> 16) & 0xFF);
  out.push_back((v >> 8) & 0xFF);
  out.push_back(v & 0xFF);
}
inline void put_u16(std::vector<uint8_t>& out, uint16_t v) {
  out.push_back((v >> 8) & 0xFF);
  out.push_back(v & 0xFF);
}
inline void put_varlen(std::vector<uint8_t>& out, uint32_t v) {
  uint8_t buf[4];
  int n = 0;
  buf[n++] = v & 0x7F;
  while (v >>= 7) buf[n++] = 0x80 | (v & 0x7F);
  while (n--) out.push_back(buf[n]);
}

struct Event {
  int64_t tick;
  int order;  // stable sort key: offs before ons at the same tick
  std::vector<uint8_t> bytes;
};

class TrackWriter {
 public:
  void meta(int64_t tick, uint8_t type, std::vector<uint8_t> payload,
            int order = 0) {
    Event e{tick, order, {0xFF, type}};
    put_varlen(e.bytes, static_cast<uint32_t>(payload.size()));
    e.bytes.insert(e.bytes.end(), payload.begin(), payload.end());
    events_.push_back(std::move(e));
  }
  void note(int64_t tick, int64_t dur, int ch, int pitch, int vel) {
    events_.push_back({tick, 1,
                       {static_cast<uint8_t>(0x90 | ch),
                        static_cast<uint8_t>(pitch),
                        static_cast<uint8_t>(vel)}});
    events_.push_back({tick + dur, 0,
                       {static_cast<uint8_t>(0x80 | ch),
                        static_cast<uint8_t>(pitch), 64}});
  }

  void emit(std::vector<uint8_t>& out, int64_t end_tick) {
    std::stable_sort(events_.begin(), events_.end(),
                     [](const Event& a, const Event& b) {
                       if (a.tick != b.tick) return a.tick < b.tick;
                       return a.order < b.order;
                     });
    std::vector<uint8_t> body;
    int64_t tick = 0;
    for (const Event& e : events_) {
      put_varlen(body, static_cast<uint32_t>(e.tick - tick));
      tick = e.tick;
      body.insert(body.end(), e.bytes.begin(), e.bytes.end());
    }
    put_varlen(body, static_cast<uint32_t>(std::max<int64_t>(0, end_tick - tick)));
    body.insert(body.end(), {0xFF, 0x2F, 0x00});
    out.insert(out.end(), {'M', 'T', 'r', 'k'});
    put_u32(out, static_cast<uint32_t>(body.size()));
    out.insert(out.end(), body.begin(), body.end());
  }

 private:
  std::vector<Event> events_;
};

// --- Import helpers ---------------------------------------------------------

// Nearest diatonic step for each pitch class; accidentals snap down on ties.
inline int snap_step(int pc) {
  static constexpr int steps[12] = {0, 0, 1, 1, 2, 3, 3, 4, 4, 5, 5, 6};
  return steps[pc];
}

// Absolute diatonic index of a MIDI pitch (degree 1 at C4 has index 0).
inline int diatonic_index(int midi_pitch) {
  const int oct = midi_pitch >= 0 ? midi_pitch / 12 : (midi_pitch - 11) / 12;
  const int pc = midi_pitch - 12 * oct;
  return 7 * oct + snap_step(pc) - 35;
}

struct GridNote {
  int64_t start = 0;  // slots
  int64_t dur = 0;
  int pitch = 0;  // MIDI
};

// Quantize to the slot grid and reduce to a monophonic line.
inline std::vector<GridNote> quantize_track(const RawTrack& track, int division,
                                            bool prefer_high) {
  const double slots_per_tick = 4.0 / division;
  std::vector<GridNote> notes;
  for (const RawNote& n : track.notes) {
    const int64_t a = std::llround(n.start * slots_per_tick);
    const int64_t b = std::llround((n.start + n.duration) * slots_per_tick);
    if (b - a <= 0) continue;  // vanishes at this resolution
    notes.push_back({a, b - a, n.pitch});
  }
  std::sort(notes.begin(), notes.end(), [&](const GridNote& x, const GridNote& y) {
    if (x.start != y.start) return x.start < y.start;
    return prefer_high ? x.pitch > y.pitch : x.pitch < y.pitch;
  });
  std::vector<GridNote> mono;
  for (const GridNote& n : notes) {
    if (!mono.empty() && n.start == mono.back().start) continue;  // chordal
    if (!mono.empty() && mono.back().start + mono.back().dur > n.start) {
      mono.back().dur = n.start - mono.back().start;
      if (mono.back().dur <= 0) mono.pop_back();
    }
    mono.push_back(n);
  }
  return mono;
}

// Octave offset whose degree window fits the notes best: fewest out-of-range
// degrees, ties resolved toward the track's conventional register.
inline int fold_octave(const std::vector<int>& indices, int default_off) {
  if (indices.empty()) return default_off;
  int best_off = default_off;
  long best_out = -1;
  for (int off = -6; off <= 6; ++off) {
    long out = 0;
    for (int idx : indices) {
      const int d = idx - 7 * off + 1;
      if (d < kMinDegree || d > kMaxDegree) ++out;
    }
    if (best_out < 0 || out < best_out ||
        (out == best_out &&
         std::abs(off - default_off) < std::abs(best_off - default_off))) {
      best_out = out;
      best_off = off;
    }
  }
  return best_off;
}

}  // namespace midi_detail

// --- Export ------------------------------------------------------------------

inline std::vector<uint8_t> export_midi(const Song& song) {
  song.validate();
  using namespace midi_detail;
  const int64_t end_tick =
      static_cast<int64_t>(song.total_bars()) * kSlotsPerBar * kTicksPerSlot;

  std::vector<uint8_t> out;
  out.insert(out.end(), {'M', 'T', 'h', 'd'});
  put_u32(out, 6);
  put_u16(out, 1);  // format 1
  put_u16(out, 3);  // melody, chords, bass
  put_u16(out, kTicksPerQuarter);

  auto track_pos = [](const std::vector<Note>& track) {
    std::vector<std::pair<int64_t, const Note*>> placed;
    int64_t pos = 0;
    for (const Note& n : track) {
      placed.push_back({pos, &n});
      pos += n.duration;
    }
    return placed;
  };

  {  // melody carries the meta events
    TrackWriter w;
    w.meta(0, 0x03, {'m', 'e', 'l', 'o', 'd', 'y'});
    w.meta(0, 0x58, {4, 2, 24, 8});
    const int us = static_cast<int>(60000000LL / song.tempo);
    w.meta(0, 0x51,
           {static_cast<uint8_t>((us >> 16) & 0xFF),
            static_cast<uint8_t>((us >> 8) & 0xFF),
            static_cast<uint8_t>(us & 0xFF)});
    for (auto [pos, n] : track_pos(song.melody)) {
      if (n->pitch.is_rest()) continue;
      w.note(pos * kTicksPerSlot, int64_t{n->duration} * kTicksPerSlot, 0,
             degree_to_midi(n->pitch.degree()), 96);
    }
    w.emit(out, end_tick);
  }
  {  // block chords, one triad per bar
    TrackWriter w;
    w.meta(0, 0x03, {'c', 'h', 'o', 'r', 'd', 's'});
    for (size_t bar = 0; bar < song.chords.size(); ++bar) {
      const int r = chord_root(song.chords[bar]);
      const int64_t tick = int64_t{kSlotsPerBar} * kTicksPerSlot *
                           static_cast<int64_t>(bar);
      for (int d : {r, r + 2, r + 4}) {
        w.note(tick, int64_t{kSlotsPerBar} * kTicksPerSlot, 1,
               degree_to_midi(d), 72);
      }
    }
    w.emit(out, end_tick);
  }
  {  // bass, shifted by its octave offset
    TrackWriter w;
    w.meta(0, 0x03, {'b', 'a', 's', 's'});
    for (auto [pos, n] : track_pos(song.bass)) {
      if (n->pitch.is_rest()) continue;
      w.note(pos * kTicksPerSlot, int64_t{n->duration} * kTicksPerSlot, 2,
             degree_to_midi(n->pitch.degree()) + 12 * song.bass_octave, 88);
    }
    w.emit(out, end_tick);
  }
  return out;
}

// --- Import ------------------------------------------------------------------

namespace midi_detail {

inline const RawTrack* find_track(const RawFile& file, const TrackRef& ref,
                                  const char* label) {
  if (std::holds_alternative<int>(ref)) {
    const int idx = std::get<int>(ref);
    if (idx < 0 || idx >= static_cast<int>(file.tracks.size())) {
      throw MidiError(std::string(label) + " track index out of range");
    }
    return &file.tracks[idx];
  }
  const std::string& name = std::get<std::string>(ref);
  for (const auto& t : file.tracks) {
    if (t.name == name) return &t;
  }
  throw MidiError(std::string(label) + " track '" + name + "' not found");
}

// Lay quantized monophonic notes onto the bar grid as a complete track:
// gaps become per-bar rests, long or boundary-crossing notes are split into
// legal chunks.
inline std::vector<Note> to_grid_track(const std::vector<GridNote>& mono,
                                       const std::vector<int>& degrees,
                                       int total_frames,
                                       const std::vector<int>& section_ends) {
  TrackBuilder tb;
  auto add_rests = [&](int64_t upto) {
    while (tb.position() < upto) {
      const int gap = static_cast<int>(
          std::min<int64_t>(upto - tb.position(),
                            kSlotsPerBar - tb.position() % kSlotsPerBar));
      tb.rest(gap);
    }
  };
  auto frames_to_section_end = [&](int64_t pos) {
    for (int end : section_ends) {
      const int64_t frame = int64_t{end} * kSlotsPerBar;
      if (pos < frame) return frame - pos;
    }
    return int64_t{0};
  };
  for (size_t i = 0; i < mono.size(); ++i) {
    int64_t start = mono[i].start;
    int64_t dur = mono[i].dur;
    if (start >= total_frames) break;
    if (start < tb.position()) {  // overlap after quantization
      dur -= tb.position() - start;
      start = tb.position();
      if (dur <= 0) continue;
    }
    dur = std::min(dur, int64_t{total_frames} - start);
    if (dur <= 0) continue;
    add_rests(start);
    while (dur > 0) {
      const int64_t chunk =
          std::min({dur, int64_t{kMaxDuration}, frames_to_section_end(start)});
      tb.note(degrees[i], static_cast<int>(chunk));
      start += chunk;
      dur -= chunk;
    }
  }
  add_rests(total_frames);
  return tb.take();
}

}  // namespace midi_detail

inline Song import_midi(std::span<const uint8_t> bytes,
                        const Annotation& annotation) {
  using namespace midi_detail;
  RawFile file = Reader(bytes).read();

  Song song;
  song.sections = annotation.sections;
  song.mode = annotation.mode;
  const int bars = song.total_bars();
  if (static_cast<int>(annotation.chords.size()) != bars) {
    throw MidiError("sidecar chords count " +
                    std::to_string(annotation.chords.size()) +
                    " does not match " + std::to_string(bars) + " bars");
  }
  song.chords = annotation.chords;
  song.tempo = annotation.tempo > 0
                   ? annotation.tempo
                   : static_cast<int>(std::llround(60000000.0 / file.tempo_us));
  if (song.tempo <= 0) throw MidiError("nonpositive tempo");

  // Transpose to C major / A minor: move the tonic by the smallest shift.
  const int key_pc = key_pitch_class(annotation.key);
  const int target = annotation.mode == Mode::kMinor ? 9 : 0;
  int shift = (target - key_pc) % 12;
  if (shift > 6) shift -= 12;
  if (shift < -6) shift += 12;

  std::vector<int> section_ends;
  int acc = 0;
  for (const auto& s : song.sections) {
    acc += s.length;
    section_ends.push_back(acc);
  }
  const int total_frames = bars * kSlotsPerBar;

  auto import_track = [&](const TrackRef& ref, const char* label,
                          bool prefer_high, std::optional<int> fixed_octave,
                          int default_octave, int* octave_out) {
    const RawTrack* raw = find_track(file, ref, label);
    auto mono = quantize_track(*raw, file.division, prefer_high);
    std::vector<int> indices;
    for (const auto& n : mono) indices.push_back(diatonic_index(n.pitch + shift));
    const int off =
        fixed_octave ? *fixed_octave : fold_octave(indices, default_octave);
    std::vector<int> degrees;
    for (int idx : indices) {
      const int d = idx - 7 * off + 1;
      if (d < kMinDegree || d > kMaxDegree) {
        throw MidiError(std::string(label) +
                        ": pitch outside the two-octave range after "
                        "transposition and octave folding");
      }
      degrees.push_back(d);
    }
    if (octave_out) *octave_out = off;
    return to_grid_track(mono, degrees, total_frames, section_ends);
  };

  find_track(file, annotation.chord_track, "chord");  // must exist
  song.melody = import_track(annotation.melody_track, "melody", true,
                             annotation.melody_octave, 0, nullptr);
  int bass_octave = -2;
  song.bass = import_track(annotation.bass_track, "bass", false,
                           annotation.bass_octave, -2, &bass_octave);
  song.bass_octave = bass_octave;
  song.validate();
  return song;
}

}  // namespace seedsong

#endif  // SEEDSONG_MIDI_HPP
