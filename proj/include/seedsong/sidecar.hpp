// Annotation sidecar for MIDI import: names the melody/chord/bass tracks and
// supplies the information a raw MIDI file cannot carry (key, sections,
// per-bar chord symbols). JSON on disk.
#ifndef SEEDSONG_SIDECAR_HPP
#define SEEDSONG_SIDECAR_HPP

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "seedsong/core.hpp"

namespace seedsong {

// A track is referenced either by its MIDI track-name meta event or by index.
using TrackRef = std::variant<std::string, int>;

struct Annotation {
  std::string key = "C";  // tonic note name, e.g. "C", "F#", "Bb"
  Mode mode = Mode::kMajor;
  int tempo = 0;  // 0: take tempo from the MIDI file
  TrackRef melody_track = std::string("melody");
  TrackRef chord_track = std::string("chords");
  TrackRef bass_track = std::string("bass");
  std::vector<SectionSpec> sections;
  std::vector<Chord> chords;
  // Octave offsets written by export; import falls back to median folding
  // when they are absent.
  std::optional<int> melody_octave;
  std::optional<int> bass_octave;
};

// Semitone pitch class of a tonic name; throws ParseError on bad input.
inline int key_pitch_class(const std::string& key) {
  if (key.empty()) throw ParseError("empty key name");
  static constexpr int base[] = {9, 11, 0, 2, 4, 5, 7};  // A..G
  const char c = key[0];
  if (c < 'A' || c > 'G') throw ParseError("bad key name '" + key + "'");
  int pc = base[c - 'A'];
  for (size_t i = 1; i < key.size(); ++i) {
    if (key[i] == '#') {
      pc += 1;
    } else if (key[i] == 'b') {
      pc -= 1;
    } else {
      throw ParseError("bad key name '" + key + "'");
    }
  }
  return ((pc % 12) + 12) % 12;
}

namespace detail {

inline TrackRef track_ref_from_json(const nlohmann::json& j) {
  if (j.is_string()) return j.get<std::string>();
  if (j.is_number_integer()) return j.get<int>();
  throw ParseError("track reference must be a name or an index");
}

}  // namespace detail

inline Annotation parse_annotation(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("sidecar: ") + e.what());
  }
  Annotation a;
  if (j.contains("key")) a.key = j.at("key").get<std::string>();
  key_pitch_class(a.key);  // validate early
  if (j.contains("mode")) {
    const std::string m = j.at("mode").get<std::string>();
    if (m == "major") {
      a.mode = Mode::kMajor;
    } else if (m == "minor") {
      a.mode = Mode::kMinor;
    } else {
      throw ParseError("sidecar mode must be major or minor");
    }
  }
  if (j.contains("tempo")) a.tempo = j.at("tempo").get<int>();
  if (j.contains("tracks")) {
    const auto& t = j.at("tracks");
    if (t.contains("melody"))
      a.melody_track = detail::track_ref_from_json(t.at("melody"));
    if (t.contains("chord"))
      a.chord_track = detail::track_ref_from_json(t.at("chord"));
    if (t.contains("bass"))
      a.bass_track = detail::track_ref_from_json(t.at("bass"));
  }
  if (!j.contains("sections")) throw ParseError("sidecar missing sections");
  for (const auto& s : j.at("sections")) {
    SectionSpec spec;
    spec.name = s.at("name").get<std::string>();
    spec.length = s.at("length").get<int>();
    spec.is_variation = s.value("variation", false);
    a.sections.push_back(spec);
  }
  if (!j.contains("chords")) throw ParseError("sidecar missing chords");
  for (const auto& c : j.at("chords")) {
    const std::string name = c.get<std::string>();
    const auto chord = chord_from_name(name);
    if (!chord) throw ParseError("sidecar: unknown chord '" + name + "'");
    a.chords.push_back(*chord);
  }
  if (j.contains("melody_octave"))
    a.melody_octave = j.at("melody_octave").get<int>();
  if (j.contains("bass_octave")) a.bass_octave = j.at("bass_octave").get<int>();
  return a;
}

inline std::string render_annotation(const Annotation& a) {
  nlohmann::json j;
  j["key"] = a.key;
  j["mode"] = mode_name(a.mode);
  if (a.tempo > 0) j["tempo"] = a.tempo;
  auto ref_json = [](const TrackRef& r) -> nlohmann::json {
    if (std::holds_alternative<std::string>(r)) return std::get<std::string>(r);
    return std::get<int>(r);
  };
  j["tracks"] = {{"melody", ref_json(a.melody_track)},
                 {"chord", ref_json(a.chord_track)},
                 {"bass", ref_json(a.bass_track)}};
  j["sections"] = nlohmann::json::array();
  for (const auto& s : a.sections) {
    j["sections"].push_back({{"name", s.name},
                             {"length", s.length},
                             {"variation", s.is_variation}});
  }
  j["chords"] = nlohmann::json::array();
  for (Chord c : a.chords) j["chords"].push_back(chord_name(c));
  if (a.melody_octave) j["melody_octave"] = *a.melody_octave;
  if (a.bass_octave) j["bass_octave"] = *a.bass_octave;
  return j.dump(2);
}

// Sidecar describing a Song exactly as export_midi writes it.
inline Annotation make_annotation(const Song& song) {
  Annotation a;
  a.key = song.mode == Mode::kMinor ? "A" : "C";
  a.mode = song.mode;
  a.tempo = song.tempo;
  a.sections = song.sections;
  a.chords = song.chords;
  a.melody_octave = 0;
  a.bass_octave = song.bass_octave;
  return a;
}

}  // namespace seedsong

#endif  // SEEDSONG_SIDECAR_HPP
