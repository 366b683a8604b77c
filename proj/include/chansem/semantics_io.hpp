// SPDX-License-Identifier: Apache-2.0
// chansem - channel semantics characterization toolkit

#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "chansem/semantics.hpp"

namespace chansem::sem {

inline constexpr int kMapFormatVersion = 1;
inline constexpr const char* kMapFormatName = "chansem-map";

inline nlohmann::json to_json(const StatusSemantic& s) {
  return {{"type", "status"},
          {"id", s.id},
          {"label", s.label},
          {"delays", s.delays},
          {"amplitudes", s.amplitudes},
          {"source_cluster", s.source_cluster},
          {"snapshot_time", s.snapshot_time}};
}

inline nlohmann::json to_json(const BehaviorSemantic& b) {
  return {{"type", "behavior"},
          {"id", b.id},
          {"kind", to_string(b.kind)},
          {"start_time", b.start_time},
          {"duration", b.duration},
          {"delay_start", b.delay_start},
          {"delay_coverage", b.delay_coverage},
          {"statuses", b.statuses},
          {"trajectory", b.trajectory}};
}

inline nlohmann::json to_json(const EventSemantic& e) {
  return {{"type", "event"},
          {"id", e.id},
          {"label", e.label},
          {"level", e.level},
          {"start_time", e.start_time},
          {"duration", e.duration},
          {"behaviors", e.behaviors},
          {"sub_events", e.sub_events}};
}

inline nlohmann::json meta_to_json(const MapMeta& m) {
  return {{"type", "meta"},
          {"format", kMapFormatName},
          {"version", kMapFormatVersion},
          {"scene", m.scene},
          {"snapshot_rate_hz", m.snapshot_rate_hz},
          {"carrier_hz", m.carrier_hz},
          {"bandwidth_hz", m.bandwidth_hz},
          {"n_tones", m.n_tones}};
}

inline StatusSemantic status_from_json(const nlohmann::json& j) {
  StatusSemantic s;
  s.id = j.at("id").get<std::string>();
  s.label = j.at("label").get<std::string>();
  s.delays = j.at("delays").get<std::vector<double>>();
  s.amplitudes = j.at("amplitudes").get<std::vector<double>>();
  s.source_cluster = j.at("source_cluster").get<std::string>();
  s.snapshot_time = j.at("snapshot_time").get<double>();
  return s;
}

inline BehaviorSemantic behavior_from_json(const nlohmann::json& j) {
  BehaviorSemantic b;
  b.id = j.at("id").get<std::string>();
  const auto kind = behavior_kind_from_string(j.at("kind").get<std::string>());
  if (!kind) throw FormatError("unknown behavior kind: " + j.at("kind").get<std::string>());
  b.kind = *kind;
  b.start_time = j.at("start_time").get<double>();
  b.duration = j.at("duration").get<double>();
  b.delay_start = j.at("delay_start").get<double>();
  b.delay_coverage = j.at("delay_coverage").get<double>();
  b.statuses = j.at("statuses").get<std::vector<std::string>>();
  b.trajectory = j.at("trajectory").get<std::string>();
  return b;
}

inline EventSemantic event_from_json(const nlohmann::json& j) {
  EventSemantic e;
  e.id = j.at("id").get<std::string>();
  e.label = j.at("label").get<std::string>();
  e.level = j.at("level").get<int>();
  e.start_time = j.at("start_time").get<double>();
  e.duration = j.at("duration").get<double>();
  e.behaviors = j.at("behaviors").get<std::vector<std::string>>();
  e.sub_events = j.at("sub_events").get<std::vector<std::string>>();
  return e;
}

inline MapMeta meta_from_json(const nlohmann::json& j) {
  MapMeta m;
  m.scene = j.value("scene", std::string{});
  m.snapshot_rate_hz = j.value("snapshot_rate_hz", 0.0);
  m.carrier_hz = j.value("carrier_hz", 0.0);
  m.bandwidth_hz = j.value("bandwidth_hz", 0.0);
  m.n_tones = j.value("n_tones", 0);
  return m;
}

namespace detail {

// Canonical record order makes exports reproducible byte for byte.
template <typename T>
void sort_records(std::vector<T>& v, double (*start)(const T&)) {
  std::stable_sort(v.begin(), v.end(), [&](const T& a, const T& b) {
    const double sa = start(a), sb = start(b);
    if (sa != sb) return sa < sb;
    return a.id < b.id;
  });
}

}  // namespace detail

inline void canonicalize(SemanticMap& map) {
  detail::sort_records<StatusSemantic>(map.statuses,
                                       [](const StatusSemantic& s) { return s.snapshot_time; });
  detail::sort_records<BehaviorSemantic>(map.behaviors,
                                         [](const BehaviorSemantic& b) { return b.start_time; });
  detail::sort_records<EventSemantic>(map.events,
                                      [](const EventSemantic& e) { return e.start_time; });
}

/// JSON-lines export: meta line first, then statuses, behaviors, events in
/// canonical (start_time, id) order.
inline std::string export_map_jsonl(const SemanticMap& map) {
  SemanticMap sorted = map;
  canonicalize(sorted);
  std::ostringstream out;
  out << meta_to_json(sorted.meta).dump() << '\n';
  for (const auto& s : sorted.statuses) out << to_json(s).dump() << '\n';
  for (const auto& b : sorted.behaviors) out << to_json(b).dump() << '\n';
  for (const auto& e : sorted.events) out << to_json(e).dump() << '\n';
  return out.str();
}

inline void write_map_jsonl(const SemanticMap& map, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << export_map_jsonl(map);
  if (!out) throw IoError("write failed: " + path);
}

inline SemanticMap import_map_jsonl(std::istream& in) {
  SemanticMap map;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("line " + std::to_string(lineno) + ": " + e.what());
    }
    const std::string type = j.value("type", "");
    try {
      if (type == "meta") {
        if (j.value("format", "") != kMapFormatName)
          throw FormatError("not a semantic map file");
        if (j.value("version", 0) != kMapFormatVersion)
          throw FormatError("unsupported map format version");
        map.meta = meta_from_json(j);
      } else if (type == "status") {
        map.statuses.push_back(status_from_json(j));
      } else if (type == "behavior") {
        map.behaviors.push_back(behavior_from_json(j));
      } else if (type == "event") {
        map.events.push_back(event_from_json(j));
      } else if (type == "commit" || type == "snapshot") {
        // store bookkeeping records, ignored on plain map import
      } else {
        throw FormatError("unknown record type: " + type);
      }
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return map;
}

inline SemanticMap read_map_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  return import_map_jsonl(in);
}

}  // namespace chansem::sem
