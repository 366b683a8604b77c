// SPDX-License-Identifier: Apache-2.0
// chansem - channel semantics characterization toolkit

#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "chansem/core.hpp"

namespace chansem::sim {

inline constexpr int kSceneFormatVersion = 1;

struct Waypoint {
  double t = 0.0;
  double x = 0.0;
  double y = 0.0;
};

/// Piecewise-linear 2-D plan trajectory. Positions clamp to the first/last
/// waypoint outside the listed time range, so a track is defined for the
/// whole scene duration.
struct Track {
  std::vector<Waypoint> waypoints;

  std::pair<double, double> position_at(double t) const {
    if (waypoints.empty()) throw InvalidArgument("track has no waypoints");
    if (t <= waypoints.front().t) return {waypoints.front().x, waypoints.front().y};
    if (t >= waypoints.back().t) return {waypoints.back().x, waypoints.back().y};
    for (std::size_t i = 1; i < waypoints.size(); ++i) {
      const auto& a = waypoints[i - 1];
      const auto& b = waypoints[i];
      if (t <= b.t) {
        const double span = b.t - a.t;
        const double u = span > 0.0 ? (t - a.t) / span : 0.0;
        return {a.x + u * (b.x - a.x), a.y + u * (b.y - a.y)};
      }
    }
    return {waypoints.back().x, waypoints.back().y};
  }
};

struct Scatterer {
  std::string label;
  double reflectivity = 1.0;  // in (0, 1]
  Track track;
  std::optional<std::pair<double, double>> active;  // [on, off] window, whole scene if absent

  bool active_at(double t) const {
    return !active || (t >= active->first && t <= active->second);
  }
};

/// Multi-tone sweep parameters. Tones sit at carrier + k*B/N for
/// k = 0..N-1, which pairs with a delay grid of spacing exactly 1/B under
/// the discrete transform.
struct SoundingConfig {
  double carrier_hz = 28e9;
  double bandwidth_hz = 1e9;
  int n_tones = 1001;

  double tone_spacing_hz() const { return bandwidth_hz / n_tones; }
  double delay_resolution_s() const { return 1.0 / bandwidth_hz; }
  double max_unambiguous_delay_s() const { return n_tones / bandwidth_hz; }
};

struct Scene {
  std::string name;
  std::vector<Scatterer> scatterers;
  Track platform;  // co-located TX/RX
  SoundingConfig sounding;
  double duration_s = 60.0;
  double snapshot_rate_hz = 15.625;
  double noise_floor_db = -300.0;  // per-tone noise power, linear = 10^(dB/10)
  std::uint64_t rng_seed = 0;
};

/// Structural checks for user-supplied scenes. `require_scatterers` is
/// relaxed for synthetic noise-only runs.
inline void validate_scene(const Scene& scene, bool require_scatterers = true) {
  if (!(scene.duration_s >= 0.0)) throw InvalidArgument("scene duration must be >= 0");
  if (!(scene.snapshot_rate_hz > 0.0)) throw InvalidArgument("snapshot rate must be > 0");
  if (require_scatterers && scene.scatterers.empty())
    throw InvalidArgument("scene needs at least one scatterer");
  if (scene.platform.waypoints.empty()) throw InvalidArgument("platform track is empty");
  if (scene.sounding.n_tones < 2) throw InvalidArgument("need at least 2 tones");
  if (!(scene.sounding.bandwidth_hz > 0.0)) throw InvalidArgument("bandwidth must be > 0");
  for (const auto& sc : scene.scatterers) {
    if (sc.label.empty()) throw InvalidArgument("scatterer label is empty");
    if (!(sc.reflectivity > 0.0 && sc.reflectivity <= 1.0))
      throw InvalidArgument("reflectivity must be in (0, 1]: " + sc.label);
    if (sc.track.waypoints.empty()) throw InvalidArgument("scatterer track is empty: " + sc.label);
    if (sc.active && !(sc.active->first <= sc.active->second))
      throw InvalidArgument("active window ill-ordered: " + sc.label);
    for (std::size_t i = 1; i < sc.track.waypoints.size(); ++i)
      if (!(sc.track.waypoints[i].t >= sc.track.waypoints[i - 1].t))
        throw InvalidArgument("track waypoints not time-ordered: " + sc.label);
  }
}

inline nlohmann::json track_to_json(const Track& track) {
  nlohmann::json wps = nlohmann::json::array();
  for (const auto& w : track.waypoints) wps.push_back({w.t, w.x, w.y});
  return wps;
}

inline Track track_from_json(const nlohmann::json& j) {
  Track track;
  for (const auto& w : j) {
    if (!w.is_array() || w.size() != 3) throw FormatError("waypoint must be [t, x, y]");
    track.waypoints.push_back({w[0].get<double>(), w[1].get<double>(), w[2].get<double>()});
  }
  return track;
}

inline nlohmann::json scene_to_json(const Scene& scene) {
  nlohmann::json scatterers = nlohmann::json::array();
  for (const auto& sc : scene.scatterers) {
    nlohmann::json j = {{"label", sc.label},
                        {"reflectivity", sc.reflectivity},
                        {"waypoints", track_to_json(sc.track)}};
    if (sc.active) j["active"] = {sc.active->first, sc.active->second};
    scatterers.push_back(std::move(j));
  }
  return {{"format", "chansem-scene"},
          {"version", kSceneFormatVersion},
          {"name", scene.name},
          {"duration_s", scene.duration_s},
          {"snapshot_rate_hz", scene.snapshot_rate_hz},
          {"noise_floor_db", scene.noise_floor_db},
          {"rng_seed", scene.rng_seed},
          {"sounding",
           {{"carrier_hz", scene.sounding.carrier_hz},
            {"bandwidth_hz", scene.sounding.bandwidth_hz},
            {"n_tones", scene.sounding.n_tones}}},
          {"platform", {{"waypoints", track_to_json(scene.platform)}}},
          {"scatterers", scatterers}};
}

inline Scene scene_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "chansem-scene") throw FormatError("not a scene file");
  if (j.value("version", 0) != kSceneFormatVersion)
    throw FormatError("unsupported scene format version");
  Scene scene;
  scene.name = j.value("name", std::string{});
  scene.duration_s = j.at("duration_s").get<double>();
  scene.snapshot_rate_hz = j.at("snapshot_rate_hz").get<double>();
  scene.noise_floor_db = j.value("noise_floor_db", -300.0);
  scene.rng_seed = j.value("rng_seed", std::uint64_t{0});
  if (j.contains("sounding")) {
    const auto& s = j.at("sounding");
    scene.sounding.carrier_hz = s.value("carrier_hz", scene.sounding.carrier_hz);
    scene.sounding.bandwidth_hz = s.value("bandwidth_hz", scene.sounding.bandwidth_hz);
    scene.sounding.n_tones = s.value("n_tones", scene.sounding.n_tones);
  }
  scene.platform = track_from_json(j.at("platform").at("waypoints"));
  for (const auto& sj : j.at("scatterers")) {
    Scatterer sc;
    sc.label = sj.at("label").get<std::string>();
    sc.reflectivity = sj.at("reflectivity").get<double>();
    sc.track = track_from_json(sj.at("waypoints"));
    if (sj.contains("active")) {
      const auto& a = sj.at("active");
      sc.active = std::make_pair(a[0].get<double>(), a[1].get<double>());
    }
    scene.scatterers.push_back(std::move(sc));
  }
  return scene;
}

inline Scene load_scene(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open scene file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("scene parse error: ") + e.what());
  }
  return scene_from_json(j);
}

}  // namespace chansem::sim
