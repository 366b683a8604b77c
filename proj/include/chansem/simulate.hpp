// SPDX-License-Identifier: Apache-2.0
// chansem - channel semantics characterization toolkit

#pragma once

#include <bit>
#include <cmath>
#include <complex>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "chansem/core.hpp"
#include "chansem/scene.hpp"

namespace chansem::sim {

inline constexpr int kTraceFormatVersion = 1;
inline constexpr const char* kTraceFormatName = "chansem-trace";

// Noise floors at or below this are treated as "no noise".
inline constexpr double kNoiseOffDb = -290.0;

/// Per-path ground truth recorded alongside each synthesized snapshot.
struct PathTruth {
  std::string label;
  int scatterer = 0;  // index into the scene's scatterer list
  double delay_s = 0.0;
  double amplitude = 0.0;  // per-tone linear amplitude
};

using GroundTruth = std::vector<PathTruth>;

struct FrequencyResponse {
  double snapshot_time = 0.0;
  double bandwidth_hz = 0.0;
  std::vector<std::complex<double>> samples;  // tone k at carrier + k*B/N
};

struct Snapshot {
  FrequencyResponse response;
  GroundTruth truth;
};

struct TraceMeta {
  std::string scene;
  SoundingConfig sounding;
  double snapshot_rate_hz = 0.0;
  double duration_s = 0.0;
  double noise_floor_db = -300.0;
  std::uint64_t rng_seed = 0;
};

struct SnapshotTrace {
  TraceMeta meta;
  std::vector<Snapshot> snapshots;
};

/// Backscatter response of the scene at observation time t: one
/// single-bounce path per active scatterer, round-trip delay 2d/c, amplitude
/// reflectivity / (c * delay), plus seeded complex white noise per tone.
inline Snapshot synthesize_snapshot(const Scene& scene, double t) {
  if (t < 0.0 || t > scene.duration_s)
    throw InvalidArgument("snapshot time outside scene duration");

  const int n = scene.sounding.n_tones;
  const double df = scene.sounding.tone_spacing_hz();
  const double f0 = scene.sounding.carrier_hz;
  const double max_delay = scene.sounding.max_unambiguous_delay_s();

  Snapshot snap;
  snap.response.snapshot_time = t;
  snap.response.bandwidth_hz = scene.sounding.bandwidth_hz;
  snap.response.samples.assign(static_cast<std::size_t>(n), {0.0, 0.0});

  const auto [px, py] = scene.platform.position_at(t);
  for (std::size_t si = 0; si < scene.scatterers.size(); ++si) {
    const auto& sc = scene.scatterers[si];
    if (!sc.active_at(t)) continue;
    const auto [sx, sy] = sc.track.position_at(t);
    const double d = std::hypot(sx - px, sy - py);
    const double delay = 2.0 * d / kSpeedOfLight;
    if (delay > max_delay)
      throw InvalidArgument("path delay exceeds unambiguous range: " + sc.label);
    if (delay <= 0.0) throw InvalidArgument("scatterer coincides with platform: " + sc.label);
    const double amplitude = sc.reflectivity / (kSpeedOfLight * delay);
    snap.truth.push_back({sc.label, static_cast<int>(si), delay, amplitude});
    for (int k = 0; k < n; ++k) {
      // keep the phase argument small: only the fractional number of cycles matters
      const double cycles = (f0 + k * df) * delay;
      const double phase = -2.0 * M_PI * std::fmod(cycles, 1.0);
      snap.response.samples[static_cast<std::size_t>(k)] += std::polar(amplitude, phase);
    }
  }

  if (scene.noise_floor_db > kNoiseOffDb) {
    const double noise_power = db_to_linear(scene.noise_floor_db);
    // noise substream keyed by the snapshot time bits, so any t is reproducible
    Rng rng(derive_stream(scene.rng_seed, std::bit_cast<std::uint64_t>(t)));
    const double sigma = std::sqrt(noise_power / 2.0);
    for (auto& s : snap.response.samples)
      s += std::complex<double>(sigma * rng.gaussian(), sigma * rng.gaussian());
  }
  return snap;
}

/// Uniformly sampled trace: floor(duration * rate) + 1 snapshots at t = i/rate.
inline SnapshotTrace run_scene(const Scene& scene) {
  validate_scene(scene, /*require_scatterers=*/false);
  SnapshotTrace trace;
  trace.meta.scene = scene.name;
  trace.meta.sounding = scene.sounding;
  trace.meta.snapshot_rate_hz = scene.snapshot_rate_hz;
  trace.meta.duration_s = scene.duration_s;
  trace.meta.noise_floor_db = scene.noise_floor_db;
  trace.meta.rng_seed = scene.rng_seed;

  const auto count =
      static_cast<std::size_t>(std::floor(scene.duration_s * scene.snapshot_rate_hz + 1e-9)) + 1;
  trace.snapshots.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double t = std::min(static_cast<double>(i) / scene.snapshot_rate_hz, scene.duration_s);
    trace.snapshots.push_back(synthesize_snapshot(scene, t));
  }
  return trace;
}

inline nlohmann::json trace_header_json(const SnapshotTrace& trace) {
  return {{"format", kTraceFormatName},
          {"version", kTraceFormatVersion},
          {"scene", trace.meta.scene},
          {"carrier_hz", trace.meta.sounding.carrier_hz},
          {"bandwidth_hz", trace.meta.sounding.bandwidth_hz},
          {"n_tones", trace.meta.sounding.n_tones},
          {"snapshot_rate_hz", trace.meta.snapshot_rate_hz},
          {"duration_s", trace.meta.duration_s},
          {"noise_floor_db", trace.meta.noise_floor_db},
          {"rng_seed", trace.meta.rng_seed},
          {"n_snapshots", trace.snapshots.size()}};
}

inline nlohmann::json snapshot_to_json(const Snapshot& snap) {
  std::vector<double> re, im;
  re.reserve(snap.response.samples.size());
  im.reserve(snap.response.samples.size());
  for (const auto& s : snap.response.samples) {
    re.push_back(s.real());
    im.push_back(s.imag());
  }
  nlohmann::json truth = nlohmann::json::array();
  for (const auto& p : snap.truth)
    truth.push_back({{"label", p.label},
                     {"scatterer", p.scatterer},
                     {"delay_s", p.delay_s},
                     {"amplitude", p.amplitude}});
  return {{"t", snap.response.snapshot_time},
          {"h_re", re},
          {"h_im", im},
          {"ground_truth", truth}};
}

inline void write_trace(const SnapshotTrace& trace, const std::string& path,
                        bool with_ground_truth = true) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << trace_header_json(trace).dump() << '\n';
  for (const auto& snap : trace.snapshots) {
    nlohmann::json j = snapshot_to_json(snap);
    if (!with_ground_truth) j.erase("ground_truth");
    out << j.dump() << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

inline SnapshotTrace read_trace(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open trace: " + path);
  std::string line;
  if (!std::getline(in, line)) throw FormatError("empty trace file: " + path);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("trace header: ") + e.what());
  }
  if (header.value("format", "") != kTraceFormatName)
    throw FormatError("not a trace file: " + path);
  if (header.value("version", 0) != kTraceFormatVersion)
    throw FormatError("unsupported trace format version");

  SnapshotTrace trace;
  trace.meta.scene = header.value("scene", std::string{});
  trace.meta.sounding.carrier_hz = header.at("carrier_hz").get<double>();
  trace.meta.sounding.bandwidth_hz = header.at("bandwidth_hz").get<double>();
  trace.meta.sounding.n_tones = header.at("n_tones").get<int>();
  trace.meta.snapshot_rate_hz = header.at("snapshot_rate_hz").get<double>();
  trace.meta.duration_s = header.at("duration_s").get<double>();
  trace.meta.noise_floor_db = header.value("noise_floor_db", -300.0);
  trace.meta.rng_seed = header.value("rng_seed", std::uint64_t{0});

  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("trace line " + std::to_string(lineno) + ": " + e.what());
    }
    Snapshot snap;
    snap.response.snapshot_time = j.at("t").get<double>();
    snap.response.bandwidth_hz = trace.meta.sounding.bandwidth_hz;
    const auto re = j.at("h_re").get<std::vector<double>>();
    const auto im = j.at("h_im").get<std::vector<double>>();
    if (re.size() != im.size() ||
        re.size() != static_cast<std::size_t>(trace.meta.sounding.n_tones))
      throw FormatError("trace line " + std::to_string(lineno) + ": sample count mismatch");
    snap.response.samples.reserve(re.size());
    for (std::size_t i = 0; i < re.size(); ++i) snap.response.samples.emplace_back(re[i], im[i]);
    if (j.contains("ground_truth")) {
      for (const auto& p : j.at("ground_truth"))
        snap.truth.push_back({p.at("label").get<std::string>(), p.at("scatterer").get<int>(),
                              p.at("delay_s").get<double>(), p.at("amplitude").get<double>()});
    }
    trace.snapshots.push_back(std::move(snap));
  }
  return trace;
}

}  // namespace chansem::sim
