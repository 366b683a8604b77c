// SPDX-License-Identifier: Apache-2.0
// chansem - channel semantics characterization toolkit

#pragma once

#include <charconv>
#include <fstream>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "chansem/clustering.hpp"
#include "chansem/core.hpp"
#include "chansem/dsp.hpp"
#include "chansem/engine.hpp"
#include "chansem/semantics.hpp"
#include "chansem/semantics_io.hpp"
#include "chansem/simulate.hpp"
#include "chansem/tracking.hpp"

namespace chansem::pipeline {

struct Options {
  double noise_margin_db = 6.0;
  bool interpolate = true;
  bool mask_leakage = true;
  std::optional<int> fixed_k;  // bypasses k selection when set
  int k_max = 8;
  int restarts = 10;
  track::TrackerConfig tracker;
  double assoc_gate_s = 5e-9;
  engine::BehaviorThresholds behavior;
  std::vector<engine::EventRule> rules;
  std::optional<engine::LabelMap> label_map;  // overrides ground-truth association
  std::uint64_t seed = 0;
};

struct SnapshotResult {
  double snapshot_time = 0.0;
  std::vector<cluster::Cluster> clusters;
  std::vector<std::string> status_ids;  // aligned with clusters
};

struct CharacterizeResult {
  sem::SemanticMap map;
  std::vector<track::Trajectory> trajectories;
  std::vector<dsp::Pdp> pdps;
  std::vector<SnapshotResult> snapshots;
};

/// Full characterization chain: impulse responses, power profiles, multipath
/// extraction, power-weighted clustering, tracking, and the three semantic
/// levels. Deterministic for a fixed trace, options, and seed.
inline CharacterizeResult characterize_trace(const sim::SnapshotTrace& trace,
                                             const Options& opt) {
  CharacterizeResult result;
  result.map.meta.scene = trace.meta.scene;
  result.map.meta.snapshot_rate_hz = trace.meta.snapshot_rate_hz;
  result.map.meta.carrier_hz = trace.meta.sounding.carrier_hz;
  result.map.meta.bandwidth_hz = trace.meta.sounding.bandwidth_hz;
  result.map.meta.n_tones = trace.meta.sounding.n_tones;

  engine::BehaviorThresholds thresholds = opt.behavior;
  if (trace.meta.snapshot_rate_hz > 0.0)
    thresholds.snapshot_interval_s = 1.0 / trace.meta.snapshot_rate_hz;

  track::Tracker tracker(opt.tracker);
  std::unordered_map<std::string, const sem::StatusSemantic*> status_of_cluster;

  for (std::size_t i = 0; i < trace.snapshots.size(); ++i) {
    const auto& snap = trace.snapshots[i];
    const auto cir = dsp::to_cir(snap.response);
    auto pdp = dsp::to_pdp(cir);
    const double floor = dsp::estimate_noise_floor(pdp, opt.noise_margin_db);
    dsp::ExtractOptions extract;
    extract.interpolate = opt.interpolate;
    extract.mask_leakage = opt.mask_leakage;
    const auto mpcs = dsp::extract_mpcs(pdp, cir, floor, extract);

    SnapshotResult sr;
    sr.snapshot_time = snap.response.snapshot_time;
    if (!mpcs.empty()) {
      int k;
      const std::uint64_t snap_seed = derive_stream(opt.seed, i);
      if (opt.fixed_k) {
        k = std::min(*opt.fixed_k, static_cast<int>(mpcs.size()));
      } else {
        k = cluster::select_k(mpcs, opt.k_max, snap_seed, opt.restarts);
      }
      auto clustering = cluster::k_power_means_best(mpcs, k, snap_seed, opt.restarts);
      sr.clusters = std::move(clustering.clusters);
      for (auto& c : sr.clusters) c.id = "s" + std::to_string(i) + "-" + c.id;
    }

    for (const auto& c : sr.clusters) {
      sem::StatusSemantic status =
          opt.label_map ? engine::characterize_status(c, *opt.label_map, "st-" + c.id)
                        : engine::characterize_status(c, snap.truth, "st-" + c.id,
                                                      opt.assoc_gate_s);
      sr.status_ids.push_back(status.id);
      result.map.statuses.push_back(std::move(status));
    }

    tracker.step(sr.snapshot_time, sr.clusters);
    result.pdps.push_back(std::move(pdp));
    result.snapshots.push_back(std::move(sr));
  }

  for (const auto& s : result.map.statuses) status_of_cluster.emplace(s.source_cluster, &s);

  result.trajectories = tracker.finish();
  for (const auto& tr : result.trajectories) {
    auto behaviors = engine::classify_behavior(tr, status_of_cluster, thresholds);
    for (auto& b : behaviors) result.map.behaviors.push_back(std::move(b));
  }

  result.map.events = engine::compose_events(result.map.behaviors, result.map.statuses,
                                             opt.rules);
  sem::canonicalize(result.map);
  log_info("characterized %zu snapshots: %zu statuses, %zu behaviors, %zu events",
           result.snapshots.size(), result.map.statuses.size(), result.map.behaviors.size(),
           result.map.events.size());
  return result;
}

inline CharacterizeResult characterize_scene(const sim::Scene& scene, const Options& opt) {
  return characterize_trace(sim::run_scene(scene), opt);
}

namespace detail {

inline void append_double(std::string& out, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, res.ptr);
}

}  // namespace detail

/// PDP matrix as CSV: header of delay values in ns, then one row per
/// snapshot with its time followed by the bin powers.
inline void write_pdp_csv(const std::vector<dsp::Pdp>& pdps, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  std::string line;
  if (!pdps.empty()) {
    line = "time_s";
    for (std::size_t i = 0; i < pdps.front().bins.size(); ++i) {
      line += ",delay_ns_";
      detail::append_double(line, static_cast<double>(i) * pdps.front().delay_step_s * 1e9);
    }
    line += '\n';
    out << line;
  }
  for (const auto& pdp : pdps) {
    line.clear();
    detail::append_double(line, pdp.snapshot_time);
    for (double b : pdp.bins) {
      line += ',';
      detail::append_double(line, b);
    }
    line += '\n';
    out << line;
  }
  if (!out) throw IoError("write failed: " + path);
}

inline nlohmann::json trajectory_to_json(const track::Trajectory& tr) {
  const auto stats = track::trajectory_stats(tr);
  nlohmann::json samples = nlohmann::json::array();
  for (const auto& s : tr.samples)
    samples.push_back({{"t", s.snapshot_time},
                       {"cluster", s.cluster_id},
                       {"centroid_delay", s.centroid_delay},
                       {"total_power", s.total_power}});
  nlohmann::json j = {{"type", "trajectory"},
                      {"id", tr.id},
                      {"birth_time", tr.birth_time},
                      {"death_time", tr.death_time},
                      {"lifetime", tr.lifetime()},
                      {"gap_count", tr.gap_count},
                      {"samples", samples}};
  if (stats.delay_drift_ns_per_s) j["delay_drift_ns_per_s"] = *stats.delay_drift_ns_per_s;
  if (stats.fading_rate_db_per_s) j["fading_rate_db_per_s"] = *stats.fading_rate_db_per_s;
  return j;
}

inline void write_trajectories_jsonl(const std::vector<track::Trajectory>& trajectories,
                                     const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  for (const auto& tr : trajectories) out << trajectory_to_json(tr).dump() << '\n';
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace chansem::pipeline
