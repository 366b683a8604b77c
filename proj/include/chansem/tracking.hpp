// SPDX-License-Identifier: Apache-2.0
// chansem - channel semantics characterization toolkit

#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "chansem/clustering.hpp"
#include "chansem/core.hpp"

namespace chansem::track {

struct TrajectorySample {
  double snapshot_time = 0.0;
  std::string cluster_id;
  double centroid_delay = 0.0;
  double total_power = 0.0;
};

/// A cluster followed across snapshots.
struct Trajectory {
  std::string id;
  std::vector<TrajectorySample> samples;  // strictly increasing in time
  double birth_time = 0.0;
  double death_time = 0.0;
  int gap_count = 0;  // snapshots bridged without a match

  double lifetime() const { return death_time - birth_time; }
};

struct TrackerConfig {
  double gate_s = 5e-9;  // max delay mismatch for an association
  int max_gap = 3;       // consecutive unmatched snapshots before closing
};

/// Greedy nearest-neighbor association of per-snapshot clusters into
/// trajectories. Stateful and sequential over snapshots; matching within a
/// step is by ascending delay distance, each trajectory and cluster used at
/// most once.
class Tracker {
 public:
  explicit Tracker(TrackerConfig config = {}) : config_(config) {
    if (!(config_.gate_s > 0.0)) throw InvalidArgument("gate must be positive");
    if (config_.max_gap < 0) throw InvalidArgument("max_gap must be >= 0");
  }

  const TrackerConfig& config() const { return config_; }

  /// Advances the tracker by one snapshot.
  void step(double snapshot_time, const std::vector<cluster::Cluster>& clusters) {
    struct Candidate {
      double distance;
      std::size_t traj;
      std::size_t cluster;
    };
    std::vector<Candidate> candidates;
    for (std::size_t ti = 0; ti < active_.size(); ++ti) {
      const double last = active_[ti].trajectory.samples.back().centroid_delay;
      for (std::size_t ci = 0; ci < clusters.size(); ++ci) {
        const double d = std::abs(clusters[ci].centroid_delay - last);
        if (d <= config_.gate_s) candidates.push_back({d, ti, ci});
      }
    }
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
      if (a.distance != b.distance) return a.distance < b.distance;
      if (a.traj != b.traj) return a.traj < b.traj;
      return a.cluster < b.cluster;
    });

    std::vector<bool> traj_used(active_.size(), false);
    std::vector<bool> cluster_used(clusters.size(), false);
    for (const auto& c : candidates) {
      if (traj_used[c.traj] || cluster_used[c.cluster]) continue;
      traj_used[c.traj] = true;
      cluster_used[c.cluster] = true;
      auto& entry = active_[c.traj];
      entry.trajectory.gap_count += entry.misses;
      entry.misses = 0;
      entry.trajectory.samples.push_back({snapshot_time, clusters[c.cluster].id,
                                          clusters[c.cluster].centroid_delay,
                                          clusters[c.cluster].total_power});
      entry.trajectory.death_time = snapshot_time;
    }

    // births
    for (std::size_t ci = 0; ci < clusters.size(); ++ci) {
      if (cluster_used[ci]) continue;
      ActiveEntry entry;
      entry.trajectory.id = "t" + std::to_string(next_id_++);
      entry.trajectory.birth_time = snapshot_time;
      entry.trajectory.death_time = snapshot_time;
      entry.trajectory.samples.push_back({snapshot_time, clusters[ci].id,
                                          clusters[ci].centroid_delay,
                                          clusters[ci].total_power});
      active_.push_back(std::move(entry));
    }

    // deaths: close trajectories that outran the gap budget
    std::vector<ActiveEntry> still_active;
    for (std::size_t ti = 0; ti < active_.size(); ++ti) {
      auto& entry = active_[ti];
      const bool matched_now =
          !entry.trajectory.samples.empty() &&
          entry.trajectory.samples.back().snapshot_time == snapshot_time;
      if (!matched_now) ++entry.misses;
      if (entry.misses > config_.max_gap) {
        closed_.push_back(std::move(entry.trajectory));
      } else {
        still_active.push_back(std::move(entry));
      }
    }
    active_ = std::move(still_active);
  }

  /// Closes all remaining trajectories and returns the full set, ordered by
  /// birth time.
  std::vector<Trajectory> finish() {
    for (auto& entry : active_) closed_.push_back(std::move(entry.trajectory));
    active_.clear();
    std::sort(closed_.begin(), closed_.end(), [](const Trajectory& a, const Trajectory& b) {
      if (a.birth_time != b.birth_time) return a.birth_time < b.birth_time;
      return a.id < b.id;
    });
    return std::move(closed_);
  }

 private:
  struct ActiveEntry {
    Trajectory trajectory;
    int misses = 0;
  };

  TrackerConfig config_;
  std::vector<ActiveEntry> active_;
  std::vector<Trajectory> closed_;
  std::size_t next_id_ = 0;
};

inline std::vector<Trajectory> track_clusters(
    const std::vector<std::pair<double, std::vector<cluster::Cluster>>>& snapshots,
    TrackerConfig config = {}) {
  Tracker tracker(config);
  for (const auto& [t, clusters] : snapshots) tracker.step(t, clusters);
  return tracker.finish();
}

struct TrajectoryStats {
  double lifetime_s = 0.0;
  std::optional<double> delay_drift_ns_per_s;  // least-squares slope of delay vs time
  std::optional<double> fading_rate_db_per_s;  // least-squares slope of 10 log10 power vs time
};

inline TrajectoryStats trajectory_stats(const Trajectory& tr) {
  if (tr.samples.empty()) throw InvalidArgument("trajectory has no samples");
  TrajectoryStats stats;
  stats.lifetime_s = tr.lifetime();
  if (tr.samples.size() < 2) return stats;

  double st = 0.0, std2 = 0.0;
  const double n = static_cast<double>(tr.samples.size());
  for (const auto& s : tr.samples) {
    st += s.snapshot_time;
    std2 += s.snapshot_time * s.snapshot_time;
  }
  const double denom = n * std2 - st * st;
  if (!(denom > 0.0)) return stats;

  double s_delay = 0.0, st_delay = 0.0;
  double s_db = 0.0, st_db = 0.0;
  bool power_ok = true;
  for (const auto& s : tr.samples) {
    s_delay += s.centroid_delay;
    st_delay += s.snapshot_time * s.centroid_delay;
    if (s.total_power > 0.0) {
      const double db = linear_to_db(s.total_power);
      s_db += db;
      st_db += s.snapshot_time * db;
    } else {
      power_ok = false;
    }
  }
  stats.delay_drift_ns_per_s = (n * st_delay - st * s_delay) / denom * 1e9;
  if (power_ok) stats.fading_rate_db_per_s = (n * st_db - st * s_db) / denom;
  return stats;
}

}  // namespace chansem::track
