// SPDX-License-Identifier: Apache-2.0
// chansem - channel semantics characterization toolkit

#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "chansem/clustering.hpp"
#include "chansem/core.hpp"
#include "chansem/semantics.hpp"
#include "chansem/simulate.hpp"
#include "chansem/tracking.hpp"

namespace chansem::engine {

inline constexpr const char* kUnknownLabel = "unknown";

/// User-supplied association for external traces: the first entry whose
/// delay (or one-way distance) and time windows contain the cluster wins.
struct LabelWindow {
  std::optional<std::pair<double, double>> delay_s;
  std::optional<std::pair<double, double>> distance_m;
  std::pair<double, double> time_s{-std::numeric_limits<double>::infinity(),
                                   std::numeric_limits<double>::infinity()};
  std::string label;
};

struct LabelMap {
  std::vector<LabelWindow> entries;
};

inline LabelMap label_map_from_json(const nlohmann::json& j) {
  LabelMap map;
  for (const auto& e : j.at("entries")) {
    LabelWindow w;
    w.label = e.at("label").get<std::string>();
    if (w.label.empty()) throw FormatError("label map entry with empty label");
    if (e.contains("delay_ns"))
      w.delay_s = std::make_pair(e.at("delay_ns")[0].get<double>() * 1e-9,
                                 e.at("delay_ns")[1].get<double>() * 1e-9);
    if (e.contains("distance_m"))
      w.distance_m =
          std::make_pair(e.at("distance_m")[0].get<double>(), e.at("distance_m")[1].get<double>());
    if (e.contains("time_s"))
      w.time_s = std::make_pair(e.at("time_s")[0].get<double>(), e.at("time_s")[1].get<double>());
    if (w.delay_s && !(w.delay_s->first <= w.delay_s->second))
      throw FormatError("ill-ordered delay window");
    if (w.distance_m && !(w.distance_m->first <= w.distance_m->second))
      throw FormatError("ill-ordered distance window");
    if (!(w.time_s.first <= w.time_s.second)) throw FormatError("ill-ordered time window");
    map.entries.push_back(std::move(w));
  }
  return map;
}

inline LabelMap load_label_map(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open label map: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("label map parse error: ") + e.what());
  }
  return label_map_from_json(j);
}

namespace detail {

inline sem::StatusSemantic status_from_cluster(const cluster::Cluster& cluster,
                                               std::string status_id, std::string label) {
  sem::StatusSemantic s;
  s.id = std::move(status_id);
  s.label = std::move(label);
  s.source_cluster = cluster.id;
  s.snapshot_time = cluster.snapshot_time;
  for (const auto& m : cluster.members) {
    if (!s.delays.empty() && m.delay_s == s.delays.back()) {
      // coincident peaks collapse onto one strictly ascending entry
      s.amplitudes.back() = std::max(s.amplitudes.back(), m.amplitude);
      continue;
    }
    s.delays.push_back(m.delay_s);
    s.amplitudes.push_back(m.amplitude);
  }
  return s;
}

}  // namespace detail

/// Ground-truth association: the scatterer whose true delay is nearest to the
/// cluster centroid, within `gate_s`.
inline sem::StatusSemantic characterize_status(const cluster::Cluster& cluster,
                                               const sim::GroundTruth& truth,
                                               std::string status_id, double gate_s = 5e-9) {
  std::string label = kUnknownLabel;
  double best = gate_s;
  for (const auto& p : truth) {
    const double d = std::abs(p.delay_s - cluster.centroid_delay);
    if (d <= best) {
      best = d;
      label = p.label;
    }
  }
  return detail::status_from_cluster(cluster, std::move(status_id), std::move(label));
}

/// Window-table association for traces without ground truth.
inline sem::StatusSemantic characterize_status(const cluster::Cluster& cluster,
                                               const LabelMap& label_map,
                                               std::string status_id) {
  std::string label = kUnknownLabel;
  const double tau = cluster.centroid_delay;
  const double dist = delay_to_distance(tau);
  const double t = cluster.snapshot_time;
  for (const auto& w : label_map.entries) {
    if (t < w.time_s.first || t > w.time_s.second) continue;
    const bool delay_hit = w.delay_s && tau >= w.delay_s->first && tau <= w.delay_s->second;
    const bool dist_hit =
        w.distance_m && dist >= w.distance_m->first && dist <= w.distance_m->second;
    if (delay_hit || dist_hit) {
      label = w.label;
      break;
    }
  }
  return detail::status_from_cluster(cluster, std::move(status_id), std::move(label));
}

struct BehaviorThresholds {
  double eps_ns_per_s = 0.5;           // |drift| below this is static
  int window_snapshots = 16;           // sliding slope-estimation window
  double accel_delta_ns_per_s2 = 1.0;  // |drift| change that flags accelerate/decelerate
  double snapshot_interval_s = 0.064;  // nominal spacing, used for point-like durations
};

namespace detail {

// Local delay drift at each sample: least-squares slope over samples within
// half a window on either side (time-based, so gaps do not skew it).
inline std::vector<double> local_drift(const std::vector<track::TrajectorySample>& samples,
                                       const BehaviorThresholds& th) {
  const std::size_t n = samples.size();
  std::vector<double> drift(n, 0.0);
  const double half = 0.5 * th.window_snapshots * th.snapshot_interval_s;
  for (std::size_t i = 0; i < n; ++i) {
    const double t0 = samples[i].snapshot_time;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    double count = 0;
    for (std::size_t j = 0; j < n; ++j) {
      const double dt = samples[j].snapshot_time - t0;
      if (std::abs(dt) > half) continue;
      sx += dt;
      sy += samples[j].centroid_delay;
      sxx += dt * dt;
      sxy += dt * samples[j].centroid_delay;
      count += 1;
    }
    const double denom = count * sxx - sx * sx;
    drift[i] = denom > 0.0 ? (count * sxy - sx * sy) / denom : 0.0;
  }
  return drift;
}

}  // namespace detail

/// Segments one trajectory into behaviors: approach / move_away / static
/// runs from the sliding-window drift, appear / disappear at birth and death,
/// and accelerate / decelerate annotations where the drift magnitude changes
/// fast inside a motion run.
inline std::vector<sem::BehaviorSemantic> classify_behavior(
    const track::Trajectory& tr,
    const std::unordered_map<std::string, const sem::StatusSemantic*>& status_of_cluster,
    const BehaviorThresholds& th) {
  if (tr.samples.empty()) throw InvalidArgument("trajectory has no samples");

  std::vector<const sem::StatusSemantic*> sample_status(tr.samples.size());
  for (std::size_t i = 0; i < tr.samples.size(); ++i) {
    auto it = status_of_cluster.find(tr.samples[i].cluster_id);
    if (it == status_of_cluster.end())
      throw InvalidArgument("no status for cluster " + tr.samples[i].cluster_id);
    sample_status[i] = it->second;
  }

  std::vector<sem::BehaviorSemantic> out;
  int counter = 0;
  auto emit = [&](sem::BehaviorKind kind, std::size_t first, std::size_t last) {
    sem::BehaviorSemantic b;
    b.id = tr.id + "-b" + std::to_string(counter++);
    b.kind = kind;
    b.trajectory = tr.id;
    b.start_time = tr.samples[first].snapshot_time;
    b.duration =
        std::max(tr.samples[last].snapshot_time - b.start_time, th.snapshot_interval_s);
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (std::size_t i = first; i <= last; ++i) {
      b.statuses.push_back(sample_status[i]->id);
      lo = std::min(lo, sample_status[i]->delays.front());
      hi = std::max(hi, sample_status[i]->delays.back());
    }
    b.delay_start = lo;
    b.delay_coverage = hi - lo;
    out.push_back(std::move(b));
  };

  const std::size_t n = tr.samples.size();
  emit(sem::BehaviorKind::appear, 0, 0);

  const auto drift = detail::local_drift(tr.samples, th);
  const double eps = th.eps_ns_per_s * 1e-9;
  auto kind_of = [&](double d) {
    if (d < -eps) return sem::BehaviorKind::approach;
    if (d > eps) return sem::BehaviorKind::move_away;
    return sem::BehaviorKind::static_;
  };

  std::vector<sem::BehaviorKind> kinds(n);
  for (std::size_t i = 0; i < n; ++i) kinds[i] = kind_of(drift[i]);
  // majority-of-five smoothing: single-sample flickers at an interference
  // fade must not split a motion run
  if (n >= 5) {
    std::vector<sem::BehaviorKind> smoothed(kinds);
    for (std::size_t i = 2; i + 2 < n; ++i) {
      int votes[3] = {0, 0, 0};
      for (std::size_t j = i - 2; j <= i + 2; ++j) {
        if (kinds[j] == sem::BehaviorKind::approach) ++votes[0];
        else if (kinds[j] == sem::BehaviorKind::move_away) ++votes[1];
        else ++votes[2];
      }
      if (votes[0] >= 3) smoothed[i] = sem::BehaviorKind::approach;
      else if (votes[1] >= 3) smoothed[i] = sem::BehaviorKind::move_away;
      else if (votes[2] >= 3) smoothed[i] = sem::BehaviorKind::static_;
    }
    kinds = std::move(smoothed);
  }

  std::size_t run_start = 0;
  for (std::size_t i = 1; i <= n; ++i) {
    if (i < n && kinds[i] == kinds[run_start]) continue;
    const std::size_t run_end = i - 1;
    const auto kind = kinds[run_start];
    emit(kind, run_start, run_end);

    // drift-change annotations inside motion runs: the |drift| change is
    // measured across one full estimation window so estimator jitter stays
    // below the threshold
    if (kind != sem::BehaviorKind::static_) {
      const double delta = th.accel_delta_ns_per_s2 * 1e-9;
      const double span = th.window_snapshots * th.snapshot_interval_s;
      std::optional<sem::BehaviorKind> mark_kind;
      std::size_t mark_start = 0;
      auto flush = [&](std::size_t upto) {
        if (mark_kind) emit(*mark_kind, mark_start, upto);
        mark_kind.reset();
      };
      for (std::size_t j = run_start; j < run_end; ++j) {
        std::size_t ahead = j;
        while (ahead < run_end &&
               tr.samples[ahead].snapshot_time - tr.samples[j].snapshot_time < span)
          ++ahead;
        const double dt = tr.samples[ahead].snapshot_time - tr.samples[j].snapshot_time;
        if (!(dt >= span)) break;  // run too short for another full window
        const double change = (std::abs(drift[ahead]) - std::abs(drift[j])) / dt;
        std::optional<sem::BehaviorKind> now;
        if (change > delta) now = sem::BehaviorKind::accelerate;
        else if (change < -delta) now = sem::BehaviorKind::decelerate;
        if (now != mark_kind) {
          flush(j);
          mark_kind = now;
          mark_start = j;
        }
      }
      flush(run_end);
    }
    run_start = i;
  }

  emit(sem::BehaviorKind::disappear, n - 1, n - 1);
  std::stable_sort(out.begin(), out.end(),
                   [](const sem::BehaviorSemantic& a, const sem::BehaviorSemantic& b) {
                     return a.start_time < b.start_time;
                   });
  return out;
}

/// Declarative composition rule. Level 0 fires on co-occurring
/// (status label, behavior kind) pairs; level >= 1 fires on an ordered
/// sequence of previously produced event labels.
struct EventRule {
  std::string name;
  int level = 0;
  std::vector<std::pair<std::string, sem::BehaviorKind>> pattern;  // level 0
  std::vector<std::string> sequence;                               // level >= 1
  double min_overlap_s = 0.0;
  double max_seq_gap_s = std::numeric_limits<double>::infinity();
  std::string produces;
};

inline void validate_rules(const std::vector<EventRule>& rules) {
  std::map<std::string, int> produced;  // label -> lowest producing level
  for (const auto& r : rules) {
    if (r.produces.empty()) throw InvalidArgument("rule produces no label: " + r.name);
    if (r.level == 0) {
      if (r.pattern.empty()) throw InvalidArgument("level-0 rule has empty pattern: " + r.name);
    } else if (r.level >= 1) {
      if (r.sequence.empty()) throw InvalidArgument("sequence rule has empty sequence: " + r.name);
      for (const auto& ref : r.sequence) {
        auto it = produced.find(ref);
        if (it == produced.end())
          throw InvalidArgument("rule '" + r.name + "' references unknown event '" + ref + "'");
        if (it->second >= r.level)
          throw InvalidArgument("rule '" + r.name + "' references non-lower-level event '" + ref +
                                "'");
      }
    } else {
      throw InvalidArgument("negative rule level: " + r.name);
    }
    auto it = produced.find(r.produces);
    if (it == produced.end() || r.level < it->second) produced[r.produces] = r.level;
  }
}

inline std::vector<EventRule> rules_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "chansem-rules") throw FormatError("not a rules file");
  std::vector<EventRule> rules;
  for (const auto& rj : j.at("rules")) {
    EventRule r;
    r.name = rj.at("name").get<std::string>();
    r.level = rj.at("level").get<int>();
    r.produces = rj.value("produces", r.name);
    if (rj.contains("pattern")) {
      for (const auto& p : rj.at("pattern")) {
        const auto kind = sem::behavior_kind_from_string(p[1].get<std::string>());
        if (!kind) throw FormatError("unknown behavior kind in rule " + r.name);
        r.pattern.emplace_back(p[0].get<std::string>(), *kind);
      }
    }
    if (rj.contains("sequence")) r.sequence = rj.at("sequence").get<std::vector<std::string>>();
    r.min_overlap_s = rj.value("min_overlap_s", 0.0);
    if (rj.contains("max_seq_gap_s")) r.max_seq_gap_s = rj.at("max_seq_gap_s").get<double>();
    rules.push_back(std::move(r));
  }
  validate_rules(rules);
  return rules;
}

inline std::vector<EventRule> load_rules(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open rules file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("rules parse error: ") + e.what());
  }
  return rules_from_json(j);
}

namespace detail {

// A behavior carries the label of its member statuses; the majority label
// wins, ties break lexicographically.
inline std::string behavior_label(
    const sem::BehaviorSemantic& b,
    const std::unordered_map<std::string, const sem::StatusSemantic*>& status_by_id) {
  std::map<std::string, int> votes;
  for (const auto& sid : b.statuses) {
    auto it = status_by_id.find(sid);
    if (it != status_by_id.end()) ++votes[it->second->label];
  }
  std::string best;
  int best_votes = 0;
  for (const auto& [label, count] : votes) {
    if (count > best_votes) {
      best = label;
      best_votes = count;
    }
  }
  return best;
}

struct Interval {
  double lo, hi;
};

}  // namespace detail

/// Applies the rules, in order, to the behavior timeline. Level-0 rules fire
/// once per maximal interval where every pattern pair co-occurs with at
/// least `min_overlap_s`; sequence rules fire on each non-overlapping,
/// earliest-first ordered occurrence of their sub-event labels.
inline std::vector<sem::EventSemantic> compose_events(
    const std::vector<sem::BehaviorSemantic>& behaviors,
    const std::vector<sem::StatusSemantic>& statuses, const std::vector<EventRule>& rules) {
  validate_rules(rules);

  std::unordered_map<std::string, const sem::StatusSemantic*> status_by_id;
  for (const auto& s : statuses) status_by_id.emplace(s.id, &s);

  std::vector<std::string> labels(behaviors.size());
  for (std::size_t i = 0; i < behaviors.size(); ++i)
    labels[i] = detail::behavior_label(behaviors[i], status_by_id);

  std::vector<sem::EventSemantic> events;
  int counter = 0;

  auto hull_event = [&](const std::string& label, std::vector<std::size_t> behavior_idx,
                        std::vector<std::string> sub_ids, int level) {
    sem::EventSemantic e;
    e.id = "e" + std::to_string(counter++);
    e.label = label;
    e.level = level;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    std::sort(behavior_idx.begin(), behavior_idx.end());
    behavior_idx.erase(std::unique(behavior_idx.begin(), behavior_idx.end()), behavior_idx.end());
    for (auto i : behavior_idx) {
      e.behaviors.push_back(behaviors[i].id);
      lo = std::min(lo, behaviors[i].start_time);
      hi = std::max(hi, behaviors[i].end_time());
    }
    for (const auto& sid : sub_ids) {
      for (const auto& prev : events) {
        if (prev.id != sid) continue;
        lo = std::min(lo, prev.start_time);
        hi = std::max(hi, prev.end_time());
        break;
      }
    }
    e.sub_events = std::move(sub_ids);
    e.start_time = lo;
    e.duration = hi - lo;
    events.push_back(std::move(e));
  };

  for (const auto& rule : rules) {
    if (rule.level == 0) {
      // candidate behaviors per pattern pair
      std::vector<std::vector<std::size_t>> pools;
      bool feasible = true;
      for (const auto& [label, kind] : rule.pattern) {
        std::vector<std::size_t> pool;
        for (std::size_t i = 0; i < behaviors.size(); ++i)
          if (behaviors[i].kind == kind && labels[i] == label) pool.push_back(i);
        if (pool.empty()) {
          feasible = false;
          break;
        }
        pools.push_back(std::move(pool));
      }
      if (!feasible) continue;

      std::size_t product = 1;
      for (const auto& pool : pools) {
        product *= pool.size();
        if (product > 1000000) throw InvalidArgument("rule pattern too ambiguous: " + rule.name);
      }

      // every combination with a long-enough common overlap contributes
      struct Combo {
        detail::Interval overlap;
        std::vector<std::size_t> members;
      };
      std::vector<Combo> combos;
      std::vector<std::size_t> pick(pools.size(), 0);
      while (true) {
        double lo = -std::numeric_limits<double>::infinity();
        double hi = std::numeric_limits<double>::infinity();
        std::vector<std::size_t> members;
        for (std::size_t p = 0; p < pools.size(); ++p) {
          const auto& b = behaviors[pools[p][pick[p]]];
          lo = std::max(lo, b.start_time);
          hi = std::min(hi, b.end_time());
          members.push_back(pools[p][pick[p]]);
        }
        if (hi - lo >= rule.min_overlap_s && hi >= lo) combos.push_back({{lo, hi}, members});

        std::size_t p = 0;
        while (p < pools.size()) {
          if (++pick[p] < pools[p].size()) break;
          pick[p] = 0;
          ++p;
        }
        if (p == pools.size()) break;
      }
      if (combos.empty()) continue;

      // merge combos whose overlap windows touch into maximal intervals
      std::sort(combos.begin(), combos.end(),
                [](const Combo& a, const Combo& b) { return a.overlap.lo < b.overlap.lo; });
      detail::Interval current = combos[0].overlap;
      std::vector<std::size_t> members = combos[0].members;
      for (std::size_t i = 1; i <= combos.size(); ++i) {
        if (i < combos.size() && combos[i].overlap.lo <= current.hi) {
          current.hi = std::max(current.hi, combos[i].overlap.hi);
          members.insert(members.end(), combos[i].members.begin(), combos[i].members.end());
          continue;
        }
        hull_event(rule.produces, members, {}, 0);
        if (i < combos.size()) {
          current = combos[i].overlap;
          members = combos[i].members;
        }
      }
    } else {
      // ordered, non-overlapping occurrences of the sub-event label sequence,
      // matched earliest-first
      std::vector<bool> used(events.size(), false);

      auto attempt_chain = [&](std::size_t first) -> std::optional<std::vector<std::size_t>> {
        std::vector<std::size_t> chain{first};
        double prev_start = events[first].start_time;
        double prev_end = events[first].end_time();
        for (std::size_t pos = 1; pos < rule.sequence.size(); ++pos) {
          std::size_t found = events.size();
          for (std::size_t i = 0; i < events.size(); ++i) {
            if (used[i] || events[i].label != rule.sequence[pos]) continue;
            if (std::find(chain.begin(), chain.end(), i) != chain.end()) continue;
            if (events[i].start_time < prev_start) continue;
            if (std::max(0.0, events[i].start_time - prev_end) > rule.max_seq_gap_s) continue;
            if (found == events.size() || events[i].start_time < events[found].start_time)
              found = i;
          }
          if (found == events.size()) return std::nullopt;
          chain.push_back(found);
          prev_start = events[found].start_time;
          prev_end = events[found].end_time();
        }
        return chain;
      };

      while (true) {
        // first-position candidates in start order until one chain completes
        std::vector<std::size_t> firsts;
        for (std::size_t i = 0; i < events.size(); ++i)
          if (!used[i] && events[i].label == rule.sequence.front()) firsts.push_back(i);
        std::sort(firsts.begin(), firsts.end(), [&](std::size_t a, std::size_t b) {
          return events[a].start_time < events[b].start_time;
        });

        std::optional<std::vector<std::size_t>> chain;
        for (auto first : firsts) {
          chain = attempt_chain(first);
          if (chain) break;
        }
        if (!chain) break;

        int level = 0;
        std::vector<std::string> sub_ids;
        for (auto i : *chain) {
          used[i] = true;
          level = std::max(level, events[i].level + 1);
          sub_ids.push_back(events[i].id);
        }
        hull_event(rule.produces, {}, sub_ids, level);
        used.resize(events.size(), true);  // the freshly fired event is not reusable here
      }
    }
  }
  return events;
}

}  // namespace chansem::engine
