// SPDX-License-Identifier: Apache-2.0
// chansem - channel semantics characterization toolkit

#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "chansem/core.hpp"

namespace chansem::sem {

/// Per-snapshot description of one labeled scatterer: the delay/amplitude
/// footprint of the cluster it was derived from.
struct StatusSemantic {
  std::string id;
  std::string label;
  std::vector<double> delays;      // seconds, strictly ascending
  std::vector<double> amplitudes;  // linear magnitude, index-aligned with delays
  std::string source_cluster;
  double snapshot_time = 0.0;  // seconds
};

enum class BehaviorKind {
  approach,
  move_away,
  appear,
  disappear,
  accelerate,
  decelerate,
  static_,
};

inline const char* to_string(BehaviorKind k) {
  switch (k) {
    case BehaviorKind::approach: return "approach";
    case BehaviorKind::move_away: return "move_away";
    case BehaviorKind::appear: return "appear";
    case BehaviorKind::disappear: return "disappear";
    case BehaviorKind::accelerate: return "accelerate";
    case BehaviorKind::decelerate: return "decelerate";
    case BehaviorKind::static_: return "static";
  }
  return "static";
}

inline std::optional<BehaviorKind> behavior_kind_from_string(const std::string& s) {
  if (s == "approach") return BehaviorKind::approach;
  if (s == "move_away") return BehaviorKind::move_away;
  if (s == "appear") return BehaviorKind::appear;
  if (s == "disappear") return BehaviorKind::disappear;
  if (s == "accelerate") return BehaviorKind::accelerate;
  if (s == "decelerate") return BehaviorKind::decelerate;
  if (s == "static") return BehaviorKind::static_;
  return std::nullopt;
}

/// Motion pattern of one tracked cluster over a time/delay window.
struct BehaviorSemantic {
  std::string id;
  BehaviorKind kind = BehaviorKind::static_;
  double start_time = 0.0;      // t_n, seconds
  double duration = 0.0;        // T_n, seconds, > 0
  double delay_start = 0.0;     // tau_n, seconds
  double delay_coverage = 0.0;  // D_n, seconds
  std::vector<std::string> statuses;  // member StatusSemantic ids
  std::string trajectory;

  double end_time() const { return start_time + duration; }
};

/// Composition of behaviors (level 0) or of lower-level events (level >= 1).
struct EventSemantic {
  std::string id;
  std::string label;
  int level = 0;
  double start_time = 0.0;
  double duration = 0.0;
  std::vector<std::string> behaviors;
  std::vector<std::string> sub_events;

  double end_time() const { return start_time + duration; }
};

struct MapMeta {
  std::string scene;
  double snapshot_rate_hz = 0.0;
  double carrier_hz = 0.0;
  double bandwidth_hz = 0.0;
  int n_tones = 0;
};

/// The full three-level semantic description of one trace.
struct SemanticMap {
  std::vector<EventSemantic> events;
  std::vector<BehaviorSemantic> behaviors;
  std::vector<StatusSemantic> statuses;
  MapMeta meta;

  bool empty() const { return events.empty() && behaviors.empty() && statuses.empty(); }

  const StatusSemantic* find_status(const std::string& id) const {
    for (const auto& s : statuses)
      if (s.id == id) return &s;
    return nullptr;
  }
  const BehaviorSemantic* find_behavior(const std::string& id) const {
    for (const auto& b : behaviors)
      if (b.id == id) return &b;
    return nullptr;
  }
  const EventSemantic* find_event(const std::string& id) const {
    for (const auto& e : events)
      if (e.id == id) return &e;
    return nullptr;
  }
};

struct Violation {
  std::string record_id;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
};

namespace detail {

class MapIndex {
 public:
  explicit MapIndex(const SemanticMap& map) {
    for (const auto& s : map.statuses) statuses_.emplace(s.id, &s);
    for (const auto& b : map.behaviors) behaviors_.emplace(b.id, &b);
    for (const auto& e : map.events) events_.emplace(e.id, &e);
  }
  const StatusSemantic* status(const std::string& id) const {
    auto it = statuses_.find(id);
    return it == statuses_.end() ? nullptr : it->second;
  }
  const BehaviorSemantic* behavior(const std::string& id) const {
    auto it = behaviors_.find(id);
    return it == behaviors_.end() ? nullptr : it->second;
  }
  const EventSemantic* event(const std::string& id) const {
    auto it = events_.find(id);
    return it == events_.end() ? nullptr : it->second;
  }

 private:
  std::unordered_map<std::string, const StatusSemantic*> statuses_;
  std::unordered_map<std::string, const BehaviorSemantic*> behaviors_;
  std::unordered_map<std::string, const EventSemantic*> events_;
};

// Hull of an event's members: [min start, max end] over behaviors and
// sub-events. Empty optional when no member resolves.
inline std::optional<std::pair<double, double>> member_hull(const EventSemantic& e,
                                                            const MapIndex& index) {
  bool any = false;
  double lo = 0.0, hi = 0.0;
  auto absorb = [&](double s, double en) {
    if (!any) {
      lo = s;
      hi = en;
      any = true;
    } else {
      lo = std::min(lo, s);
      hi = std::max(hi, en);
    }
  };
  for (const auto& bid : e.behaviors) {
    if (const auto* b = index.behavior(bid)) absorb(b->start_time, b->end_time());
  }
  for (const auto& sid : e.sub_events) {
    if (const auto* s = index.event(sid)) absorb(s->start_time, s->end_time());
  }
  if (!any) return std::nullopt;
  return std::make_pair(lo, hi);
}

// Containment and hull comparisons tolerate one rounding step: windows are
// stored as (start, duration), so reconstructed endpoints can sit one ulp off
// the member extrema they were built from.
inline bool leq_eps(double a, double b) {
  return a <= b + 1e-12 * std::max({1.0, std::abs(a), std::abs(b)});
}

inline bool eq_eps(double a, double b) { return leq_eps(a, b) && leq_eps(b, a); }

}  // namespace detail

/// Checks every structural invariant of the map. Violations are data, not
/// errors: the report lists each one with the offending identifier.
inline ValidationReport validate_map(const SemanticMap& map) {
  ValidationReport report;
  auto add = [&](const std::string& id, std::string msg) {
    report.violations.push_back({id, std::move(msg)});
  };

  detail::MapIndex index(map);

  std::unordered_set<std::string> seen;
  for (const auto& s : map.statuses)
    if (!seen.insert("s:" + s.id).second) add(s.id, "duplicate status id");
  for (const auto& b : map.behaviors)
    if (!seen.insert("b:" + b.id).second) add(b.id, "duplicate behavior id");
  for (const auto& e : map.events)
    if (!seen.insert("e:" + e.id).second) add(e.id, "duplicate event id");

  for (const auto& s : map.statuses) {
    if (s.delays.empty()) add(s.id, "status has no delays");
    if (s.delays.size() != s.amplitudes.size())
      add(s.id, "delay/amplitude count mismatch");
    for (double d : s.delays)
      if (!(d >= 0.0)) add(s.id, "negative or non-finite delay");
    for (double a : s.amplitudes)
      if (!(a >= 0.0)) add(s.id, "negative or non-finite amplitude");
    for (std::size_t i = 1; i < s.delays.size(); ++i)
      if (!(s.delays[i] > s.delays[i - 1])) {
        add(s.id, "delays not strictly ascending");
        break;
      }
  }

  for (const auto& b : map.behaviors) {
    if (!(b.duration > 0.0)) add(b.id, "behavior duration not positive");
    if (!(b.delay_coverage >= 0.0)) add(b.id, "negative delay coverage");
    if (!(b.delay_start >= 0.0)) add(b.id, "negative delay start");
    if (b.statuses.empty()) add(b.id, "behavior has no member statuses");
    for (const auto& sid : b.statuses) {
      const auto* s = index.status(sid);
      if (s == nullptr) {
        add(b.id, "unresolved status reference: " + sid);
        continue;
      }
      if (!detail::leq_eps(b.start_time, s->snapshot_time) ||
          !detail::leq_eps(s->snapshot_time, b.end_time()))
        add(b.id, "member status " + sid + " outside time window");
      for (double d : s->delays)
        if (!detail::leq_eps(b.delay_start, d) ||
            !detail::leq_eps(d, b.delay_start + b.delay_coverage)) {
          add(b.id, "member status " + sid + " outside delay window");
          break;
        }
    }
  }

  for (const auto& e : map.events) {
    if (e.level < 0) add(e.id, "negative event level");
    for (const auto& bid : e.behaviors)
      if (index.behavior(bid) == nullptr) add(e.id, "unresolved behavior reference: " + bid);
    bool members_resolve = true;
    int max_sub_level = -1;
    for (const auto& sid : e.sub_events) {
      const auto* s = index.event(sid);
      if (s == nullptr) {
        add(e.id, "unresolved sub-event reference: " + sid);
        members_resolve = false;
        continue;
      }
      if (s->level >= e.level) add(e.id, "sub-event " + sid + " level not below parent");
      max_sub_level = std::max(max_sub_level, s->level);
    }
    if (e.level == 0) {
      if (!e.sub_events.empty()) add(e.id, "level-0 event has sub-events");
      if (e.behaviors.empty()) add(e.id, "level-0 event has no behaviors");
    } else {
      if (e.sub_events.empty()) add(e.id, "composed event has no sub-events");
      else if (members_resolve && max_sub_level != e.level - 1)
        add(e.id, "no sub-event at level directly below");
    }
    if (auto hull = detail::member_hull(e, index)) {
      if (!detail::eq_eps(e.start_time, hull->first) ||
          !detail::eq_eps(e.end_time(), hull->second))
        add(e.id, "event span is not the hull of its members");
    }
  }

  // Composition must be acyclic: no event may reach itself via sub-events.
  for (const auto& e : map.events) {
    std::unordered_set<std::string> visited;
    std::vector<const EventSemantic*> stack{&e};
    bool cyclic = false;
    while (!stack.empty() && !cyclic) {
      const EventSemantic* cur = stack.back();
      stack.pop_back();
      for (const auto& sid : cur->sub_events) {
        if (sid == e.id) {
          cyclic = true;
          break;
        }
        if (!visited.insert(sid).second) continue;
        if (const auto* s = index.event(sid)) stack.push_back(s);
      }
    }
    if (cyclic) add(e.id, "event is its own ancestor");
  }

  return report;
}

}  // namespace chansem::sem
