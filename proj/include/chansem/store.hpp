// SPDX-License-Identifier: Apache-2.0
// chansem - channel semantics characterization toolkit

#pragma once

#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "chansem/semantics.hpp"
#include "chansem/semantics_io.hpp"

namespace chansem::sem {

struct StoreReceipt {
  std::size_t events = 0;
  std::size_t behaviors = 0;
  std::size_t statuses = 0;

  bool operator==(const StoreReceipt&) const = default;
};

struct TimeInterval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Conjunctive query over stored records. Every present field must be
/// satisfied. Time matching is by interval overlap, not containment.
struct SemanticQuery {
  std::optional<TimeInterval> time;
  std::optional<std::string> label;
  std::optional<BehaviorKind> kind;
  std::optional<std::pair<double, double>> delay_window;  // seconds
  std::optional<std::string> ancestors_of;    // event id
  std::optional<std::string> descendants_of;  // event id
};

using SemanticRecord = std::variant<StatusSemantic, BehaviorSemantic, EventSemantic>;

inline double record_start(const SemanticRecord& r) {
  return std::visit(
      [](const auto& v) -> double {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, StatusSemantic>)
          return v.snapshot_time;
        else
          return v.start_time;
      },
      r);
}

inline const std::string& record_id(const SemanticRecord& r) {
  return std::visit([](const auto& v) -> const std::string& { return v.id; }, r);
}

/// Append-log persistent store of semantic records, keyed by id. Writes are
/// serialized by the caller (single-writer contract); the in-memory index
/// may be read concurrently between writes.
class SemanticStore {
 public:
  /// In-memory store without persistence.
  SemanticStore() = default;

  /// Opens (and creates if absent) a JSON-lines log at `path` and replays it.
  static SemanticStore open(const std::string& path) {
    SemanticStore store;
    store.path_ = path;
    std::ifstream in(path, std::ios::binary);
    if (in) store.replay(in);
    // probe writability early
    std::ofstream out(path, std::ios::binary | std::ios::app);
    if (!out) throw StoreError("storage unavailable: " + path);
    return store;
  }

  /// Loads any record JSON-lines file (store log or exported map) read-only.
  static SemanticStore open_readonly(const std::string& path) {
    SemanticStore store;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw StoreError("storage unavailable: " + path);
    store.replay(in);
    return store;
  }

  /// Validates and persists a map. Idempotent: records identical to stored
  /// ones are skipped, equal ids with new content are overwritten.
  StoreReceipt store_semantics(const SemanticMap& map) {
    const auto report = validate_map(map);
    if (!report.ok()) {
      std::string msg = "invalid map:";
      for (const auto& v : report.violations) msg += " [" + v.record_id + "] " + v.message + ";";
      throw StoreError(msg);
    }

    std::vector<nlohmann::json> pending;
    for (const auto& s : map.statuses) upsert(statuses_, s.id, to_json(s), pending);
    for (const auto& b : map.behaviors) upsert(behaviors_, b.id, to_json(b), pending);
    for (const auto& e : map.events) upsert(events_, e.id, to_json(e), pending);
    if (!map.meta.scene.empty() || meta_.is_null()) meta_ = meta_to_json(map.meta);

    StoreReceipt receipt{map.events.size(), map.behaviors.size(), map.statuses.size()};
    if (!path_.empty()) {
      std::ofstream out(path_, std::ios::binary | std::ios::app);
      if (!out) throw StoreError("storage unavailable: " + path_);
      for (const auto& j : pending) out << j.dump() << '\n';
      out << nlohmann::json{{"type", "commit"},
                            {"receipt",
                             {{"events", receipt.events},
                              {"behaviors", receipt.behaviors},
                              {"statuses", receipt.statuses}}}}
                 .dump()
          << '\n';
      ++commits_;
      if (commits_ % kSnapshotEvery == 0) out << snapshot_json().dump() << '\n';
      if (!out) throw StoreError("write failed: " + path_);
    }
    return receipt;
  }

  StoreReceipt counts() const {
    return {events_.size(), behaviors_.size(), statuses_.size()};
  }

  SemanticMap to_map() const {
    SemanticMap map;
    map.meta = meta_from_json(meta_.is_object() ? meta_ : nlohmann::json::object());
    for (const auto& [id, j] : statuses_) map.statuses.push_back(status_from_json(j));
    for (const auto& [id, j] : behaviors_) map.behaviors.push_back(behavior_from_json(j));
    for (const auto& [id, j] : events_) map.events.push_back(event_from_json(j));
    canonicalize(map);
    return map;
  }

 private:
  static constexpr std::size_t kSnapshotEvery = 10;

  using RecordsById = std::map<std::string, nlohmann::json>;

  void upsert(RecordsById& table, const std::string& id, nlohmann::json j,
              std::vector<nlohmann::json>& pending) {
    auto it = table.find(id);
    if (it != table.end() && it->second == j) return;  // unchanged, nothing to log
    pending.push_back(j);
    table[id] = std::move(j);
  }

  nlohmann::json snapshot_json() const {
    nlohmann::json statuses = nlohmann::json::array();
    nlohmann::json behaviors = nlohmann::json::array();
    nlohmann::json events = nlohmann::json::array();
    for (const auto& [id, j] : statuses_) statuses.push_back(j);
    for (const auto& [id, j] : behaviors_) behaviors.push_back(j);
    for (const auto& [id, j] : events_) events.push_back(j);
    return {{"type", "snapshot"},
            {"meta", meta_.is_object() ? meta_ : nlohmann::json::object()},
            {"statuses", statuses},
            {"behaviors", behaviors},
            {"events", events}};
  }

  void replay(std::istream& in) {
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
      } catch (const nlohmann::json::exception& e) {
        throw FormatError("store line " + std::to_string(lineno) + ": " + e.what());
      }
      const std::string type = j.value("type", "");
      if (type == "status") {
        statuses_[j.at("id").get<std::string>()] = j;
      } else if (type == "behavior") {
        behaviors_[j.at("id").get<std::string>()] = j;
      } else if (type == "event") {
        events_[j.at("id").get<std::string>()] = j;
      } else if (type == "meta") {
        meta_ = j;
      } else if (type == "commit") {
        ++commits_;
      } else if (type == "snapshot") {
        statuses_.clear();
        behaviors_.clear();
        events_.clear();
        meta_ = j.value("meta", nlohmann::json::object());
        for (const auto& r : j.at("statuses")) statuses_[r.at("id").get<std::string>()] = r;
        for (const auto& r : j.at("behaviors")) behaviors_[r.at("id").get<std::string>()] = r;
        for (const auto& r : j.at("events")) events_[r.at("id").get<std::string>()] = r;
      } else {
        throw FormatError("store line " + std::to_string(lineno) + ": unknown record type");
      }
    }
  }

  friend std::vector<SemanticRecord> query(const SemanticStore&, const SemanticQuery&);

  std::string path_;
  RecordsById statuses_;
  RecordsById behaviors_;
  RecordsById events_;
  nlohmann::json meta_;
  std::size_t commits_ = 0;
};

namespace detail {

inline bool overlaps(double lo1, double hi1, double lo2, double hi2) {
  return lo1 <= hi2 && hi1 >= lo2;
}

// All events reachable from `id` through sub-event references.
inline std::vector<std::string> event_descendants(const SemanticMap& map, const std::string& id) {
  MapIndex index(map);
  if (index.event(id) == nullptr) throw InvalidArgument("unknown event id: " + id);
  std::vector<std::string> order;
  std::unordered_set<std::string> seen;
  std::vector<const EventSemantic*> stack{index.event(id)};
  while (!stack.empty()) {
    const EventSemantic* cur = stack.back();
    stack.pop_back();
    for (const auto& sid : cur->sub_events) {
      if (!seen.insert(sid).second) continue;
      order.push_back(sid);
      if (const auto* s = index.event(sid)) stack.push_back(s);
    }
  }
  return order;
}

// All events from which `id` is reachable.
inline std::vector<std::string> event_ancestors(const SemanticMap& map, const std::string& id) {
  MapIndex index(map);
  if (index.event(id) == nullptr) throw InvalidArgument("unknown event id: " + id);
  std::vector<std::string> out;
  for (const auto& e : map.events) {
    if (e.id == id) continue;
    for (const auto& candidate : event_descendants(map, e.id)) {
      if (candidate == id) {
        out.push_back(e.id);
        break;
      }
    }
  }
  return out;
}

}  // namespace detail

/// Evaluates `q` against a map: the reference predicate shared by the store
/// and by direct map queries.
inline std::vector<SemanticRecord> query_map(const SemanticMap& map, const SemanticQuery& q) {
  std::unordered_set<std::string> ancestor_set, descendant_set;
  if (q.ancestors_of) {
    for (auto& id : detail::event_ancestors(map, *q.ancestors_of)) ancestor_set.insert(id);
  }
  if (q.descendants_of) {
    for (auto& id : detail::event_descendants(map, *q.descendants_of)) descendant_set.insert(id);
  }

  std::vector<SemanticRecord> out;

  auto time_ok = [&](double lo, double hi) {
    return !q.time || detail::overlaps(lo, hi, q.time->lo, q.time->hi);
  };

  for (const auto& s : map.statuses) {
    if (q.kind || q.ancestors_of || q.descendants_of) continue;
    if (q.label && s.label != *q.label) continue;
    if (!time_ok(s.snapshot_time, s.snapshot_time)) continue;
    if (q.delay_window) {
      if (s.delays.empty()) continue;
      if (!detail::overlaps(s.delays.front(), s.delays.back(), q.delay_window->first,
                            q.delay_window->second))
        continue;
    }
    out.emplace_back(s);
  }

  for (const auto& b : map.behaviors) {
    if (q.label || q.ancestors_of || q.descendants_of) continue;
    if (q.kind && b.kind != *q.kind) continue;
    if (!time_ok(b.start_time, b.end_time())) continue;
    if (q.delay_window &&
        !detail::overlaps(b.delay_start, b.delay_start + b.delay_coverage,
                          q.delay_window->first, q.delay_window->second))
      continue;
    out.emplace_back(b);
  }

  for (const auto& e : map.events) {
    if (q.kind || q.delay_window) continue;
    if (q.label && e.label != *q.label) continue;
    if (!time_ok(e.start_time, e.end_time())) continue;
    if (q.ancestors_of && ancestor_set.count(e.id) == 0) continue;
    if (q.descendants_of && descendant_set.count(e.id) == 0) continue;
    out.emplace_back(e);
  }

  std::stable_sort(out.begin(), out.end(), [](const SemanticRecord& a, const SemanticRecord& b) {
    const double sa = record_start(a), sb = record_start(b);
    if (sa != sb) return sa < sb;
    return record_id(a) < record_id(b);
  });
  return out;
}

inline std::vector<SemanticRecord> query(const SemanticStore& store, const SemanticQuery& q) {
  return query_map(store.to_map(), q);
}

inline nlohmann::json record_to_json(const SemanticRecord& r) {
  return std::visit([](const auto& v) { return to_json(v); }, r);
}

}  // namespace chansem::sem
