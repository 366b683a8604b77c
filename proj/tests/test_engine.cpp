// SPDX-License-Identifier: Apache-2.0
// chansem - channel semantics characterization toolkit

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "chansem/engine.hpp"
#include "test_support.hpp"

using namespace chansem;
using namespace chansem::engine;
using chansem::cluster::Cluster;
using chansem::sem::BehaviorKind;
using chansem::sem::BehaviorSemantic;
using chansem::sem::StatusSemantic;

namespace {

Cluster cl(const std::string& id, double t, double delay_ns, double power = 1.0) {
  chansem::dsp::Mpc m;
  m.delay_s = delay_ns * 1e-9;
  m.power = power;
  m.amplitude = std::sqrt(power);
  m.snapshot_time = t;
  return chansem::cluster::make_cluster(id, t, {m});
}

// Constant-rate synthetic trajectory sweeping delay linearly over a window,
// with one status per sample.
struct SyntheticTrack {
  track::Trajectory trajectory;
  std::vector<StatusSemantic> statuses;
  std::unordered_map<std::string, const StatusSemantic*> status_of_cluster;

  SyntheticTrack(const std::string& id, const std::string& label, double t0, double t1,
                 double delay0_ns, double delay1_ns, double rate_hz = 15.625) {
    trajectory.id = id;
    const double dt = 1.0 / rate_hz;
    int i = 0;
    for (double t = t0; t <= t1 + 1e-9; t += dt, ++i) {
      const double u = (t - t0) / (t1 - t0);
      const double delay = (delay0_ns + u * (delay1_ns - delay0_ns)) * 1e-9;
      const std::string cid = id + "-s" + std::to_string(i);
      trajectory.samples.push_back({t, cid, delay, 1.0});
      StatusSemantic s;
      s.id = "st-" + cid;
      s.label = label;
      s.delays = {delay};
      s.amplitudes = {1.0};
      s.source_cluster = cid;
      s.snapshot_time = t;
      statuses.push_back(std::move(s));
    }
    trajectory.birth_time = trajectory.samples.front().snapshot_time;
    trajectory.death_time = trajectory.samples.back().snapshot_time;
    for (auto& s : statuses) status_of_cluster.emplace(s.source_cluster, &s);
  }
};

BehaviorThresholds thresholds() {
  BehaviorThresholds th;
  th.snapshot_interval_s = 1.0 / 15.625;
  return th;
}

const BehaviorSemantic* find_kind(const std::vector<BehaviorSemantic>& behaviors,
                                  BehaviorKind kind) {
  for (const auto& b : behaviors)
    if (b.kind == kind) return &b;
  return nullptr;
}

std::size_t count_kind(const std::vector<BehaviorSemantic>& behaviors, BehaviorKind kind) {
  return static_cast<std::size_t>(
      std::count_if(behaviors.begin(), behaviors.end(),
                    [&](const BehaviorSemantic& b) { return b.kind == kind; }));
}

}  // namespace

TEST_CASE("ground-truth association labels by nearest delay", "[engine]") {
  sim::GroundTruth truth = {{"median barriers", 0, 22.15e-9, 0.1},
                            {"buildings", 4, 305.9e-9, 0.004}};

  const auto near = characterize_status(cl("c0", 1.0, 22.13), truth, "st0");
  CHECK(near.label == "median barriers");
  CHECK(near.source_cluster == "c0");
  CHECK(near.snapshot_time == 1.0);

  const auto far = characterize_status(cl("c1", 1.0, 305.7), truth, "st1");
  CHECK(far.label == "buildings");

  const auto none = characterize_status(cl("c2", 1.0, 150.0), truth, "st2");
  CHECK(none.label == kUnknownLabel);
}

TEST_CASE("label map association converts delay to one-way distance", "[engine]") {
  LabelMap map;
  LabelWindow barrier;
  barrier.distance_m = std::make_pair(3.0, 3.6);
  barrier.label = "median barriers";
  map.entries.push_back(barrier);
  LabelWindow building;
  building.delay_s = std::make_pair(300e-9, 310e-9);
  building.label = "buildings";
  map.entries.push_back(building);

  // 22.13 ns round trip is 3.32 m one way
  const auto s = characterize_status(cl("c0", 0.0, 22.13), map, "st0");
  CHECK(s.label == "median barriers");
  CHECK_THAT(delay_to_distance(22.13e-9), Catch::Matchers::WithinAbs(3.32, 0.01));

  CHECK(characterize_status(cl("c1", 0.0, 305.7), map, "st1").label == "buildings");
  CHECK(characterize_status(cl("c2", 0.0, 100.0), map, "st2").label == kUnknownLabel);
}

TEST_CASE("empty association yields the unknown label", "[engine]") {
  CHECK(characterize_status(cl("c0", 0.0, 50.0), LabelMap{}, "st0").label == kUnknownLabel);
  CHECK(characterize_status(cl("c0", 0.0, 50.0), sim::GroundTruth{}, "st0").label ==
        kUnknownLabel);
}

TEST_CASE("turn-in sweep classifies as one approach with the scripted window", "[engine]") {
  // delay 40 -> 15 ns over 17 -> 27 s
  SyntheticTrack track("t0", "vehicles", 17.0, 27.0, 40.0, 15.0);
  const auto behaviors = classify_behavior(track.trajectory, track.status_of_cluster,
                                           thresholds());

  REQUIRE(count_kind(behaviors, BehaviorKind::approach) == 1);
  const auto* approach = find_kind(behaviors, BehaviorKind::approach);
  CHECK_THAT(approach->start_time, Catch::Matchers::WithinAbs(17.0, 0.5));
  CHECK_THAT(approach->duration, Catch::Matchers::WithinAbs(10.0, 1.0));
  CHECK_THAT(approach->delay_start * 1e9, Catch::Matchers::WithinAbs(15.0, 1.0));
  CHECK_THAT((approach->delay_start + approach->delay_coverage) * 1e9,
             Catch::Matchers::WithinAbs(40.0, 1.0));

  CHECK(count_kind(behaviors, BehaviorKind::move_away) == 0);
  CHECK(count_kind(behaviors, BehaviorKind::appear) == 1);
  CHECK(count_kind(behaviors, BehaviorKind::disappear) == 1);
  CHECK(find_kind(behaviors, BehaviorKind::appear)->start_time ==
        track.trajectory.birth_time);
}

TEST_CASE("turn-out sweep classifies as one move-away covering 15-50 ns", "[engine]") {
  // delay 15 -> 50 ns over 51 -> 61 s
  SyntheticTrack track("t1", "vehicles", 51.0, 61.0, 15.0, 50.0);
  const auto behaviors = classify_behavior(track.trajectory, track.status_of_cluster,
                                           thresholds());

  REQUIRE(count_kind(behaviors, BehaviorKind::move_away) == 1);
  const auto* away = find_kind(behaviors, BehaviorKind::move_away);
  CHECK_THAT(away->delay_start * 1e9, Catch::Matchers::WithinAbs(15.0, 1.0));
  CHECK_THAT(away->delay_coverage * 1e9, Catch::Matchers::WithinAbs(35.0, 1.0));
  CHECK(count_kind(behaviors, BehaviorKind::approach) == 0);
}

TEST_CASE("constant delay gives a single static run plus the endpoints", "[engine]") {
  SyntheticTrack track("t2", "trees", 0.0, 10.0, 80.0, 80.0);
  const auto behaviors = classify_behavior(track.trajectory, track.status_of_cluster,
                                           thresholds());
  REQUIRE(behaviors.size() == 3);
  CHECK(count_kind(behaviors, BehaviorKind::static_) == 1);
  CHECK(count_kind(behaviors, BehaviorKind::appear) == 1);
  CHECK(count_kind(behaviors, BehaviorKind::disappear) == 1);
  const auto* body = find_kind(behaviors, BehaviorKind::static_);
  CHECK(body->delay_coverage == 0.0);
  CHECK(body->statuses.size() == track.statuses.size());
}

TEST_CASE("a drift step inside a motion run is annotated", "[engine]") {
  // approach at -1 ns/s for 8 s, then -5 ns/s for 8 s
  track::Trajectory tr;
  tr.id = "t3";
  std::vector<StatusSemantic> statuses;
  const double rate = 15.625;
  int i = 0;
  for (double t = 0.0; t <= 16.0 + 1e-9; t += 1.0 / rate, ++i) {
    const double delay_ns = t < 8.0 ? 100.0 - 1.0 * t : 92.0 - 5.0 * (t - 8.0);
    const std::string cid = "t3-s" + std::to_string(i);
    tr.samples.push_back({t, cid, delay_ns * 1e-9, 1.0});
    StatusSemantic s;
    s.id = "st-" + cid;
    s.label = "vehicles";
    s.delays = {delay_ns * 1e-9};
    s.amplitudes = {1.0};
    s.source_cluster = cid;
    s.snapshot_time = t;
    statuses.push_back(std::move(s));
  }
  tr.birth_time = 0.0;
  tr.death_time = tr.samples.back().snapshot_time;
  std::unordered_map<std::string, const StatusSemantic*> by_cluster;
  for (auto& s : statuses) by_cluster.emplace(s.source_cluster, &s);

  const auto behaviors = classify_behavior(tr, by_cluster, thresholds());
  CHECK(count_kind(behaviors, BehaviorKind::approach) == 1);
  CHECK(count_kind(behaviors, BehaviorKind::accelerate) >= 1);
  CHECK(count_kind(behaviors, BehaviorKind::decelerate) == 0);
}

TEST_CASE("time reversal swaps approach and move-away", "[engine]") {
  SyntheticTrack fwd("t4", "vehicles", 0.0, 10.0, 60.0, 30.0);
  const auto fb = classify_behavior(fwd.trajectory, fwd.status_of_cluster, thresholds());

  SyntheticTrack bwd("t5", "vehicles", 0.0, 10.0, 30.0, 60.0);
  const auto bb = classify_behavior(bwd.trajectory, bwd.status_of_cluster, thresholds());

  CHECK(count_kind(fb, BehaviorKind::approach) == count_kind(bb, BehaviorKind::move_away));
  CHECK(count_kind(fb, BehaviorKind::move_away) == count_kind(bb, BehaviorKind::approach));
  REQUIRE(count_kind(fb, BehaviorKind::approach) == 1);

  // the sampled ramps mirror each other only up to one sample step of delay
  const auto* a = find_kind(fb, BehaviorKind::approach);
  const auto* m = find_kind(bb, BehaviorKind::move_away);
  CHECK_THAT(a->delay_start, Catch::Matchers::WithinAbs(m->delay_start, 0.25e-9));
  CHECK_THAT(a->delay_coverage, Catch::Matchers::WithinAbs(m->delay_coverage, 0.5e-9));
}

TEST_CASE("emitted behaviors satisfy the window invariants", "[engine]") {
  SyntheticTrack track("t6", "vehicles", 17.0, 27.0, 40.0, 15.0);
  const auto behaviors = classify_behavior(track.trajectory, track.status_of_cluster,
                                           thresholds());
  sem::SemanticMap map;
  map.statuses = track.statuses;
  map.behaviors = behaviors;
  const auto report = sem::validate_map(map);
  for (const auto& v : report.violations) INFO(v.record_id << ": " << v.message);
  CHECK(report.ok());
}

namespace {

// Behavior timeline mirroring the acceptance scene:
//   barrier approach [17,27] + vehicle approach [17,27]  -> turn onto road
//   yielder approach [33,43] + barrier static [27,60]    -> yield to other vehicles
//   vehicle move_away [51,60]                            -> turn right to exit road
struct ComposedFixture {
  std::vector<StatusSemantic> statuses;
  std::vector<BehaviorSemantic> behaviors;

  void add(const std::string& label, BehaviorKind kind, double t0, double t1, double d0_ns,
           double d1_ns) {
    const int idx = static_cast<int>(behaviors.size());
    StatusSemantic s;
    s.id = "fs" + std::to_string(idx);
    s.label = label;
    s.delays = {std::min(d0_ns, d1_ns) * 1e-9};
    s.amplitudes = {1.0};
    s.source_cluster = "fc" + std::to_string(idx);
    s.snapshot_time = t0;
    statuses.push_back(s);

    BehaviorSemantic b;
    b.id = "fb" + std::to_string(idx);
    b.kind = kind;
    b.start_time = t0;
    b.duration = t1 - t0;
    b.delay_start = std::min(d0_ns, d1_ns) * 1e-9;
    b.delay_coverage = std::abs(d1_ns - d0_ns) * 1e-9;
    b.statuses = {s.id};
    b.trajectory = "ft" + std::to_string(idx);
    behaviors.push_back(b);
  }
};

}  // namespace

TEST_CASE("overlapping approaches compose the scripted event chain", "[engine][rules]") {
  ComposedFixture fx;
  fx.add("median barriers", BehaviorKind::approach, 17.0, 27.0, 35.0, 22.1);
  fx.add("vehicles", BehaviorKind::approach, 17.0, 27.0, 40.0, 15.0);
  fx.add("median barriers", BehaviorKind::static_, 27.0, 60.0, 22.1, 22.1);
  fx.add("vehicles", BehaviorKind::approach, 33.0, 43.0, 140.0, 110.0);
  fx.add("vehicles", BehaviorKind::move_away, 51.0, 60.0, 15.0, 50.0);
  fx.add("median barriers", BehaviorKind::static_, 0.0, 17.0, 35.0, 35.0);

  const auto rules = load_rules(testsupport::repo_path("rules/fig6.json"));
  const auto events = compose_events(fx.behaviors, fx.statuses, rules);

  REQUIRE(events.size() == 4);
  auto find_label = [&](const std::string& label) -> const sem::EventSemantic* {
    for (const auto& e : events)
      if (e.label == label) return &e;
    return nullptr;
  };

  const auto* turn_on = find_label("turn onto road");
  REQUIRE(turn_on != nullptr);
  CHECK(turn_on->level == 0);
  CHECK(turn_on->start_time == 17.0);
  CHECK(turn_on->end_time() == 27.0);
  CHECK(turn_on->behaviors.size() == 2);

  const auto* yield = find_label("yield to other vehicles");
  REQUIRE(yield != nullptr);
  CHECK(yield->level == 0);
  CHECK(yield->start_time == 27.0);  // hull includes the static run

  const auto* turn_right = find_label("turn right to exit road");
  REQUIRE(turn_right != nullptr);
  CHECK(turn_right->level == 0);
  CHECK(turn_right->start_time == 51.0);

  const auto* driving = find_label("driving through road");
  REQUIRE(driving != nullptr);
  CHECK(driving->level == 1);
  CHECK(driving->sub_events.size() == 3);
  CHECK(driving->start_time == 17.0);
  CHECK(driving->end_time() == 60.0);
}

TEST_CASE("empty behavior timeline composes no events", "[engine][rules]") {
  const auto rules = load_rules(testsupport::repo_path("rules/fig6.json"));
  CHECK(compose_events({}, {}, rules).empty());
}

TEST_CASE("non-overlapping pattern pairs do not fire", "[engine][rules]") {
  ComposedFixture fx;
  fx.add("median barriers", BehaviorKind::approach, 17.0, 27.0, 35.0, 22.1);
  fx.add("vehicles", BehaviorKind::approach, 29.0, 39.0, 40.0, 15.0);  // too late

  std::vector<EventRule> rules;
  EventRule r;
  r.name = "turn onto road";
  r.produces = r.name;
  r.level = 0;
  r.pattern = {{"median barriers", BehaviorKind::approach}, {"vehicles", BehaviorKind::approach}};
  r.min_overlap_s = 3.0;
  rules.push_back(r);

  CHECK(compose_events(fx.behaviors, fx.statuses, rules).empty());
}

TEST_CASE("adding a rule never removes fired events", "[engine][rules]") {
  ComposedFixture fx;
  fx.add("median barriers", BehaviorKind::approach, 17.0, 27.0, 35.0, 22.1);
  fx.add("vehicles", BehaviorKind::approach, 17.0, 27.0, 40.0, 15.0);
  fx.add("vehicles", BehaviorKind::move_away, 51.0, 60.0, 15.0, 50.0);

  std::vector<EventRule> rules;
  EventRule r1;
  r1.name = "turn onto road";
  r1.produces = r1.name;
  r1.level = 0;
  r1.pattern = {{"median barriers", BehaviorKind::approach}, {"vehicles", BehaviorKind::approach}};
  r1.min_overlap_s = 2.0;
  rules.push_back(r1);

  const auto base = compose_events(fx.behaviors, fx.statuses, rules);

  EventRule r2;
  r2.name = "turn right to exit road";
  r2.produces = r2.name;
  r2.level = 0;
  r2.pattern = {{"vehicles", BehaviorKind::move_away}};
  r2.min_overlap_s = 2.0;
  rules.push_back(r2);

  const auto more = compose_events(fx.behaviors, fx.statuses, rules);
  CHECK(more.size() == base.size() + 1);
  for (const auto& e : base) {
    bool found = false;
    for (const auto& e2 : more)
      if (e2.label == e.label && e2.start_time == e.start_time) found = true;
    CHECK(found);
  }
}

TEST_CASE("rules referencing unknown events are rejected", "[engine][rules]") {
  std::vector<EventRule> rules;
  EventRule r;
  r.name = "broken";
  r.produces = "broken";
  r.level = 1;
  r.sequence = {"no such event"};
  rules.push_back(r);
  CHECK_THROWS_AS(validate_rules(rules), InvalidArgument);
}

TEST_CASE("separate co-occurrence windows fire separate events", "[engine][rules]") {
  ComposedFixture fx;
  fx.add("vehicles", BehaviorKind::move_away, 10.0, 20.0, 15.0, 30.0);
  fx.add("vehicles", BehaviorKind::move_away, 40.0, 50.0, 15.0, 30.0);

  std::vector<EventRule> rules;
  EventRule r;
  r.name = "turn right to exit road";
  r.produces = r.name;
  r.level = 0;
  r.pattern = {{"vehicles", BehaviorKind::move_away}};
  r.min_overlap_s = 2.0;
  rules.push_back(r);

  const auto events = compose_events(fx.behaviors, fx.statuses, rules);
  REQUIRE(events.size() == 2);
  CHECK(events[0].start_time == 10.0);
  CHECK(events[1].start_time == 40.0);
}
