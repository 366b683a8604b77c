// SPDX-License-Identifier: Apache-2.0
// chansem - channel semantics characterization toolkit
//
// Command-line front end: simulate | characterize | query | validate.
// Exit codes: 0 success, 1 pipeline failure, 2 usage or input error.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "chansem/chansem.hpp"

namespace fs = std::filesystem;
using namespace chansem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitPipeline = 1;
constexpr int kExitUsage = 2;

struct SimulateArgs {
  std::string scene_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  bool no_ground_truth = false;
};

int cmd_simulate(const SimulateArgs& args) {
  sim::Scene scene = sim::load_scene(args.scene_path);
  sim::validate_scene(scene);
  if (args.seed) scene.rng_seed = *args.seed;

  fs::create_directories(args.out_dir);
  log_info("simulating scene '%s' (%zu scatterers)", scene.name.c_str(),
           scene.scatterers.size());
  const auto trace = sim::run_scene(scene);
  const std::string trace_path = (fs::path(args.out_dir) / "trace.jsonl").string();
  sim::write_trace(trace, trace_path, !args.no_ground_truth);

  std::cout << "scene: " << scene.name << "\n"
            << "snapshots: " << trace.snapshots.size() << " @ " << scene.snapshot_rate_hz
            << " Hz\n"
            << "scatterers: " << scene.scatterers.size() << "\n"
            << "band: " << scene.sounding.carrier_hz / 1e9 << " GHz carrier, "
            << scene.sounding.bandwidth_hz / 1e6 << " MHz bandwidth, "
            << scene.sounding.n_tones << " tones\n"
            << "trace: " << trace_path << "\n";
  return kExitOk;
}

struct CharacterizeArgs {
  std::string scene_path;
  std::string trace_path;
  std::string out_dir = ".";
  std::string rules_path;
  std::string label_map_path;
  std::string store_path;
  pipeline::Options opt;
  double gate_ns = 5.0;
  double assoc_gate_ns = 5.0;
  std::optional<std::uint64_t> seed;
  bool no_interpolation = false;
  bool no_leakage_mask = false;
  int fixed_k = 0;
};

int cmd_characterize(const CharacterizeArgs& args) {
  if (args.scene_path.empty() == args.trace_path.empty()) {
    std::cerr << "error: exactly one of --scene / --trace is required\n";
    return kExitUsage;
  }
  pipeline::Options opt = args.opt;
  opt.tracker.gate_s = args.gate_ns * 1e-9;
  opt.assoc_gate_s = args.assoc_gate_ns * 1e-9;
  opt.interpolate = !args.no_interpolation;
  opt.mask_leakage = !args.no_leakage_mask;
  if (args.fixed_k > 0) opt.fixed_k = args.fixed_k;
  if (args.seed) opt.seed = *args.seed;
  if (!args.rules_path.empty()) opt.rules = engine::load_rules(args.rules_path);
  if (!args.label_map_path.empty()) opt.label_map = engine::load_label_map(args.label_map_path);

  sim::SnapshotTrace trace;
  if (!args.trace_path.empty()) {
    trace = sim::read_trace(args.trace_path);
  } else {
    sim::Scene scene = sim::load_scene(args.scene_path);
    sim::validate_scene(scene);
    if (args.seed) scene.rng_seed = *args.seed;
    trace = sim::run_scene(scene);
  }

  const auto result = pipeline::characterize_trace(trace, opt);
  const auto report = sem::validate_map(result.map);

  fs::create_directories(args.out_dir);
  const fs::path out(args.out_dir);
  sem::write_map_jsonl(result.map, (out / "semantic_map.jsonl").string());
  pipeline::write_trajectories_jsonl(result.trajectories, (out / "trajectories.jsonl").string());
  pipeline::write_pdp_csv(result.pdps, (out / "pdp_matrix.csv").string());
  if (!args.store_path.empty()) {
    auto store = sem::SemanticStore::open(args.store_path);
    store.store_semantics(result.map);
  }

  std::cout << "snapshots: " << result.snapshots.size() << "\n"
            << "statuses: " << result.map.statuses.size() << "\n"
            << "behaviors: " << result.map.behaviors.size() << "\n"
            << "events: " << result.map.events.size() << "\n"
            << "trajectories: " << result.trajectories.size() << "\n"
            << "outputs: " << (out / "semantic_map.jsonl").string() << ", "
            << (out / "trajectories.jsonl").string() << ", " << (out / "pdp_matrix.csv").string()
            << "\n";

  if (!report.ok()) {
    for (const auto& v : report.violations)
      std::cerr << "invariant violation [" << v.record_id << "] " << v.message << "\n";
    return kExitPipeline;
  }
  return kExitOk;
}

struct QueryArgs {
  std::string store_path;
  std::optional<double> from_s, to_s;
  std::string label;
  std::string kind;
  std::optional<double> delay_from_ns, delay_to_ns;
  std::string ancestors_id;
  std::string descendants_id;
  bool ancestors_flag = false;
  bool descendants_flag = false;
};

int cmd_query(const QueryArgs& args) {
  const auto store = sem::SemanticStore::open_readonly(args.store_path);

  sem::SemanticQuery q;
  if (args.from_s || args.to_s) {
    sem::TimeInterval iv;
    iv.lo = args.from_s.value_or(-std::numeric_limits<double>::infinity());
    iv.hi = args.to_s.value_or(std::numeric_limits<double>::infinity());
    q.time = iv;
  }
  if (!args.label.empty()) q.label = args.label;
  if (!args.kind.empty()) {
    const auto kind = sem::behavior_kind_from_string(args.kind);
    if (!kind) {
      std::cerr << "unknown behavior kind: " << args.kind << "\n";
      return kExitUsage;
    }
    q.kind = kind;
  }
  if (args.delay_from_ns || args.delay_to_ns) {
    q.delay_window = std::make_pair(args.delay_from_ns.value_or(0.0) * 1e-9,
                                    args.delay_to_ns.value_or(1e9) * 1e-9);
  }
  if (!args.ancestors_id.empty()) q.ancestors_of = args.ancestors_id;
  if (!args.descendants_id.empty()) q.descendants_of = args.descendants_id;

  auto results = sem::query(store, q);

  // --ancestors/--descendants without an id expand the base result set
  if (args.ancestors_flag || args.descendants_flag) {
    const auto map = store.to_map();
    std::vector<sem::SemanticRecord> expanded;
    for (const auto& r : results) {
      if (!std::holds_alternative<sem::EventSemantic>(r)) continue;
      sem::SemanticQuery follow;
      if (args.descendants_flag) follow.descendants_of = sem::record_id(r);
      else follow.ancestors_of = sem::record_id(r);
      for (auto& rec : sem::query_map(map, follow)) expanded.push_back(std::move(rec));
    }
    results = std::move(expanded);
  }

  for (const auto& r : results) std::cout << sem::record_to_json(r).dump() << "\n";
  return kExitOk;
}

int cmd_validate(const std::string& map_path) {
  const auto map = sem::read_map_jsonl(map_path);
  const auto report = sem::validate_map(map);
  if (report.ok()) {
    std::cout << "valid: " << map.statuses.size() << " statuses, " << map.behaviors.size()
              << " behaviors, " << map.events.size() << " events\n";
    return kExitOk;
  }
  for (const auto& v : report.violations)
    std::cout << "[" << v.record_id << "] " << v.message << "\n";
  return kExitPipeline;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"chansem - channel semantics characterization toolkit"};
  app.require_subcommand(1);

  SimulateArgs sim_args;
  auto* sim_cmd = app.add_subcommand("simulate", "Synthesize a multipath trace from a scene");
  sim_cmd->add_option("--scene", sim_args.scene_path, "Scene JSON file")->required();
  sim_cmd->add_option("--out", sim_args.out_dir, "Output directory");
  sim_cmd->add_option("--seed", sim_args.seed, "Override the scene RNG seed");
  sim_cmd->add_flag("--no-ground-truth", sim_args.no_ground_truth,
                    "Omit per-snapshot ground truth from the trace");

  CharacterizeArgs ch_args;
  auto* ch_cmd = app.add_subcommand("characterize", "Run the semantic characterization pipeline");
  auto* scene_opt = ch_cmd->add_option("--scene", ch_args.scene_path,
                                       "Scene JSON file (simulated in memory)");
  auto* trace_opt = ch_cmd->add_option("--trace", ch_args.trace_path, "Trace JSON-lines file");
  scene_opt->excludes(trace_opt);
  trace_opt->excludes(scene_opt);
  ch_cmd->add_option("--out", ch_args.out_dir, "Output directory");
  ch_cmd->add_option("--rules", ch_args.rules_path, "Event rules JSON file");
  ch_cmd->add_option("--label-map", ch_args.label_map_path,
                     "Label map JSON file (replaces ground-truth association)");
  ch_cmd->add_option("--store", ch_args.store_path, "Also append the map to this store file");
  ch_cmd->add_option("--noise-margin-db", ch_args.opt.noise_margin_db,
                     "Noise floor margin over the median bin power [dB]");
  ch_cmd->add_flag("--no-interpolation", ch_args.no_interpolation,
                   "Disable sub-bin peak interpolation");
  ch_cmd->add_flag("--no-leakage-mask", ch_args.no_leakage_mask,
                   "Keep local maxima even when a stronger peak's leakage explains them");
  ch_cmd->add_option("--k", ch_args.fixed_k, "Fixed cluster count (0 = auto)");
  ch_cmd->add_option("--k-max", ch_args.opt.k_max, "Upper bound for automatic cluster count");
  ch_cmd->add_option("--restarts", ch_args.opt.restarts, "Clustering restarts per snapshot");
  ch_cmd->add_option("--gate-ns", ch_args.gate_ns, "Association gate [ns]");
  ch_cmd->add_option("--assoc-gate-ns", ch_args.assoc_gate_ns,
                     "Ground-truth labeling gate [ns]");
  ch_cmd->add_option("--max-gap", ch_args.opt.tracker.max_gap,
                     "Snapshots a trajectory may coast unmatched");
  ch_cmd->add_option("--behavior-epsilon", ch_args.opt.behavior.eps_ns_per_s,
                     "Drift threshold separating motion from static [ns/s]");
  ch_cmd->add_option("--behavior-window", ch_args.opt.behavior.window_snapshots,
                     "Sliding drift window [snapshots]");
  ch_cmd->add_option("--seed", ch_args.seed, "Pipeline RNG seed");

  QueryArgs q_args;
  auto* q_cmd = app.add_subcommand("query", "Query a semantic store");
  q_cmd->add_option("--store", q_args.store_path, "Store or exported map file")->required();
  q_cmd->add_option("--from", q_args.from_s, "Interval start [s]");
  q_cmd->add_option("--to", q_args.to_s, "Interval end [s]");
  q_cmd->add_option("--label", q_args.label, "Status/event label");
  q_cmd->add_option("--kind", q_args.kind, "Behavior kind");
  q_cmd->add_option("--delay-from-ns", q_args.delay_from_ns, "Delay window start [ns]");
  q_cmd->add_option("--delay-to-ns", q_args.delay_to_ns, "Delay window end [ns]");
  q_cmd->add_option("--ancestors-of", q_args.ancestors_id, "Ancestor events of this event id");
  q_cmd->add_option("--descendants-of", q_args.descendants_id,
                    "Descendant events of this event id");
  q_cmd->add_flag("--ancestors", q_args.ancestors_flag,
                  "Expand matched events to their ancestors");
  q_cmd->add_flag("--descendants", q_args.descendants_flag,
                  "Expand matched events to their descendants");

  std::string validate_path;
  auto* v_cmd = app.add_subcommand("validate", "Validate a semantic map file");
  v_cmd->add_option("--map", validate_path, "Semantic map JSON-lines file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);  // prints help/error text
    return e.get_exit_code() == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (sim_cmd->parsed()) return cmd_simulate(sim_args);
    if (ch_cmd->parsed()) return cmd_characterize(ch_args);
    if (q_cmd->parsed()) return cmd_query(q_args);
    if (v_cmd->parsed()) return cmd_validate(validate_path);
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const StoreError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitPipeline;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitPipeline;
  }
  return kExitUsage;
}
