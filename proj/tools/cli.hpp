#pragma once

// sembench command line: run | sweep | weak-scale | verify.

#include <array>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sembench/sembench.hpp"

namespace sembench::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

struct CliOptions {
  std::string flow_case = "tgv";
  std::vector<int> elems{4, 4, 4};
  int order = 3;
  std::vector<std::string> variants{"base"};
  std::vector<std::string> fusions{"unified"};
  std::vector<std::string> precisions{"fp64"};
  std::vector<int> partitions{1};
  int steps = 20;
  double dt = 1e-3;
  std::string scatter = "deterministic";
  int reps = 5;
  std::string out;
  std::uint64_t seed = 0;
  std::int64_t nodes = 0;
  std::int64_t nodes_per_partition = 50'000;
  int warmup = 1;
  std::size_t workers = 0;
  std::size_t chunk = 16;
  double noise = 1e-3;
  std::string json_out;
  std::string dump_mesh;
  std::string dump_state;
  bool check_finite = false;
};

/// Registers the flag set on one subcommand. List-valued flags accept
/// comma-separated values; `all` expands to every value of that axis.
inline void add_flags(CLI::App& sub, CliOptions& o, bool lists) {
  sub.add_option("--case", o.flow_case, "Flow case: tgv | cf")->capture_default_str();
  sub.add_option("--elems", o.elems, "Element grid NX,NY,NZ")
      ->delimiter(',')
      ->expected(3)
      ->capture_default_str();
  sub.add_option("--order", o.order, "Polynomial order p (1..10)")->capture_default_str();
  const char* list_note = lists ? " (comma list or 'all')" : "";
  sub.add_option("--variant", o.variants,
                 std::string("Access variant: base | no_prl | prl_prf | reg") + list_note)
      ->delimiter(',');
  sub.add_option("--fusion", o.fusions, std::string("Kernel fusion: unified | split") + list_note)
      ->delimiter(',');
  sub.add_option("--precision", o.precisions, std::string("Precision: fp32 | fp64") + list_note)
      ->delimiter(',');
  sub.add_option("--partitions", o.partitions,
                 lists ? "Partition counts (comma list)" : "Partition count P")
      ->delimiter(',');
  sub.add_option("--steps", o.steps, "Timed RK4 time steps")->capture_default_str();
  sub.add_option("--dt", o.dt, "Time step size")->capture_default_str();
  sub.add_option("--scatter", o.scatter, "Scatter mode: atomic | deterministic")
      ->capture_default_str();
  sub.add_option("--reps", o.reps, "Repetitions per sweep cell")->capture_default_str();
  sub.add_option("--out", o.out, "CSV output path (RunRecords)");
  sub.add_option("--seed", o.seed, "Seed for the initial density noise")->capture_default_str();
  sub.add_option("--nodes", o.nodes, "Target mesh node count (overrides --elems)");
  sub.add_option("--nodes-per-partition", o.nodes_per_partition,
                 "Weak scaling: target nodes per partition")
      ->capture_default_str();
  sub.add_option("--warmup", o.warmup, "Untimed warm-up steps per run")->capture_default_str();
  sub.add_option("--workers", o.workers,
                 "Worker threads (0: SEMBENCH_WORKERS or hardware concurrency)")
      ->capture_default_str();
  sub.add_option("--chunk", o.chunk, "Elements per worker task")->capture_default_str();
  sub.add_option("--noise", o.noise, "Relative initial density noise")->capture_default_str();
  sub.add_option("--json", o.json_out, "Aggregate JSON path (default: <out>.json)");
  sub.add_option("--dump-mesh", o.dump_mesh, "Write the mesh as JSON (run only)");
  sub.add_option("--dump-state", o.dump_state, "Write the final state snapshot (run only)");
  sub.add_flag("--check-finite", o.check_finite, "Fail on NaN/Inf residuals");
}

inline std::array<int, 3> elem_grid(const CliOptions& o) {
  if (o.elems.size() != 3) throw ConfigError("--elems needs exactly three values");
  return {o.elems[0], o.elems[1], o.elems[2]};
}

template <typename T, typename Parse, typename All>
std::vector<T> parse_axis(const std::vector<std::string>& values, Parse parse, const All& all) {
  std::vector<T> out;
  for (const auto& v : values) {
    if (v == "all") {
      out.assign(all.begin(), all.end());
      return out;
    }
    out.push_back(parse(v));
  }
  return out;
}

inline std::array<bool, 3> case_periodicity(CaseKind c) {
  return c == CaseKind::tgv ? std::array<bool, 3>{true, true, true}
                            : std::array<bool, 3>{true, false, true};
}

inline SweepSpec make_sweep_spec(const CliOptions& o) {
  SweepSpec s;
  s.flow_case = parse_case(o.flow_case);
  s.variants = parse_axis<AccessVariant>(o.variants, parse_variant, kAllVariants);
  s.fusions = parse_axis<Fusion>(o.fusions, parse_fusion, kAllFusions);
  s.precisions = parse_axis<Precision>(o.precisions, parse_precision,
                                       std::array{Precision::fp32, Precision::fp64});
  s.order = o.order;
  gll_nodes_weights(o.order);  // range check
  s.mesh_sizes = {o.nodes > 0 ? grid_for_nodes(o.nodes, o.order, case_periodicity(s.flow_case))
                              : elem_grid(o)};
  s.partitions = o.partitions;
  s.repetitions = o.reps;
  s.time_steps = o.steps;
  s.warmup_steps = o.warmup;
  s.dt = o.dt;
  s.scatter = parse_scatter(o.scatter);
  s.seed = o.seed;
  s.noise = o.noise;
  s.chunk = o.chunk;
  s.workers = o.workers;
  if (!(s.dt > 0.0)) throw ConfigError("--dt must be > 0");
  if (s.warmup_steps < 0) throw ConfigError("--warmup must be >= 0");
  if (s.chunk == 0) throw ConfigError("--chunk must be >= 1");
  for (const auto& g : s.mesh_sizes) {
    const auto elems = static_cast<std::int64_t>(g[0]) * g[1] * g[2];
    for (int p : s.partitions) {
      if (p < 1 || p > elems) {
        throw ConfigError("--partitions must be in [1, " + std::to_string(elems) + "]");
      }
    }
    for (int v : g) {
      if (v < 1) throw ConfigError("--elems values must be >= 1");
    }
  }
  s.validate();
  return s;
}

inline std::string json_path(const CliOptions& o) {
  if (!o.json_out.empty()) return o.json_out;
  if (!o.out.empty()) return o.out + ".json";
  return {};
}

inline void write_records(const std::string& path, const std::vector<RunRecord>& records) {
  if (path.empty()) return;
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  write_csv(os, records);
}

inline void write_json(const std::string& path, const nlohmann::json& j) {
  if (path.empty()) return;
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  os << j.dump(2) << '\n';
}

inline std::string exact(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

inline void print_record(std::ostream& os, const RunRecord& r) {
  os << "case=" << to_string(r.flow_case) << " variant=" << to_string(r.variant)
     << " fusion=" << to_string(r.fusion) << " precision=" << to_string(r.precision)
     << " partitions=" << r.partitions << " nodes=" << r.nodes << " steps=" << r.time_steps
     << " rep=" << r.rep << " status=" << (r.ok ? "ok" : "failed") << '\n';
  if (!r.ok) {
    os << "  error: " << r.error << '\n';
    return;
  }
  os << "  runtime_ns=" << r.runtime_ns << " gnops=" << format_double(r.gnops)
     << " convec_ns=" << r.t_convec_ns << " diff_ns=" << r.t_diff_ns
     << " scatter_ns=" << r.t_scatter_ns << " update_ns=" << r.t_update_ns << '\n';
  os << "  total_mass=" << exact(r.diagnostics.total_mass)
     << " total_energy=" << exact(r.diagnostics.total_energy)
     << " max_velocity=" << exact(r.diagnostics.max_velocity) << '\n';
}

inline void print_cells(std::ostream& os, const std::vector<CellAggregate>& cells) {
  os << std::left << std::setw(9) << "variant" << std::setw(9) << "fusion" << std::setw(6)
     << "prec" << std::setw(4) << "P" << std::setw(10) << "nodes" << std::setw(16)
     << "mean_ns" << std::setw(14) << "min_ns" << std::setw(12) << "mean_gnops" << "best\n";
  for (const auto& c : cells) {
    os << std::left << std::setw(9) << to_string(c.variant) << std::setw(9)
       << to_string(c.fusion) << std::setw(6) << to_string(c.precision) << std::setw(4)
       << c.partitions << std::setw(10) << c.nodes << std::setw(16)
       << static_cast<std::int64_t>(c.mean_runtime_ns) << std::setw(14) << c.min_runtime_ns
       << std::setw(12) << std::setprecision(5) << c.mean_gnops << (c.best_variant ? "*" : "")
       << '\n';
  }
}

inline void print_gate(std::ostream& os, const SweepResult& r) {
  os << "correctness gate: " << (r.gate.passed ? "passed" : "FAILED") << '\n';
  for (const auto& m : r.gate.mismatches) os << "  " << m << '\n';
  for (const auto& rec : r.records) {
    if (!rec.ok) {
      os << "cell failed: " << to_string(rec.variant) << '/' << to_string(rec.fusion) << '/'
         << to_string(rec.precision) << ": " << rec.error << '\n';
    }
  }
}

inline int cmd_run(const CliOptions& o, std::ostream& out) {
  if (o.variants.size() != 1 || o.fusions.size() != 1 || o.precisions.size() != 1 ||
      o.partitions.size() != 1) {
    throw ConfigError("run takes a single --variant, --fusion, --precision and --partitions");
  }
  SweepSpec spec = make_sweep_spec(o);
  if (spec.variants.size() != 1 || spec.fusions.size() != 1 || spec.precisions.size() != 1) {
    throw ConfigError("run does not accept 'all'");
  }
  if (o.reps < 1) throw ConfigError("--reps must be >= 1");

  std::vector<RunRecord> records;
  for (int rep = 0; rep < o.reps; ++rep) {
    records.push_back(run_cell(spec, spec.variants[0], spec.fusions[0], spec.precisions[0],
                               spec.mesh_sizes[0], spec.partitions[0], rep));
    print_record(out, records.back());
  }
  write_records(o.out, records);

  if (!o.dump_mesh.empty() || !o.dump_state.empty()) {
    SimConfig cfg;
    cfg.flow_case = spec.flow_case;
    cfg.elems = spec.mesh_sizes[0];
    cfg.order = spec.order;
    cfg.dt = spec.dt;
    cfg.seed = spec.seed;
    cfg.noise = spec.noise;
    cfg.workers = spec.workers;
    cfg.partitions = spec.partitions[0];
    cfg.kernel.access = spec.variants[0];
    cfg.kernel.fusion = spec.fusions[0];
    cfg.kernel.scatter = spec.scatter;
    cfg.kernel.check_finite = o.check_finite;
    const auto dump = [&](auto tag) {
      using Scalar = decltype(tag);
      cfg.kernel.precision = precision_of<Scalar>;
      Simulation<Scalar> sim(cfg);
      if (!o.dump_mesh.empty()) write_mesh(o.dump_mesh, sim.mesh());
      if (!o.dump_state.empty()) {
        sim.advance(spec.warmup_steps + spec.time_steps);
        write_snapshot(o.dump_state, sim.state());
      }
    };
    if (spec.precisions[0] == Precision::fp32) {
      dump(float{});
    } else {
      dump(double{});
    }
  }
  for (const auto& r : records) {
    if (!r.ok) return kExitFailure;
  }
  return kExitOk;
}

inline int cmd_sweep(const CliOptions& o, std::ostream& out) {
  const SweepSpec spec = make_sweep_spec(o);
  out << "sweep: " << spec.cell_count() << " cells x " << spec.repetitions << " reps, "
      << box_node_count(spec.mesh_sizes[0], spec.order, case_periodicity(spec.flow_case))
      << " nodes\n";
  const auto result = run_sweep(spec, [&](const RunRecord& r) {
    out << "  " << to_string(r.variant) << '/' << to_string(r.fusion) << '/'
        << to_string(r.precision) << " P=" << r.partitions << " rep " << r.rep << ": "
        << (r.ok ? format_double(r.gnops) + " GNOPS" : "failed: " + r.error) << '\n';
  });
  write_records(o.out, result.records);
  write_json(json_path(o), to_json(result));
  print_cells(out, result.cells);
  print_gate(out, result);
  return result.passed() ? kExitOk : kExitFailure;
}

inline int cmd_weak_scale(CliOptions o, bool partitions_given, std::ostream& out) {
  if (!partitions_given) o.partitions = {1, 2, 4};
  SweepSpec spec = make_sweep_spec(o);
  if (o.nodes_per_partition < 1) throw ConfigError("--nodes-per-partition must be >= 1");
  for (int p : o.partitions) {
    grid_for_nodes(o.nodes_per_partition * p, spec.order, case_periodicity(spec.flow_case));
  }
  const auto result = weak_scaling(o.nodes_per_partition, o.partitions, spec,
                                   [&](const RunRecord& r) {
                                     out << "  P=" << r.partitions << " nodes=" << r.nodes << ' '
                                         << to_string(r.variant) << '/' << to_string(r.fusion)
                                         << '/' << to_string(r.precision) << ": "
                                         << (r.ok ? format_double(r.gnops) + " GNOPS"
                                                  : "failed: " + r.error)
                                         << '\n';
                                   });
  write_records(o.out, result.sweep.records);
  write_json(json_path(o), to_json(result));
  out << std::left << std::setw(4) << "P" << std::setw(10) << "target" << std::setw(10)
      << "nodes" << std::setw(9) << "variant" << std::setw(9) << "fusion" << std::setw(6)
      << "prec" << std::setw(12) << "gnops" << "best\n";
  for (const auto& row : result.table) {
    out << std::left << std::setw(4) << row.partitions << std::setw(10) << row.target_nodes
        << std::setw(10) << row.nodes << std::setw(9) << to_string(row.variant) << std::setw(9)
        << to_string(row.fusion) << std::setw(6) << to_string(row.precision) << std::setw(12)
        << std::setprecision(5) << row.mean_gnops << (row.best_variant ? "*" : "") << '\n';
  }
  print_gate(out, result.sweep);
  return result.sweep.passed() ? kExitOk : kExitFailure;
}

inline int cmd_verify(std::ostream& out) {
  const auto checks = run_verification([&](const CheckResult& c) {
    out << (c.passed ? "[PASS] " : "[FAIL] ") << c.name << ": " << c.detail << " ("
        << std::setprecision(3) << c.seconds << " s)\n";
  });
  for (const auto& c : checks) {
    if (!c.passed) return kExitFailure;
  }
  return kExitOk;
}

/// Builds the full command tree bound to `o`.
inline void build_app(CLI::App& app, CliOptions& o) {
  app.description("Spectral-element compressible-flow kernel benchmark");
  app.require_subcommand(1);
  auto* run = app.add_subcommand("run", "Run one configuration and print its RunRecord");
  add_flags(*run, o, false);
  auto* sweep = app.add_subcommand("sweep", "Sweep variant x fusion x precision");
  add_flags(*sweep, o, true);
  auto* weak = app.add_subcommand("weak-scale", "Weak scaling over partition counts");
  add_flags(*weak, o, true);
  app.add_subcommand("verify", "Run the invariant checks and report pass/fail per property");
  app.footer("Environment: SEMBENCH_WORKERS sets the default worker count.");
}

inline int parse_and_dispatch(int argc, const char* const* argv, std::ostream& out = std::cout,
                              std::ostream& err = std::cerr) {
  CliOptions o;
  CLI::App app{"sembench"};
  app.name("sembench");
  build_app(app, o);
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n' << "run 'sembench --help' for usage\n";
    return kExitUsage;
  }

  const auto* sub = app.get_subcommands().front();
  const std::string name = sub->get_name();
  const bool lists = name == "sweep" || name == "weak-scale";
  if (lists) {
    if (sub->count("--variant") == 0) o.variants = {"all"};
    if (sub->count("--fusion") == 0) o.fusions = {"all"};
    if (sub->count("--precision") == 0) o.precisions = {"all"};
  }
  try {
    if (name == "run") return cmd_run(o, out);
    if (name == "sweep") return cmd_sweep(o, out);
    if (name == "weak-scale") return cmd_weak_scale(o, sub->count("--partitions") > 0, out);
    return cmd_verify(out);
  } catch (const ConfigError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace sembench::cli
