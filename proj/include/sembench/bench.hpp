#pragma once

// Design-space sweeps over access variant x fusion x precision x mesh size x
// partition count, reported as Giga Node Operations Per Second.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "sembench/error.hpp"
#include "sembench/kernels.hpp"
#include "sembench/mesh.hpp"
#include "sembench/timeloop.hpp"

namespace sembench {

/// Classical RK4 stages per time step.
inline constexpr int kRkStages = 4;

/// nodes * rk_steps * time_steps / runtime_ns, i.e. node updates per ns.
inline double gnops(std::int64_t total_nodes, std::int64_t rk_steps, std::int64_t time_steps,
                    std::int64_t runtime_ns) {
  if (runtime_ns == 0) throw ConfigError("GNOPS undefined for a zero runtime");
  if (total_nodes <= 0 || rk_steps <= 0 || time_steps <= 0 || runtime_ns < 0) {
    throw ConfigError("GNOPS inputs must be positive");
  }
  return static_cast<double>(total_nodes) * static_cast<double>(rk_steps) *
         static_cast<double>(time_steps) / static_cast<double>(runtime_ns);
}

struct RunRecord {
  CaseKind flow_case = CaseKind::tgv;
  AccessVariant variant = AccessVariant::base;
  Fusion fusion = Fusion::unified;
  Precision precision = Precision::fp64;
  int partitions = 1;
  std::int64_t nodes = 0;
  int rk_steps = kRkStages;
  int time_steps = 0;
  int rep = 0;
  std::int64_t runtime_ns = 0;
  double gnops = 0.0;
  std::int64_t t_convec_ns = 0;
  std::int64_t t_diff_ns = 0;
  std::int64_t t_scatter_ns = 0;
  std::int64_t t_update_ns = 0;
  bool ok = false;
  std::string error;
  std::array<int, 3> elems{};
  Diagnostics diagnostics;
};

inline constexpr const char* kCsvHeader =
    "case,variant,fusion,precision,partitions,nodes,rk_steps,time_steps,rep,runtime_ns,gnops,"
    "t_convec_ns,t_diff_ns,t_scatter_ns,t_update_ns,status";

/// Shortest decimal form that parses back to the same double.
inline std::string format_double(double v) {
  char buf[32];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

inline std::string csv_row(const RunRecord& r) {
  std::ostringstream os;
  os << to_string(r.flow_case) << ',' << to_string(r.variant) << ',' << to_string(r.fusion)
     << ',' << to_string(r.precision) << ',' << r.partitions << ',' << r.nodes << ','
     << r.rk_steps << ',' << r.time_steps << ',' << r.rep << ',' << r.runtime_ns << ','
     << format_double(r.gnops) << ',' << r.t_convec_ns << ',' << r.t_diff_ns << ','
     << r.t_scatter_ns << ',' << r.t_update_ns << ',' << (r.ok ? "ok" : "failed");
  return os.str();
}

inline void write_csv(std::ostream& os, const std::vector<RunRecord>& records) {
  os << kCsvHeader << '\n';
  for (const auto& r : records) os << csv_row(r) << '\n';
}

/// Mesh sizes are element grids; grid_for_nodes() turns a node target into one.
struct SweepSpec {
  CaseKind flow_case = CaseKind::tgv;
  std::vector<AccessVariant> variants{kAllVariants.begin(), kAllVariants.end()};
  std::vector<Fusion> fusions{kAllFusions.begin(), kAllFusions.end()};
  std::vector<Precision> precisions{Precision::fp32, Precision::fp64};
  std::vector<std::array<int, 3>> mesh_sizes{{4, 4, 4}};
  std::vector<int> partitions{1};
  int repetitions = 5;
  int order = 3;
  int time_steps = 20;
  int warmup_steps = 1;
  double dt = 1e-3;
  ScatterMode scatter = ScatterMode::deterministic;
  std::uint64_t seed = 0;
  double noise = 1e-3;
  std::size_t chunk = 16;
  std::size_t workers = 0;

  void validate() const {
    if (variants.empty() || fusions.empty() || precisions.empty() || mesh_sizes.empty() ||
        partitions.empty()) {
      throw ConfigError("sweep axes must be non-empty");
    }
    if (repetitions < 1) throw ConfigError("repetitions must be >= 1");
    if (time_steps < 1) throw ConfigError("time steps must be >= 1");
  }

  std::size_t cell_count() const {
    return variants.size() * fusions.size() * precisions.size() * mesh_sizes.size() *
           partitions.size();
  }
};

struct CellAggregate {
  CaseKind flow_case = CaseKind::tgv;
  AccessVariant variant = AccessVariant::base;
  Fusion fusion = Fusion::unified;
  Precision precision = Precision::fp64;
  int partitions = 1;
  std::int64_t nodes = 0;
  int runs = 0;
  int failures = 0;
  double mean_runtime_ns = 0.0;
  std::int64_t min_runtime_ns = 0;
  double mean_gnops = 0.0;
  bool best_variant = false;
};

struct GateResult {
  bool passed = true;
  std::vector<std::string> mismatches;
};

struct SweepResult {
  std::vector<RunRecord> records;
  std::vector<CellAggregate> cells;
  GateResult gate;

  bool all_succeeded() const {
    return std::all_of(records.begin(), records.end(), [](const RunRecord& r) { return r.ok; });
  }
  bool passed() const { return all_succeeded() && gate.passed; }
};

inline RunRecord run_cell(const SweepSpec& spec, AccessVariant v, Fusion f, Precision prec,
                          const std::array<int, 3>& elems, int partitions, int rep) {
  RunRecord rec;
  rec.flow_case = spec.flow_case;
  rec.variant = v;
  rec.fusion = f;
  rec.precision = prec;
  rec.partitions = partitions;
  rec.elems = elems;
  rec.time_steps = spec.time_steps;
  rec.rep = rep;
  const auto periodic = spec.flow_case == CaseKind::tgv ? std::array<bool, 3>{true, true, true}
                                                        : std::array<bool, 3>{true, false, true};
  rec.nodes = static_cast<std::int64_t>(box_node_count(elems, spec.order, periodic));

  SimConfig cfg;
  cfg.flow_case = spec.flow_case;
  cfg.elems = elems;
  cfg.order = spec.order;
  cfg.dt = spec.dt;
  cfg.num_steps = spec.time_steps;
  cfg.warmup_steps = spec.warmup_steps;
  cfg.partitions = partitions;
  cfg.seed = spec.seed;
  cfg.noise = spec.noise;
  cfg.workers = spec.workers;
  cfg.kernel.access = v;
  cfg.kernel.fusion = f;
  cfg.kernel.precision = prec;
  cfg.kernel.scatter = spec.scatter;
  cfg.kernel.chunk = spec.chunk;
  try {
    const RunStats stats = run_simulation(cfg);
    rec.runtime_ns = std::max<std::int64_t>(1, stats.wall_ns);
    rec.gnops = gnops(rec.nodes, rec.rk_steps, rec.time_steps, rec.runtime_ns);
    rec.t_convec_ns = stats.t_convec_ns;
    rec.t_diff_ns = stats.t_diff_ns;
    rec.t_scatter_ns = stats.t_scatter_ns;
    rec.t_update_ns = stats.t_update_ns;
    rec.diagnostics = stats.diagnostics;
    rec.ok = true;
  } catch (const std::exception& err) {
    rec.ok = false;
    rec.error = err.what();
  }
  return rec;
}

/// Tolerance on final-state diagnostics between variants of one cell group.
/// Deterministic scatter evaluates identical arithmetic, so it must match
/// exactly; atomic scatter may reassociate node sums.
inline double gate_tolerance(Precision p, ScatterMode mode) {
  if (mode == ScatterMode::deterministic) return 0.0;
  return p == Precision::fp32 ? 1e-4 : 1e-10;
}

inline bool diagnostics_match(const Diagnostics& a, const Diagnostics& b, double rel_tol) {
  const auto close = [rel_tol](double x, double y) {
    if (rel_tol == 0.0) return x == y;
    return std::abs(x - y) <= rel_tol * std::max(std::abs(x), std::abs(y));
  };
  return close(a.total_mass, b.total_mass) && close(a.total_energy, b.total_energy) &&
         close(a.max_velocity, b.max_velocity);
}

/// Every successful record of a (case, precision, nodes, partitions) group
/// must report the diagnostics of the group's first record.
inline GateResult correctness_gate(const std::vector<RunRecord>& records, ScatterMode mode) {
  GateResult gate;
  std::map<std::tuple<int, int, std::int64_t, int>, const RunRecord*> reference;
  for (const auto& r : records) {
    if (!r.ok) continue;
    const auto key = std::make_tuple(static_cast<int>(r.flow_case), static_cast<int>(r.precision),
                                     r.nodes, r.partitions);
    const auto [it, inserted] = reference.emplace(key, &r);
    if (inserted) continue;
    if (!diagnostics_match(it->second->diagnostics, r.diagnostics,
                           gate_tolerance(r.precision, mode))) {
      gate.passed = false;
      std::ostringstream os;
      os << to_string(r.variant) << '/' << to_string(r.fusion) << '/' << to_string(r.precision)
         << " rep " << r.rep << " at " << r.nodes << " nodes, P=" << r.partitions
         << " differs from " << to_string(it->second->variant) << '/'
         << to_string(it->second->fusion);
      gate.mismatches.push_back(os.str());
    }
  }
  return gate;
}

/// Mean and min runtime per cell; within every (case, precision, nodes,
/// partitions) group the cell with the highest mean GNOPS is flagged best.
inline std::vector<CellAggregate> aggregate(const std::vector<RunRecord>& records) {
  std::vector<CellAggregate> cells;
  std::map<std::tuple<int, int, int, int, int, std::int64_t>, std::size_t> index;
  for (const auto& r : records) {
    const auto key = std::make_tuple(static_cast<int>(r.flow_case), static_cast<int>(r.variant),
                                     static_cast<int>(r.fusion), static_cast<int>(r.precision),
                                     r.partitions, r.nodes);
    auto [it, inserted] = index.emplace(key, cells.size());
    if (inserted) {
      CellAggregate c;
      c.flow_case = r.flow_case;
      c.variant = r.variant;
      c.fusion = r.fusion;
      c.precision = r.precision;
      c.partitions = r.partitions;
      c.nodes = r.nodes;
      c.min_runtime_ns = std::numeric_limits<std::int64_t>::max();
      cells.push_back(c);
    }
    auto& c = cells[it->second];
    if (!r.ok) {
      c.failures += 1;
      continue;
    }
    c.runs += 1;
    c.mean_runtime_ns += static_cast<double>(r.runtime_ns);
    c.mean_gnops += r.gnops;
    c.min_runtime_ns = std::min(c.min_runtime_ns, r.runtime_ns);
  }
  for (auto& c : cells) {
    if (c.runs > 0) {
      c.mean_runtime_ns /= c.runs;
      c.mean_gnops /= c.runs;
    } else {
      c.min_runtime_ns = 0;
    }
  }
  std::map<std::tuple<int, int, std::int64_t, int>, std::size_t> best;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto& c = cells[i];
    if (c.runs == 0) continue;
    const auto key =
        std::make_tuple(static_cast<int>(c.flow_case), static_cast<int>(c.precision), c.nodes,
                        c.partitions);
    auto [it, inserted] = best.emplace(key, i);
    if (!inserted && c.mean_gnops > cells[it->second].mean_gnops) it->second = i;
  }
  for (const auto& [key, i] : best) cells[i].best_variant = true;
  return cells;
}

inline nlohmann::json to_json(const CellAggregate& c) {
  return {{"case", to_string(c.flow_case)},
          {"variant", to_string(c.variant)},
          {"fusion", to_string(c.fusion)},
          {"precision", to_string(c.precision)},
          {"partitions", c.partitions},
          {"nodes", c.nodes},
          {"runs", c.runs},
          {"failures", c.failures},
          {"mean_runtime_ns", c.mean_runtime_ns},
          {"min_runtime_ns", c.min_runtime_ns},
          {"mean_gnops", c.mean_gnops},
          {"best_variant_flag", c.best_variant}};
}

inline nlohmann::json to_json(const SweepResult& r) {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : r.cells) cells.push_back(to_json(c));
  return {{"cells", cells},
          {"correctness_gate", {{"passed", r.gate.passed}, {"mismatches", r.gate.mismatches}}},
          {"all_cells_succeeded", r.all_succeeded()}};
}

/// Runs every cell `repetitions` times, strictly one timed run at a time.
/// `progress`, if given, is called after each record.
template <typename Progress>
SweepResult run_sweep(const SweepSpec& spec, Progress&& progress) {
  spec.validate();
  SweepResult result;
  result.records.reserve(spec.cell_count() * spec.repetitions);
  for (const auto& elems : spec.mesh_sizes) {
    for (int parts : spec.partitions) {
      for (auto prec : spec.precisions) {
        for (auto v : spec.variants) {
          for (auto f : spec.fusions) {
            for (int rep = 0; rep < spec.repetitions; ++rep) {
              result.records.push_back(run_cell(spec, v, f, prec, elems, parts, rep));
              progress(result.records.back());
            }
          }
        }
      }
    }
  }
  result.cells = aggregate(result.records);
  result.gate = correctness_gate(result.records, spec.scatter);
  return result;
}

inline SweepResult run_sweep(const SweepSpec& spec) {
  return run_sweep(spec, [](const RunRecord&) {});
}

/// Near-cubic element grid whose node count is closest to `target`.
/// Grids with an axis ratio above 2 are not considered. Throws ConfigError
/// naming the nearest achievable grid when the best one misses by more than
/// `tolerance` (relative).
inline std::array<int, 3> grid_for_nodes(std::int64_t target, int order,
                                         const std::array<bool, 3>& periodic,
                                         double tolerance = 0.10) {
  if (target < 1) throw ConfigError("node target must be >= 1");
  const double t = static_cast<double>(target);
  const std::size_t n1 = static_cast<std::size_t>(order);
  const int limit = static_cast<int>(std::cbrt(t / (n1 * n1 * n1)) * 2.0) + 2;
  std::array<int, 3> best{1, 1, 1};
  double best_err = std::numeric_limits<double>::infinity();
  for (int a = 1; a <= limit; ++a) {
    for (int b = a; b <= std::min(limit, 2 * a); ++b) {
      for (int c = b; c <= std::min(limit, 2 * a); ++c) {
        const std::array<int, 3> g{c, b, a};  // longest axis first: slab axis is x
        const double n = static_cast<double>(box_node_count(g, order, periodic));
        const double err = std::abs(n - t) / t;
        if (err < best_err - 1e-15) {
          best_err = err;
          best = g;
        }
      }
    }
  }
  if (best_err > tolerance) {
    std::ostringstream os;
    os << "no element grid within " << tolerance * 100 << "% of " << target
       << " nodes; nearest is " << best[0] << 'x' << best[1] << 'x' << best[2] << " with "
       << box_node_count(best, order, periodic) << " nodes";
    throw ConfigError(os.str());
  }
  return best;
}

struct WeakScalingRow {
  int partitions = 1;
  std::int64_t target_nodes = 0;
  std::int64_t nodes = 0;
  std::array<int, 3> elems{};
  AccessVariant variant = AccessVariant::base;
  Fusion fusion = Fusion::unified;
  Precision precision = Precision::fp64;
  double mean_gnops = 0.0;
  bool best_variant = false;
};

struct WeakScalingResult {
  SweepResult sweep;
  std::vector<WeakScalingRow> table;
};

/// For each partition count P, a mesh of about P * nodes_per_partition nodes
/// runs every variant/fusion/precision in `spec` (its mesh_sizes and
/// partitions axes are replaced).
template <typename Progress>
WeakScalingResult weak_scaling(std::int64_t nodes_per_partition,
                               const std::vector<int>& partition_counts, SweepSpec spec,
                               Progress&& progress) {
  if (partition_counts.empty()) throw ConfigError("partition list must be non-empty");
  for (std::size_t i = 0; i < partition_counts.size(); ++i) {
    if (partition_counts[i] < 1 || (i > 0 && partition_counts[i] <= partition_counts[i - 1])) {
      throw ConfigError("partition counts must be >= 1 and strictly ascending");
    }
  }
  const auto periodic = spec.flow_case == CaseKind::tgv ? std::array<bool, 3>{true, true, true}
                                                        : std::array<bool, 3>{true, false, true};
  WeakScalingResult out;
  std::vector<std::pair<int, std::array<int, 3>>> plan;
  for (int p : partition_counts) {
    plan.emplace_back(p, grid_for_nodes(nodes_per_partition * p, spec.order, periodic));
  }
  for (const auto& [p, grid] : plan) {
    SweepSpec cell_spec = spec;
    cell_spec.mesh_sizes = {grid};
    cell_spec.partitions = {p};
    auto part = run_sweep(cell_spec, progress);
    out.sweep.records.insert(out.sweep.records.end(), part.records.begin(), part.records.end());
  }
  out.sweep.cells = aggregate(out.sweep.records);
  out.sweep.gate = correctness_gate(out.sweep.records, spec.scatter);
  for (const auto& c : out.sweep.cells) {
    WeakScalingRow row;
    row.partitions = c.partitions;
    row.target_nodes = nodes_per_partition * c.partitions;
    row.nodes = c.nodes;
    for (const auto& [p, grid] : plan) {
      if (p == c.partitions) row.elems = grid;
    }
    row.variant = c.variant;
    row.fusion = c.fusion;
    row.precision = c.precision;
    row.mean_gnops = c.mean_gnops;
    row.best_variant = c.best_variant;
    out.table.push_back(row);
  }
  return out;
}

inline WeakScalingResult weak_scaling(std::int64_t nodes_per_partition,
                                      const std::vector<int>& partition_counts,
                                      const SweepSpec& spec) {
  return weak_scaling(nodes_per_partition, partition_counts, spec, [](const RunRecord&) {});
}

inline nlohmann::json to_json(const WeakScalingResult& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : r.table) {
    rows.push_back({{"partitions", row.partitions},
                    {"target_nodes", row.target_nodes},
                    {"nodes", row.nodes},
                    {"elems", row.elems},
                    {"variant", to_string(row.variant)},
                    {"fusion", to_string(row.fusion)},
                    {"precision", to_string(row.precision)},
                    {"mean_gnops", row.mean_gnops},
                    {"best_variant_flag", row.best_variant}});
  }
  nlohmann::json j = to_json(r.sweep);
  j["weak_scaling"] = rows;
  return j;
}

}  // namespace sembench
