#pragma once

// Classical RK4 over the semi-discrete system M dU/dt = -(R_conv + R_diff) + M F,
// with per-bucket timing of the step loop.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sembench/basis.hpp"
#include "sembench/error.hpp"
#include "sembench/kernels.hpp"
#include "sembench/mesh.hpp"
#include "sembench/parallel.hpp"
#include "sembench/state.hpp"

namespace sembench {

template <typename Scalar, std::size_t NF>
using FieldSet = std::array<std::vector<Scalar>, NF>;

template <typename Scalar, std::size_t NF>
struct Rk4Buffers {
  FieldSet<Scalar, NF> y0;
  FieldSet<Scalar, NF> k;
  FieldSet<Scalar, NF> acc;

  void resize(std::size_t n) {
    for (std::size_t f = 0; f < NF; ++f) {
      y0[f].resize(n);
      k[f].resize(n);
      acc[f].resize(n);
    }
  }
};

/// One classical four-stage RK4 step.
///
/// `y` are the fields advanced in place; `stage` are the fields `rhs` reads.
/// rhs(k) must fill k with f(stage) and is called exactly four times.
/// `update` wraps each vector-update sweep, so callers can time or fan it
/// out; it is invoked as update(n, body) with body(begin, end).
template <typename Scalar, std::size_t NF, typename Rhs, typename Update>
void rk4_step(const std::array<std::vector<Scalar>*, NF>& y,
              const std::array<std::vector<Scalar>*, NF>& stage, Scalar dt, Rhs&& rhs,
              Rk4Buffers<Scalar, NF>& buf, Update&& update) {
  const std::size_t n = y[0]->size();
  buf.resize(n);
  const Scalar half = dt / Scalar(2);
  const Scalar sixth = dt / Scalar(6);
  const Scalar third = dt / Scalar(3);

  update(n, [&](std::size_t b, std::size_t e) {
    for (std::size_t f = 0; f < NF; ++f) {
      std::copy(y[f]->begin() + b, y[f]->begin() + e, buf.y0[f].begin() + b);
      std::copy(y[f]->begin() + b, y[f]->begin() + e, stage[f]->begin() + b);
    }
  });

  const auto sweep = [&](Scalar acc_coef, bool first, Scalar stage_coef, bool last) {
    update(n, [&](std::size_t b, std::size_t e) {
      for (std::size_t f = 0; f < NF; ++f) {
        const Scalar* y0 = buf.y0[f].data();
        const Scalar* k = buf.k[f].data();
        Scalar* acc = buf.acc[f].data();
        Scalar* st = stage[f]->data();
        for (std::size_t i = b; i < e; ++i) {
          acc[i] = first ? y0[i] + acc_coef * k[i] : acc[i] + acc_coef * k[i];
          if (!last) st[i] = y0[i] + stage_coef * k[i];
        }
      }
    });
  };

  rhs(buf.k);
  sweep(sixth, true, half, false);
  rhs(buf.k);
  sweep(third, false, half, false);
  rhs(buf.k);
  sweep(third, false, dt, false);
  rhs(buf.k);
  sweep(sixth, false, Scalar(0), true);

  update(n, [&](std::size_t b, std::size_t e) {
    for (std::size_t f = 0; f < NF; ++f) {
      std::copy(buf.acc[f].begin() + b, buf.acc[f].begin() + e, y[f]->begin() + b);
    }
  });
}

enum class CaseKind { tgv, cf };

inline std::string_view to_string(CaseKind c) { return c == CaseKind::tgv ? "tgv" : "cf"; }
inline CaseKind parse_case(std::string_view s) {
  if (s == "tgv") return CaseKind::tgv;
  if (s == "cf") return CaseKind::cf;
  throw ConfigError("unknown case '" + std::string(s) + "' (valid: tgv, cf)");
}

struct SimConfig {
  CaseKind flow_case = CaseKind::tgv;
  std::array<int, 3> elems{4, 4, 4};
  int order = 3;
  /// Domain size; when unset the case default is used (TGV: 2pi cube,
  /// channel: 2pi x 2 x pi with half-height 1).
  std::optional<std::array<double, 3>> extents;
  double dt = 1e-3;
  int num_steps = 20;
  KernelConfig kernel;
  int partitions = 1;
  std::uint64_t seed = 0;
  /// Relative density noise added after initialization (0 disables).
  double noise = 1e-3;
  double reynolds = 1600.0;
  double mach = kDefaultMach;
  /// Untimed steps executed before the timed loop.
  int warmup_steps = 0;
  /// 0 selects default_worker_count().
  std::size_t workers = 0;

  std::array<double, 3> domain() const {
    if (extents) return *extents;
    const double two_pi = 2.0 * std::numbers::pi;
    if (flow_case == CaseKind::tgv) return {two_pi, two_pi, two_pi};
    return {two_pi, 2.0, std::numbers::pi};
  }
  std::array<bool, 3> periodicity() const {
    if (flow_case == CaseKind::tgv) return {true, true, true};
    return {true, false, true};
  }

  void validate() const {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("dt must be > 0");
    if (num_steps < 1) throw ConfigError("num_steps must be >= 1");
    if (warmup_steps < 0) throw ConfigError("warmup steps must be >= 0");
    if (partitions < 1) throw ConfigError("partition count must be >= 1");
    if (!(reynolds > 0.0) || !(mach > 0.0)) throw ConfigError("Reynolds and Mach must be > 0");
    if (!(noise >= 0.0) || noise >= 0.5) throw ConfigError("noise must be in [0, 0.5)");
    for (int ax = 0; ax < 3; ++ax) {
      if (elems[ax] < 1) throw ConfigError("element counts must be >= 1");
    }
  }
};

struct Diagnostics {
  double total_mass = 0.0;
  double total_energy = 0.0;
  double max_velocity = 0.0;

  bool operator==(const Diagnostics&) const = default;
};

struct RunStats {
  std::int64_t wall_ns = 0;
  std::int64_t t_convec_ns = 0;
  std::int64_t t_diff_ns = 0;
  std::int64_t t_scatter_ns = 0;
  std::int64_t t_update_ns = 0;
  std::int64_t steps = 0;
  std::int64_t rhs_evaluations = 0;
  std::size_t num_nodes = 0;
  Diagnostics diagnostics;

  std::int64_t component_sum() const {
    return t_convec_ns + t_diff_ns + t_scatter_ns + t_update_ns;
  }
};

namespace detail {

using Clock = std::chrono::steady_clock;

class ScopedTimer {
 public:
  explicit ScopedTimer(std::int64_t& sink) : sink_(sink), start_(Clock::now()) {}
  ~ScopedTimer() {
    sink_ += std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - start_).count();
  }
  ScopedTimer(const ScopedTimer&) = delete;
  ScopedTimer& operator=(const ScopedTimer&) = delete;

 private:
  std::int64_t& sink_;
  Clock::time_point start_;
};

/// Partition-local node numbering and the merge plan that folds partition
/// residuals back onto global nodes in ascending partition order.
struct PartitionLayout {
  std::vector<MeshPartition> parts;
  std::vector<std::vector<index_t>> local_nodes;  // per partition: local -> global
  std::vector<index_t> local_slot;                // e*Q + a -> local index in owning partition
  // CSR over global nodes: entries (partition, local index), partition-sorted.
  std::vector<std::size_t> merge_offsets;
  std::vector<std::pair<int, index_t>> merge_entries;
};

inline PartitionLayout make_partition_layout(const HexMesh& mesh, int num_parts) {
  PartitionLayout lay;
  lay.parts = partition_mesh(mesh, num_parts);
  const std::size_t q = mesh.nodes_per_elem();
  lay.local_nodes.resize(num_parts);
  lay.local_slot.assign(mesh.num_elems * q, -1);
  std::vector<index_t> g2l(mesh.num_nodes, -1);
  std::vector<std::size_t> counts(mesh.num_nodes, 0);
  for (const auto& part : lay.parts) {
    auto& nodes = lay.local_nodes[part.id];
    for (index_t e : part.elements) {
      for (std::size_t a = 0; a < q; ++a) {
        const index_t n = mesh.connec[e * q + mesh.inv_atoijk[a]];
        if (g2l[n] < 0) {
          g2l[n] = static_cast<index_t>(nodes.size());
          nodes.push_back(n);
        }
        lay.local_slot[e * q + a] = g2l[n];
      }
    }
    for (index_t n : nodes) {
      counts[n] += 1;
      g2l[n] = -1;
    }
  }
  lay.merge_offsets.assign(mesh.num_nodes + 1, 0);
  for (std::size_t n = 0; n < mesh.num_nodes; ++n) {
    lay.merge_offsets[n + 1] = lay.merge_offsets[n] + counts[n];
  }
  lay.merge_entries.resize(lay.merge_offsets.back());
  std::vector<std::size_t> fill(lay.merge_offsets.begin(), lay.merge_offsets.end() - 1);
  for (const auto& part : lay.parts) {
    const auto& nodes = lay.local_nodes[part.id];
    for (std::size_t l = 0; l < nodes.size(); ++l) {
      lay.merge_entries[fill[nodes[l]]++] = {part.id, static_cast<index_t>(l)};
    }
  }
  return lay;
}

}  // namespace detail

/// Owns the mesh, basis tables, discretization and flow state of one case.
/// Construction is the untimed setup; advance() is the timed region.
template <typename Scalar>
class Simulation {
 public:
  static constexpr std::size_t kFields = kNumConserved;
  using Fields = FieldSet<Scalar, kFields>;

  Simulation(const Simulation&) = delete;
  Simulation& operator=(const Simulation&) = delete;

  explicit Simulation(const SimConfig& cfg)
      : cfg_(cfg), workers_(cfg.workers == 0 ? default_worker_count() : cfg.workers) {
    cfg_.validate();
    cfg_.kernel.precision = precision_of<Scalar>;
    basis_ = gll_nodes_weights(cfg_.order);
    mesh_ = build_box_mesh(cfg_.elems, cfg_.order, cfg_.domain(), cfg_.periodicity());
    jac_ = compute_jacobians(mesh_, basis_);
    if (cfg_.kernel.access == AccessVariant::reg) gather_ = build_gather_table(mesh_);
    disc_ = make_discretization<Scalar>(mesh_, basis_, jac_,
                                        gather_.table.empty() ? nullptr : &gather_);
    validate(cfg_.kernel, disc_);
    mass_ = lumped_mass(mesh_, basis_, jac_);

    const double v0 = 1.0;
    const double rho0 = 1.0;
    const double p0 = pressure_for_mach(v0, rho0, cfg_.mach, kDefaultGamma);
    const auto ext = mesh_.extents;
    // Reference length: TGV wavelength / 2pi, channel half-height.
    const double length = cfg_.flow_case == CaseKind::tgv ? ext[0] / (2.0 * std::numbers::pi)
                                                          : 0.5 * ext[1];
    props_ = FluidProperties::from_prandtl(kDefaultGamma, p0 / rho0,
                                           rho0 * v0 * length / cfg_.reynolds, kDefaultPrandtl);
    if (cfg_.flow_case == CaseKind::tgv) {
      state_ = init_tgv<Scalar>(mesh_, props_, v0, rho0, p0);
    } else {
      state_ = init_channel_flow<Scalar>(mesh_, props_, v0, rho0, p0);
      walls_ = boundary_nodes(mesh_);
    }
    perturb_density(state_, props_, cfg_.seed, cfg_.noise);
    stage_ = state_;

    elements_ = all_elements(mesh_.num_elems);
    contrib_ = ElementResiduals<Scalar>(mesh_.num_elems, mesh_.nodes_per_elem());
    residual_ = ResidualSet<Scalar>(mesh_.num_nodes);
    if (cfg_.partitions > 1) {
      layout_ = detail::make_partition_layout(mesh_, cfg_.partitions);
      local_residual_.resize(cfg_.partitions);
      for (int r = 0; r < cfg_.partitions; ++r) {
        local_residual_[r] = ResidualSet<Scalar>(layout_.local_nodes[r].size());
      }
    }
  }

  const SimConfig& config() const noexcept { return cfg_; }
  const HexMesh& mesh() const noexcept { return mesh_; }
  const QuadratureSet& basis() const noexcept { return basis_; }
  const Discretization<Scalar>& discretization() const noexcept { return disc_; }
  const FluidProperties& properties() const noexcept { return props_; }
  const FlowState<Scalar>& state() const noexcept { return state_; }
  FlowState<Scalar>& state() noexcept { return state_; }
  const std::vector<double>& lumped_mass_vector() const noexcept { return mass_; }
  const std::vector<index_t>& wall_nodes() const noexcept { return walls_; }
  std::int64_t rhs_evaluations() const noexcept { return rhs_evals_; }
  const Workers& workers() const noexcept { return workers_; }

  /// dU/dt at `s` (primitives refreshed first). Writes all five fields of `out`.
  void evaluate_rhs(FlowState<Scalar>& s, Fields& out) {
    ++rhs_evals_;
    {
      detail::ScopedTimer t(stats_.t_update_ns);
      check_valid(s);
      workers_.for_range(s.size(), kNodeGrain,
                         [&](std::size_t b, std::size_t e) { update_primitives(s, props_, b, e); });
    }
    if (cfg_.partitions == 1) {
      {
        detail::ScopedTimer t(stats_.t_convec_ns);
        convection_elements(s, disc_, cfg_.kernel, elements_, contrib_, workers_);
      }
      {
        detail::ScopedTimer t(stats_.t_scatter_ns);
        residual_.zero();
        scatter_accumulate(contrib_, std::span<const index_t>(elements_),
                           global_target(disc_, cfg_.kernel.access), cfg_.kernel.scatter,
                           FieldMask::all(), residual_, workers_, cfg_.kernel.chunk);
      }
      {
        detail::ScopedTimer t(stats_.t_diff_ns);
        diffusion_elements(s, disc_, props_, cfg_.kernel, elements_, contrib_, workers_);
      }
      {
        detail::ScopedTimer t(stats_.t_scatter_ns);
        scatter_accumulate(contrib_, std::span<const index_t>(elements_),
                           global_target(disc_, cfg_.kernel.access), cfg_.kernel.scatter,
                           FieldMask::without_mass(), residual_, workers_, cfg_.kernel.chunk);
      }
    } else {
      partitioned_residual(s);
    }

    detail::ScopedTimer t(stats_.t_update_ns);
    const Scalar* m = disc_.mass.data();
    const std::array<Scalar, kFields> force{
        Scalar(0), static_cast<Scalar>(props_.body_force[0]),
        static_cast<Scalar>(props_.body_force[1]), static_cast<Scalar>(props_.body_force[2]),
        static_cast<Scalar>(props_.energy_source)};
    workers_.for_range(s.size(), kNodeGrain, [&](std::size_t b, std::size_t e) {
      for (std::size_t f = 0; f < kFields; ++f) {
        const Scalar* r = residual_.field[f].data();
        Scalar* o = out[f].data();
        for (std::size_t n = b; n < e; ++n) o[n] = -r[n] / m[n] + force[f];
      }
    });
    for (index_t n : walls_) {
      for (int d = 1; d <= 3; ++d) out[d][n] = Scalar(0);
    }
  }

  void step() {
    const std::array<std::vector<Scalar>*, kFields> y{&state_.rho, &state_.mom[0],
                                                      &state_.mom[1], &state_.mom[2],
                                                      &state_.energy};
    const std::array<std::vector<Scalar>*, kFields> st{&stage_.rho, &stage_.mom[0],
                                                       &stage_.mom[1], &stage_.mom[2],
                                                       &stage_.energy};
    try {
      rk4_step<Scalar, kFields>(
          y, st, static_cast<Scalar>(cfg_.dt), [&](Fields& k) { evaluate_rhs(stage_, k); }, rk_,
          [&](std::size_t n, auto&& body) {
            detail::ScopedTimer t(stats_.t_update_ns);
            workers_.for_range(n, kNodeGrain, body);
          });
      detail::ScopedTimer t(stats_.t_update_ns);
      update_primitives(state_, props_);
    } catch (const StateError& err) {
      throw InstabilityError(std::string("state became invalid during RK4 step ") +
                             std::to_string(stats_.steps) + " (" + err.what() +
                             "); try a smaller dt");
    }
    ++stats_.steps;
  }

  /// Runs `steps` RK4 steps inside the timed region.
  RunStats advance(int steps) {
    stats_ = RunStats{};
    const auto start = detail::Clock::now();
    for (int i = 0; i < steps; ++i) step();
    stats_.wall_ns =
        std::chrono::duration_cast<std::chrono::nanoseconds>(detail::Clock::now() - start)
            .count();
    RunStats out = stats_;
    out.rhs_evaluations = 4 * out.steps;
    out.num_nodes = mesh_.num_nodes;
    out.diagnostics = diagnostics();
    return out;
  }

  Diagnostics diagnostics() const {
    Diagnostics d;
    for (std::size_t n = 0; n < state_.size(); ++n) {
      d.total_mass += mass_[n] * static_cast<double>(state_.rho[n]);
      d.total_energy += mass_[n] * static_cast<double>(state_.energy[n]);
      const double u0 = state_.mom[0][n] / static_cast<double>(state_.rho[n]);
      const double u1 = state_.mom[1][n] / static_cast<double>(state_.rho[n]);
      const double u2 = state_.mom[2][n] / static_cast<double>(state_.rho[n]);
      d.max_velocity = std::max(d.max_velocity, std::sqrt(u0 * u0 + u1 * u1 + u2 * u2));
    }
    return d;
  }

 private:
  static constexpr std::size_t kNodeGrain = 4096;

  void check_valid(const FlowState<Scalar>& s) const {
    if (s.size() != mesh_.num_nodes) throw ConfigError("state size does not match the mesh");
  }

  void partitioned_residual(const FlowState<Scalar>& s) {
    const int parts = cfg_.partitions;
    const auto part_elems = [&](int r) {
      return std::span<const index_t>(layout_.parts[r].elements);
    };
    {
      detail::ScopedTimer t(stats_.t_convec_ns);
      workers_.for_range(parts, 1, [&](std::size_t b, std::size_t e) {
        for (std::size_t r = b; r < e; ++r) {
          convection_elements(s, disc_, cfg_.kernel, part_elems(static_cast<int>(r)), contrib_,
                              workers_);
        }
      });
    }
    const auto local_target = [this](std::size_t e, std::size_t a) -> std::size_t {
      return static_cast<std::size_t>(layout_.local_slot[e * disc_.npe + a]);
    };
    const auto scatter_parts = [&](FieldMask mask, bool zero) {
      workers_.for_range(parts, 1, [&](std::size_t b, std::size_t e) {
        for (std::size_t r = b; r < e; ++r) {
          if (zero) local_residual_[r].zero();
          scatter_accumulate(contrib_, part_elems(static_cast<int>(r)), local_target,
                             cfg_.kernel.scatter, mask, local_residual_[r], workers_,
                             cfg_.kernel.chunk);
        }
      });
    };
    {
      detail::ScopedTimer t(stats_.t_scatter_ns);
      scatter_parts(FieldMask::all(), true);
    }
    {
      detail::ScopedTimer t(stats_.t_diff_ns);
      workers_.for_range(parts, 1, [&](std::size_t b, std::size_t e) {
        for (std::size_t r = b; r < e; ++r) {
          diffusion_elements(s, disc_, props_, cfg_.kernel, part_elems(static_cast<int>(r)),
                             contrib_, workers_);
        }
      });
    }
    detail::ScopedTimer t(stats_.t_scatter_ns);
    scatter_parts(FieldMask::without_mass(), false);
    // Shared-node exchange: sum partition contributions in partition order.
    workers_.for_range(mesh_.num_nodes, kNodeGrain, [&](std::size_t b, std::size_t e) {
      for (std::size_t f = 0; f < kFields; ++f) {
        Scalar* r = residual_.field[f].data();
        for (std::size_t n = b; n < e; ++n) {
          Scalar acc = Scalar(0);
          for (std::size_t i = layout_.merge_offsets[n]; i < layout_.merge_offsets[n + 1]; ++i) {
            const auto [part, local] = layout_.merge_entries[i];
            acc += local_residual_[part].field[f][local];
          }
          r[n] = acc;
        }
      }
    });
  }

  SimConfig cfg_;
  Workers workers_;
  QuadratureSet basis_;
  HexMesh mesh_;
  JacobianData jac_;
  GatherTable gather_;
  Discretization<Scalar> disc_;
  std::vector<double> mass_;
  FluidProperties props_;
  FlowState<Scalar> state_;
  FlowState<Scalar> stage_;
  std::vector<index_t> walls_;
  std::vector<index_t> elements_;
  ElementResiduals<Scalar> contrib_;
  ResidualSet<Scalar> residual_;
  detail::PartitionLayout layout_;
  std::vector<ResidualSet<Scalar>> local_residual_;
  Rk4Buffers<Scalar, kFields> rk_;
  RunStats stats_;
  std::int64_t rhs_evals_ = 0;
};

/// Sets up the case (untimed), runs the warm-up steps (untimed) and then
/// num_steps timed RK4 steps.
template <typename Scalar>
RunStats run_simulation_as(const SimConfig& cfg) {
  Simulation<Scalar> sim(cfg);
  if (cfg.warmup_steps > 0) sim.advance(cfg.warmup_steps);
  return sim.advance(cfg.num_steps);
}

inline RunStats run_simulation(const SimConfig& cfg) {
  cfg.validate();
  return cfg.kernel.precision == Precision::fp32 ? run_simulation_as<float>(cfg)
                                                 : run_simulation_as<double>(cfg);
}

}  // namespace sembench
