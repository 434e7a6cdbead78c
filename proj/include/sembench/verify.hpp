#pragma once

// Self-checks behind `sembench verify`: each returns a named pass/fail with
// the measured quantity.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <sstream>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "sembench/basis.hpp"
#include "sembench/bench.hpp"
#include "sembench/kernels.hpp"
#include "sembench/mesh.hpp"
#include "sembench/state.hpp"
#include "sembench/timeloop.hpp"

namespace sembench {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

/// max over fields of ||a - ref||_inf / ||ref||_inf (absolute when ref is 0).
template <typename Scalar>
double residual_rel_diff(const ResidualSet<Scalar>& a, const ResidualSet<Scalar>& ref) {
  double worst = 0.0;
  for (int f = 0; f < kNumConserved; ++f) {
    double diff = 0.0;
    double norm = 0.0;
    for (std::size_t n = 0; n < ref.size(); ++n) {
      diff = std::max(diff, std::abs(static_cast<double>(a.field[f][n]) - ref.field[f][n]));
      norm = std::max(norm, std::abs(static_cast<double>(ref.field[f][n])));
    }
    worst = std::max(worst, norm > 0.0 ? diff / norm : diff);
  }
  return worst;
}

/// Convection + diffusion residual of every (variant, fusion) under `scatter`
/// against base/unified/deterministic; returns the worst relative difference.
template <typename Scalar>
double variant_equivalence(const HexMesh& mesh, const QuadratureSet& basis,
                           const FluidProperties& props, std::uint64_t seed,
                           ScatterMode scatter = ScatterMode::deterministic,
                           std::size_t workers = 1) {
  const Workers pool(workers);
  const auto jac = compute_jacobians(mesh, basis);
  const auto gather = build_gather_table(mesh);
  const auto disc = make_discretization<Scalar>(mesh, basis, jac, &gather);
  const auto state = random_state<Scalar>(mesh, props, seed);
  KernelConfig ref_cfg;
  ref_cfg.precision = precision_of<Scalar>;
  ref_cfg.scatter = scatter;
  KernelConfig det_cfg = ref_cfg;
  det_cfg.scatter = ScatterMode::deterministic;
  const auto ref_c = convection_residual(state, disc, det_cfg);
  const auto ref_d = diffusion_residual(state, disc, props, det_cfg);
  double worst = 0.0;
  for (auto v : kAllVariants) {
    for (auto f : kAllFusions) {
      KernelConfig cfg = ref_cfg;
      cfg.access = v;
      cfg.fusion = f;
      worst = std::max(worst,
                       residual_rel_diff(convection_residual(state, disc, cfg, pool), ref_c));
      worst = std::max(
          worst, residual_rel_diff(diffusion_residual(state, disc, props, cfg, pool), ref_d));
    }
  }
  return worst;
}

/// Worst error of GLL quadrature on monomials through degree 2p-1, p = 1..7.
inline double quadrature_exactness_error(double* weight_sum_error = nullptr) {
  double worst = 0.0;
  double worst_sum = 0.0;
  for (int p = 1; p <= 7; ++p) {
    const auto q = gll_nodes_weights(p);
    double sum = 0.0;
    for (double w : q.weights) sum += w;
    worst_sum = std::max(worst_sum, std::abs(sum - 2.0));
    for (int k = 0; k <= 2 * p - 1; ++k) {
      double integral = 0.0;
      for (std::size_t i = 0; i < q.size(); ++i) integral += q.weights[i] * std::pow(q.nodes[i], k);
      const double exact = (k % 2 == 1) ? 0.0 : 2.0 / (k + 1);
      worst = std::max(worst, std::abs(integral - exact));
    }
  }
  if (weight_sum_error != nullptr) *weight_sum_error = worst_sum;
  return worst;
}

/// Trilinear field on a stretched non-periodic box: worst gradient error at
/// every element point relative to the largest exact gradient component.
inline double trilinear_gradient_error(int order = 3) {
  const auto basis = gll_nodes_weights(order);
  const auto mesh = build_box_mesh({3, 2, 2}, order, {1.0, 2.5, 0.7}, {false, false, false});
  const auto jac = compute_jacobians(mesh, basis);
  const auto disc = make_discretization<double>(mesh, basis, jac);
  const auto field = [](const std::array<double, 3>& x) {
    return 1.0 + 2.0 * x[0] - 3.0 * x[1] + 0.5 * x[2] + 0.7 * x[0] * x[1] -
           0.4 * x[1] * x[2] + 0.3 * x[0] * x[2] + 0.2 * x[0] * x[1] * x[2];
  };
  const auto grad = [](const std::array<double, 3>& x) {
    return std::array<double, 3>{
        2.0 + 0.7 * x[1] + 0.3 * x[2] + 0.2 * x[1] * x[2],
        -3.0 + 0.7 * x[0] - 0.4 * x[2] + 0.2 * x[0] * x[2],
        0.5 - 0.4 * x[1] + 0.3 * x[0] + 0.2 * x[0] * x[1]};
  };
  std::vector<double> nodal(mesh.num_nodes);
  for (std::size_t n = 0; n < mesh.num_nodes; ++n) nodal[n] = field(mesh.coords[n]);
  double err = 0.0;
  double scale = 0.0;
  for (std::size_t e = 0; e < mesh.num_elems; ++e) {
    for (std::size_t q = 0; q < mesh.nodes_per_elem(); ++q) {
      const auto& x = mesh.coords[mesh.node(e, q)];
      const auto g = element_gradient<double>(disc, nodal, e, q);
      const auto exact = grad(x);
      for (int d = 0; d < 3; ++d) {
        err = std::max(err, std::abs(g[d] - exact[d]));
        scale = std::max(scale, std::abs(exact[d]));
      }
    }
  }
  return err / scale;
}

/// Relative drift of total mass over `steps` RK4 steps of periodic TGV.
inline double tgv_mass_drift(int steps = 10, std::array<int, 3> elems = {4, 4, 4}, int order = 3) {
  SimConfig cfg;
  cfg.elems = elems;
  cfg.order = order;
  cfg.num_steps = steps;
  cfg.workers = 1;
  Simulation<double> sim(cfg);
  const double m0 = sim.diagnostics().total_mass;
  const auto stats = sim.advance(steps);
  return std::abs(stats.diagnostics.total_mass - m0) / m0;
}

/// Convergence slope of RK4 on y1' = -y1 + y2^2, y2' = -y2 with
/// y(0) = (1, 1), exact y2 = e^-t, y1 = 2e^-t - e^-2t, integrated to t = 1.
inline double rk4_convergence_slope() {
  const auto error_for = [](int steps) {
    FieldSet<double, 2> y{std::vector<double>{1.0}, std::vector<double>{1.0}};
    FieldSet<double, 2> stage{std::vector<double>(1), std::vector<double>(1)};
    Rk4Buffers<double, 2> buf;
    const double dt = 1.0 / steps;
    for (int i = 0; i < steps; ++i) {
      rk4_step<double, 2>(
          {&y[0], &y[1]}, {&stage[0], &stage[1]}, dt,
          [&](FieldSet<double, 2>& k) {
            k[0][0] = -stage[0][0] + stage[1][0] * stage[1][0];
            k[1][0] = -stage[1][0];
          },
          buf, [](std::size_t n, auto&& body) { body(std::size_t{0}, n); });
    }
    const double e1 = 2.0 * std::exp(-1.0) - std::exp(-2.0);
    return std::hypot(y[0][0] - e1, y[1][0] - std::exp(-1.0));
  };
  const double e1 = error_for(10);
  const double e2 = error_for(20);
  const double e4 = error_for(40);
  // Least-squares slope of log(err) against log(1/dt) over the three points.
  const double xs[3] = {std::log(10.0), std::log(20.0), std::log(40.0)};
  const double ys[3] = {std::log(e1), std::log(e2), std::log(e4)};
  const double xm = (xs[0] + xs[1] + xs[2]) / 3.0;
  const double ym = (ys[0] + ys[1] + ys[2]) / 3.0;
  double num = 0.0;
  double den = 0.0;
  for (int i = 0; i < 3; ++i) {
    num += (xs[i] - xm) * (ys[i] - ym);
    den += (xs[i] - xm) * (xs[i] - xm);
  }
  return -num / den;
}

inline std::vector<CheckResult> run_verification(
    const std::function<void(const CheckResult&)>& report = {}) {
  std::vector<CheckResult> out;
  const auto run = [&](std::string name, auto&& fn) {
    CheckResult r;
    r.name = std::move(name);
    const auto start = std::chrono::steady_clock::now();
    try {
      std::tie(r.passed, r.detail) = fn();
    } catch (const std::exception& err) {
      r.passed = false;
      r.detail = std::string("threw: ") + err.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (report) report(r);
    out.push_back(std::move(r));
  };
  const auto fmt = [](const char* label, double v) {
    std::ostringstream os;
    os << label << " = " << v;
    return os.str();
  };

  run("quadrature exactness (p=1..7)", [&] {
    double sum_err = 0.0;
    const double err = quadrature_exactness_error(&sum_err);
    return std::pair{err <= 1e-12 && sum_err <= 1e-13,
                     fmt("max monomial error", err) + ", " + fmt("max |sum w - 2|", sum_err)};
  });
  run("derivative matrix rows sum to zero", [&] {
    double worst = 0.0;
    for (int p = 1; p <= kMaxOrder; ++p) {
      const auto q = gll_nodes_weights(p);
      for (std::size_t i = 0; i < q.size(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < q.size(); ++j) s += q.d(i, j);
        worst = std::max(worst, std::abs(s));
      }
    }
    return std::pair{worst <= 1e-12, fmt("max |row sum|", worst)};
  });
  run("trilinear gradient consistency", [&] {
    const double err = trilinear_gradient_error();
    return std::pair{err <= 1e-12, fmt("relative error", err)};
  });
  const auto basis = gll_nodes_weights(3);
  const auto mesh = build_box_mesh({4, 4, 4}, 3, {1.0, 1.0, 1.0}, {true, true, true});
  const auto props = FluidProperties::from_prandtl(1.4, 1.0, 0.05, kDefaultPrandtl);
  run("variant equivalence fp64 (8 variants, 1e-12)", [&] {
    const double d = variant_equivalence<double>(mesh, basis, props, 7);
    return std::pair{d <= 1e-12, fmt("max relative difference", d)};
  });
  run("variant equivalence fp32 (8 variants, 1e-4)", [&] {
    const double d = variant_equivalence<float>(mesh, basis, props, 7);
    return std::pair{d <= 1e-4, fmt("max relative difference", d)};
  });
  run("atomic vs deterministic scatter (5e-13)", [&] {
    const double d = variant_equivalence<double>(mesh, basis, props, 11, ScatterMode::atomic, 4);
    return std::pair{d <= 5e-13, fmt("max relative difference", d)};
  });
  run("TGV mass conservation (10 steps, 1e-11)", [&] {
    const double drift = tgv_mass_drift();
    return std::pair{drift <= 1e-11, fmt("relative drift", drift)};
  });
  run("RK4 convergence order in [3.8, 4.2]", [&] {
    const double slope = rk4_convergence_slope();
    return std::pair{slope >= 3.8 && slope <= 4.2, fmt("slope", slope)};
  });
  run("GNOPS formula", [&] {
    const double g = gnops(1'000'000, 4, 100, 1'000'000'000);
    return std::pair{g == 0.4, fmt("gnops(1e6, 4, 100, 1e9)", g)};
  });
  run("determinism (3 runs, deterministic scatter)", [&] {
    SimConfig cfg;
    cfg.num_steps = 3;
    cfg.seed = 42;
    std::vector<Diagnostics> d;
    for (int i = 0; i < 3; ++i) d.push_back(run_simulation(cfg).diagnostics);
    return std::pair{d[0] == d[1] && d[1] == d[2], fmt("total energy", d[0].total_energy)};
  });
  return out;
}

}  // namespace sembench
