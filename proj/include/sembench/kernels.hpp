#pragma once

// Convection and diffusion residual kernels over all elements.
//
// Each kernel runs per element: (1) gather nodal quantities, (2a) contract
// with the derivative matrix along the three tensor lines through every
// quadrature point, (2b) map to physical space with the inverse Jacobian,
// (2c) form the term-specific fluxes, and (3) write the weighted per-node
// contribution into an element-local residual buffer. scatter_accumulate()
// then sums those buffers onto global nodes.
//
// The four access variants differ only in where operands come from:
//   base     stage the element's nodal fields into contiguous scratch first
//   no_prl   read global arrays through connec(e, invAtoIJK(i,j,k)) in the loop
//   prl_prf  base, plus copy every contraction line into a fixed line buffer
//   reg      no_prl, but every lookup is one precomputed gather-table read
// All variants evaluate the same expressions in the same order, so they agree
// bitwise; the fused (unified) and split paths do as well.

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "sembench/basis.hpp"
#include "sembench/error.hpp"
#include "sembench/mesh.hpp"
#include "sembench/parallel.hpp"
#include "sembench/state.hpp"

namespace sembench {

enum class AccessVariant { base, no_prl, prl_prf, reg };
enum class Fusion { unified, split };
enum class ScatterMode { atomic, deterministic };

inline constexpr std::array<AccessVariant, 4> kAllVariants{
    AccessVariant::base, AccessVariant::no_prl, AccessVariant::prl_prf, AccessVariant::reg};
inline constexpr std::array<Fusion, 2> kAllFusions{Fusion::unified, Fusion::split};

inline std::string_view to_string(AccessVariant v) {
  switch (v) {
    case AccessVariant::base: return "base";
    case AccessVariant::no_prl: return "no_prl";
    case AccessVariant::prl_prf: return "prl_prf";
    case AccessVariant::reg: return "reg";
  }
  return "?";
}
inline std::string_view to_string(Fusion f) { return f == Fusion::unified ? "unified" : "split"; }
inline std::string_view to_string(ScatterMode s) {
  return s == ScatterMode::atomic ? "atomic" : "deterministic";
}

inline AccessVariant parse_variant(std::string_view s) {
  for (auto v : kAllVariants) {
    if (to_string(v) == s) return v;
  }
  throw ConfigError("unknown variant '" + std::string(s) +
                    "' (valid: base, no_prl, prl_prf, reg)");
}
inline Fusion parse_fusion(std::string_view s) {
  for (auto f : kAllFusions) {
    if (to_string(f) == s) return f;
  }
  throw ConfigError("unknown fusion '" + std::string(s) + "' (valid: unified, split)");
}
inline ScatterMode parse_scatter(std::string_view s) {
  if (s == "atomic") return ScatterMode::atomic;
  if (s == "deterministic") return ScatterMode::deterministic;
  throw ConfigError("unknown scatter mode '" + std::string(s) +
                    "' (valid: atomic, deterministic)");
}
inline Precision parse_precision(std::string_view s) {
  if (s == "fp32") return Precision::fp32;
  if (s == "fp64") return Precision::fp64;
  throw ConfigError("unknown precision '" + std::string(s) + "' (valid: fp32, fp64)");
}

struct KernelConfig {
  AccessVariant access = AccessVariant::base;
  Fusion fusion = Fusion::unified;
  ScatterMode scatter = ScatterMode::deterministic;
  Precision precision = Precision::fp64;
  /// Elements per worker task.
  std::size_t chunk = 16;
  /// Scan element outputs for NaN/Inf and throw NumericalFault.
  bool check_finite = false;
};

/// Diagonal mass: sum over (e, a) -> n of w_i w_j w_k det J(e, a).
inline std::vector<double> lumped_mass(const HexMesh& mesh, const QuadratureSet& basis,
                                       const JacobianData& jac) {
  const std::size_t q = mesh.nodes_per_elem();
  std::vector<double> m(mesh.num_nodes, 0.0);
  for (std::size_t e = 0; e < mesh.num_elems; ++e) {
    for (std::size_t a = 0; a < q; ++a) {
      const auto [i, j, k] = inv_linearize(mesh.order, a);
      const double w = basis.weights[i] * basis.weights[j] * basis.weights[k];
      m[mesh.connec[e * q + mesh.inv_atoijk[a]]] += w * jac.determinant(e, a);
    }
  }
  return m;
}

/// Everything a kernel reads besides the flow state, cast to the kernel
/// precision. Index arrays are borrowed from the mesh and gather table.
template <typename Scalar>
struct Discretization {
  int order = 0;
  std::size_t n1 = 0;
  std::size_t npe = 0;
  std::size_t num_elems = 0;
  std::size_t num_nodes = 0;
  std::vector<Scalar> deriv;  // n1 x n1, row-major
  std::vector<Scalar> jinv;   // (e*Q + q)*9 + b*3 + d
  std::vector<Scalar> wdet;   // e*Q + q: w_i w_j w_k det J
  std::vector<Scalar> mass;   // lumped, per global node
  std::span<const index_t> connec;
  std::span<const index_t> inv_atoijk;
  std::span<const index_t> table;
  std::span<const index_t> stencil;

  bool has_gather_table() const noexcept { return !table.empty() && !stencil.empty(); }
};

template <typename Scalar>
Discretization<Scalar> make_discretization(const HexMesh& mesh, const QuadratureSet& basis,
                                           const JacobianData& jac,
                                           const GatherTable* gather = nullptr) {
  Discretization<Scalar> d;
  d.order = mesh.order;
  d.n1 = static_cast<std::size_t>(mesh.order) + 1;
  d.npe = mesh.nodes_per_elem();
  d.num_elems = mesh.num_elems;
  d.num_nodes = mesh.num_nodes;
  d.deriv.assign(basis.deriv.begin(), basis.deriv.end());
  d.jinv.assign(jac.jinv.begin(), jac.jinv.end());
  d.wdet.resize(jac.det.size());
  for (std::size_t e = 0; e < mesh.num_elems; ++e) {
    for (std::size_t a = 0; a < d.npe; ++a) {
      const auto [i, j, k] = inv_linearize(mesh.order, a);
      d.wdet[e * d.npe + a] = static_cast<Scalar>(
          basis.weights[i] * basis.weights[j] * basis.weights[k] * jac.determinant(e, a));
    }
  }
  const auto m = lumped_mass(mesh, basis, jac);
  d.mass.assign(m.begin(), m.end());
  d.connec = mesh.connec;
  d.inv_atoijk = mesh.inv_atoijk;
  if (gather != nullptr) {
    d.table = gather->table;
    d.stencil = gather->stencil;
  }
  return d;
}

template <typename Scalar>
void validate(const KernelConfig& cfg, const Discretization<Scalar>& disc) {
  if (cfg.access == AccessVariant::reg && !disc.has_gather_table()) {
    throw ConfigError("variant 'reg' requires a gather table with stencil layout");
  }
  if (cfg.precision != precision_of<Scalar>) {
    throw ConfigError("kernel precision does not match the state precision");
  }
  if (cfg.chunk == 0) throw ConfigError("element chunk size must be >= 1");
}

/// Per-element, per-local-node contributions: field[f][e*Q + a], a lexicographic.
template <typename Scalar>
struct ElementResiduals {
  std::size_t npe = 0;
  std::array<std::vector<Scalar>, kNumConserved> field;

  ElementResiduals() = default;
  ElementResiduals(std::size_t num_elems, std::size_t nodes_per_elem) : npe(nodes_per_elem) {
    for (auto& f : field) f.assign(num_elems * nodes_per_elem, Scalar(0));
  }
};

/// Global nodal residuals: field 0 mass, 1..3 momentum, 4 energy.
template <typename Scalar>
struct ResidualSet {
  std::array<std::vector<Scalar>, kNumConserved> field;

  ResidualSet() = default;
  explicit ResidualSet(std::size_t n) {
    for (auto& f : field) f.assign(n, Scalar(0));
  }
  std::size_t size() const noexcept { return field[0].size(); }
  void zero() {
    for (auto& f : field) std::fill(f.begin(), f.end(), Scalar(0));
  }
};

namespace detail {

inline constexpr std::size_t kMaxLine = static_cast<std::size_t>(kMaxOrder) + 1;

// Which equations a kernel pass produces.
struct EqRange {
  int begin;
  int end;
  bool has(int eq) const noexcept { return eq >= begin && eq < end; }
};

template <typename Scalar>
struct FieldPtrs {
  std::array<const Scalar*, 3> mom{};
  const Scalar* energy = nullptr;
  std::array<const Scalar*, 3> vel{};
  const Scalar* pressure = nullptr;
  const Scalar* temperature = nullptr;
};

template <typename Scalar>
FieldPtrs<Scalar> global_fields(const FlowState<Scalar>& s) {
  FieldPtrs<Scalar> f;
  for (int d = 0; d < 3; ++d) {
    f.mom[d] = s.mom[d].data();
    f.vel[d] = s.vel[d].data();
  }
  f.energy = s.energy.data();
  f.pressure = s.pressure.data();
  f.temperature = s.temperature.data();
  return f;
}

/// Flux of equation `eq` along direction `d` at entry `i`.
template <typename Scalar>
inline Scalar convective_flux(const FieldPtrs<Scalar>& f, int eq, int d, std::size_t i) {
  if (eq == 0) return f.mom[d][i];
  if (eq == 4) return (f.energy[i] + f.pressure[i]) * f.vel[d][i];
  const int c = eq - 1;
  const Scalar t = f.mom[c][i] * f.vel[d][i];
  return c == d ? t + f.pressure[i] : t;
}

/// d/dx_d from reference derivatives g: sum_b jinv[b][d] g_b.
template <typename Scalar>
inline Scalar to_physical(const Scalar* ji, int d, const Scalar (&g)[3]) {
  return ji[d] * g[0] + ji[3 + d] * g[1] + ji[6 + d] * g[2];
}

/// Reference-direction contravariant component: sum_d jinv[b][d] F_d.
template <typename Scalar>
inline Scalar to_reference(const Scalar* ji, int b, const Scalar (&flux)[3]) {
  return ji[b * 3] * flux[0] + ji[b * 3 + 1] * flux[1] + ji[b * 3 + 2] * flux[2];
}

/// Tensor lines through point q: the m-th point along b is start[b] + m*stride[b].
struct Lines {
  std::size_t tensor[3];
  std::size_t start[3];
  std::size_t stride[3];
};

inline Lines lines_through(std::size_t q, std::size_t n1) {
  Lines l;
  l.tensor[0] = q % n1;
  l.tensor[1] = (q / n1) % n1;
  l.tensor[2] = q / (n1 * n1);
  l.stride[0] = 1;
  l.stride[1] = n1;
  l.stride[2] = n1 * n1;
  for (int b = 0; b < 3; ++b) l.start[b] = q - l.tensor[b] * l.stride[b];
  return l;
}

template <typename Scalar>
struct Scratch {
  // Staged element fields (base / prl_prf): mom x3, energy, vel x3, p, T.
  std::array<std::vector<Scalar>, 9> local;
  std::array<std::vector<Scalar>, 3> flux;
  // Diffusion: reference-direction fluxes per equation, [eq][b][q].
  std::array<std::array<std::vector<Scalar>, 3>, kNumConserved> contra;

  explicit Scratch(std::size_t npe) {
    for (auto& v : local) v.resize(npe);
    for (auto& v : flux) v.resize(npe);
    for (auto& eq : contra)
      for (auto& v : eq) v.resize(npe);
  }

  FieldPtrs<Scalar> fields() const {
    FieldPtrs<Scalar> f;
    for (int d = 0; d < 3; ++d) {
      f.mom[d] = local[d].data();
      f.vel[d] = local[4 + d].data();
    }
    f.energy = local[3].data();
    f.pressure = local[7].data();
    f.temperature = local[8].data();
    return f;
  }
};

struct StageMask {
  bool mom = false;
  bool energy = false;
  bool vel = false;
  bool pressure = false;
  bool temperature = false;
};

/// Preloading: copy the element's nodal fields into contiguous scratch via
/// connec(e, invAtoIJK(i,j,k)).
template <typename Scalar>
void stage_element(const Discretization<Scalar>& disc, const FieldPtrs<Scalar>& g,
                   std::size_t e, StageMask mask, Scratch<Scalar>& s) {
  const std::size_t npe = disc.npe;
  const index_t* row = disc.connec.data() + e * npe;
  const index_t* inv = disc.inv_atoijk.data();
  for (std::size_t a = 0; a < npe; ++a) {
    const index_t n = row[inv[a]];
    if (mask.mom)
      for (int d = 0; d < 3; ++d) s.local[d][a] = g.mom[d][n];
    if (mask.energy) s.local[3][a] = g.energy[n];
    if (mask.vel)
      for (int d = 0; d < 3; ++d) s.local[4 + d][a] = g.vel[d][n];
    if (mask.pressure) s.local[7][a] = g.pressure[n];
    if (mask.temperature) s.local[8][a] = g.temperature[n];
  }
}

/// Reference gradient component along b at the point described by `l`:
/// sum_m D[tensor_b][m] * value(m).
template <AccessVariant V, typename Scalar, typename Value>
inline Scalar line_contract(const Scalar* drow, std::size_t n1, Value&& value) {
  Scalar acc = Scalar(0);
  if constexpr (V == AccessVariant::prl_prf) {
    Scalar dbuf[kMaxLine];
    Scalar vbuf[kMaxLine];
    for (std::size_t m = 0; m < n1; ++m) {
      dbuf[m] = drow[m];
      vbuf[m] = value(m);
    }
    for (std::size_t m = 0; m < n1; ++m) acc += dbuf[m] * vbuf[m];
  } else {
    for (std::size_t m = 0; m < n1; ++m) acc += drow[m] * value(m);
  }
  return acc;
}

/// Global node of the m-th point along direction b through q, for the
/// variants that do not stage.
template <AccessVariant V, typename Scalar>
inline index_t line_node(const Discretization<Scalar>& disc, std::size_t e, std::size_t q,
                         const Lines& l, int b, std::size_t m) {
  if constexpr (V == AccessVariant::reg) {
    return disc.stencil[((e * disc.npe + q) * 3 + b) * disc.n1 + m];
  } else {
    return disc.connec[e * disc.npe + disc.inv_atoijk[l.start[b] + m * l.stride[b]]];
  }
}

template <AccessVariant V, typename Scalar>
inline index_t point_node(const Discretization<Scalar>& disc, std::size_t e, std::size_t q) {
  if constexpr (V == AccessVariant::reg) {
    return disc.table[e * disc.npe + q];
  } else {
    return disc.connec[e * disc.npe + disc.inv_atoijk[q]];
  }
}

inline constexpr bool stages(AccessVariant v) {
  return v == AccessVariant::base || v == AccessVariant::prl_prf;
}

template <AccessVariant V, typename Scalar>
void convection_element(const Discretization<Scalar>& disc, const FieldPtrs<Scalar>& g,
                        std::size_t e, EqRange eqs, Scratch<Scalar>& s,
                        ElementResiduals<Scalar>& out) {
  const std::size_t n1 = disc.n1;
  const std::size_t npe = disc.npe;
  const Scalar* deriv = disc.deriv.data();

  if constexpr (stages(V)) {
    StageMask mask;
    mask.mom = eqs.has(0) || eqs.has(1) || eqs.has(2) || eqs.has(3);
    mask.energy = eqs.has(4);
    mask.vel = mask.pressure = eqs.has(1) || eqs.has(2) || eqs.has(3) || eqs.has(4);
    stage_element(disc, g, e, mask, s);
    const auto local = s.fields();
    for (int eq = eqs.begin; eq < eqs.end; ++eq) {
      for (int d = 0; d < 3; ++d)
        for (std::size_t a = 0; a < npe; ++a) s.flux[d][a] = convective_flux(local, eq, d, a);
      Scalar* r = out.field[eq].data() + e * npe;
      for (std::size_t q = 0; q < npe; ++q) {
        const Lines l = lines_through(q, n1);
        const Scalar* ji = disc.jinv.data() + (e * npe + q) * 9;
        Scalar div = Scalar(0);
        for (int d = 0; d < 3; ++d) {
          const Scalar* f = s.flux[d].data();
          Scalar gref[3];
          for (int b = 0; b < 3; ++b) {
            gref[b] = line_contract<V>(deriv + l.tensor[b] * n1, n1, [&](std::size_t m) {
              return f[l.start[b] + m * l.stride[b]];
            });
          }
          div += to_physical(ji, d, gref);
        }
        r[q] = disc.wdet[e * npe + q] * div;
      }
    }
  } else {
    for (int eq = eqs.begin; eq < eqs.end; ++eq) {
      Scalar* r = out.field[eq].data() + e * npe;
      for (std::size_t q = 0; q < npe; ++q) {
        const Lines l = lines_through(q, n1);
        const Scalar* ji = disc.jinv.data() + (e * npe + q) * 9;
        Scalar div = Scalar(0);
        for (int d = 0; d < 3; ++d) {
          Scalar gref[3];
          for (int b = 0; b < 3; ++b) {
            gref[b] = line_contract<V>(deriv + l.tensor[b] * n1, n1, [&](std::size_t m) {
              return convective_flux(g, eq, d,
                                     static_cast<std::size_t>(line_node<V>(disc, e, q, l, b, m)));
            });
          }
          div += to_physical(ji, d, gref);
        }
        r[q] = disc.wdet[e * npe + q] * div;
      }
    }
  }
}

/// Viscous stress row i, component d, from velocity gradients gu[c][d].
template <typename Scalar>
inline Scalar viscous_stress(const Scalar (&gu)[3][3], Scalar mu, Scalar lambda_div, int i,
                             int d) {
  const Scalar t = mu * (gu[i][d] + gu[d][i]);
  return i == d ? t + lambda_div : t;
}

template <AccessVariant V, typename Scalar>
void diffusion_element(const Discretization<Scalar>& disc, const FieldPtrs<Scalar>& g,
                       std::size_t e, EqRange eqs, Scalar mu, Scalar kappa, Scratch<Scalar>& s,
                       ElementResiduals<Scalar>& out) {
  const std::size_t n1 = disc.n1;
  const std::size_t npe = disc.npe;
  const Scalar* deriv = disc.deriv.data();
  const bool momentum = eqs.has(1) || eqs.has(2) || eqs.has(3);
  const bool energy = eqs.has(4);
  if (!momentum && !energy) return;

  FieldPtrs<Scalar> src = g;
  if constexpr (stages(V)) {
    StageMask mask;
    mask.vel = true;
    mask.temperature = energy;
    stage_element(disc, g, e, mask, s);
    src = s.fields();
  }

  // Gradient of component values at point q.
  const auto gradient = [&](std::size_t q, const Lines& l, const Scalar* ji,
                            const Scalar* values, Scalar (&out_grad)[3]) {
    Scalar gref[3];
    for (int b = 0; b < 3; ++b) {
      gref[b] = line_contract<V>(deriv + l.tensor[b] * n1, n1, [&](std::size_t m) {
        if constexpr (stages(V)) {
          return values[l.start[b] + m * l.stride[b]];
        } else {
          return values[line_node<V>(disc, e, q, l, b, m)];
        }
      });
    }
    for (int d = 0; d < 3; ++d) out_grad[d] = to_physical(ji, d, gref);
  };

  const Scalar two_thirds = Scalar(2) / Scalar(3);
  for (std::size_t q = 0; q < npe; ++q) {
    const Lines l = lines_through(q, n1);
    const Scalar* ji = disc.jinv.data() + (e * npe + q) * 9;
    const Scalar w = disc.wdet[e * npe + q];

    Scalar gu[3][3];
    for (int c = 0; c < 3; ++c) gradient(q, l, ji, src.vel[c], gu[c]);
    const Scalar lambda_div = -(two_thirds * mu) * (gu[0][0] + gu[1][1] + gu[2][2]);

    if (momentum) {
      for (int i = 0; i < 3; ++i) {
        if (!eqs.has(1 + i)) continue;
        const Scalar flux[3] = {viscous_stress(gu, mu, lambda_div, i, 0),
                                viscous_stress(gu, mu, lambda_div, i, 1),
                                viscous_stress(gu, mu, lambda_div, i, 2)};
        for (int b = 0; b < 3; ++b) s.contra[1 + i][b][q] = w * to_reference(ji, b, flux);
      }
    }
    if (energy) {
      Scalar gT[3];
      gradient(q, l, ji, src.temperature, gT);
      Scalar u[3];
      if constexpr (stages(V)) {
        for (int c = 0; c < 3; ++c) u[c] = src.vel[c][q];
      } else {
        const index_t n = point_node<V>(disc, e, q);
        for (int c = 0; c < 3; ++c) u[c] = src.vel[c][n];
      }
      Scalar flux[3];
      for (int d = 0; d < 3; ++d) {
        flux[d] = (viscous_stress(gu, mu, lambda_div, d, 0) * u[0] +
                   viscous_stress(gu, mu, lambda_div, d, 1) * u[1] +
                   viscous_stress(gu, mu, lambda_div, d, 2) * u[2]) +
                  kappa * gT[d];
      }
      for (int b = 0; b < 3; ++b) s.contra[4][b][q] = w * to_reference(ji, b, flux);
    }
  }

  // Weak-form test-function contraction: R[a] = sum_b sum_m D[m][a_b] G_b(line_b(a), m).
  for (int eq = std::max(eqs.begin, 1); eq < eqs.end; ++eq) {
    Scalar* r = out.field[eq].data() + e * npe;
    for (std::size_t a = 0; a < npe; ++a) {
      const Lines l = lines_through(a, n1);
      Scalar acc = Scalar(0);
      for (int b = 0; b < 3; ++b) {
        const Scalar* gb = s.contra[eq][b].data();
        const std::size_t col = l.tensor[b];
        if constexpr (V == AccessVariant::prl_prf) {
          Scalar dbuf[kMaxLine];
          Scalar vbuf[kMaxLine];
          for (std::size_t m = 0; m < n1; ++m) {
            dbuf[m] = deriv[m * n1 + col];
            vbuf[m] = gb[l.start[b] + m * l.stride[b]];
          }
          for (std::size_t m = 0; m < n1; ++m) acc += dbuf[m] * vbuf[m];
        } else {
          for (std::size_t m = 0; m < n1; ++m)
            acc += deriv[m * n1 + col] * gb[l.start[b] + m * l.stride[b]];
        }
      }
      r[a] = acc;
    }
  }
}

template <typename Scalar>
void check_element_finite(const ElementResiduals<Scalar>& out, std::size_t e, EqRange eqs) {
  for (int eq = eqs.begin; eq < eqs.end; ++eq) {
    const Scalar* r = out.field[eq].data() + e * out.npe;
    for (std::size_t a = 0; a < out.npe; ++a) {
      if (!std::isfinite(r[a])) throw NumericalFault(e);
    }
  }
}

/// Kernel passes for a fusion mode: one fused pass, or separate mass,
/// momentum and energy passes.
inline std::vector<EqRange> passes(Fusion f) {
  if (f == Fusion::unified) return {{0, kNumConserved}};
  return {{0, 1}, {1, 4}, {4, 5}};
}

template <typename Scalar, typename ElementFn>
void element_loop(const Discretization<Scalar>& disc, const KernelConfig& cfg,
                  std::span<const index_t> elems, EqRange eqs, ElementResiduals<Scalar>& out,
                  const Workers& workers, ElementFn&& fn) {
  workers.for_range(elems.size(), cfg.chunk, [&](std::size_t begin, std::size_t end) {
    Scratch<Scalar> scratch(disc.npe);
    for (std::size_t i = begin; i < end; ++i) {
      const auto e = static_cast<std::size_t>(elems[i]);
      fn(e, scratch);
      if (cfg.check_finite) check_element_finite(out, e, eqs);
    }
  });
}

template <typename Fn>
decltype(auto) dispatch_variant(AccessVariant v, Fn&& fn) {
  switch (v) {
    case AccessVariant::no_prl:
      return fn(std::integral_constant<AccessVariant, AccessVariant::no_prl>{});
    case AccessVariant::prl_prf:
      return fn(std::integral_constant<AccessVariant, AccessVariant::prl_prf>{});
    case AccessVariant::reg:
      return fn(std::integral_constant<AccessVariant, AccessVariant::reg>{});
    case AccessVariant::base:
      break;
  }
  return fn(std::integral_constant<AccessVariant, AccessVariant::base>{});
}

}  // namespace detail

/// Convective element contributions w*detJ * div F_c at every element node,
/// for the listed elements.
template <typename Scalar>
void convection_elements(const FlowState<Scalar>& state, const Discretization<Scalar>& disc,
                         const KernelConfig& cfg, std::span<const index_t> elems,
                         ElementResiduals<Scalar>& out, const Workers& workers) {
  validate(cfg, disc);
  const auto g = detail::global_fields(state);
  for (const auto eqs : detail::passes(cfg.fusion)) {
    detail::dispatch_variant(cfg.access, [&](auto v) {
      detail::element_loop(disc, cfg, elems, eqs, out, workers,
                           [&](std::size_t e, detail::Scratch<Scalar>& s) {
                             detail::convection_element<decltype(v)::value>(disc, g, e, eqs, s,
                                                                            out);
                           });
    });
  }
}

/// Viscous and thermal element contributions (weak form); the mass field is
/// left untouched.
template <typename Scalar>
void diffusion_elements(const FlowState<Scalar>& state, const Discretization<Scalar>& disc,
                        const FluidProperties& props, const KernelConfig& cfg,
                        std::span<const index_t> elems, ElementResiduals<Scalar>& out,
                        const Workers& workers) {
  validate(cfg, disc);
  const auto g = detail::global_fields(state);
  const auto mu = static_cast<Scalar>(props.effective_mu());
  const auto kappa = static_cast<Scalar>(props.kappa);
  // The mass equation has no diffusive term, so its split pass is empty.
  for (const auto eqs : detail::passes(cfg.fusion)) {
    if (eqs.end <= 1) continue;
    detail::dispatch_variant(cfg.access, [&](auto v) {
      detail::element_loop(disc, cfg, elems, eqs, out, workers,
                           [&](std::size_t e, detail::Scratch<Scalar>& s) {
                             detail::diffusion_element<decltype(v)::value>(disc, g, e, eqs, mu,
                                                                           kappa, s, out);
                           });
    });
  }
}

/// Fields a scatter pass moves; diffusion carries no mass residual.
struct FieldMask {
  std::array<bool, kNumConserved> on{true, true, true, true, true};
  static FieldMask all() { return {}; }
  static FieldMask without_mass() { return {{false, true, true, true, true}}; }
};

/// Adds element contributions onto global nodes: out[target(e,a)] += c[e][a].
/// `target` maps (element, local node) to an index of `out`, which may be a
/// partition-local numbering. Deterministic mode walks elements in list order
/// on the calling thread; atomic mode fans out and uses atomic adds.
template <typename Scalar, typename Target>
void scatter_accumulate(const ElementResiduals<Scalar>& contrib, std::span<const index_t> elems,
                        Target&& target, ScatterMode mode, FieldMask mask,
                        ResidualSet<Scalar>& out, const Workers& workers,
                        std::size_t chunk = 16) {
  const std::size_t npe = contrib.npe;
  const auto body = [&](std::size_t begin, std::size_t end, auto add) {
    for (int f = 0; f < kNumConserved; ++f) {
      if (!mask.on[f]) continue;
      const Scalar* c = contrib.field[f].data();
      Scalar* r = out.field[f].data();
      for (std::size_t i = begin; i < end; ++i) {
        const auto e = static_cast<std::size_t>(elems[i]);
        for (std::size_t a = 0; a < npe; ++a) add(r[target(e, a)], c[e * npe + a]);
      }
    }
  };
  if (mode == ScatterMode::deterministic || workers.sequential()) {
    body(0, elems.size(), [](Scalar& dst, Scalar v) { dst += v; });
    return;
  }
  workers.for_range(elems.size(), chunk, [&](std::size_t begin, std::size_t end) {
    body(begin, end, [](Scalar& dst, Scalar v) {
      std::atomic_ref<Scalar>(dst).fetch_add(v, std::memory_order_relaxed);
    });
  });
}

/// Global-node target for a discretization: the gather table under reg,
/// connec(e, invAtoIJK(a)) otherwise.
template <typename Scalar>
auto global_target(const Discretization<Scalar>& disc, AccessVariant v) {
  const bool use_table = v == AccessVariant::reg && !disc.table.empty();
  return [&disc, use_table](std::size_t e, std::size_t a) -> std::size_t {
    return use_table ? static_cast<std::size_t>(disc.table[e * disc.npe + a])
                     : static_cast<std::size_t>(
                           disc.connec[e * disc.npe + disc.inv_atoijk[a]]);
  };
}

inline std::vector<index_t> all_elements(std::size_t num_elems) {
  std::vector<index_t> e(num_elems);
  for (std::size_t i = 0; i < num_elems; ++i) e[i] = static_cast<index_t>(i);
  return e;
}

/// Assembled global convection residual over the whole mesh.
template <typename Scalar>
ResidualSet<Scalar> convection_residual(const FlowState<Scalar>& state,
                                        const Discretization<Scalar>& disc,
                                        const KernelConfig& cfg,
                                        const Workers& workers = Workers(1)) {
  const auto elems = all_elements(disc.num_elems);
  ElementResiduals<Scalar> contrib(disc.num_elems, disc.npe);
  convection_elements(state, disc, cfg, elems, contrib, workers);
  ResidualSet<Scalar> out(disc.num_nodes);
  scatter_accumulate(contrib, std::span<const index_t>(elems), global_target(disc, cfg.access),
                     cfg.scatter, FieldMask::all(), out, workers, cfg.chunk);
  return out;
}

template <typename Scalar>
ResidualSet<Scalar> diffusion_residual(const FlowState<Scalar>& state,
                                       const Discretization<Scalar>& disc,
                                       const FluidProperties& props, const KernelConfig& cfg,
                                       const Workers& workers = Workers(1)) {
  const auto elems = all_elements(disc.num_elems);
  ElementResiduals<Scalar> contrib(disc.num_elems, disc.npe);
  diffusion_elements(state, disc, props, cfg, elems, contrib, workers);
  ResidualSet<Scalar> out(disc.num_nodes);
  scatter_accumulate(contrib, std::span<const index_t>(elems), global_target(disc, cfg.access),
                     cfg.scatter, FieldMask::without_mass(), out, workers, cfg.chunk);
  return out;
}

/// Physical gradient of a nodal field at point q of element e, through the
/// same derivative-matrix and inverse-Jacobian path the kernels use.
template <typename Scalar>
std::array<Scalar, 3> element_gradient(const Discretization<Scalar>& disc,
                                       std::span<const Scalar> nodal, std::size_t e,
                                       std::size_t q) {
  const auto l = detail::lines_through(q, disc.n1);
  const Scalar* ji = disc.jinv.data() + (e * disc.npe + q) * 9;
  Scalar gref[3];
  for (int b = 0; b < 3; ++b) {
    gref[b] = detail::line_contract<AccessVariant::base>(
        disc.deriv.data() + l.tensor[b] * disc.n1, disc.n1, [&](std::size_t m) {
          return nodal[disc.connec[e * disc.npe + disc.inv_atoijk[l.start[b] + m * l.stride[b]]]];
        });
  }
  return {detail::to_physical(ji, 0, gref), detail::to_physical(ji, 1, gref),
          detail::to_physical(ji, 2, gref)};
}

}  // namespace sembench
