#pragma once

// Brute-force residual assembly for axis-aligned box meshes. Geometry is
// analytic (J = diag(h/2)), the 1-D derivative comes from the product rule on
// the Lagrange cardinals, and every physical gradient is a dense sum over all
// element nodes. Shares nothing with the kernels beyond connectivity, the GLL
// nodes/weights and the state arrays.

#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

#include "sembench/sembench.hpp"

namespace oracle {

using sembench::HexMesh;
using sembench::QuadratureSet;

/// l_j'(x_i) from the product rule, no barycentric tricks.
inline double cardinal_derivative(const std::vector<double>& x, std::size_t i, std::size_t j) {
  const std::size_t n = x.size();
  double sum = 0.0;
  for (std::size_t m = 0; m < n; ++m) {
    if (m == j) continue;
    double prod = 1.0 / (x[j] - x[m]);
    for (std::size_t l = 0; l < n; ++l) {
      if (l == j || l == m) continue;
      prod *= (x[i] - x[l]) / (x[j] - x[l]);
    }
    sum += prod;
  }
  return sum;
}

struct Primitives {
  std::vector<double> rho, e, p, T;
  std::array<std::vector<double>, 3> m, u;
};

inline Primitives primitives(const sembench::FlowState<double>& s,
                             const sembench::FluidProperties& props) {
  const std::size_t n = s.size();
  Primitives w;
  w.rho = s.rho;
  w.e = s.energy;
  w.p.resize(n);
  w.T.resize(n);
  for (int d = 0; d < 3; ++d) {
    w.m[d] = s.mom[d];
    w.u[d].resize(n);
  }
  for (std::size_t i = 0; i < n; ++i) {
    double ke = 0.0;
    for (int d = 0; d < 3; ++d) {
      w.u[d][i] = w.m[d][i] / w.rho[i];
      ke += 0.5 * w.m[d][i] * w.u[d][i];
    }
    w.p[i] = (props.gamma - 1.0) * (w.e[i] - ke);
    w.T[i] = w.p[i] / (w.rho[i] * props.gas_constant);
  }
  return w;
}

struct Element {
  std::vector<std::size_t> node;                 // local a -> global
  std::vector<double> wdet;                      // per point
  std::vector<std::array<double, 3>> grad_dense;  // [q*Q + a] = d l_a / d x at q
};

inline std::vector<Element> elements(const HexMesh& mesh, const QuadratureSet& basis) {
  const int p = mesh.order;
  const std::size_t n1 = p + 1;
  const std::size_t nq = n1 * n1 * n1;
  std::array<double, 3> h{};
  for (int d = 0; d < 3; ++d) h[d] = mesh.extents[d] / mesh.elems[d];
  std::vector<double> dhat(n1 * n1);
  for (std::size_t i = 0; i < n1; ++i)
    for (std::size_t j = 0; j < n1; ++j) dhat[i * n1 + j] = cardinal_derivative(basis.nodes, i, j);

  std::vector<Element> out(mesh.num_elems);
  for (std::size_t e = 0; e < mesh.num_elems; ++e) {
    Element& el = out[e];
    el.node.resize(nq);
    el.wdet.resize(nq);
    el.grad_dense.assign(nq * nq, {0.0, 0.0, 0.0});
    for (std::size_t a = 0; a < nq; ++a) el.node[a] = mesh.connec[e * nq + mesh.inv_atoijk[a]];
    for (std::size_t q = 0; q < nq; ++q) {
      const std::size_t qi[3] = {q % n1, (q / n1) % n1, q / (n1 * n1)};
      el.wdet[q] = basis.weights[qi[0]] * basis.weights[qi[1]] * basis.weights[qi[2]] * h[0] *
                   h[1] * h[2] / 8.0;
      for (std::size_t a = 0; a < nq; ++a) {
        const std::size_t ai[3] = {a % n1, (a / n1) % n1, a / (n1 * n1)};
        for (int d = 0; d < 3; ++d) {
          bool same = true;
          for (int o = 0; o < 3; ++o) {
            if (o != d && qi[o] != ai[o]) same = false;
          }
          if (same) el.grad_dense[q * nq + a][d] = 2.0 / h[d] * dhat[qi[d] * n1 + ai[d]];
        }
      }
    }
  }
  return out;
}

/// Strong-form convection: R[n] += w det div F at every element point.
inline std::array<std::vector<double>, 5> convection(const HexMesh& mesh,
                                                     const QuadratureSet& basis,
                                                     const Primitives& w) {
  const auto els = elements(mesh, basis);
  const std::size_t nq = mesh.nodes_per_elem();
  std::array<std::vector<double>, 5> r;
  for (auto& f : r) f.assign(mesh.num_nodes, 0.0);
  const auto flux = [&](int eq, int d, std::size_t n) {
    if (eq == 0) return w.m[d][n];
    if (eq == 4) return (w.e[n] + w.p[n]) * w.u[d][n];
    const int c = eq - 1;
    return w.m[c][n] * w.u[d][n] + (c == d ? w.p[n] : 0.0);
  };
  for (const auto& el : els) {
    for (std::size_t q = 0; q < nq; ++q) {
      for (int eq = 0; eq < 5; ++eq) {
        double div = 0.0;
        for (std::size_t a = 0; a < nq; ++a) {
          for (int d = 0; d < 3; ++d) div += el.grad_dense[q * nq + a][d] * flux(eq, d, el.node[a]);
        }
        r[eq][el.node[q]] += el.wdet[q] * div;
      }
    }
  }
  return r;
}

/// Weak-form diffusion: R[n(a)] += sum_q w det grad l_a(q) . F_v(q).
inline std::array<std::vector<double>, 5> diffusion(const HexMesh& mesh,
                                                    const QuadratureSet& basis,
                                                    const Primitives& w, double mu,
                                                    double kappa) {
  const auto els = elements(mesh, basis);
  const std::size_t nq = mesh.nodes_per_elem();
  std::array<std::vector<double>, 5> r;
  for (auto& f : r) f.assign(mesh.num_nodes, 0.0);
  for (const auto& el : els) {
    for (std::size_t q = 0; q < nq; ++q) {
      double gu[3][3] = {};
      double gT[3] = {};
      for (std::size_t a = 0; a < nq; ++a) {
        const auto& g = el.grad_dense[q * nq + a];
        for (int d = 0; d < 3; ++d) {
          for (int c = 0; c < 3; ++c) gu[c][d] += g[d] * w.u[c][el.node[a]];
          gT[d] += g[d] * w.T[el.node[a]];
        }
      }
      const double div = gu[0][0] + gu[1][1] + gu[2][2];
      double tau[3][3];
      for (int i = 0; i < 3; ++i)
        for (int d = 0; d < 3; ++d)
          tau[i][d] = mu * (gu[i][d] + gu[d][i]) - (i == d ? 2.0 / 3.0 * mu * div : 0.0);
      std::array<std::array<double, 3>, 5> fv{};
      for (int i = 0; i < 3; ++i)
        for (int d = 0; d < 3; ++d) fv[1 + i][d] = tau[i][d];
      const std::size_t nqg = el.node[q];
      for (int d = 0; d < 3; ++d) {
        double work = 0.0;
        for (int c = 0; c < 3; ++c) work += tau[d][c] * w.u[c][nqg];
        fv[4][d] = work + kappa * gT[d];
      }
      for (std::size_t a = 0; a < nq; ++a) {
        const auto& g = el.grad_dense[q * nq + a];
        for (int eq = 1; eq < 5; ++eq) {
          r[eq][el.node[a]] += el.wdet[q] * (g[0] * fv[eq][0] + g[1] * fv[eq][1] + g[2] * fv[eq][2]);
        }
      }
    }
  }
  return r;
}

inline std::vector<double> mass(const HexMesh& mesh, const QuadratureSet& basis) {
  const auto els = elements(mesh, basis);
  std::vector<double> m(mesh.num_nodes, 0.0);
  for (const auto& el : els)
    for (std::size_t q = 0; q < el.node.size(); ++q) m[el.node[q]] += el.wdet[q];
  return m;
}

/// max over fields of ||a - b||_inf / ||b||_inf.
template <typename A>
double rel_diff(const A& a, const std::array<std::vector<double>, 5>& b, int first = 0) {
  // Max-norm difference relative to the largest entry of the residual set.
  double global = 0.0;
  for (int f = first; f < 5; ++f)
    for (double v : b[f]) global = std::max(global, std::abs(v));
  double worst = 0.0;
  for (int f = first; f < 5; ++f) {
    double diff = 0.0;
    for (std::size_t n = 0; n < b[f].size(); ++n) {
      diff = std::max(diff, std::abs(static_cast<double>(a[f][n]) - b[f][n]));
    }
    worst = std::max(worst, global > 0.0 ? diff / global : diff);
  }
  return worst;
}

}  // namespace oracle
