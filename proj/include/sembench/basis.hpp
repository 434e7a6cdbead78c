#pragma once

// Gauss-Lobatto-Legendre nodes/weights and the nodal Lagrange derivative
// matrix on [-1, 1]. Everything here is computed in double; kernels that run
// in single precision down-cast the finished tables.

#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "sembench/error.hpp"

namespace sembench {

inline constexpr int kMinOrder = 1;
inline constexpr int kMaxOrder = 10;

struct QuadratureSet {
  int order = 0;
  std::vector<double> nodes;
  std::vector<double> weights;
  /// Row-major (p+1)x(p+1): deriv[i*(p+1)+j] = l_j'(nodes[i]).
  std::vector<double> deriv;

  std::size_t size() const noexcept { return nodes.size(); }
  double d(std::size_t i, std::size_t j) const noexcept {
    return deriv[i * nodes.size() + j];
  }
};

namespace detail {

struct LegendrePair {
  double p_n;    // P_n(x)
  double p_nm1;  // P_{n-1}(x)
};

inline LegendrePair legendre(int n, double x) {
  double pm1 = 1.0;
  double p = x;
  for (int k = 2; k <= n; ++k) {
    const double next = ((2.0 * k - 1.0) * x * p - (k - 1.0) * pm1) / k;
    pm1 = p;
    p = next;
  }
  return {p, pm1};
}

}  // namespace detail

/// Derivative matrix of the Lagrange cardinal polynomials through `nodes`,
/// via barycentric weights. Diagonal entries are the negated off-diagonal row
/// sums so that constants differentiate to zero.
inline std::vector<double> lagrange_derivative_matrix(std::span<const double> nodes) {
  const std::size_t n = nodes.size();
  if (n < 2) {
    throw DegenerateBasisError("need at least two interpolation nodes");
  }
  std::vector<double> bary(n, 1.0);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t k = 0; k < n; ++k) {
      if (k == j) continue;
      const double diff = nodes[j] - nodes[k];
      if (diff == 0.0) {
        throw DegenerateBasisError("duplicate interpolation node at index " +
                                   std::to_string(k) + " and " + std::to_string(j));
      }
      bary[j] *= diff;
    }
    bary[j] = 1.0 / bary[j];
  }

  std::vector<double> deriv(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double row_sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double v = (bary[j] / bary[i]) / (nodes[i] - nodes[j]);
      deriv[i * n + j] = v;
      row_sum += v;
    }
    deriv[i * n + i] = -row_sum;
  }
  return deriv;
}

/// Nodes are the roots of (1 - x^2) P_p'(x), found by Newton iteration from
/// Chebyshev-Lobatto points and then mirrored so the rule is exactly
/// symmetric. Weights are 2 / (p (p+1) P_p(x_i)^2).
inline QuadratureSet gll_nodes_weights(int p) {
  if (p < kMinOrder || p > kMaxOrder) {
    throw ConfigError("polynomial order must satisfy " + std::to_string(kMinOrder) +
                      " <= p <= " + std::to_string(kMaxOrder) + ", got " +
                      std::to_string(p));
  }
  constexpr double kTol = 1e-15;
  constexpr int kMaxIter = 100;
  const std::size_t n = static_cast<std::size_t>(p) + 1;

  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = -std::cos(std::numbers::pi * static_cast<double>(i) / p);
  }
  for (std::size_t i = 1; i + 1 < n; ++i) {
    for (int it = 0; it < kMaxIter; ++it) {
      const auto [pn, pnm1] = detail::legendre(p, x[i]);
      // Newton step for (1 - x^2) P_p'(x) = p (P_{p-1} - x P_p).
      const double step = (x[i] * pn - pnm1) / ((p + 1.0) * pn);
      x[i] -= step;
      if (std::abs(step) <= kTol) break;
    }
  }
  x.front() = -1.0;
  x.back() = 1.0;
  for (std::size_t i = 0; i < n / 2; ++i) {
    const double half = 0.5 * (x[n - 1 - i] - x[i]);
    x[i] = -half;
    x[n - 1 - i] = half;
  }
  if (n % 2 == 1) x[n / 2] = 0.0;

  QuadratureSet q;
  q.order = p;
  q.nodes = x;
  q.weights.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double pn = detail::legendre(p, x[i]).p_n;
    q.weights[i] = 2.0 / (p * (p + 1.0) * pn * pn);
  }
  q.deriv = lagrange_derivative_matrix(q.nodes);
  return q;
}

}  // namespace sembench
