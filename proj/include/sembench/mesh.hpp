#pragma once

// Structured-box hexahedral meshes stored in unstructured form: an explicit
// element-to-node connectivity, the (i,j,k) <-> local-index linearization,
// precomputed gather tables, per-point Jacobians and slab partitions.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "sembench/basis.hpp"
#include "sembench/error.hpp"

namespace sembench {

using index_t = std::int32_t;

inline constexpr std::size_t nodes_per_elem(int p) {
  const auto n1 = static_cast<std::size_t>(p) + 1;
  return n1 * n1 * n1;
}

/// Lexicographic a = i + (p+1) j + (p+1)^2 k.
inline std::size_t linearize(int p, int i, int j, int k) {
  const auto check = [p](int v, const char* name) {
    if (v < 0 || v > p) {
      throw IndexError(std::string("local index ") + name + " = " + std::to_string(v) +
                       " outside [0, " + std::to_string(p) + "]");
    }
  };
  check(i, "i");
  check(j, "j");
  check(k, "k");
  const auto n1 = static_cast<std::size_t>(p) + 1;
  return static_cast<std::size_t>(i) + n1 * (static_cast<std::size_t>(j) + n1 * k);
}

inline std::array<int, 3> inv_linearize(int p, std::size_t a) {
  if (a >= nodes_per_elem(p)) {
    throw IndexError("local node index " + std::to_string(a) + " outside [0, " +
                     std::to_string(nodes_per_elem(p)) + ")");
  }
  const auto n1 = static_cast<std::size_t>(p) + 1;
  return {static_cast<int>(a % n1), static_cast<int>((a / n1) % n1),
          static_cast<int>(a / (n1 * n1))};
}

struct HexMesh {
  int order = 0;
  std::array<int, 3> elems{};  // element grid the box was generated from
  std::array<double, 3> extents{};
  std::array<bool, 3> periodic{};
  std::size_t num_elems = 0;
  std::size_t num_nodes = 0;
  std::vector<std::array<double, 3>> coords;
  /// connec[e * Q + a]: global node of local node a of element e.
  std::vector<index_t> connec;
  /// inv_atoijk[i + (p+1)(j + (p+1)k)]: local connec column of tensor node (i,j,k).
  std::vector<index_t> inv_atoijk;

  std::size_t nodes_per_elem() const noexcept { return sembench::nodes_per_elem(order); }
  index_t node(std::size_t e, std::size_t a) const noexcept {
    return connec[e * nodes_per_elem() + a];
  }
  bool fully_periodic() const noexcept { return periodic[0] && periodic[1] && periodic[2]; }
};

/// Unique node count of a box mesh, without building it.
inline std::size_t box_node_count(const std::array<int, 3>& elems, int p,
                                  const std::array<bool, 3>& periodic) {
  std::size_t n = 1;
  for (int ax = 0; ax < 3; ++ax) {
    const auto per_axis = static_cast<std::size_t>(elems[ax]) * p;
    n *= periodic[ax] ? per_axis : per_axis + 1;
  }
  return n;
}

inline HexMesh build_box_mesh(const std::array<int, 3>& elems, int p,
                              const std::array<double, 3>& extents,
                              const std::array<bool, 3>& periodic) {
  const QuadratureSet gll = gll_nodes_weights(p);
  for (int ax = 0; ax < 3; ++ax) {
    if (elems[ax] < 1) {
      throw ConfigError("element count along axis " + std::to_string(ax) + " must be >= 1");
    }
    if (!(extents[ax] > 0.0) || !std::isfinite(extents[ax])) {
      throw ConfigError("domain extent along axis " + std::to_string(ax) +
                        " must be positive and finite");
    }
  }

  HexMesh m;
  m.order = p;
  m.elems = elems;
  m.extents = extents;
  m.periodic = periodic;
  m.num_elems = static_cast<std::size_t>(elems[0]) * elems[1] * elems[2];

  // Nodes live on an integer lattice; periodic axes wrap the last plane onto
  // the first so duplicates never arise.
  std::array<std::size_t, 3> lat{};
  for (int ax = 0; ax < 3; ++ax) {
    lat[ax] = static_cast<std::size_t>(elems[ax]) * p + (periodic[ax] ? 0 : 1);
  }
  m.num_nodes = lat[0] * lat[1] * lat[2];

  const auto axis_coord = [&](int ax, std::size_t idx) {
    const double h = extents[ax] / elems[ax];
    std::size_t e = idx / p;
    std::size_t i = idx % p;
    if (e == static_cast<std::size_t>(elems[ax])) {
      e -= 1;
      i = p;
    }
    return e * h + 0.5 * (gll.nodes[i] + 1.0) * h;
  };

  m.coords.resize(m.num_nodes);
  for (std::size_t kk = 0; kk < lat[2]; ++kk) {
    for (std::size_t jj = 0; jj < lat[1]; ++jj) {
      for (std::size_t ii = 0; ii < lat[0]; ++ii) {
        m.coords[ii + lat[0] * (jj + lat[1] * kk)] = {axis_coord(0, ii), axis_coord(1, jj),
                                                      axis_coord(2, kk)};
      }
    }
  }

  const std::size_t q = m.nodes_per_elem();
  m.inv_atoijk.resize(q);
  for (int k = 0; k <= p; ++k) {
    for (int j = 0; j <= p; ++j) {
      for (int i = 0; i <= p; ++i) {
        const auto a = linearize(p, i, j, k);
        m.inv_atoijk[a] = static_cast<index_t>(a);
      }
    }
  }

  m.connec.resize(m.num_elems * q);
  const auto wrap = [&](int ax, std::size_t idx) { return periodic[ax] ? idx % lat[ax] : idx; };
  for (int ez = 0; ez < elems[2]; ++ez) {
    for (int ey = 0; ey < elems[1]; ++ey) {
      for (int ex = 0; ex < elems[0]; ++ex) {
        const std::size_t e =
            static_cast<std::size_t>(ex) + elems[0] * (static_cast<std::size_t>(ey) + elems[1] * ez);
        for (int k = 0; k <= p; ++k) {
          for (int j = 0; j <= p; ++j) {
            for (int i = 0; i <= p; ++i) {
              const std::size_t gi = wrap(0, static_cast<std::size_t>(ex) * p + i);
              const std::size_t gj = wrap(1, static_cast<std::size_t>(ey) * p + j);
              const std::size_t gk = wrap(2, static_cast<std::size_t>(ez) * p + k);
              m.connec[e * q + m.inv_atoijk[linearize(p, i, j, k)]] =
                  static_cast<index_t>(gi + lat[0] * (gj + lat[1] * gk));
            }
          }
        }
      }
    }
  }
  return m;
}

/// Nodes lying on a face of a non-periodic axis (walls).
inline std::vector<index_t> boundary_nodes(const HexMesh& mesh) {
  std::vector<index_t> out;
  for (std::size_t n = 0; n < mesh.num_nodes; ++n) {
    for (int ax = 0; ax < 3; ++ax) {
      if (mesh.periodic[ax]) continue;
      const double tol = 1e-10 * mesh.extents[ax];
      const double c = mesh.coords[n][ax];
      if (std::abs(c) <= tol || std::abs(c - mesh.extents[ax]) <= tol) {
        out.push_back(static_cast<index_t>(n));
        break;
      }
    }
  }
  return out;
}

/// Composition connec(e, invAtoIJK(i,j,k)) materialized once.
///
/// `table` has one entry per (element, local node). `stencil` additionally
/// expands every quadrature point into its three 1-D derivative lines:
/// stencil[((e*Q + q)*3 + dir)*(p+1) + m] is the global node of the m-th
/// point along `dir` through q. It is (3(p+1))x the size of connec.
struct GatherTable {
  int order = 0;
  std::size_t num_elems = 0;
  std::vector<index_t> table;
  std::vector<index_t> stencil;

  bool has_stencil() const noexcept { return !stencil.empty(); }
  double stencil_size_ratio() const noexcept {
    return table.empty() ? 0.0
                         : static_cast<double>(stencil.size()) / static_cast<double>(table.size());
  }
};

inline GatherTable build_gather_table(const HexMesh& mesh, bool with_stencil = true) {
  const int p = mesh.order;
  const std::size_t q = mesh.nodes_per_elem();
  const std::size_t n1 = static_cast<std::size_t>(p) + 1;
  GatherTable g;
  g.order = p;
  g.num_elems = mesh.num_elems;
  g.table.resize(mesh.num_elems * q);
  for (std::size_t e = 0; e < mesh.num_elems; ++e) {
    for (std::size_t a = 0; a < q; ++a) {
      const auto [i, j, k] = inv_linearize(p, a);
      g.table[e * q + a] = mesh.connec[e * q + mesh.inv_atoijk[linearize(p, i, j, k)]];
    }
  }
  if (!with_stencil) return g;

  g.stencil.resize(mesh.num_elems * q * 3 * n1);
  for (std::size_t e = 0; e < mesh.num_elems; ++e) {
    for (std::size_t a = 0; a < q; ++a) {
      const auto ijk = inv_linearize(p, a);
      for (int dir = 0; dir < 3; ++dir) {
        auto line = ijk;
        for (std::size_t mm = 0; mm < n1; ++mm) {
          line[dir] = static_cast<int>(mm);
          g.stencil[((e * q + a) * 3 + dir) * n1 + mm] =
              g.table[e * q + linearize(p, line[0], line[1], line[2])];
        }
      }
    }
  }
  return g;
}

/// Per (element, point): inverse Jacobian jinv[b][d] = d xi_b / d x_d and det J.
struct JacobianData {
  std::size_t num_elems = 0;
  std::size_t points_per_elem = 0;
  std::vector<double> jinv;  // (e*Q + q)*9 + b*3 + d
  std::vector<double> det;   // e*Q + q

  const double* inverse(std::size_t e, std::size_t q) const noexcept {
    return jinv.data() + (e * points_per_elem + q) * 9;
  }
  double determinant(std::size_t e, std::size_t q) const noexcept {
    return det[e * points_per_elem + q];
  }
};

/// Element node coordinates with periodic images unwrapped so the element is
/// geometrically contiguous. Along a periodic axis a node whose tensor index is
/// positive but whose coordinate does not exceed the first node on its line has
/// wrapped around the domain.
inline std::vector<std::array<double, 3>> element_coords(const HexMesh& mesh, std::size_t e) {
  const int p = mesh.order;
  const std::size_t q = mesh.nodes_per_elem();
  std::vector<std::array<double, 3>> x(q);
  for (std::size_t a = 0; a < q; ++a) {
    const auto ijk = inv_linearize(p, a);
    x[a] = mesh.coords[mesh.connec[e * q + mesh.inv_atoijk[a]]];
    for (int ax = 0; ax < 3; ++ax) {
      if (!mesh.periodic[ax] || ijk[ax] == 0) continue;
      auto first = ijk;
      first[ax] = 0;
      const auto& x0 = mesh.coords[mesh.connec[e * q + mesh.inv_atoijk[linearize(
          p, first[0], first[1], first[2])]]];
      if (x[a][ax] <= x0[ax]) x[a][ax] += mesh.extents[ax];
    }
  }
  return x;
}

inline JacobianData compute_jacobians(const HexMesh& mesh, const QuadratureSet& basis) {
  const int p = mesh.order;
  if (basis.order != p) {
    throw ConfigError("basis order " + std::to_string(basis.order) +
                      " does not match mesh order " + std::to_string(p));
  }
  const std::size_t q = mesh.nodes_per_elem();
  const std::size_t n1 = static_cast<std::size_t>(p) + 1;
  JacobianData jac;
  jac.num_elems = mesh.num_elems;
  jac.points_per_elem = q;
  jac.jinv.resize(mesh.num_elems * q * 9);
  jac.det.resize(mesh.num_elems * q);

  for (std::size_t e = 0; e < mesh.num_elems; ++e) {
    const auto x = element_coords(mesh, e);
    for (std::size_t a = 0; a < q; ++a) {
      const auto ijk = inv_linearize(p, a);
      double J[3][3] = {};  // J[c][b] = d x_c / d xi_b
      for (int b = 0; b < 3; ++b) {
        auto line = ijk;
        for (std::size_t mm = 0; mm < n1; ++mm) {
          line[b] = static_cast<int>(mm);
          const double dw = basis.d(static_cast<std::size_t>(ijk[b]), mm);
          const auto& xm = x[linearize(p, line[0], line[1], line[2])];
          for (int c = 0; c < 3; ++c) J[c][b] += dw * xm[c];
        }
      }
      const double c00 = J[1][1] * J[2][2] - J[1][2] * J[2][1];
      const double c01 = J[1][2] * J[2][0] - J[1][0] * J[2][2];
      const double c02 = J[1][0] * J[2][1] - J[1][1] * J[2][0];
      const double det = J[0][0] * c00 + J[0][1] * c01 + J[0][2] * c02;
      if (!(det > 0.0)) throw InvertedElementError(e, det);
      const double inv_det = 1.0 / det;
      // inverse(J)[b][c] = d xi_b / d x_c
      double* out = jac.jinv.data() + (e * q + a) * 9;
      out[0] = c00 * inv_det;
      out[1] = (J[0][2] * J[2][1] - J[0][1] * J[2][2]) * inv_det;
      out[2] = (J[0][1] * J[1][2] - J[0][2] * J[1][1]) * inv_det;
      out[3] = c01 * inv_det;
      out[4] = (J[0][0] * J[2][2] - J[0][2] * J[2][0]) * inv_det;
      out[5] = (J[0][2] * J[1][0] - J[0][0] * J[1][2]) * inv_det;
      out[6] = c02 * inv_det;
      out[7] = (J[0][1] * J[2][0] - J[0][0] * J[2][1]) * inv_det;
      out[8] = (J[0][0] * J[1][1] - J[0][1] * J[1][0]) * inv_det;
      jac.det[e * q + a] = det;
    }
  }
  return jac;
}

struct MeshPartition {
  int id = 0;
  std::vector<index_t> elements;
  std::size_t owned_nodes = 0;
  /// Nodes this partition touches that other partitions touch too, mapped to
  /// the ids of those other partitions (ascending).
  std::map<index_t, std::vector<int>> shared;
};

/// Axis with the most element layers; ties go to the longer physical extent,
/// then to the lower axis index.
inline int slab_axis(const HexMesh& mesh) {
  int best = 0;
  for (int ax = 1; ax < 3; ++ax) {
    if (mesh.elems[ax] > mesh.elems[best] ||
        (mesh.elems[ax] == mesh.elems[best] && mesh.extents[ax] > mesh.extents[best])) {
      best = ax;
    }
  }
  return best;
}

/// Contiguous slabs of elements along the slab axis. Node ownership goes to
/// the partition holding the element in which the node sits at a local
/// slab-axis index below p; the closing plane of a non-periodic axis goes to
/// whichever partition touches it.
inline std::vector<MeshPartition> partition_mesh(const HexMesh& mesh, int num_parts) {
  if (num_parts < 1 || static_cast<std::size_t>(num_parts) > mesh.num_elems) {
    throw ConfigError("partition count must satisfy 1 <= P <= " +
                      std::to_string(mesh.num_elems) + ", got " + std::to_string(num_parts));
  }
  const int ax = slab_axis(mesh);
  const int p = mesh.order;
  const std::size_t q = mesh.nodes_per_elem();

  const auto elem_layer = [&](std::size_t e) {
    const std::array<std::size_t, 3> c{e % mesh.elems[0], (e / mesh.elems[0]) % mesh.elems[1],
                                       e / (static_cast<std::size_t>(mesh.elems[0]) * mesh.elems[1])};
    return c[ax];
  };
  std::vector<index_t> order(mesh.num_elems);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](index_t a, index_t b) { return elem_layer(a) < elem_layer(b); });

  std::vector<MeshPartition> parts(num_parts);
  std::vector<int> elem_part(mesh.num_elems);
  const std::size_t base = mesh.num_elems / num_parts;
  const std::size_t extra = mesh.num_elems % num_parts;
  std::size_t cursor = 0;
  for (int r = 0; r < num_parts; ++r) {
    parts[r].id = r;
    const std::size_t count = base + (static_cast<std::size_t>(r) < extra ? 1 : 0);
    parts[r].elements.assign(order.begin() + cursor, order.begin() + cursor + count);
    std::sort(parts[r].elements.begin(), parts[r].elements.end());
    for (index_t e : parts[r].elements) elem_part[e] = r;
    cursor += count;
  }

  std::vector<int> owner(mesh.num_nodes, -1);
  std::vector<std::vector<int>> touching(mesh.num_nodes);
  for (std::size_t e = 0; e < mesh.num_elems; ++e) {
    const int r = elem_part[e];
    for (std::size_t a = 0; a < q; ++a) {
      const index_t n = mesh.connec[e * q + a];
      auto& t = touching[n];
      if (std::find(t.begin(), t.end(), r) == t.end()) t.push_back(r);
      if (inv_linearize(p, a)[ax] < p && (owner[n] < 0 || r < owner[n])) owner[n] = r;
    }
  }
  for (std::size_t n = 0; n < mesh.num_nodes; ++n) {
    auto& t = touching[n];
    std::sort(t.begin(), t.end());
    if (owner[n] < 0) owner[n] = t.front();
    parts[owner[n]].owned_nodes += 1;
    if (t.size() < 2) continue;
    for (int r : t) {
      auto& others = parts[r].shared[static_cast<index_t>(n)];
      for (int s : t) {
        if (s != r) others.push_back(s);
      }
    }
  }
  return parts;
}

}  // namespace sembench
