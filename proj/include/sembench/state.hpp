#pragma once

// Conserved fields, ideal-gas closure and the two case initializations.

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "sembench/error.hpp"
#include "sembench/mesh.hpp"

namespace sembench {

enum class Precision { fp32, fp64 };

inline std::string_view to_string(Precision p) { return p == Precision::fp32 ? "fp32" : "fp64"; }

template <typename Scalar>
inline constexpr Precision precision_of =
    sizeof(Scalar) == sizeof(float) ? Precision::fp32 : Precision::fp64;

struct FluidProperties {
  double gamma = 1.4;
  double gas_constant = 287.0;
  double mu = 0.0;
  double kappa = 0.0;
  /// Constant stand-in for a shock-capturing viscosity; added to mu.
  double artificial_viscosity = 0.0;
  std::array<double, 3> body_force{};
  double energy_source = 0.0;

  double cp() const noexcept { return gamma * gas_constant / (gamma - 1.0); }
  double effective_mu() const noexcept { return mu + artificial_viscosity; }

  static FluidProperties from_prandtl(double gamma, double gas_constant, double mu,
                                      double prandtl) {
    FluidProperties props;
    props.gamma = gamma;
    props.gas_constant = gas_constant;
    props.mu = mu;
    props.kappa = mu * props.cp() / prandtl;
    props.validate();
    return props;
  }

  void validate() const {
    if (!(gamma > 1.0)) throw ConfigError("gamma must be > 1");
    if (!(gas_constant > 0.0)) throw ConfigError("gas constant must be > 0");
    if (!(mu >= 0.0) || !(kappa >= 0.0) || !(artificial_viscosity >= 0.0)) {
      throw ConfigError("viscosity and conductivity must be >= 0");
    }
  }
};

inline constexpr double kDefaultGamma = 1.4;
inline constexpr double kDefaultPrandtl = 0.71;
inline constexpr double kDefaultMach = 0.1;

/// Conserved variables per global node, plus the primitives derived from them.
/// Primitives are refreshed by update_primitives(); kernels only read them.
template <typename Scalar>
struct FlowState {
  static constexpr Precision precision = precision_of<Scalar>;

  std::vector<Scalar> rho;
  std::array<std::vector<Scalar>, 3> mom;
  std::vector<Scalar> energy;

  std::array<std::vector<Scalar>, 3> vel;
  std::vector<Scalar> pressure;
  std::vector<Scalar> temperature;

  FlowState() = default;
  explicit FlowState(std::size_t n)
      : rho(n), mom{std::vector<Scalar>(n), std::vector<Scalar>(n), std::vector<Scalar>(n)},
        energy(n),
        vel{std::vector<Scalar>(n), std::vector<Scalar>(n), std::vector<Scalar>(n)},
        pressure(n), temperature(n) {}

  std::size_t size() const noexcept { return rho.size(); }

  /// Field f in {0: rho, 1..3: momentum, 4: energy}.
  std::vector<Scalar>& conserved(int f) {
    return f == 0 ? rho : (f == 4 ? energy : mom[f - 1]);
  }
  const std::vector<Scalar>& conserved(int f) const {
    return f == 0 ? rho : (f == 4 ? energy : mom[f - 1]);
  }
};

inline constexpr int kNumConserved = 5;

template <typename Scalar>
struct Primitive {
  std::array<Scalar, 3> u{};
  Scalar p{};
  Scalar T{};
};

template <typename Scalar>
Primitive<Scalar> primitive_from_conserved(Scalar rho, const std::array<Scalar, 3>& m, Scalar e,
                                           const FluidProperties& props, std::size_t node) {
  if (!(rho > Scalar(0))) throw StateError(node, "non-positive density");
  Primitive<Scalar> w;
  const Scalar inv_rho = Scalar(1) / rho;
  for (int d = 0; d < 3; ++d) w.u[d] = m[d] * inv_rho;
  const Scalar kinetic =
      Scalar(0.5) * rho * (w.u[0] * w.u[0] + w.u[1] * w.u[1] + w.u[2] * w.u[2]);
  const Scalar internal = e - kinetic;
  if (!(internal > Scalar(0))) throw StateError(node, "non-positive internal energy");
  w.p = static_cast<Scalar>(props.gamma - 1.0) * internal;
  w.T = w.p / (rho * static_cast<Scalar>(props.gas_constant));
  return w;
}

template <typename Scalar>
Primitive<Scalar> primitives(const FlowState<Scalar>& s, const FluidProperties& props,
                             std::size_t node) {
  return primitive_from_conserved<Scalar>(s.rho[node],
                                          {s.mom[0][node], s.mom[1][node], s.mom[2][node]},
                                          s.energy[node], props, node);
}

/// Total energy from density, velocity and pressure.
inline double total_energy(double rho, const std::array<double, 3>& u, double p, double gamma) {
  return p / (gamma - 1.0) + 0.5 * rho * (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]);
}

template <typename Scalar>
void update_primitives(FlowState<Scalar>& s, const FluidProperties& props, std::size_t begin,
                       std::size_t end) {
  for (std::size_t n = begin; n < end; ++n) {
    const auto w = primitives(s, props, n);
    for (int d = 0; d < 3; ++d) s.vel[d][n] = w.u[d];
    s.pressure[n] = w.p;
    s.temperature[n] = w.T;
  }
}

template <typename Scalar>
void update_primitives(FlowState<Scalar>& s, const FluidProperties& props) {
  update_primitives(s, props, 0, s.size());
}

/// Builds a state from double-precision (rho, u, p) samples; FP32 states are
/// exact down-casts of the FP64 conserved values.
template <typename Scalar, typename Fn>
FlowState<Scalar> state_from_primitives(const HexMesh& mesh, const FluidProperties& props,
                                        Fn&& sample) {
  FlowState<Scalar> s(mesh.num_nodes);
  for (std::size_t n = 0; n < mesh.num_nodes; ++n) {
    const auto [rho, u, p] = sample(n, mesh.coords[n]);
    s.rho[n] = static_cast<Scalar>(rho);
    for (int d = 0; d < 3; ++d) s.mom[d][n] = static_cast<Scalar>(rho * u[d]);
    s.energy[n] = static_cast<Scalar>(total_energy(rho, u, p, props.gamma));
  }
  update_primitives(s, props);
  return s;
}

struct PrimitiveSample {
  double rho;
  std::array<double, 3> u;
  double p;
};

/// Taylor-Green vortex on a fully periodic box mapped onto [0, 2pi)^3.
template <typename Scalar>
FlowState<Scalar> init_tgv(const HexMesh& mesh, const FluidProperties& props, double v0,
                           double rho0, double p0) {
  if (!mesh.fully_periodic()) throw ConfigError("TGV requires a fully periodic mesh");
  if (!(rho0 > 0.0) || !(p0 > 0.0)) throw ConfigError("TGV needs rho0 > 0 and p0 > 0");
  const double two_pi = 2.0 * std::numbers::pi;
  return state_from_primitives<Scalar>(
      mesh, props, [&](std::size_t, const std::array<double, 3>& c) {
        const double x = two_pi * c[0] / mesh.extents[0];
        const double y = two_pi * c[1] / mesh.extents[1];
        const double z = two_pi * c[2] / mesh.extents[2];
        const std::array<double, 3> u{v0 * std::sin(x) * std::cos(y) * std::cos(z),
                                      -v0 * std::cos(x) * std::sin(y) * std::cos(z), 0.0};
        const double p = p0 + rho0 * v0 * v0 / 16.0 * (std::cos(2 * x) + std::cos(2 * y)) *
                                  (std::cos(2 * z) + 2.0);
        return PrimitiveSample{rho0 * p / p0, u, p};
      });
}

/// Reference pressure giving Mach `mach` for speed v0 at density rho0.
inline double pressure_for_mach(double v0, double rho0, double mach, double gamma) {
  return rho0 * v0 * v0 / (gamma * mach * mach);
}

/// Laminar Poiseuille channel between walls y = 0 and y = 2 delta. Sets the
/// streamwise body force that balances the wall shear of the profile.
template <typename Scalar>
FlowState<Scalar> init_channel_flow(const HexMesh& mesh, FluidProperties& props, double u_bulk,
                                    double rho0, double p0) {
  if (!mesh.periodic[0] || mesh.periodic[1] || !mesh.periodic[2]) {
    throw ConfigError("channel flow requires periodic x and z with walls in y");
  }
  if (!(rho0 > 0.0) || !(p0 > 0.0)) throw ConfigError("channel flow needs rho0 > 0 and p0 > 0");
  const double delta = 0.5 * mesh.extents[1];
  props.body_force = {3.0 * props.effective_mu() * u_bulk / (delta * delta), 0.0, 0.0};
  const double tol = 1e-10 * mesh.extents[1];
  return state_from_primitives<Scalar>(
      mesh, props, [&](std::size_t, const std::array<double, 3>& c) {
        const double eta = (c[1] - delta) / delta;
        const bool wall = std::abs(c[1]) <= tol || std::abs(c[1] - mesh.extents[1]) <= tol;
        const double ux = wall ? 0.0 : 1.5 * u_bulk * (1.0 - eta * eta);
        return PrimitiveSample{rho0, {ux, 0.0, 0.0}, p0};
      });
}

/// Smooth state plus seeded pointwise noise of relative size `amplitude`.
/// Every node keeps positive density and pressure.
template <typename Scalar>
FlowState<Scalar> random_state(const HexMesh& mesh, const FluidProperties& props,
                               std::uint64_t seed, double amplitude = 0.1) {
  std::mt19937_64 rng(seed);
  const auto uniform = [&rng]() {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53 * 2.0 - 1.0;
  };
  return state_from_primitives<Scalar>(
      mesh, props, [&](std::size_t, const std::array<double, 3>&) {
        const double rho = 1.0 + amplitude * uniform();
        const std::array<double, 3> u{0.5 * uniform(), 0.5 * uniform(), 0.5 * uniform()};
        const double p = 1.0 + amplitude * uniform();
        return PrimitiveSample{rho, u, p};
      });
}

/// Multiplies density and momentum by (1 + amplitude * r), r uniform in
/// [-1, 1], keeping velocity and pressure. Amplitude 0 is the identity.
template <typename Scalar>
void perturb_density(FlowState<Scalar>& s, const FluidProperties& props, std::uint64_t seed,
                     double amplitude) {
  if (amplitude == 0.0) return;
  std::mt19937_64 rng(seed);
  for (std::size_t n = 0; n < s.size(); ++n) {
    const double r = static_cast<double>(rng() >> 11) * 0x1.0p-53 * 2.0 - 1.0;
    const double f = 1.0 + amplitude * r;
    const std::array<double, 3> u{s.vel[0][n], s.vel[1][n], s.vel[2][n]};
    const double p = s.pressure[n];
    const double rho = s.rho[n] * f;
    s.rho[n] = static_cast<Scalar>(rho);
    for (int d = 0; d < 3; ++d) s.mom[d][n] = static_cast<Scalar>(rho * u[d]);
    s.energy[n] = static_cast<Scalar>(total_energy(rho, u, p, props.gamma));
  }
  update_primitives(s, props);
}

}  // namespace sembench
