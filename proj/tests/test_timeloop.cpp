#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "dense_oracle.hpp"
#include "sembench/timeloop.hpp"
#include "sembench/verify.hpp"

using namespace sembench;

namespace {

SimConfig small_tgv() {
  SimConfig c;
  c.elems = {3, 3, 3};
  c.order = 3;
  c.num_steps = 2;
  c.workers = 1;
  return c;
}

using Fields = Simulation<double>::Fields;

Fields make_fields(std::size_t n) {
  Fields f;
  for (auto& v : f) v.assign(n, 0.0);
  return f;
}

}  // namespace

TEST(Rk4, ZeroRhsLeavesStateBitwise) {
  FieldSet<double, 2> y{std::vector<double>{1.25, -3.5}, std::vector<double>{0.1, 7.0}};
  const auto before = y;
  FieldSet<double, 2> st{std::vector<double>(2), std::vector<double>(2)};
  Rk4Buffers<double, 2> buf;
  int calls = 0;
  rk4_step<double, 2>(
      {&y[0], &y[1]}, {&st[0], &st[1]}, 0.3,
      [&](FieldSet<double, 2>& k) {
        ++calls;
        for (auto& v : k) std::fill(v.begin(), v.end(), 0.0);
      },
      buf, [](std::size_t n, auto&& body) { body(std::size_t{0}, n); });
  EXPECT_EQ(calls, 4);
  EXPECT_EQ(y, before);
}

TEST(Rk4, ScalarExponentialTaylorTerms) {
  const double lambda = -1.3;
  for (double dt : {0.1, 0.05}) {
    FieldSet<double, 1> y{std::vector<double>{1.0}};
    FieldSet<double, 1> st{std::vector<double>(1)};
    Rk4Buffers<double, 1> buf;
    rk4_step<double, 1>(
        {&y[0]}, {&st[0]}, dt, [&](FieldSet<double, 1>& k) { k[0][0] = lambda * st[0][0]; }, buf,
        [](std::size_t n, auto&& body) { body(std::size_t{0}, n); });
    const double z = lambda * dt;
    const double taylor4 = 1 + z + z * z / 2 + z * z * z / 6 + z * z * z * z / 24;
    EXPECT_NEAR(y[0][0], taylor4, 1e-15);
    EXPECT_LE(std::abs(y[0][0] - std::exp(z)), std::pow(std::abs(z), 5) / 120 * 1.01);
  }
}

TEST(Rk4, ConvergenceOrder) {
  const double slope = rk4_convergence_slope();
  EXPECT_GE(slope, 3.8);
  EXPECT_LE(slope, 4.2);
}

TEST(SimConfig, Validation) {
  SimConfig c;
  c.num_steps = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c.num_steps = 1;
  c.dt = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c.dt = 1e-3;
  c.elems = {0, 1, 1};
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_THROW(parse_case("pipe"), ConfigError);
  SimConfig p = small_tgv();
  p.partitions = 1000;
  EXPECT_THROW(Simulation<double>{p}, ConfigError);
}

TEST(Rhs, UniformPeriodicStateIsZero) {
  auto cfg = small_tgv();
  Simulation<double> sim(cfg);
  auto& st = sim.state();
  const auto& props = sim.properties();
  for (std::size_t n = 0; n < st.size(); ++n) {
    st.rho[n] = 1.0;
    for (int d = 0; d < 3; ++d) st.mom[d][n] = 0.2 * (d + 1);
    st.energy[n] = total_energy(1.0, {0.2, 0.4, 0.6}, 3.0, props.gamma);
  }
  auto out = make_fields(st.size());
  sim.evaluate_rhs(st, out);
  for (const auto& f : out)
    for (double v : f) EXPECT_NEAR(v, 0.0, 1e-12);
}

TEST(Rhs, ChannelWallMomentumIsZero) {
  SimConfig cfg = small_tgv();
  cfg.flow_case = CaseKind::cf;
  cfg.noise = 0.01;
  Simulation<double> sim(cfg);
  ASSERT_FALSE(sim.wall_nodes().empty());
  auto out = make_fields(sim.mesh().num_nodes);
  auto st = sim.state();
  sim.evaluate_rhs(st, out);
  for (index_t n : sim.wall_nodes()) {
    const double y = sim.mesh().coords[n][1];
    EXPECT_TRUE(std::abs(y) < 1e-12 || std::abs(y - 2.0) < 1e-12);
    for (int d = 1; d <= 3; ++d) EXPECT_EQ(out[d][n], 0.0);
  }
  // Interior nodes do see the body force.
  double max_mom = 0.0;
  for (double v : out[1]) max_mom = std::max(max_mom, std::abs(v));
  EXPECT_GT(max_mom, 0.0);
}

TEST(Rhs, SingleElementMatchesDenseOracle) {
  SimConfig cfg;
  cfg.elems = {1, 1, 1};
  cfg.order = 4;
  cfg.workers = 1;
  cfg.noise = 0.05;
  cfg.seed = 3;
  Simulation<double> sim(cfg);
  auto st = sim.state();
  auto out = make_fields(st.size());
  sim.evaluate_rhs(st, out);
  const auto& props = sim.properties();
  const auto w = oracle::primitives(st, props);
  const auto rc = oracle::convection(sim.mesh(), sim.basis(), w);
  const auto rd = oracle::diffusion(sim.mesh(), sim.basis(), w, props.mu, props.kappa);
  const auto m = oracle::mass(sim.mesh(), sim.basis());
  std::array<std::vector<double>, 5> expect;
  const double force[5] = {0.0, props.body_force[0], props.body_force[1], props.body_force[2],
                           props.energy_source};
  for (int f = 0; f < 5; ++f) {
    expect[f].resize(st.size());
    for (std::size_t n = 0; n < st.size(); ++n) {
      expect[f][n] = (-rc[f][n] - rd[f][n]) / m[n] + force[f];
    }
  }
  EXPECT_LE(oracle::rel_diff(out, expect), 1e-12);
}

TEST(Simulation, FourRhsEvaluationsPerStep) {
  Simulation<double> sim(small_tgv());
  const auto stats = sim.advance(3);
  EXPECT_EQ(sim.rhs_evaluations(), 12);
  EXPECT_EQ(stats.rhs_evaluations, 12);
  EXPECT_EQ(stats.steps, 3);
}

TEST(Simulation, TimingAccounting) {
  SimConfig cfg = small_tgv();
  cfg.elems = {4, 4, 4};
  cfg.num_steps = 1;
  const auto stats = run_simulation(cfg);
  EXPECT_GT(stats.wall_ns, 0);
  for (auto t : {stats.t_convec_ns, stats.t_diff_ns, stats.t_scatter_ns, stats.t_update_ns}) {
    EXPECT_GE(t, 0);
    EXPECT_LE(t, stats.wall_ns);
  }
  EXPECT_LE(stats.component_sum(), stats.wall_ns);
  EXPECT_GE(static_cast<double>(stats.component_sum()), 0.95 * stats.wall_ns);
}

TEST(Simulation, NoStepRunExcludesSetup) {
  SimConfig cfg = small_tgv();
  cfg.elems = {6, 6, 6};
  cfg.kernel.access = AccessVariant::reg;
  Simulation<double> sim(cfg);  // mesh, basis, gather table built here
  const auto idle = sim.advance(0);
  EXPECT_EQ(idle.steps, 0);
  EXPECT_EQ(idle.component_sum(), 0);
  const auto one = sim.advance(1);
  EXPECT_LT(idle.wall_ns, one.wall_ns / 100 + 1000);
}

TEST(Simulation, TgvMassConserved) { EXPECT_LE(tgv_mass_drift(10), 1e-11); }

TEST(Simulation, DeterministicRepeats) {
  SimConfig cfg = small_tgv();
  cfg.seed = 11;
  cfg.workers = 3;
  cfg.num_steps = 3;
  const auto a = run_simulation(cfg);
  const auto b = run_simulation(cfg);
  const auto c = run_simulation(cfg);
  EXPECT_EQ(a.diagnostics, b.diagnostics);
  EXPECT_EQ(b.diagnostics, c.diagnostics);

  Simulation<double> s1(cfg);
  Simulation<double> s2(cfg);
  s1.advance(2);
  s2.advance(2);
  for (int f = 0; f < kNumConserved; ++f) EXPECT_EQ(s1.state().conserved(f), s2.state().conserved(f));
}

TEST(Simulation, SeedChangesState) {
  SimConfig cfg = small_tgv();
  cfg.seed = 1;
  Simulation<double> a(cfg);
  cfg.seed = 2;
  Simulation<double> b(cfg);
  EXPECT_NE(a.state().rho, b.state().rho);
}

TEST(Simulation, Fp32TracksFp64) {
  SimConfig cfg;  // default TGV
  cfg.workers = 1;
  Simulation<double> s64(cfg);
  Simulation<float> s32(cfg);
  s64.advance(10);
  s32.advance(10);
  double worst = 0.0;
  for (int f = 0; f < kNumConserved; ++f) {
    double diff = 0.0, norm = 0.0;
    const auto& a = s64.state().conserved(f);
    const auto& b = s32.state().conserved(f);
    for (std::size_t n = 0; n < a.size(); ++n) {
      diff = std::max(diff, std::abs(a[n] - static_cast<double>(b[n])));
      norm = std::max(norm, std::abs(a[n]));
    }
    worst = std::max(worst, diff / norm);
  }
  EXPECT_LE(worst, 1e-3);
}

TEST(Simulation, PartitionedMatchesSingle) {
  for (auto flow : {CaseKind::tgv, CaseKind::cf}) {
    SimConfig cfg = small_tgv();
    cfg.flow_case = flow;
    cfg.elems = {6, 2, 2};
    cfg.num_steps = 2;
    const auto ref = run_simulation(cfg);
    for (int P : {2, 3, 6}) {
      cfg.partitions = P;
      for (auto mode : {ScatterMode::deterministic, ScatterMode::atomic}) {
        cfg.kernel.scatter = mode;
        cfg.workers = mode == ScatterMode::atomic ? 4 : 1;
        const auto got = run_simulation(cfg);
        EXPECT_NEAR(got.diagnostics.total_mass, ref.diagnostics.total_mass,
                    1e-12 * ref.diagnostics.total_mass);
        EXPECT_NEAR(got.diagnostics.total_energy, ref.diagnostics.total_energy,
                    1e-12 * ref.diagnostics.total_energy);
        EXPECT_NEAR(got.diagnostics.max_velocity, ref.diagnostics.max_velocity, 1e-12);
      }
    }
  }
}

TEST(Simulation, PartitionedRhsMatchesSingleRhs) {
  SimConfig cfg = small_tgv();
  cfg.elems = {4, 3, 2};
  cfg.noise = 0.05;
  Simulation<double> one(cfg);
  cfg.partitions = 4;
  Simulation<double> four(cfg);
  auto s1 = one.state();
  auto s4 = four.state();
  auto r1 = make_fields(s1.size());
  auto r4 = make_fields(s4.size());
  one.evaluate_rhs(s1, r1);
  four.evaluate_rhs(s4, r4);
  for (int f = 0; f < kNumConserved; ++f) {
    double norm = 0.0;
    for (double v : r1[f]) norm = std::max(norm, std::abs(v));
    for (std::size_t n = 0; n < r1[f].size(); ++n) {
      EXPECT_NEAR(r4[f][n], r1[f][n], 1e-12 * norm);
    }
  }
}

TEST(Simulation, InstabilityReported) {
  SimConfig cfg = small_tgv();
  cfg.dt = 50.0;
  cfg.num_steps = 20;
  EXPECT_THROW(run_simulation(cfg), InstabilityError);
}
