#include <gtest/gtest.h>

#include <cmath>

#include "primeq/diagnostics.hpp"
#include "primeq/initial.hpp"
#include "primeq/studies.hpp"
#include "primeq/timestepper.hpp"

using namespace primeq;

namespace {

Field3D shear(const DomainSpec& d, double amp) { return initial_velocity("shear", d, amp); }

double shear_amplitude(const SolverState& s) {
  // projection onto sin(pi y) of the first mean component
  const DomainSpec& d = s.domain();
  const Field2D basis = Field2D::sample(d, 1, [](int, double, double y, double) { return std::sin(pi * y); });
  Field2D m0(d, 1);
  std::copy(s.mean().component(0).begin(), s.mean().component(0).end(), m0.component(0).begin());
  return inner(m0, basis) / inner(basis, basis);
}

RunOptions fixed(double dt, double T) {
  RunOptions o;
  o.timestep.dt_max = dt;
  o.timestep.t_end = T;
  o.fixed_dt = dt;
  o.sobolev_diagnostics = false;
  return o;
}

}  // namespace

TEST(Cfl, FormulaExamples) {
  const DomainSpec d{1.0, 64, 64, 9};
  TimestepConfig cfg;
  cfg.dt_max = 1e9;
  EXPECT_EQ(cfl_dt(SolverState::zero(d), cfg), cfg.dt_max);
  const ViscosityModel m = ViscosityModel::horizontal();
  EXPECT_NEAR(cfl_dt(make_state(shear(d, 1.0), m), cfg), 1.0 / 64.0, 1e-15);
  EXPECT_NEAR(cfl_dt(make_state(shear(d, 2.0), m), cfg), 1.0 / 128.0, 1e-15);
  cfg.dt_max = 1e-3;
  EXPECT_EQ(cfl_dt(make_state(shear(d, 1.0), m), cfg), 1e-3);
}

TEST(Cfl, ViolationIsReported) {
  const DomainSpec d{1.0, 16, 16, 9};
  TimestepConfig cfg;
  cfg.dt_max = 1.0;
  ImexIntegrator integ(ViscosityModel::horizontal(), cfg);
  try {
    integ.step(make_state(shear(d, 10.0), ViscosityModel::horizontal()), 0.5);
    FAIL() << "expected CflViolation";
  } catch (const SolverError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::CflViolation);
  }
}

TEST(TimestepConfig, Validation) {
  TimestepConfig c;
  EXPECT_NO_THROW(c.validate());
  c.cfl = 1.5;
  EXPECT_ANY_THROW(c.validate());
  c = {};
  c.picard_max_iters = 0;
  EXPECT_ANY_THROW(c.validate());
}

TEST(ImexStep, ZeroIsFixedPoint) {
  const DomainSpec d{1.0, 8, 8, 9};
  for (const auto& m : {ViscosityModel::horizontal(), ViscosityModel::full(1.0, 0.5), ViscosityModel::inviscid()}) {
    const SolverState s = imex_step(SolverState::zero(d), m, 0.01);
    EXPECT_EQ(s.velocity().max_abs(), 0.0);
    EXPECT_NEAR(s.t, 0.01, 1e-16);
  }
}

TEST(ImexStep, ShearDecaysAtSecondOrder) {
  const DomainSpec d{1.0, 16, 16, 9};
  const ViscosityModel m = ViscosityModel::horizontal();
  const double T = 0.2;
  std::vector<double> dts{0.02, 0.01, 0.005}, errs;
  for (double dt : dts) {
    const RunResult r = run(make_state(shear(d, 1.0), m), m, fixed(dt, T));
    errs.push_back(std::abs(shear_amplitude(r.final_state) - std::exp(-pi * pi * T)));
    EXPECT_LT(r.final_state.fluct().max_abs(), 1e-14);
  }
  for (double p : observed_orders(dts, errs)) EXPECT_NEAR(p, 2.0, 0.3);
}

TEST(ImexStep, ShearRunMatchesClosedForm) {
  const DomainSpec d{1.0, 16, 16, 9};
  const ViscosityModel m = ViscosityModel::horizontal();
  RunOptions o;
  o.timestep.dt_max = 0.005;
  o.timestep.t_end = 0.5;
  o.sobolev_diagnostics = false;
  const RunResult r = run(make_state(shear(d, 1.0), m), m, o);
  EXPECT_EQ(r.status, RunStatus::Completed);
  EXPECT_NEAR(r.final_state.t, 0.5, 1e-12);
  EXPECT_NEAR(shear_amplitude(r.final_state), std::exp(-pi * pi / 2.0), 1e-3);
}

TEST(ImexStep, FirstStepMatchesAssembledRhs) {
  const DomainSpec d{1.0, 16, 16, 17};
  const ViscosityModel m = ViscosityModel::inviscid();
  for (double delta : {1e-2, 1e-3}) {
    const Field3D v = Field3D::sample(d, 2, [&](int c, double x, double, double z) {
      return c == 0 ? delta * std::cos(pi * x) * std::sin(pi * z) : 0.0;
    });
    const SolverState s0 = make_state(v, m);
    const double dt = 1e-3;
    const SolverState s1 = imex_step(s0, m, dt);
    const Tendency t = assemble_rhs(s0, m);
    Field3D rate = s1.fluct() - s0.fluct();
    rate *= 1.0 / dt;
    EXPECT_LT((rate - t.fluct_rhs).max_abs(), 1e-10 * delta) << delta;
  }
}

TEST(ImexStep, AnisotropicModelsActPerComponent) {
  // vt = (a sin(pi y) cos(pi (z+h)/h), 0): all transport terms vanish
  const DomainSpec d{1.0, 16, 16, 17};
  const Field3D v = Field3D::sample(d, 2, [](int c, double, double y, double z) {
    return c == 0 ? 0.3 * std::sin(pi * y) * manufactured_profile(z, 1.0) : 0.0;
  });
  const double T = 0.1;
  const RunResult perp = run(make_state(v, ViscosityModel::half_perp()), ViscosityModel::half_perp(), fixed(0.001, T));
  const RunResult par = run(make_state(v, ViscosityModel::half_par()), ViscosityModel::half_par(), fixed(0.001, T));
  Field3D decayed = v;
  decayed *= std::exp(-pi * pi * T);
  EXPECT_LT((perp.final_state.velocity() - decayed).max_abs(), 1e-6);
  EXPECT_LT((par.final_state.velocity() - v).max_abs(), 1e-12);
}

TEST(ImexStep, FullVerticalViscosityNeumannModeIsDissipative) {
  const DomainSpec d{1.0, 16, 16, 17};
  const ViscosityModel m = ViscosityModel::full(1.0, 0.5);
  RunOptions o = fixed(0.005, 0.1);
  o.nonlinear.closure = VerticalClosure::Neumann;
  const Field3D v0 = initial_velocity("neumann", d, 0.1);
  const RunResult r = run(make_state(v0, m), m, o);
  double prev = 1e300;
  for (const auto& rec : r.records) {
    EXPECT_LE(rec.energy_budget.energy, prev * (1 + 1e-12));
    prev = rec.energy_budget.energy;
  }
}

TEST(Run, ZeroDataStaysZero) {
  const DomainSpec d{1.0, 8, 8, 9};
  for (const auto& m : {ViscosityModel::horizontal(), ViscosityModel::half_perp(), ViscosityModel::epsilon(0.5),
                        ViscosityModel::inviscid()}) {
    const RunResult r = run(SolverState::zero(d), m, fixed(0.01, 0.05));
    EXPECT_EQ(r.final_state.velocity().max_abs(), 0.0);
    for (const auto& rec : r.records) {
      EXPECT_LT(rec.div_mean_residual, 1e-12);
      EXPECT_LT(rec.fluct_mean_residual, 1e-12);
      EXPECT_LT(rec.w_boundary_residual, 1e-12);
    }
  }
}

TEST(Run, InvariantsHoldAfterEveryStep) {
  const DomainSpec d{1.0, 16, 16, 13};
  const ViscosityModel m = ViscosityModel::horizontal();
  RunOptions o;
  o.timestep.dt_max = 0.01;
  o.timestep.t_end = 0.05;
  o.sobolev_diagnostics = false;
  const RunResult r = run(make_state(initial_velocity("random", d, 0.5, 2), m), m, o);
  ASSERT_EQ(r.status, RunStatus::Completed);
  ASSERT_GE(r.records.size(), 2u);
  for (const auto& rec : r.records) {
    EXPECT_LT(rec.div_mean_residual, 1e-8);
    EXPECT_LT(rec.fluct_mean_residual, 1e-8);
    EXPECT_LT(rec.w_boundary_residual, 1e-6);
  }
}

TEST(Run, BlowupIsReportedWithLastState) {
  const DomainSpec d{1.0, 8, 8, 9};
  const ViscosityModel m = ViscosityModel::inviscid();
  RunOptions o = fixed(0.01, 0.1);
  o.timestep.blowup_threshold = 1e-3;
  const RunResult r = run(make_state(initial_velocity("random", d, 1.0, 1), m), m, o);
  EXPECT_EQ(r.status, RunStatus::BlowupDetected);
  EXPECT_NE(r.message.find("BlowupDetected"), std::string::npos);
  EXPECT_EQ(r.steps, 0);
}

TEST(Picard, ZeroDataConvergesImmediately) {
  const DomainSpec d{1.0, 8, 8, 9};
  TimestepConfig cfg;
  cfg.dt_max = 0.01;
  const PicardResult p = picard_solve(Field3D(d, 2), ViscosityModel::horizontal(), 0.05, cfg);
  EXPECT_EQ(p.iterations, 1);
  EXPECT_EQ(p.trajectory.size(), 6u);
  for (const auto& s : p.trajectory) EXPECT_EQ(s.velocity().max_abs(), 0.0);
}

TEST(Picard, FixedPointMatchesImex) {
  const DomainSpec d{1.0, 16, 16, 13};
  const ViscosityModel m = ViscosityModel::horizontal();
  const Field3D v0 = initial_velocity("random", d, 0.2, 5);
  TimestepConfig cfg;
  cfg.dt_max = 0.005;
  const PicardResult p = picard_solve(v0, m, 0.05, cfg);
  const RunResult r = run(make_state(v0, m), m, fixed(p.dt, 0.05));
  const Field3D pv = p.trajectory.back().velocity(), rv = r.final_state.velocity();
  EXPECT_LT(l2_norm(pv - rv) / l2_norm(rv), 1e-6);
  // increments contract
  for (std::size_t i = 1; i + 1 < p.increments.size(); ++i) EXPECT_LT(p.increments[i], p.increments[i - 1]);
}

TEST(Picard, LargeDataFailsToContract) {
  const DomainSpec d{1.0, 8, 8, 9};
  TimestepConfig cfg;
  cfg.dt_max = 0.05;
  cfg.picard_max_iters = 2;
  try {
    picard_solve(initial_velocity("random", d, 20.0, 1), ViscosityModel::horizontal(), 0.5, cfg);
    FAIL() << "expected NoContraction";
  } catch (const SolverError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NoContraction);
  }
}

TEST(Picard, RejectsHalfViscosity) {
  const DomainSpec d{1.0, 8, 8, 9};
  EXPECT_THROW(picard_solve(Field3D(d, 2), ViscosityModel::half_perp(), 0.1, TimestepConfig{}), SolverError);
}

TEST(Regimes, VanishingVerticalViscosityApproachesHorizontal) {
  const DomainSpec d{1.0, 16, 16, 17};
  const Field3D v0 = initial_velocity("neumann", d, 0.2);
  const double T = 0.1, dt = 0.005;
  RunOptions o = fixed(dt, T);
  o.nonlinear.closure = VerticalClosure::Neumann;
  const ViscosityModel hm = ViscosityModel::horizontal();
  const Field3D ref = run(make_state(v0, hm), hm, o).final_state.velocity();
  double prev = 1e300;
  for (double nu2 : {0.1, 0.05, 0.025, 0.0125}) {
    const ViscosityModel m = ViscosityModel::full(1.0, nu2);
    const double dist = l2_norm(run(make_state(v0, m), m, o).final_state.velocity() - ref);
    EXPECT_LT(dist, prev) << nu2;
    prev = dist;
  }
}

TEST(Regimes, TemporalConvergenceOnManufacturedSolution) {
  const DomainSpec d{1.0, 16, 16, 17};
  const auto st = temporal_convergence(d, ViscosityModel::horizontal(), 0.5, 0.2, {0.02, 0.01, 0.005});
  for (double p : st.orders) EXPECT_NEAR(p, 2.0, 0.3);
}
