#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "primeq/galerkin.hpp"
#include "primeq/studies.hpp"

using namespace primeq;

namespace {

Eigen::MatrixXd gram(const GalerkinBasis& basis) {
  const BasisSamples bs(basis);
  const std::size_t n = basis.size();
  Eigen::MatrixXd G(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) G(i, j) = inner_H(bs.phi[i], bs.phi_z[i], bs.phi[j], bs.phi_z[j]);
  return G;
}

GalerkinSystem scalar_system(double d, double g0) {
  GalerkinSystem sys;
  sys.D = Eigen::MatrixXd::Constant(1, 1, d);
  GalerkinFrame fr;
  fr.A = fr.B = fr.W = Eigen::MatrixXd::Zero(1, 1);
  fr.f = Eigen::VectorXd::Zero(1);
  sys.frames.push_back(fr);
  sys.g0 = Eigen::VectorXd::Constant(1, g0);
  return sys;
}

double scalar_error(double dt) {
  const auto traj = integrate_ode(scalar_system(pi * pi, 1.0), 0.5, dt);
  return std::abs(traj.back()[0] - std::exp(-pi * pi * 0.5));
}

}  // namespace

TEST(Basis, SingleConstantMode) {
  const DomainSpec d{1.0, 8, 8, 9};
  const GalerkinBasis b = build_basis(1, 1, d);
  ASSERT_EQ(b.size(), 1u);
  EXPECT_NEAR(b.modes()[0].scale, 1.0 / std::sqrt(d.volume()), 1e-15);
  for (double v : b.sample(0).values()) EXPECT_NEAR(v, 1.0 / std::sqrt(8.0), 1e-15);
}

TEST(Basis, GramMatrixIsIdentity) {
  for (auto [nh, nz] : {std::pair{4, 3}, std::pair{9, 3}, std::pair{16, 4}}) {
    const DomainSpec d{0.7, 16, 16, 17};
    const GalerkinBasis b = build_basis(nh, nz, d);
    ASSERT_EQ(b.size(), static_cast<std::size_t>(nh * nz));
    const Eigen::MatrixXd G = gram(b);
    EXPECT_LT((G - Eigen::MatrixXd::Identity(G.rows(), G.cols())).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Basis, NormalizationOfMixedMode) {
  // cos(pi x) cos(pi (z+1)/2) on h = 1: H norm^2 = 2 (1 + pi^2 / 4)
  const DomainSpec d{1.0, 16, 16, 33};
  const GalerkinBasis b = build_basis(2, 2, d);
  std::size_t idx = b.size();
  for (std::size_t i = 0; i < b.size(); ++i) {
    const auto& m = b.modes()[i];
    if (m.m == 1 && !m.sine && std::abs(m.p) + std::abs(m.q) == 1) idx = i;
  }
  ASSERT_LT(idx, b.size());
  EXPECT_NEAR(b.modes()[idx].scale, 1.0 / std::sqrt(2.0 * (1.0 + pi * pi / 4.0)), 1e-14);
  // independent check by fine Simpson quadrature of the sampled function
  const Field3D phi = b.sample(idx);
  const Field3D phiz = b.sample(idx, 0, 0, 1);
  EXPECT_NEAR(inner(phi, phi) + inner(phiz, phiz), 1.0, 1e-6);
}

TEST(Basis, ShapeAndValidation) {
  EXPECT_EQ(basis_shape(8), (std::pair<int, int>{4, 2}));
  EXPECT_EQ(basis_shape(27), (std::pair<int, int>{9, 3}));
  EXPECT_EQ(basis_shape(64), (std::pair<int, int>{16, 4}));
  EXPECT_THROW(basis_shape(10), std::invalid_argument);
  EXPECT_THROW(build_basis(0, 1, DomainSpec{}), std::invalid_argument);
}

TEST(Assemble, ZeroCoefficientsGiveZeroMatrices) {
  const DomainSpec d{1.0, 8, 8, 9};
  const GalerkinSystem s = assemble_system(CoefficientData::zero(d), build_basis(4, 2, d));
  EXPECT_EQ(s.frames[0].A.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(s.frames[0].B.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(s.frames[0].W.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(s.frames[0].f.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Assemble, ConstantTransportIsSkew) {
  const DomainSpec d{1.0, 12, 12, 9};
  Field3D b = Field3D::sample(d, 2, [](int c, double, double, double) { return c == 0 ? 0.7 : -0.4; });
  const auto coeff = CoefficientData::constant(Field3D(d, 1), std::move(b), Field3D(d, 1), Field3D(d, 1));
  const GalerkinSystem s = assemble_system(coeff, build_basis(9, 1, d));
  const Eigen::MatrixXd& B = s.frames[0].B;
  EXPECT_LT((B + B.transpose()).cwiseAbs().maxCoeff(), 1e-13);
  EXPECT_GT(B.cwiseAbs().maxCoeff(), 0.1);
}

TEST(Assemble, GradientGramIsSymmetricPsd) {
  const DomainSpec d{1.0, 12, 12, 13};
  const GalerkinBasis basis = build_basis(9, 3, d);
  const GalerkinSystem s = assemble_system(CoefficientData::zero(d), basis);
  EXPECT_LT((s.D - s.D.transpose()).cwiseAbs().maxCoeff(), 1e-14);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s.D);
  EXPECT_GT(es.eigenvalues().minCoeff(), -1e-12);
  for (std::size_t i = 0; i < basis.size(); ++i) {
    const auto& m = basis.modes()[i];
    if (m.m == 0 && std::abs(m.p) == 1 && m.q == 0) {
      EXPECT_NEAR(s.D(i, i), pi * pi, 1e-12);
    }
  }
}

TEST(Assemble, VerticalTransportQuadraticFormBound) {
  const DomainSpec d{1.0, 12, 12, 33};
  UniformSource u(17);
  const SmoothRandom r(u, 1.0, 2, 2);
  Field3D w = Field3D::sample(d, 1, [&](int, double x, double y, double z) { return r(x, y, z) * (1.0 - z * z); });
  const double wz = vertical_derivative(w, 1).max_abs();
  const auto coeff = CoefficientData::constant(Field3D(d, 1), Field3D(d, 2), std::move(w), Field3D(d, 1));
  const GalerkinSystem s = assemble_system(coeff, build_basis(9, 3, d));
  std::mt19937_64 eng(3);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::VectorXd g(s.size());
    for (auto& x : g) x = nd(eng);
    EXPECT_LE(g.dot(s.frames[0].W * g), 0.5 * wz * g.squaredNorm() * (1 + 1e-6));
  }
}

TEST(Integrate, FrozenSystemStays) {
  GalerkinSystem s = scalar_system(0.0, 2.5);
  for (const auto& g : integrate_ode(s, 1.0, 0.1)) EXPECT_EQ(g[0], 2.5);
}

TEST(Integrate, ScalarDecayAndSecondOrder) {
  const auto traj = integrate_ode(scalar_system(pi * pi, 1.0), 0.5, 1e-3);
  EXPECT_NEAR(traj.back()[0], std::exp(-pi * pi * 0.5), 1e-5);
  const double ratio = scalar_error(0.01) / scalar_error(0.005);
  EXPECT_NEAR(ratio, 4.0, 0.1);
}

TEST(Integrate, RejectsBadStep) {
  EXPECT_THROW(integrate_ode(scalar_system(1.0, 1.0), 0.1, 0.0), std::invalid_argument);
  // (1 + dt/2 * (-2/dt)) = 0: singular midpoint matrix
  EXPECT_THROW(integrate_ode(scalar_system(-20.0, 1.0), 0.1, 0.1), SolverError);
}

TEST(EnergyBound, FormulaExamples) {
  BoundInputs in;
  in.v0_H = 1.0;
  in.T = 1.0;
  EXPECT_NEAR(energy_bound(in), std::exp(0.5), 1e-15);
  EXPECT_NEAR(energy_bound(in), 1.6487212707, 1e-10);
  in.v0_H = 0.0;
  EXPECT_EQ(energy_bound(in), 0.0);
  in.v0_H = 1.0;
  in.T = 2.0;
  in.w_z = 1.0;
  EXPECT_NEAR(energy_bound(in), std::exp(3.0), 1e-12);
  in = {};
  in.f_L2Vprime_sq = 0.5;
  in.b = 0.5;
  in.b_z = 0.5;
  in.T = 1.0;
  EXPECT_NEAR(energy_bound(in), std::exp(2.5), 1e-12);
}

TEST(Coefficients, WMustVanishOnBoundary) {
  const DomainSpec d{1.0, 8, 8, 9};
  Field3D w = Field3D::sample(d, 1, [](int, double, double, double) { return 0.1; });
  EXPECT_THROW(CoefficientData::constant(Field3D(d, 1), Field3D(d, 2), std::move(w), Field3D(d, 1)), SolverError);
}

TEST(Coefficients, TimeInterpolation) {
  const DomainSpec d{1.0, 8, 8, 9};
  auto frame = [&](double t, double a) {
    return CoefficientFrame{t, Field3D::sample(d, 1, [&](int, double, double, double) { return a; }), Field3D(d, 2),
                            Field3D(d, 1), Field3D(d, 1)};
  };
  const auto c = CoefficientData::frames({frame(1.0, 3.0), frame(0.0, 1.0)});
  EXPECT_NEAR(c.at(0.25).a(0, 0, 0, 0), 1.5, 1e-15);
  EXPECT_NEAR(c.at(5.0).a(0, 0, 0, 0), 3.0, 1e-15);
  EXPECT_NEAR(c.sup_norms().a, 3.0, 1e-15);
}

TEST(LinearizedGrid, HeatEquationClosedForm) {
  const DomainSpec d{1.0, 8, 8, 9};
  const Field3D v0 = Field3D::sample(d, 1, [](int, double x, double, double) { return std::sin(pi * x); });
  const auto tr = solve_linearized_grid(CoefficientData::zero(d), v0, 0.1, 1e-4, 100);
  Field3D exact = v0;
  exact *= std::exp(-pi * pi * 0.1);
  EXPECT_NEAR(tr.times.back(), 0.1, 1e-12);
  EXPECT_LT(l2_norm(tr.states.back() - exact) / l2_norm(exact), 1e-4);
}

TEST(LinearizedGrid, ZeroDataStaysZero) {
  const DomainSpec d{1.0, 8, 8, 9};
  const auto tr = solve_linearized_grid(random_coefficients(d, 1, 0.2, 0.0), Field3D(d, 1), 0.05, 0.01);
  for (const auto& s : tr.states) EXPECT_EQ(s.max_abs(), 0.0);
}

TEST(LinearizedGrid, ManufacturedSteadyStateConvergesInZ) {
  // v* = sin(pi x) cos(pi z / 2h) with f = a v* + b.grad v* + w d_z v* - Lap v*
  std::vector<double> errs, dzs;
  for (int nz : {9, 17, 33}) {
    const DomainSpec d{1.0, 16, 16, nz};
    const double h = d.half_height, kz = pi / (2 * h);
    auto vs = [&](double x, double z) { return std::sin(pi * x) * std::cos(kz * z); };
    Field3D a = Field3D::sample(d, 1, [](int, double x, double, double) { return 0.3 * std::cos(pi * x); });
    Field3D b = Field3D::sample(d, 2, [](int c, double, double y, double) { return c == 0 ? 0.2 * std::sin(pi * y) : 0.1; });
    Field3D w = Field3D::sample(d, 1, [&](int, double x, double, double z) { return 0.2 * std::cos(pi * x) * (1 - z * z / (h * h)); });
    for (double& x : w.level(0, 0)) x = 0.0;
    for (double& x : w.level(0, d.nz - 1)) x = 0.0;
    Field3D f = Field3D::sample(d, 1, [&](int, double x, double y, double z) {
      const double v = vs(x, z);
      const double vx = pi * std::cos(pi * x) * std::cos(kz * z);
      const double vz = -kz * std::sin(pi * x) * std::sin(kz * z);
      const double aa = 0.3 * std::cos(pi * x), b1 = 0.2 * std::sin(pi * y);
      const double ww = 0.2 * std::cos(pi * x) * (1 - z * z / (h * h));
      return aa * v + b1 * vx + ww * vz + pi * pi * v;
    });
    const Field3D v0 = Field3D::sample(d, 1, [&](int, double x, double, double z) { return vs(x, z); });
    const auto coeff = CoefficientData::constant(std::move(a), std::move(b), std::move(w), std::move(f));
    const auto tr = solve_linearized_grid(coeff, v0, 0.2, 2e-3, 1000);
    errs.push_back((tr.states.back() - v0).max_abs());
    dzs.push_back(d.dz());
  }
  EXPECT_LT(errs.back(), 1e-5);
  for (double p : observed_orders(dzs, errs)) EXPECT_GT(p, 3.0);
}

TEST(LinearizedGrid, DeterministicAndCflChecked) {
  const DomainSpec d{1.0, 8, 8, 9};
  const auto coeff = random_coefficients(d, 4, 0.3, 0.1);
  const Field3D v0 = smooth_linear_initial(d);
  const auto t1 = solve_linearized_grid(coeff, v0, 0.05, 0.005);
  const auto t2 = solve_linearized_grid(coeff, v0, 0.05, 0.005);
  EXPECT_EQ(t1.states.back(), t2.states.back());
  EXPECT_THROW(solve_linearized_grid(coeff, v0, 1.0, 1.0), SolverError);
}

TEST(LinearizedGrid, EnergyStaysBelowBound) {
  const DomainSpec d{1.0, 12, 12, 13};
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto coeff = random_coefficients(d, seed, 0.5, 0.5);
    const Field3D v0 = smooth_linear_initial(d);
    const auto tr = solve_linearized_grid(coeff, v0, 0.2, 0.002);
    EXPECT_LE(linearized_energy(tr), energy_bound_for(coeff, v0, 0.2) * 1.05);
  }
}

TEST(Galerkin, SmallestBasisReproducesHeatDecay) {
  // with zero coefficients the span of cos(pi y) and the first vertical mode is invariant
  const DomainSpec d{1.0, 12, 12, 33};
  const GalerkinBasis basis = build_basis(4, 2, d);
  const Field3D v0 = smooth_linear_initial(d);
  const GalerkinSystem sys = assemble_system(CoefficientData::zero(d), basis, &v0);
  const auto traj = integrate_ode(sys, 0.1, 1e-3);
  const auto grid = solve_linearized_grid(CoefficientData::zero(d), v0, 0.1, 1e-3);
  EXPECT_LT(l2_norm(synthesize(basis, traj.back()) - grid.states.back()) / l2_norm(grid.states.back()), 1e-4);
}
