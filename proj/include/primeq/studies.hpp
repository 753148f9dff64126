#ifndef PRIMEQ_STUDIES_HPP
#define PRIMEQ_STUDIES_HPP

#include <cmath>
#include <vector>

#include "primeq/galerkin.hpp"
#include "primeq/initial.hpp"
#include "primeq/timestepper.hpp"

namespace primeq {

/// log(e_coarse / e_fine) / log(h_coarse / h_fine) for consecutive entries.
inline std::vector<double> observed_orders(const std::vector<double>& steps, const std::vector<double>& errors) {
  std::vector<double> out;
  for (std::size_t i = 0; i + 1 < errors.size(); ++i)
    out.push_back(std::log(errors[i] / errors[i + 1]) / std::log(steps[i] / steps[i + 1]));
  return out;
}

struct TemporalStudy {
  std::vector<double> dts;
  std::vector<double> errors;  ///< relative L2 error at T
  std::vector<double> orders;
};

/// Fixed-step IMEX runs on the manufactured solution; errors against the
/// exact v*(T).
inline TemporalStudy temporal_convergence(const DomainSpec& d, const ViscosityModel& model, double amplitude,
                                          double T, const std::vector<double>& dts, NonlinearOptions nl = {}) {
  TemporalStudy st;
  st.dts = dts;
  const Field3D exact = manufactured_solution(d, amplitude, T);
  const double ref = l2_norm(exact);
  for (double dt : dts) {
    RunOptions opt;
    opt.timestep.dt_max = dt;
    opt.timestep.t_end = T;
    opt.fixed_dt = dt;
    opt.nonlinear = nl;
    opt.forcing = manufactured_forcing(d, amplitude, model, nl);
    opt.sobolev_diagnostics = false;
    opt.diagnostics_every = 1 << 30;
    const SolverState s0 = make_state(manufactured_solution(d, amplitude, 0.0), model);
    const RunResult r = run(s0, model, opt);
    st.errors.push_back(l2_norm(r.final_state.velocity() - exact) / ref);
  }
  st.orders = observed_orders(st.dts, st.errors);
  return st;
}

struct SpatialStudy {
  std::vector<int> nz;
  std::vector<double> dz;
  std::vector<double> errors;  ///< max error of d_z sin(pi z / 2h)
  std::vector<double> orders;
};

/// Vertical operator refinement: first derivative of sin(pi z / 2h).
inline SpatialStudy vertical_convergence(double h, const std::vector<int>& nzs, int nx = 4) {
  SpatialStudy st;
  for (int nz : nzs) {
    const DomainSpec d{h, nx, nx, nz};
    const double k = pi / (2.0 * h);
    const Field3D f = Field3D::sample(d, 1, [&](int, double, double, double z) { return std::sin(k * z); });
    const Field3D e = Field3D::sample(d, 1, [&](int, double, double, double z) { return k * std::cos(k * z); });
    st.nz.push_back(nz);
    st.dz.push_back(d.dz());
    st.errors.push_back((vertical_derivative(f, 1) - e).max_abs());
  }
  st.orders = observed_orders(st.dz, st.errors);
  return st;
}

struct EpsStudy {
  std::vector<double> eps;
  std::vector<Field3D> finals;
  std::vector<double> distances;  ///< ||v_eps[i] - v_eps[i+1]||_L2 at T
  std::vector<bool> persistence;  ///< per run: 2 eta band held wherever the certificate was valid
  std::vector<bool> initial_pass;  ///< per run: band at eta passed at t = 0
  std::vector<std::vector<DiagnosticsRecord>> records;
};

/// Eps(e) runs over a ladder from the same initial data with a common fixed
/// step, recording the Rayleigh monitor at eta.
inline EpsStudy eps_continuation(const Field3D& v0, const std::vector<double>& ladder, double eta, double T,
                                 double dt) {
  EpsStudy st;
  st.eps = ladder;
  for (double e : ladder) {
    const ViscosityModel model = ViscosityModel::epsilon(e);
    RunOptions opt;
    opt.timestep.dt_max = dt;
    opt.timestep.t_end = T;
    opt.fixed_dt = dt;
    opt.eta = eta;
    opt.sobolev_diagnostics = false;
    const RunResult r = run(make_state(v0, model), model, opt);
    bool ok = true;
    for (const auto& rec : r.records)
      if (rec.certificate_valid && !(rec.rayleigh_2eta && rec.rayleigh_2eta->pass)) ok = false;
    st.persistence.push_back(ok);
    st.initial_pass.push_back(r.records.front().rayleigh && r.records.front().rayleigh->pass);
    st.finals.push_back(r.final_state.velocity());
    st.records.push_back(r.records);
  }
  for (std::size_t i = 0; i + 1 < st.finals.size(); ++i) st.distances.push_back(l2_norm(st.finals[i] - st.finals[i + 1]));
  return st;
}

/// Smooth coefficients for the linear problem: a, b, f random band-limited,
/// w random times (1 - z^2/h^2) so it vanishes at z = +-h.
inline CoefficientData random_coefficients(const DomainSpec& d, std::uint64_t seed, double amplitude,
                                           double forcing_amplitude) {
  UniformSource u(seed);
  const double h = d.half_height;
  auto field = [&](double amp) { return normalize_max(SmoothRandom(u, h, 2, 2).sample(d), amp); };
  Field3D a = field(amplitude);
  Field3D b(d, 2);
  {
    const Field3D b1 = field(amplitude), b2 = field(amplitude);
    std::copy(b1.values().begin(), b1.values().end(), b.component(0).begin());
    std::copy(b2.values().begin(), b2.values().end(), b.component(1).begin());
  }
  Field3D w = field(amplitude);
  for (int k = 0; k < d.nz; ++k) {
    const double z = d.z(k);
    const double bump = (k == 0 || k == d.nz - 1) ? 0.0 : 1.0 - z * z / (h * h);
    for (double& x : w.level(0, k)) x *= bump;
  }
  Field3D f = field(forcing_amplitude);
  return CoefficientData::constant(std::move(a), std::move(b), std::move(w), std::move(f));
}

/// Fixed smooth coefficients for the Galerkin/grid comparison:
///   a = alpha cos(pi x), b = alpha (cos(pi y), sin(pi x)),
///   w = alpha sin(pi x) (1 - z^2/h^2), f = 0.
inline CoefficientData smooth_coefficients(const DomainSpec& d, double alpha) {
  const double h = d.half_height;
  Field3D a = Field3D::sample(d, 1, [&](int, double x, double, double) { return alpha * std::cos(pi * x); });
  Field3D b = Field3D::sample(d, 2, [&](int c, double x, double y, double) {
    return c == 0 ? alpha * std::cos(pi * y) : alpha * std::sin(pi * x);
  });
  Field3D w = Field3D::sample(d, 1, [&](int, double x, double, double z) {
    return alpha * std::sin(pi * x) * (1.0 - z * z / (h * h));
  });
  for (double& x : w.level(0, 0)) x = 0.0;
  for (double& x : w.level(0, d.nz - 1)) x = 0.0;
  return CoefficientData::constant(std::move(a), std::move(b), std::move(w), Field3D(d, 1));
}

/// Initial data in the span of the smallest basis: cos(pi y) + 0.5 cos(pi (z+h)/2h).
inline Field3D smooth_linear_initial(const DomainSpec& d) {
  const double h = d.half_height;
  return Field3D::sample(d, 1, [&](int, double, double y, double z) {
    return std::cos(pi * y) + 0.5 * std::cos(pi * (z + h) / (2.0 * h));
  });
}

struct GalerkinComparison {
  std::vector<int> sizes;
  std::vector<double> distances;  ///< max_t ||v_n - v_grid||_L2 / max_t ||v_grid||_L2
  LinearizedTrajectory grid;
  double energy = 0.0;  ///< sup ||v||_H^2 + int ||grad_H v||_H^2 of the grid solution
  double bound = 0.0;
};

inline GalerkinComparison galerkin_comparison(const CoefficientData& coeff, const Field3D& v0, double T, double dt,
                                              const std::vector<int>& sizes) {
  GalerkinComparison gc;
  gc.sizes = sizes;
  gc.grid = solve_linearized_grid(coeff, v0, T, dt);
  gc.energy = linearized_energy(gc.grid);
  gc.bound = energy_bound_for(coeff, v0, T);
  double ref = 0.0;
  for (const auto& s : gc.grid.states) ref = std::max(ref, l2_norm(s));
  for (int n : sizes) {
    const auto [nh, nz] = basis_shape(n);
    const GalerkinBasis basis = build_basis(nh, nz, coeff.domain());
    const GalerkinSystem sys = assemble_system(coeff, basis, &v0);
    const auto traj = integrate_ode(sys, T, dt);
    double dist = 0.0;
    for (std::size_t i = 0; i < traj.size() && i < gc.grid.states.size(); ++i)
      dist = std::max(dist, l2_norm(synthesize(basis, traj[i]) - gc.grid.states[i]));
    gc.distances.push_back(ref > 0.0 ? dist / ref : dist);
  }
  return gc;
}

}  // namespace primeq

#endif  // PRIMEQ_STUDIES_HPP
