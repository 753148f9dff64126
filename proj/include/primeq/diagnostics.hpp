#ifndef PRIMEQ_DIAGNOSTICS_HPP
#define PRIMEQ_DIAGNOSTICS_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "primeq/calculus.hpp"
#include "primeq/errors.hpp"
#include "primeq/state.hpp"
#include "primeq/transport.hpp"
#include "primeq/viscosity.hpp"

namespace primeq {

/// How the L2 norms of the individual derivatives are combined.
enum class NormConvention {
  Sum,           ///< sum over |alpha| <= s of ||D^alpha f||
  RootSumSquare  ///< sqrt of the sum of squares; for comparison with other tools
};

namespace detail {

/// ||d_x^ax d_y^ay g||^2 over Omega from the spectrum of g, using the
/// vertical quadrature weights. Matches grid quadrature of the spectrally
/// differentiated field.
inline double spectral_derivative_energy(const SpectralField3D& gs, int ax, int ay) {
  const DomainSpec& d = gs.domain();
  const auto w = vertical_weights(d);
  double total = 0.0;
  for (int c = 0; c < gs.components(); ++c)
    for (int k = 0; k < d.nz; ++k) {
      double lv = 0.0;
      for (int n = 0; n < d.ny; ++n)
        for (int m = 0; m < d.nx_half(); ++m) {
          if ((ax % 2 == 1 && is_nyquist_x(d, m)) || (ay % 2 == 1 && is_nyquist_y(d, n))) continue;
          const double mult = (m == 0 || is_nyquist_x(d, m)) ? 1.0 : 2.0;
          const double fx = std::pow(wavenumber_x(d, m), 2 * ax);
          const double fy = std::pow(wavenumber_y(d, n), 2 * ay);
          lv += mult * fx * fy * std::norm(gs.at(c, k, m, n));
        }
      total += w[k] * lv;
    }
  return total * d.area();
}

}  // namespace detail

/// Discrete H^s norm: sum over multi-indices |alpha| <= s of ||D^alpha f||_L2,
/// spectral in x, y and fourth-order differences in z.
inline double sobolev_norm(const Field3D& f, int s, NormConvention conv = NormConvention::Sum) {
  if (s < 0 || s > 4) throw std::invalid_argument("sobolev_norm: s must be in 0..4");
  double sum = 0.0, sum_sq = 0.0;
  for (int cz = 0; cz <= s; ++cz) {
    const auto gs = forward_transform(cz == 0 ? f : vertical_derivative(f, cz));
    for (int ax = 0; ax + cz <= s; ++ax)
      for (int ay = 0; ax + ay + cz <= s; ++ay) {
        const double e = detail::spectral_derivative_energy(gs, ax, ay);
        sum += std::sqrt(e);
        sum_sq += e;
      }
  }
  return conv == NormConvention::Sum ? sum : std::sqrt(sum_sq);
}

inline constexpr double rayleigh_weight_cap = 1e8;

struct RayleighComponent {
  double min_inv = 0.0;  ///< min over the grid of 1/|d_z f|
  double max_inv = 0.0;  ///< max over the grid of 1/|d_z f|, capped
  bool pass = false;
  bool capped = false;
  std::array<int, 3> argmin{};
  std::array<int, 3> argmax{};
};

struct RayleighReport {
  double eta = 0.0;
  bool pass = false;
  std::vector<RayleighComponent> components;
};

namespace detail {

/// Band check 1/eta <= 1/|g| <= eta per component, on the grid nodes.
inline RayleighReport rayleigh_band(const Field3D& g, double eta) {
  const DomainSpec& d = g.domain();
  const double slack = 1e-12;
  RayleighReport rep;
  rep.eta = eta;
  rep.pass = true;
  for (int c = 0; c < g.components(); ++c) {
    RayleighComponent rc;
    rc.min_inv = std::numeric_limits<double>::infinity();
    rc.max_inv = -1.0;
    for (int k = 0; k < d.nz; ++k)
      for (int j = 0; j < d.ny; ++j)
        for (int i = 0; i < d.nx; ++i) {
          const double a = std::abs(g(c, i, j, k));
          double inv;
          if (a < 1.0 / rayleigh_weight_cap) {
            inv = rayleigh_weight_cap;
            rc.capped = true;
          } else if (a > rayleigh_weight_cap) {
            inv = 1.0 / rayleigh_weight_cap;
            rc.capped = true;
          } else {
            inv = 1.0 / a;
          }
          if (inv < rc.min_inv) {
            rc.min_inv = inv;
            rc.argmin = {i, j, k};
          }
          if (inv > rc.max_inv) {
            rc.max_inv = inv;
            rc.argmax = {i, j, k};
          }
        }
    rc.pass = !rc.capped && rc.min_inv >= (1.0 / eta) * (1.0 - slack) && rc.max_inv <= eta * (1.0 + slack);
    rep.pass = rep.pass && rc.pass;
    rep.components.push_back(rc);
  }
  return rep;
}

}  // namespace detail

/// Rayleigh condition on the vertical profile: given dz_v = d_z v, checks
/// 1/eta <= 1/|d_zz v_i| <= eta at every grid node, per component.
inline RayleighReport rayleigh_check(const Field3D& dz_v, double eta) {
  return detail::rayleigh_band(vertical_derivative(dz_v, 1), eta);
}

struct RayleighViolated {
  RayleighReport report;
};

/// Weighted norm with top-order horizontal derivatives scaled by
/// 1/sqrt|d_z f|:
///   ||f||^2 = ||f||^2_{H^{s-1}} + ||d_z^s f||^2 + sum_{|a|=s, a_z=0} ||D^a f / sqrt|d_z f| ||^2.
/// Returns RayleighViolated when the band check on d_z f fails anywhere.
inline std::variant<double, RayleighViolated> eta_norm(const Field3D& f, int s, double eta) {
  if (s < 3) throw std::invalid_argument("eta_norm: s must be at least 3");
  if (!(eta > 1.0)) throw std::invalid_argument("eta_norm: eta must exceed 1");
  const Field3D fz = vertical_derivative(f, 1);
  RayleighReport rep = detail::rayleigh_band(fz, eta);
  if (!rep.pass) return RayleighViolated{std::move(rep)};

  const double lower = sobolev_norm(f, s - 1);
  const double top_z = l2_norm(vertical_derivative(f, s));
  const auto fs = forward_transform(f);
  double weighted = 0.0;
  for (int ax = 0; ax <= s; ++ax) {
    const int ay = s - ax;
    Field3D deriv = inverse_transform(horizontal_derivative(fs, ax, ay));
    for (int c = 0; c < f.components(); ++c) {
      auto dv = deriv.component(c);
      auto zv = fz.component(c);
      for (std::size_t q = 0; q < dv.size(); ++q) dv[q] /= std::sqrt(std::abs(zv[q]));
    }
    weighted += inner(deriv, deriv);
  }
  return std::sqrt(lower * lower + top_z * top_z + weighted);
}

/// Sum over the top-order horizontal multi-indices of ||D^a f|| (unweighted),
/// the quantity the weighted part of eta_norm is equivalent to.
inline double top_horizontal_sum(const Field3D& f, int s, bool weighted) {
  const auto fs = forward_transform(f);
  const Field3D fz = vertical_derivative(f, 1);
  double sum = 0.0;
  for (int ax = 0; ax <= s; ++ax) {
    Field3D deriv = inverse_transform(horizontal_derivative(fs, ax, s - ax));
    if (weighted)
      for (int c = 0; c < f.components(); ++c) {
        auto dv = deriv.component(c);
        auto zv = fz.component(c);
        for (std::size_t q = 0; q < dv.size(); ++q)
          dv[q] /= std::sqrt(std::clamp(std::abs(zv[q]), 1.0 / rayleigh_weight_cap, rayleigh_weight_cap));
      }
    sum += l2_norm(deriv);
  }
  return sum;
}

/// d_zz as two first-derivative passes, the discretization rayleigh_check uses.
inline Field3D curvature(const Field3D& v) { return vertical_derivative(vertical_derivative(v, 1), 1); }

/// sup over the grid of |d_zz v(t) - d_zz v(0)|.
inline double rayleigh_drift(const SolverState& state, const SolverState& initial) {
  if (!(state.domain() == initial.domain())) throw std::invalid_argument("rayleigh_drift: domain mismatch");
  Field3D diff = state.split.fluct;
  diff -= initial.split.fluct;
  return curvature(diff).max_abs();
}

struct InvariantResiduals {
  double div_mean_residual = 0.0;    ///< ||div_H vbar||_L2(G)
  double fluct_mean_residual = 0.0;  ///< ||mean_z vt||_L2(G)
  double w_boundary_residual = 0.0;  ///< max |w| over z = +-h
  double neumann_residual = 0.0;     ///< max |d_z v| over z = +-h
};

inline double boundary_max_abs(const Field3D& f) {
  const int top = f.domain().nz - 1;
  double m = 0.0;
  for (int c = 0; c < f.components(); ++c) {
    for (double v : f.level(c, 0)) m = std::max(m, std::abs(v));
    for (double v : f.level(c, top)) m = std::max(m, std::abs(v));
  }
  return m;
}

inline InvariantResiduals invariant_residuals(const SolverState& state) {
  InvariantResiduals r;
  r.div_mean_residual = l2_norm(divergence_h(state.split.mean));
  r.fluct_mean_residual = l2_norm(vertical_average(state.split.fluct));
  Field3D w = vertical_integral(divergence_h(state.split.fluct));
  r.w_boundary_residual = boundary_max_abs(w);
  r.neumann_residual = boundary_max_abs(vertical_derivative(state.split.fluct, 1));
  return r;
}

struct AnisotropicRatio {
  double lhs = 0.0;
  double rhs = 0.0;
  double ratio = 0.0;
};

/// Empirical constant of |<f g, h>| <= c ||f|| ||g||_H1 (||grad_H h||^1/2 ||h||^1/2 + ||h||)
/// for scalar fields.
inline AnisotropicRatio anisotropic_estimate_check(const Field3D& f, const Field3D& g, const Field3D& hh) {
  Field3D fg(f.domain(), 1);
  {
    auto a = f.component(0), b = g.component(0);
    auto o = fg.component(0);
    for (std::size_t q = 0; q < o.size(); ++q) o[q] = a[q] * b[q];
  }
  AnisotropicRatio r;
  r.lhs = std::abs(inner(fg, hh));
  const double grad_h = std::sqrt(std::pow(l2_norm(apply_derivative(hh, Axis::x, 1)), 2) +
                                  std::pow(l2_norm(apply_derivative(hh, Axis::y, 1)), 2));
  const double hn = l2_norm(hh);
  r.rhs = l2_norm(f) * sobolev_norm(g, 1) * (std::sqrt(grad_h) * std::sqrt(hn) + hn);
  if (r.rhs == 0.0) {
    if (r.lhs > 0.0)
      throw SolverError(ErrorKind::DegenerateRhs, "right-hand side vanishes while the pairing does not");
    r.ratio = 0.0;
    return r;
  }
  r.ratio = r.lhs / r.rhs;
  return r;
}

struct EnergyBudget {
  double energy = 0.0;       ///< (1/2) ||v||^2
  double dissipation = 0.0;  ///< <A v, v>, nonpositive
  double transfer = 0.0;     ///< -<K, vbar> over Omega, barotropic gain from coupling
};

/// Diagnostics for one instant. Optional members are empty when the
/// corresponding monitor is off.
struct DiagnosticsRecord {
  long step = 0;
  double t = 0.0;
  double dt = 0.0;
  std::map<std::string, double> sobolev;
  double div_mean_residual = 0.0;
  double fluct_mean_residual = 0.0;
  double w_boundary_residual = 0.0;
  double neumann_residual = 0.0;
  std::optional<RayleighReport> rayleigh;
  std::optional<RayleighReport> rayleigh_2eta;
  std::optional<double> eta_norm;
  double rayleigh_drift = 0.0;
  std::optional<double> certificate_margin;
  bool certificate_valid = false;
  EnergyBudget energy_budget;
};

/// Band slack of the eta -> 2 eta persistence window: the largest drift of
/// d_zz v that keeps 1/(2 eta) <= |d_zz v| <= 2 eta everywhere, given the
/// initial profile.
inline double rayleigh_certificate_margin(const SolverState& initial, double eta) {
  const Field3D vzz = curvature(initial.split.fluct);
  double margin = std::numeric_limits<double>::infinity();
  for (double v : vzz.values()) {
    const double a = std::abs(v);
    margin = std::min({margin, a - 1.0 / (2.0 * eta), 2.0 * eta - a});
  }
  return margin;
}

struct RecordOptions {
  std::optional<double> eta;
  bool sobolev = true;
};

inline DiagnosticsRecord make_record(const SolverState& state, const SolverState& initial,
                                     const ViscosityModel& model, const RecordOptions& opt, long step = 0,
                                     double dt = 0.0) {
  DiagnosticsRecord rec;
  rec.step = step;
  rec.t = state.t;
  rec.dt = dt;
  const Field3D v = state.velocity();
  if (opt.sobolev) {
    for (int s = 0; s <= 2; ++s) rec.sobolev["v_H" + std::to_string(s)] = sobolev_norm(v, s);
    rec.sobolev["vt_H1"] = sobolev_norm(state.split.fluct, 1);
  }
  const InvariantResiduals r = invariant_residuals(state);
  rec.div_mean_residual = r.div_mean_residual;
  rec.fluct_mean_residual = r.fluct_mean_residual;
  rec.w_boundary_residual = r.w_boundary_residual;
  rec.neumann_residual = r.neumann_residual;

  rec.rayleigh_drift = rayleigh_drift(state, initial);
  if (opt.eta) {
    const double eta = *opt.eta;
    const Field3D vz = vertical_derivative(state.split.fluct, 1);
    rec.rayleigh = rayleigh_check(vz, eta);
    rec.rayleigh_2eta = rayleigh_check(vz, 2.0 * eta);
    if (state.domain().nz >= 9) {
      auto en = eta_norm(vz, 3, eta);
      if (std::holds_alternative<double>(en)) rec.eta_norm = std::get<double>(en);
    }
    const bool initial_pass = rayleigh_check(vertical_derivative(initial.split.fluct, 1), eta).pass;
    if (initial_pass) {
      rec.certificate_margin = rayleigh_certificate_margin(initial, eta);
      rec.certificate_valid = rec.rayleigh_drift <= *rec.certificate_margin;
    }
  }

  const double two_h = 2.0 * state.domain().half_height;
  rec.energy_budget.energy = 0.5 * inner(v, v);
  rec.energy_budget.dissipation = two_h * inner(apply_viscosity(model, state.split.mean), state.split.mean) +
                                  inner(apply_viscosity(model, state.split.fluct), state.split.fluct);
  Field3D w = vertical_integral(divergence_h(state.split.fluct));
  w *= -1.0;
  rec.energy_budget.transfer = -two_h * inner(coupling_K_advective(state.split.fluct, w), state.split.mean);
  return rec;
}

}  // namespace primeq

#endif  // PRIMEQ_DIAGNOSTICS_HPP
