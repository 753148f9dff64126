#ifndef PRIMEQ_GALERKIN_HPP
#define PRIMEQ_GALERKIN_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "primeq/calculus.hpp"
#include "primeq/errors.hpp"
#include "primeq/implicit.hpp"
#include "primeq/viscosity.hpp"

namespace primeq {

// Linear transport-diffusion problem
//   d_t v + a v + b.grad_H v + w d_z v - Lap_H v = f,  v scalar,
// in H = H^1((-h,h), L^2(G)) with <u,v>_H = <u,v> + <u_z,v_z>.

/// One time level of the coefficients: a, w, f scalar, b two components.
struct CoefficientFrame {
  double t = 0.0;
  Field3D a, b, w, f;
};

inline constexpr double w_boundary_tolerance = 1e-10;

/// Coefficients, constant in time (one frame) or piecewise linear between
/// frames (clamped outside the covered interval).
class CoefficientData {
 public:
  CoefficientData() = default;

  static CoefficientData zero(const DomainSpec& d) {
    return constant(Field3D(d, 1), Field3D(d, 2), Field3D(d, 1), Field3D(d, 1));
  }

  static CoefficientData constant(Field3D a, Field3D b, Field3D w, Field3D f) {
    return frames({CoefficientFrame{0.0, std::move(a), std::move(b), std::move(w), std::move(f)}});
  }

  static CoefficientData frames(std::vector<CoefficientFrame> fr) {
    if (fr.empty()) throw std::invalid_argument("CoefficientData: at least one frame required");
    std::sort(fr.begin(), fr.end(), [](const auto& x, const auto& y) { return x.t < y.t; });
    CoefficientData c;
    c.frames_ = std::move(fr);
    c.validate();
    return c;
  }

  const DomainSpec& domain() const { return frames_.front().a.domain(); }
  const std::vector<CoefficientFrame>& all_frames() const { return frames_; }

  CoefficientFrame at(double t) const {
    if (frames_.size() == 1 || t <= frames_.front().t) return with_time(frames_.front(), t);
    if (t >= frames_.back().t) return with_time(frames_.back(), t);
    std::size_t i = 1;
    while (frames_[i].t < t) ++i;
    const auto& f0 = frames_[i - 1];
    const auto& f1 = frames_[i];
    const double s = (t - f0.t) / (f1.t - f0.t);
    auto mix = [s](const Field3D& x, const Field3D& y) {
      Field3D r = x;
      r *= 1.0 - s;
      r.axpy(s, y);
      return r;
    };
    return {t, mix(f0.a, f1.a), mix(f0.b, f1.b), mix(f0.w, f1.w), mix(f0.f, f1.f)};
  }

  /// Sup norms over all frames, used by the energy bound.
  struct SupNorms {
    double w_z = 0.0, a = 0.0, a_z = 0.0, b = 0.0, b_z = 0.0;
  };

  SupNorms sup_norms() const {
    SupNorms n;
    for (const auto& fr : frames_) {
      n.w_z = std::max(n.w_z, vertical_derivative(fr.w, 1).max_abs());
      n.a = std::max(n.a, fr.a.max_abs());
      n.a_z = std::max(n.a_z, vertical_derivative(fr.a, 1).max_abs());
      n.b = std::max(n.b, pointwise_vector_max(fr.b));
      n.b_z = std::max(n.b_z, pointwise_vector_max(vertical_derivative(fr.b, 1)));
    }
    return n;
  }

 private:
  static CoefficientFrame with_time(CoefficientFrame f, double t) {
    f.t = t;
    return f;
  }

  static double pointwise_vector_max(const Field3D& b) {
    auto b1 = b.component(0), b2 = b.component(1);
    double m = 0.0;
    for (std::size_t q = 0; q < b1.size(); ++q) m = std::max(m, std::hypot(b1[q], b2[q]));
    return m;
  }

  void validate() const {
    const DomainSpec& d = domain();
    for (const auto& fr : frames_) {
      const bool shapes = fr.a.components() == 1 && fr.b.components() == 2 && fr.w.components() == 1 &&
                          fr.f.components() == 1;
      if (!shapes) throw SolverError(ErrorKind::ValidationError, "coefficients need a, w, f scalar and b 2-vector");
      for (const Field3D* x : {&fr.a, &fr.b, &fr.w, &fr.f}) {
        if (!(x->domain() == d)) throw SolverError(ErrorKind::ValidationError, "coefficient domain mismatch");
        if (!x->all_finite()) throw SolverError(ErrorKind::ValidationError, "non-finite coefficient");
      }
      double wb = 0.0;
      for (double v : fr.w.level(0, 0)) wb = std::max(wb, std::abs(v));
      for (double v : fr.w.level(0, d.nz - 1)) wb = std::max(wb, std::abs(v));
      if (wb > w_boundary_tolerance)
        throw SolverError(ErrorKind::ValidationError,
                          "w must vanish at z = +-h; found " + std::to_string(wb) + " at t = " + std::to_string(fr.t));
    }
  }

  std::vector<CoefficientFrame> frames_;
};

/// Basis element: horizontal cos or sin of (p pi x + q pi y) times
/// cos(m pi (z + h) / 2h), scaled to unit H norm.
struct GalerkinMode {
  int p = 0;
  int q = 0;
  bool sine = false;
  int m = 0;
  double scale = 1.0;
};

class GalerkinBasis {
 public:
  GalerkinBasis() = default;
  GalerkinBasis(DomainSpec d, std::vector<GalerkinMode> modes) : domain_(d), modes_(std::move(modes)) {}

  const DomainSpec& domain() const { return domain_; }
  const std::vector<GalerkinMode>& modes() const { return modes_; }
  std::size_t size() const { return modes_.size(); }

  /// Derivative d^ax_x d^ay_y d^az_z of basis function i on the grid.
  Field3D sample(std::size_t i, int ax = 0, int ay = 0, int az = 0) const {
    const GalerkinMode& md = modes_.at(i);
    const DomainSpec& d = domain_;
    const double kx = pi * md.p, ky = pi * md.q, kz = md.m * pi / (2.0 * d.half_height);
    // derivative of cos/sin: shift the phase by a quarter period per order
    const int hshift = ax + ay;
    const double hfac = std::pow(kx, ax) * std::pow(ky, ay);
    const double zfac = std::pow(kz, az);
    std::vector<double> hz(d.nz);
    for (int k = 0; k < d.nz; ++k) hz[k] = zfac * shifted_cos(kz * (d.z(k) + d.half_height), az);
    Field3D out(d, 1);
    for (int k = 0; k < d.nz; ++k) {
      auto lv = out.level(0, k);
      for (int j = 0; j < d.ny; ++j)
        for (int ii = 0; ii < d.nx; ++ii) {
          const double phase = kx * d.x(ii) + ky * d.y(j);
          const double hv = md.sine ? shifted_cos(phase - pi / 2.0, hshift) : shifted_cos(phase, hshift);
          lv[j * d.nx + ii] = md.scale * hfac * hv * hz[k];
        }
    }
    return out;
  }

 private:
  // n-th derivative of cos at theta, without the chain-rule factor.
  static double shifted_cos(double theta, int n) {
    switch (((n % 4) + 4) % 4) {
      case 0: return std::cos(theta);
      case 1: return -std::sin(theta);
      case 2: return -std::cos(theta);
      default: return std::sin(theta);
    }
  }

  DomainSpec domain_{};
  std::vector<GalerkinMode> modes_;
};

/// Horizontal functions ordered by |k|^2, then (p, q), cos before sin; the
/// constant comes first. (p, q) runs over the half plane p > 0 or p = 0, q > 0.
inline std::vector<std::tuple<int, int, bool>> horizontal_sequence(int count) {
  std::vector<std::pair<int, int>> ks;
  int radius = 0;
  while (true) {
    ks.clear();
    for (int p = 0; p <= radius; ++p)
      for (int q = -radius; q <= radius; ++q)
        if (p > 0 || q >= 0) ks.emplace_back(p, q);
    std::sort(ks.begin(), ks.end(), [](const auto& u, const auto& v) {
      const int a = u.first * u.first + u.second * u.second, b = v.first * v.first + v.second * v.second;
      return a != b ? a < b : u < v;
    });
    // everything with |k| <= radius is complete; count those functions
    std::vector<std::tuple<int, int, bool>> out;
    for (const auto& [p, q] : ks) {
      if (p * p + q * q > radius * radius) continue;
      out.emplace_back(p, q, false);
      if (p != 0 || q != 0) out.emplace_back(p, q, true);
    }
    if (static_cast<int>(out.size()) >= count) {
      out.resize(count);
      return out;
    }
    ++radius;
  }
}

/// Tensor basis of n_h horizontal times n_z vertical functions, orthonormal
/// in H on the grid (trapezoidal rule in z, periodic rule in x, y).
inline GalerkinBasis build_basis(int n_h, int n_z, const DomainSpec& d) {
  if (n_h < 1 || n_z < 1) throw std::invalid_argument("build_basis: counts must be at least 1");
  const auto hs = horizontal_sequence(n_h);
  for (const auto& [p, q, s] : hs)
    if (2 * std::abs(p) >= d.nx || 2 * std::abs(q) >= d.ny)
      throw std::invalid_argument("build_basis: horizontal mode not resolved by the grid");
  if (n_z > d.nz - 1) throw std::invalid_argument("build_basis: too many vertical modes for nz");
  std::vector<GalerkinMode> modes;
  for (int m = 0; m < n_z; ++m)
    for (const auto& [p, q, s] : hs) {
      const double eh = (p == 0 && q == 0) ? d.area() : 0.5 * d.area();
      const double kz = m * pi / (2.0 * d.half_height);
      const double ez = m == 0 ? 2.0 * d.half_height : d.half_height * (1.0 + kz * kz);
      modes.push_back({p, q, s, m, 1.0 / std::sqrt(eh * ez)});
    }
  return GalerkinBasis(d, std::move(modes));
}

/// (n_h, n_z) for a basis of n = m^3 functions: (m^2, m).
inline std::pair<int, int> basis_shape(int n) {
  const int m = static_cast<int>(std::lround(std::cbrt(static_cast<double>(n))));
  if (m * m * m != n) throw std::invalid_argument("basis size must be a cube");
  return {m * m, m};
}

/// L2(Omega) inner product with the trapezoidal rule in z.
inline double inner_trapezoid(const Field3D& u, const Field3D& v) {
  const DomainSpec& d = u.domain();
  double s = 0.0;
  for (int c = 0; c < u.components(); ++c)
    for (int k = 0; k < d.nz; ++k) {
      const double wk = (k == 0 || k == d.nz - 1) ? 0.5 : 1.0;
      auto a = u.level(c, k), b = v.level(c, k);
      double lv = 0.0;
      for (std::size_t q = 0; q < a.size(); ++q) lv += a[q] * b[q];
      s += wk * lv;
    }
  return s * d.dz() * d.cell_area();
}

/// <u, v>_H by grid quadrature; the z-derivatives are supplied.
inline double inner_H(const Field3D& u, const Field3D& uz, const Field3D& v, const Field3D& vz) {
  return inner_trapezoid(u, v) + inner_trapezoid(uz, vz);
}

inline Field3D pointwise(const Field3D& s, const Field3D& f) {
  Field3D out(f.domain(), f.components());
  auto sv = s.component(0);
  for (int c = 0; c < f.components(); ++c) {
    auto fv = f.component(c);
    auto o = out.component(c);
    for (std::size_t q = 0; q < o.size(); ++q) o[q] = sv[q] * fv[q];
  }
  return out;
}

/// b . (gx, gy) for scalar gx, gy.
inline Field3D dot_b(const Field3D& b, const Field3D& gx, const Field3D& gy) {
  Field3D out(gx.domain(), 1);
  auto b1 = b.component(0), b2 = b.component(1), x = gx.component(0), y = gy.component(0);
  auto o = out.component(0);
  for (std::size_t q = 0; q < o.size(); ++q) o[q] = b1[q] * x[q] + b2[q] * y[q];
  return out;
}

struct GalerkinFrame {
  double t = 0.0;
  Eigen::MatrixXd A, B, W;
  Eigen::VectorXd f;
};

/// Projected system g' + (A + B + W + D) g = f_n, per coefficient frame.
struct GalerkinSystem {
  Eigen::MatrixXd D;
  std::vector<GalerkinFrame> frames;
  Eigen::VectorXd g0;

  std::size_t size() const { return static_cast<std::size_t>(D.rows()); }

  std::pair<Eigen::MatrixXd, Eigen::VectorXd> at(double t) const {
    auto total = [&](const GalerkinFrame& fr) -> Eigen::MatrixXd { return fr.A + fr.B + fr.W + D; };
    if (frames.size() == 1 || t <= frames.front().t) return {total(frames.front()), frames.front().f};
    if (t >= frames.back().t) return {total(frames.back()), frames.back().f};
    std::size_t i = 1;
    while (frames[i].t < t) ++i;
    const double s = (t - frames[i - 1].t) / (frames[i].t - frames[i - 1].t);
    return {(1.0 - s) * total(frames[i - 1]) + s * total(frames[i]),
            (1.0 - s) * frames[i - 1].f + s * frames[i].f};
  }
};

/// Sampled basis functions with the derivatives assembly needs.
struct BasisSamples {
  std::vector<Field3D> phi, phi_z, phi_zz, phi_x, phi_y, phi_xz, phi_yz;

  explicit BasisSamples(const GalerkinBasis& basis) {
    for (std::size_t i = 0; i < basis.size(); ++i) {
      phi.push_back(basis.sample(i));
      phi_z.push_back(basis.sample(i, 0, 0, 1));
      phi_zz.push_back(basis.sample(i, 0, 0, 2));
      phi_x.push_back(basis.sample(i, 1, 0, 0));
      phi_y.push_back(basis.sample(i, 0, 1, 0));
      phi_xz.push_back(basis.sample(i, 1, 0, 1));
      phi_yz.push_back(basis.sample(i, 0, 1, 1));
    }
  }
};

/// <v, Phi_i>_H for every basis function; d_z v by finite differences.
inline Eigen::VectorXd project_H(const Field3D& v, const GalerkinBasis& basis, const BasisSamples& bs) {
  const Field3D vz = vertical_derivative(v, 1);
  Eigen::VectorXd g(basis.size());
  for (std::size_t i = 0; i < basis.size(); ++i) g[i] = inner_H(v, vz, bs.phi[i], bs.phi_z[i]);
  return g;
}

inline Eigen::VectorXd project_H(const Field3D& v, const GalerkinBasis& basis) {
  return project_H(v, basis, BasisSamples(basis));
}

/// Galerkin matrices by grid quadrature:
///   A_ij = <a Phi_j, Phi_i>_H, B_ij = <b.grad Phi_j, Phi_i>_H,
///   W_ij = <w d_z Phi_j, Phi_i>_H, D_ij = <grad_H Phi_j, grad_H Phi_i>_H, f_i = <f, Phi_i>_H.
/// Coefficient z-derivatives use finite differences, basis derivatives are exact.
inline GalerkinSystem assemble_system(const CoefficientData& coeff, const GalerkinBasis& basis,
                                      const Field3D* v0 = nullptr) {
  const std::size_t n = basis.size();
  const BasisSamples bs(basis);
  GalerkinSystem sys;
  sys.D.resize(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      const double v = inner_trapezoid(bs.phi_x[j], bs.phi_x[i]) + inner_trapezoid(bs.phi_y[j], bs.phi_y[i]) +
                       inner_trapezoid(bs.phi_xz[j], bs.phi_xz[i]) + inner_trapezoid(bs.phi_yz[j], bs.phi_yz[i]);
      sys.D(i, j) = sys.D(j, i) = v;
    }

  for (const auto& fr : coeff.all_frames()) {
    GalerkinFrame gf;
    gf.t = fr.t;
    gf.A.resize(n, n);
    gf.B.resize(n, n);
    gf.W.resize(n, n);
    gf.f.resize(n);
    const Field3D az = vertical_derivative(fr.a, 1);
    const Field3D bz = vertical_derivative(fr.b, 1);
    const Field3D wz = vertical_derivative(fr.w, 1);
    const Field3D fz = vertical_derivative(fr.f, 1);
    for (std::size_t j = 0; j < n; ++j) {
      // integrands applied to Phi_j and their z-derivatives
      const Field3D aphi = pointwise(fr.a, bs.phi[j]);
      const Field3D aphi_z = pointwise(az, bs.phi[j]) + pointwise(fr.a, bs.phi_z[j]);
      const Field3D bphi = dot_b(fr.b, bs.phi_x[j], bs.phi_y[j]);
      const Field3D bphi_z = dot_b(bz, bs.phi_x[j], bs.phi_y[j]) + dot_b(fr.b, bs.phi_xz[j], bs.phi_yz[j]);
      const Field3D wphi = pointwise(fr.w, bs.phi_z[j]);
      const Field3D wphi_z = pointwise(wz, bs.phi_z[j]) + pointwise(fr.w, bs.phi_zz[j]);
      for (std::size_t i = 0; i < n; ++i) {
        gf.A(i, j) = inner_H(aphi, aphi_z, bs.phi[i], bs.phi_z[i]);
        gf.B(i, j) = inner_H(bphi, bphi_z, bs.phi[i], bs.phi_z[i]);
        gf.W(i, j) = inner_H(wphi, wphi_z, bs.phi[i], bs.phi_z[i]);
      }
    }
    for (std::size_t i = 0; i < n; ++i) gf.f[i] = inner_H(fr.f, fz, bs.phi[i], bs.phi_z[i]);
    sys.frames.push_back(std::move(gf));
  }
  sys.g0 = v0 ? project_H(*v0, basis, bs) : Eigen::VectorXd::Zero(n);
  return sys;
}

/// Implicit midpoint: (I + dt/2 M) g' = (I - dt/2 M) g + dt f, with M and f
/// at the half step. Returns g at t = 0, dt, ..., T (last step shortened).
inline std::vector<Eigen::VectorXd> integrate_ode(const GalerkinSystem& sys, double T, double dt,
                                                  std::optional<Eigen::VectorXd> g_init = std::nullopt) {
  if (!(dt > 0.0) || !(T >= dt)) throw std::invalid_argument("integrate_ode: need dt > 0 and T >= dt");
  const std::size_t n = sys.size();
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
  std::vector<Eigen::VectorXd> out{g_init ? *g_init : sys.g0};
  const int steps = static_cast<int>(std::ceil(T / dt - 1e-9));
  const bool frozen = sys.frames.size() == 1;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu;
  double lu_dt = -1.0;
  Eigen::MatrixXd M;
  Eigen::VectorXd f;
  for (int s = 0; s < steps; ++s) {
    const double t0 = s * dt;
    const double h = std::min(dt, T - t0);
    if (!frozen || lu_dt != h) {
      std::tie(M, f) = sys.at(t0 + 0.5 * h);
      const Eigen::MatrixXd lhs = I + 0.5 * h * M;
      lu.compute(lhs);
      const double det = lu.determinant();
      if (!std::isfinite(det) || det == 0.0)
        throw SolverError(ErrorKind::SingularStep, "midpoint matrix is singular at t = " + std::to_string(t0));
      lu_dt = h;
    }
    const Eigen::VectorXd rhs = (I - 0.5 * h * M) * out.back() + h * f;
    Eigen::VectorXd g = lu.solve(rhs);
    if (!g.allFinite()) throw SolverError(ErrorKind::SingularStep, "midpoint solve produced non-finite values");
    out.push_back(std::move(g));
  }
  return out;
}

/// Grid field sum_i g_i Phi_i.
inline Field3D synthesize(const GalerkinBasis& basis, const Eigen::VectorXd& g) {
  Field3D out(basis.domain(), 1);
  for (std::size_t i = 0; i < basis.size(); ++i)
    if (g[i] != 0.0) out.axpy(g[i], basis.sample(i));
  return out;
}

struct BoundInputs {
  double v0_H = 0.0;          ///< ||v0||_H
  double f_L2Vprime_sq = 0.0;  ///< int_0^T ||f||_{V'}^2 dt
  double w_z = 0.0, a = 0.0, a_z = 0.0, b = 0.0, b_z = 0.0;
  double T = 0.0;
};

/// (||v0||_H^2 + 2 ||f||^2_{L2 V'}) exp((1/2 + ||w_z|| + 2 ||(a,a_z)|| + 2 ||(b,b_z)||^2) T)
/// where ||(a, a_z)|| = ||a|| + ||a_z|| and likewise for b.
inline double energy_bound(const BoundInputs& in) {
  const double ab = in.a + in.a_z, bb = in.b + in.b_z;
  const double rate = 0.5 + in.w_z + 2.0 * ab + 2.0 * bb * bb;
  return (in.v0_H * in.v0_H + 2.0 * in.f_L2Vprime_sq) * std::exp(rate * in.T);
}

/// ||f||_{V'}^2 = sum_k ||f_k||^2_{H^1_z} / (1 + |k|^2), the dual norm of V
/// with respect to the H pairing.
inline double dual_norm_Vprime_sq(const Field3D& f) {
  const DomainSpec& d = f.domain();
  const auto w = vertical_weights(d);
  const auto fs = forward_transform(f);
  const auto fzs = forward_transform(vertical_derivative(f, 1));
  double total = 0.0;
  for (int k = 0; k < d.nz; ++k)
    for (int n = 0; n < d.ny; ++n)
      for (int m = 0; m < d.nx_half(); ++m) {
        const double mult = (m == 0 || is_nyquist_x(d, m)) ? 1.0 : 2.0;
        const double kx = wavenumber_x(d, m), ky = wavenumber_y(d, n);
        const double e = std::norm(fs.at(0, k, m, n)) + std::norm(fzs.at(0, k, m, n));
        total += w[k] * mult * e / (1.0 + kx * kx + ky * ky);
      }
  return total * d.area();
}

/// ||v||_H^2 and ||grad_H v||_H^2 on the grid (Simpson in z).
inline double H_norm_sq(const Field3D& v) {
  const Field3D vz = vertical_derivative(v, 1);
  return inner(v, v) + inner(vz, vz);
}

inline double grad_H_norm_sq(const Field3D& v) {
  const auto s = forward_transform(v);
  const auto sz = forward_transform(vertical_derivative(v, 1));
  double total = 0.0;
  for (const auto* x : {&s, &sz}) {
    const Field3D gx = inverse_transform(horizontal_derivative(*x, 1, 0));
    const Field3D gy = inverse_transform(horizontal_derivative(*x, 0, 1));
    total += inner(gx, gx) + inner(gy, gy);
  }
  return total;
}

struct LinearizedTrajectory {
  std::vector<double> times;
  std::vector<Field3D> states;
};

/// -a v - b.grad_H v - w d_z v + f on the grid.
inline Field3D linearized_explicit(const CoefficientFrame& c, const Field3D& v) {
  const auto s = forward_transform(v);
  const Field3D vx = inverse_transform(horizontal_derivative(s, 1, 0));
  const Field3D vy = inverse_transform(horizontal_derivative(s, 0, 1));
  Field3D out = c.f;
  out -= pointwise(c.a, v);
  out -= dot_b(c.b, vx, vy);
  out -= pointwise(c.w, vertical_derivative(v, 1));
  return out;
}

/// Advective step limit 1 / (max|b1|/dx + max|b2|/dy + max|w|/dz) over the frames.
inline double linearized_cfl_limit(const CoefficientData& coeff) {
  const DomainSpec& d = coeff.domain();
  double rate = 0.0;
  for (const auto& fr : coeff.all_frames()) {
    double b1 = 0.0, b2 = 0.0;
    for (double x : fr.b.component(0)) b1 = std::max(b1, std::abs(x));
    for (double x : fr.b.component(1)) b2 = std::max(b2, std::abs(x));
    rate = std::max(rate, b1 / d.dx() + b2 / d.dy() + fr.w.max_abs() / d.dz());
  }
  return rate == 0.0 ? std::numeric_limits<double>::infinity() : 1.0 / rate;
}

/// Grid solve: Crank-Nicolson on Lap_H, second-order Adams-Bashforth on the
/// remaining terms (Euler on the first step). Stores every store_every-th
/// step and the last one.
inline LinearizedTrajectory solve_linearized_grid(const CoefficientData& coeff, const Field3D& v0, double T, double dt,
                                                  int store_every = 1) {
  if (!(dt > 0.0) || !(T > 0.0)) throw std::invalid_argument("solve_linearized_grid: need dt > 0 and T > 0");
  if (!v0.all_finite()) throw std::invalid_argument("solve_linearized_grid: non-finite initial data");
  const double limit = linearized_cfl_limit(coeff);
  if (dt > limit)
    throw SolverError(ErrorKind::CflViolation,
                      "dt " + std::to_string(dt) + " exceeds the advective limit " + std::to_string(limit));
  const ViscosityModel lap = ViscosityModel::horizontal();
  LinearizedTrajectory tr;
  tr.times.push_back(0.0);
  tr.states.push_back(v0);
  Field3D v = v0;
  std::optional<Field3D> prevN;
  const int steps = static_cast<int>(std::ceil(T / dt - 1e-9));
  for (int s = 0; s < steps; ++s) {
    const double t = s * dt;
    const double h = std::min(dt, T - t);
    Field3D N = linearized_explicit(coeff.at(t), v);
    Field3D E = N;
    if (prevN) {
      const double r = h / dt;
      E *= 1.0 + 0.5 * r;
      E.axpy(-0.5 * r, *prevN);
    }
    v = implicit_horizontal_update(v, E, lap, h);
    prevN = std::move(N);
    if ((s + 1) % store_every == 0 || s + 1 == steps) {
      tr.times.push_back(t + h);
      tr.states.push_back(v);
    }
  }
  return tr;
}

/// sup_t ||v||_H^2 + int ||grad_H v||_H^2 dt (trapezoid in time) of a
/// trajectory stored at every step.
inline double linearized_energy(const LinearizedTrajectory& tr) {
  double sup = 0.0, integral = 0.0, prev = 0.0;
  for (std::size_t i = 0; i < tr.states.size(); ++i) {
    sup = std::max(sup, H_norm_sq(tr.states[i]));
    const double g = grad_H_norm_sq(tr.states[i]);
    if (i > 0) integral += 0.5 * (tr.times[i] - tr.times[i - 1]) * (g + prev);
    prev = g;
  }
  return sup + integral;
}

/// Energy bound for a coefficient set and initial state over [0, T],
/// with the forcing norm integrated by the trapezoid rule on nt intervals.
inline double energy_bound_for(const CoefficientData& coeff, const Field3D& v0, double T, int nt = 64) {
  const auto sn = coeff.sup_norms();
  BoundInputs in;
  in.v0_H = std::sqrt(H_norm_sq(v0));
  in.w_z = sn.w_z;
  in.a = sn.a;
  in.a_z = sn.a_z;
  in.b = sn.b;
  in.b_z = sn.b_z;
  in.T = T;
  double acc = 0.0;
  for (int i = 0; i <= nt; ++i) {
    const double wgt = (i == 0 || i == nt) ? 0.5 : 1.0;
    acc += wgt * dual_norm_Vprime_sq(coeff.at(T * i / nt).f);
  }
  in.f_L2Vprime_sq = acc * T / nt;
  return energy_bound(in);
}

}  // namespace primeq

#endif  // PRIMEQ_GALERKIN_HPP
