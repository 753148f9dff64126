#ifndef PRIMEQ_IMPLICIT_HPP
#define PRIMEQ_IMPLICIT_HPP

#include <Eigen/Dense>

#include <map>
#include <memory>

#include "primeq/calculus.hpp"
#include "primeq/errors.hpp"
#include "primeq/viscosity.hpp"

namespace primeq {

/// Discrete divergence wavevector of a stored mode: the Nyquist components
/// are invisible to divergence_h and enter as zero.
inline std::pair<double, double> divergence_wavevector(const DomainSpec& d, int m, int n) {
  return {is_nyquist_x(d, m) ? 0.0 : wavenumber_x(d, m), is_nyquist_y(d, n) ? 0.0 : wavenumber_y(d, n)};
}

/// Crank-Nicolson step of the barotropic mode with the divergence constraint
/// imposed per Fourier mode:
///   (I - dt/2 S) u + dt grad p = (I + dt/2 S) vbar + dt E,  div u = 0,
/// S the diagonal viscosity symbol of the two components. Exact for
/// anisotropic symbols, where the Leray projector and S do not commute.
inline Field2D implicit_mean_update(const Field2D& mean, const Field2D& E, const ViscosityModel& model, double dt) {
  const DomainSpec& d = mean.domain();
  auto s = forward_transform(mean);
  const auto e = forward_transform(E);
  for (int n = 0; n < d.ny; ++n)
    for (int m = 0; m < d.nx_half(); ++m) {
      const double kx = wavenumber_x(d, m), ky = wavenumber_y(d, n);
      const double s0 = implicit_symbol(model, kx, ky, 0), s1 = implicit_symbol(model, kx, ky, 1);
      const double l0 = 1.0 - 0.5 * dt * s0, l1 = 1.0 - 0.5 * dt * s1;
      const Complex r0 = (1.0 + 0.5 * dt * s0) * s.at(0, 0, m, n) + dt * e.at(0, 0, m, n);
      const Complex r1 = (1.0 + 0.5 * dt * s1) * s.at(1, 0, m, n) + dt * e.at(1, 0, m, n);
      Complex u0 = r0 / l0, u1 = r1 / l1;
      const auto [gx, gy] = divergence_wavevector(d, m, n);
      const double kk = gx * gx / l0 + gy * gy / l1;
      if (kk > 0.0) {
        const Complex lambda = (gx * u0 + gy * u1) / kk;
        u0 -= gx * lambda / l0;
        u1 -= gy * lambda / l1;
      }
      s.at(0, 0, m, n) = u0;
      s.at(1, 0, m, n) = u1;
    }
  return inverse_transform(s);
}

/// Crank-Nicolson step of a 3D field under the horizontal symbol of model,
/// c' = ((1 + dt/2 s) c + dt E) / (1 - dt/2 s), mode by mode.
inline Field3D implicit_horizontal_update(const Field3D& f, const Field3D& E, const ViscosityModel& model,
                                          double dt) {
  const DomainSpec& d = f.domain();
  auto s = forward_transform(f);
  const auto e = forward_transform(E);
  for (int c = 0; c < s.components(); ++c) {
    const int sc = s.components() == 2 ? c : 0;
    for (int k = 0; k < d.nz; ++k)
      for (int n = 0; n < d.ny; ++n)
        for (int m = 0; m < d.nx_half(); ++m) {
          const double sigma = implicit_symbol(model, wavenumber_x(d, m), wavenumber_y(d, n), sc);
          s.at(c, k, m, n) =
              ((1.0 + 0.5 * dt * sigma) * s.at(c, k, m, n) + dt * e.at(c, k, m, n)) / (1.0 - 0.5 * dt * sigma);
        }
  }
  return inverse_transform(s);
}

/// Mean-free vertical Laplacian L' = (I - 1 q^T / 2h) L, q the quadrature
/// weights. Its range has zero vertical mean.
inline Eigen::MatrixXd mean_free_vertical_laplacian(const DomainSpec& d, VerticalClosure closure) {
  const Eigen::MatrixXd L = vertical_laplacian_matrix(d, closure);
  const auto w = vertical_weights(d);
  Eigen::RowVectorXd q(d.nz);
  for (int k = 0; k < d.nz; ++k) q[k] = w[k] / (2.0 * d.half_height);
  return L - Eigen::VectorXd::Ones(d.nz) * (q * L);
}

/// Crank-Nicolson step of the baroclinic mode under Full with nu2 != 0:
/// per horizontal mode a column solve of (I - dt/2 (nu1 s + nu2 L')).
/// LU factors are cached per symbol value.
class ColumnImplicitSolver {
 public:
  ColumnImplicitSolver(const DomainSpec& d, const ViscosityModel& model, double dt, VerticalClosure closure)
      : d_(d), model_(model), dt_(dt), Lp_(mean_free_vertical_laplacian(d, closure)) {}

  Field3D update(const Field3D& f, const Field3D& E) {
    auto s = forward_transform(f);
    const auto e = forward_transform(E);
    const int nz = d_.nz;
    Eigen::VectorXd re(nz), im(nz);
    for (int n = 0; n < d_.ny; ++n)
      for (int m = 0; m < d_.nx_half(); ++m) {
        const double sigma = implicit_symbol(model_, wavenumber_x(d_, m), wavenumber_y(d_, n), 0);
        const Entry& ent = entry(sigma);
        for (int c = 0; c < s.components(); ++c) {
          for (int k = 0; k < nz; ++k) {
            re[k] = s.at(c, k, m, n).real();
            im[k] = s.at(c, k, m, n).imag();
          }
          Eigen::VectorXd rr = ent.explicit_part * re, ri = ent.explicit_part * im;
          for (int k = 0; k < nz; ++k) {
            rr[k] += dt_ * e.at(c, k, m, n).real();
            ri[k] += dt_ * e.at(c, k, m, n).imag();
          }
          const Eigen::VectorXd xr = ent.lu.solve(rr), xi = ent.lu.solve(ri);
          for (int k = 0; k < nz; ++k) s.at(c, k, m, n) = Complex(xr[k], xi[k]);
        }
      }
    return inverse_transform(s);
  }

 private:
  struct Entry {
    Eigen::PartialPivLU<Eigen::MatrixXd> lu;
    Eigen::MatrixXd explicit_part;
  };

  const Entry& entry(double sigma) {
    auto it = cache_.find(sigma);
    if (it != cache_.end()) return *it->second;
    const int nz = d_.nz;
    const Eigen::MatrixXd M =
        sigma * Eigen::MatrixXd::Identity(nz, nz) + model_.nu2 * Lp_;
    auto ent = std::make_unique<Entry>();
    const Eigen::MatrixXd lhs = Eigen::MatrixXd::Identity(nz, nz) - 0.5 * dt_ * M;
    ent->lu.compute(lhs);
    if (!(std::abs(ent->lu.determinant()) > 0.0))
      throw SolverError(ErrorKind::SingularStep, "vertical Crank-Nicolson matrix is singular");
    ent->explicit_part = Eigen::MatrixXd::Identity(nz, nz) + 0.5 * dt_ * M;
    return *cache_.emplace(sigma, std::move(ent)).first->second;
  }

  DomainSpec d_;
  ViscosityModel model_;
  double dt_;
  Eigen::MatrixXd Lp_;
  std::map<double, std::unique_ptr<Entry>> cache_;
};

/// Baroclinic Crank-Nicolson step that picks the column solver when the
/// model has a vertical part and the diagonal update otherwise.
class FluctImplicitStepper {
 public:
  FluctImplicitStepper(const ViscosityModel& model, VerticalClosure closure) : model_(model), closure_(closure) {}

  Field3D update(const Field3D& f, const Field3D& E, double dt) {
    if (!model_.has_vertical_part()) return implicit_horizontal_update(f, E, model_, dt);
    if (!column_ || column_dt_ != dt || !(column_domain_ == f.domain())) {
      column_ = std::make_unique<ColumnImplicitSolver>(f.domain(), model_, dt, closure_);
      column_dt_ = dt;
      column_domain_ = f.domain();
    }
    return column_->update(f, E);
  }

 private:
  ViscosityModel model_;
  VerticalClosure closure_;
  std::unique_ptr<ColumnImplicitSolver> column_;
  double column_dt_ = 0.0;
  DomainSpec column_domain_{};
};

}  // namespace primeq

#endif  // PRIMEQ_IMPLICIT_HPP
