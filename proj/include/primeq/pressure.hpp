#ifndef PRIMEQ_PRESSURE_HPP
#define PRIMEQ_PRESSURE_HPP

#include <cmath>
#include <string>

#include "primeq/errors.hpp"
#include "primeq/transport.hpp"

namespace primeq {

/// Barotropic pressure with zero horizontal mean.
struct PressureField {
  Field2D p;
};

inline constexpr double poisson_compatibility_tolerance = 1e-8;

/// div_H(K(vt) + vbar . grad_H vbar), the source of -Lap_H p.
inline Field2D pressure_rhs(const Field2D& mean, const Field3D& fluct) {
  Field2D flux = coupling_K(fluct);
  flux += advect_horizontal(mean, mean);
  return divergence_h(flux);
}

inline double horizontal_mean(const Field2D& f, int c = 0) {
  double s = 0.0;
  for (double v : f.component(c)) s += v;
  return s / static_cast<double>(f.domain().plane_size());
}

/// Solve -Lap_H p = rhs spectrally; the zero mode of p is set to 0.
inline PressureField solve_poisson2d(const Field2D& rhs) {
  const DomainSpec& d = rhs.domain();
  const double mean = horizontal_mean(rhs);
  const double norm = l2_norm(rhs);
  if (std::abs(mean) * std::sqrt(d.area()) > poisson_compatibility_tolerance * norm && mean != 0.0)
    throw SolverError(ErrorKind::IncompatibleRhs,
                      "right-hand side has horizontal mean " + std::to_string(mean) + " (norm " +
                          std::to_string(norm) + ")");
  auto s = forward_transform(rhs);
  for (int n = 0; n < d.ny; ++n)
    for (int m = 0; m < d.nx_half(); ++m) {
      const double kx = wavenumber_x(d, m), ky = wavenumber_y(d, n);
      const double k2 = kx * kx + ky * ky;
      s.at(0, 0, m, n) = (m == 0 && n == 0) ? Complex(0.0) : s.at(0, 0, m, n) / k2;
    }
  return {inverse_transform(s)};
}

/// Leray projection of a two-component 2D field onto its discretely
/// divergence-free part. Modes whose divergence the discrete operator cannot
/// see (Nyquist) are left alone in the annihilated direction.
inline SpectralField2D leray_project(SpectralField2D s) {
  const DomainSpec& d = s.domain();
  for (int n = 0; n < d.ny; ++n)
    for (int m = 0; m < d.nx_half(); ++m) {
      const double kx = is_nyquist_x(d, m) ? 0.0 : wavenumber_x(d, m);
      const double ky = is_nyquist_y(d, n) ? 0.0 : wavenumber_y(d, n);
      const double k2 = kx * kx + ky * ky;
      if (k2 == 0.0) continue;
      Complex& a = s.at(0, 0, m, n);
      Complex& b = s.at(1, 0, m, n);
      const Complex dot = (kx * a + ky * b) / k2;
      a -= kx * dot;
      b -= ky * dot;
    }
  return s;
}

inline Field2D leray_project(const Field2D& v) { return inverse_transform(leray_project(forward_transform(v))); }

}  // namespace primeq

#endif  // PRIMEQ_PRESSURE_HPP
