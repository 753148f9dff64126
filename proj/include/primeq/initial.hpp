#ifndef PRIMEQ_INITIAL_HPP
#define PRIMEQ_INITIAL_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "primeq/grid.hpp"
#include "primeq/nonlinear.hpp"
#include "primeq/timestepper.hpp"

namespace primeq {

/// Uniform draws in [-1, 1) from a fixed engine, independent of the
/// standard library's distribution implementations.
class UniformSource {
 public:
  explicit UniformSource(std::uint64_t seed) : engine_(seed) {}
  double operator()() { return static_cast<double>(engine_() >> 11) * 0x1.0p-52 - 1.0; }

 private:
  std::mt19937_64 engine_;
};

/// Band-limited random function: sum of cos/sin(p pi x + q pi y) cos(m pi (z+h)/2h)
/// for |p|, |q| <= kmax, m <= mmax, amplitudes decaying like 1/(1 + |k|^2 + m^2).
struct SmoothRandom {
  struct Term {
    int p, q, m;
    double c, s;
  };
  std::vector<Term> terms;
  double half_height = 1.0;

  SmoothRandom(UniformSource& u, double h, int kmax = 3, int mmax = 3) : half_height(h) {
    for (int p = 0; p <= kmax; ++p)
      for (int q = -kmax; q <= kmax; ++q) {
        if (p == 0 && q < 0) continue;
        for (int m = 0; m <= mmax; ++m) {
          const double decay = 1.0 / (1.0 + p * p + q * q + m * m);
          terms.push_back({p, q, m, decay * u(), decay * u()});
        }
      }
  }

  double operator()(double x, double y, double z) const {
    double v = 0.0;
    for (const auto& t : terms) {
      const double ph = pi * (t.p * x + t.q * y);
      v += (t.c * std::cos(ph) + t.s * std::sin(ph)) * std::cos(t.m * pi * (z + half_height) / (2.0 * half_height));
    }
    return v;
  }

  /// Grid values via separable cos/sin tables; agrees with operator() to rounding.
  Field3D sample(const DomainSpec& d) const {
    int kmax = 0, mmax = 0;
    for (const auto& t : terms) kmax = std::max({kmax, t.p, std::abs(t.q)}), mmax = std::max(mmax, t.m);
    const int K = kmax + 1;
    std::vector<double> cx(d.nx * K), sx(d.nx * K), cy(d.ny * K), sy(d.ny * K), cz(d.nz * (mmax + 1));
    for (int i = 0; i < d.nx; ++i)
      for (int p = 0; p < K; ++p) cx[i * K + p] = std::cos(p * pi * d.x(i)), sx[i * K + p] = std::sin(p * pi * d.x(i));
    for (int j = 0; j < d.ny; ++j)
      for (int q = 0; q < K; ++q) cy[j * K + q] = std::cos(q * pi * d.y(j)), sy[j * K + q] = std::sin(q * pi * d.y(j));
    for (int k = 0; k < d.nz; ++k)
      for (int m = 0; m <= mmax; ++m) cz[k * (mmax + 1) + m] = std::cos(m * pi * (d.z(k) + half_height) / (2.0 * half_height));
    std::vector<double> plane(static_cast<std::size_t>(d.nx) * d.ny);
    Field3D f(d, 1);
    for (const auto& t : terms) {
      const int aq = std::abs(t.q);
      const double sgn = t.q < 0 ? -1.0 : 1.0;
      for (int i = 0; i < d.nx; ++i)
        for (int j = 0; j < d.ny; ++j) {
          const double ca = cx[i * K + t.p], sa = sx[i * K + t.p], cb = cy[j * K + aq], sb = sgn * sy[j * K + aq];
          plane[static_cast<std::size_t>(i) * d.ny + j] = t.c * (ca * cb - sa * sb) + t.s * (sa * cb + ca * sb);
        }
      for (int k = 0; k < d.nz; ++k) {
        const double w = cz[k * (mmax + 1) + t.m];
        for (int i = 0; i < d.nx; ++i)
          for (int j = 0; j < d.ny; ++j) f(0, i, j, k) += w * plane[static_cast<std::size_t>(i) * d.ny + j];
      }
    }
    return f;
  }
};

/// Scale so the largest absolute grid value is amplitude (no-op for zero).
inline Field3D normalize_max(Field3D f, double amplitude) {
  const double m = f.max_abs();
  if (m > 0.0) f *= amplitude / m;
  return f;
}

/// Baroclinic profile of the manufactured solution: cos(pi (z + h) / h), mean-free
/// with zero slope at z = +-h.
inline double manufactured_profile(double z, double h) { return std::cos(pi * (z + h) / h); }

/// v*(t) = amplitude e^{-t} (sin(pi x) cos(pi (z+h)/h), 0).
inline Field3D manufactured_solution(const DomainSpec& d, double amplitude, double t) {
  const double h = d.half_height;
  return Field3D::sample(d, 2, [&](int c, double x, double, double z) {
    return c == 0 ? amplitude * std::exp(-t) * std::sin(pi * x) * manufactured_profile(z, h) : 0.0;
  });
}

/// Forcing that makes manufactured_solution an exact solution of the
/// semi-discrete split system: F = d_t v* - (discrete right-hand side at v*).
inline Forcing manufactured_forcing(const DomainSpec& d, double amplitude, const ViscosityModel& model,
                                    NonlinearOptions opt = {}) {
  return [d, amplitude, model, opt](double t) {
    const Field3D v = manufactured_solution(d, amplitude, t);
    SolverState s;
    s.t = t;
    s.split = split_modes(v);
    s.split.fluct -= broadcast(vertical_average(s.split.fluct));
    const Tendency rhs = assemble_rhs(s, model, opt);
    Field3D F = v;
    F *= -1.0;  // d_t v* = -v*
    F -= broadcast(rhs.mean_rhs);
    F -= rhs.fluct_rhs;
    return F;
  };
}

/// Named initial velocity fields (two components):
///   zero, shear (A sin(pi y), 0), random (smooth, max |v| = A),
///   neumann (zero d_z v at z = +-h), rayleigh (curvature bounded away from 0),
///   manufactured (manufactured_solution at t = 0).
inline Field3D initial_velocity(const std::string& name, const DomainSpec& d, double amplitude,
                                std::uint64_t seed = 1) {
  const double h = d.half_height;
  if (name == "zero") return Field3D(d, 2);
  if (name == "shear")
    return Field3D::sample(d, 2, [&](int c, double, double y, double) { return c == 0 ? amplitude * std::sin(pi * y) : 0.0; });
  if (name == "random") {
    UniformSource u(seed);
    const SmoothRandom r1(u, h), r2(u, h);
    Field3D v(d, 2);
    const Field3D a = r1.sample(d), b = r2.sample(d);
    std::copy(a.values().begin(), a.values().end(), v.component(0).begin());
    std::copy(b.values().begin(), b.values().end(), v.component(1).begin());
    return normalize_max(std::move(v), amplitude);
  }
  if (name == "neumann")
    return Field3D::sample(d, 2, [&](int c, double x, double y, double z) {
      const double prof = std::cos(pi * (z + h) / h);
      return c == 0 ? amplitude * (std::sin(pi * x) * prof + 0.5 * std::sin(pi * y))
                    : amplitude * std::cos(pi * y) * prof;
    });
  if (name == "rayleigh")
    return Field3D::sample(d, 2, [&](int c, double x, double y, double z) {
      return c == 0 ? amplitude * z * z * (1.0 + 0.1 * std::cos(pi * x + pi * y))
                    : amplitude * z * z * (1.0 - 0.1 * std::sin(pi * x));
    });
  if (name == "manufactured") return manufactured_solution(d, amplitude, 0.0);
  throw std::invalid_argument("unknown initial preset '" + name + "'");
}

}  // namespace primeq

#endif  // PRIMEQ_INITIAL_HPP
