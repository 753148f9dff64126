#ifndef PRIMEQ_CALCULUS_HPP
#define PRIMEQ_CALCULUS_HPP

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <tuple>
#include <vector>

#include "primeq/errors.hpp"
#include "primeq/grid.hpp"

namespace primeq {

enum class Axis { x, y, z };

namespace detail {

/// Finite-difference weights for derivatives 0..max_order at x0 on the
/// given nodes (Fornberg's recursion). Result is indexed [order][node].
inline std::vector<std::vector<double>> fornberg_weights(double x0, const std::vector<double>& nodes,
                                                         int max_order) {
  const int n = static_cast<int>(nodes.size());
  std::vector<std::vector<double>> c(max_order + 1, std::vector<double>(n, 0.0));
  c[0][0] = 1.0;
  double c1 = 1.0;
  double c4 = nodes[0] - x0;
  for (int i = 1; i < n; ++i) {
    const int mn = std::min(i, max_order);
    double c2 = 1.0;
    const double c5 = c4;
    c4 = nodes[i] - x0;
    for (int j = 0; j < i; ++j) {
      const double c3 = nodes[i] - nodes[j];
      c2 *= c3;
      if (j == i - 1) {
        for (int k = mn; k >= 1; --k) c[k][i] = c1 * (k * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
        c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
      }
      for (int k = mn; k >= 1; --k) c[k][j] = (c4 * c[k][j] - k * c[k - 1][j]) / c3;
      c[0][j] = c4 * c[0][j] / c3;
    }
    c1 = c2;
  }
  return c;
}

}  // namespace detail

/// Fourth-order vertical finite differences on the uniform collocated grid.
/// Interior levels use centered stencils; levels too close to z = +-h use
/// one-sided stencils of width order + 4.
class VerticalStencil {
 public:
  VerticalStencil(int nz, double dz, int order) : order_(order) {
    if (order < 1 || order > 4) throw std::invalid_argument("vertical derivative order must be 1..4");
    const int centered = (order % 2 == 0) ? order + 3 : order + 4;
    const int one_sided = order + 4;
    if (nz < one_sided)
      throw std::invalid_argument("nz=" + std::to_string(nz) + " too small for vertical derivative of order " +
                                  std::to_string(order));
    const int r = (centered - 1) / 2;
    rows_.resize(nz);
    for (int k = 0; k < nz; ++k) {
      int start, width;
      if (k - r >= 0 && k + r < nz) {
        start = k - r;
        width = centered;
      } else {
        width = one_sided;
        start = (k - r < 0) ? 0 : nz - one_sided;
      }
      std::vector<double> nodes(width);
      for (int m = 0; m < width; ++m) nodes[m] = (start + m - k) * dz;
      auto w = detail::fornberg_weights(0.0, nodes, order);
      rows_[k] = Row{start, std::move(w[order])};
    }
  }

  int order() const { return order_; }

  /// out[k] = sum_m w_km in[start_k + m], walking a column with the given stride.
  void apply(const double* in, double* out, std::size_t stride) const {
    for (std::size_t k = 0; k < rows_.size(); ++k) {
      const Row& row = rows_[k];
      double acc = 0.0;
      for (std::size_t m = 0; m < row.weights.size(); ++m) acc += row.weights[m] * in[(row.start + m) * stride];
      out[k * stride] = acc;
    }
  }

  static const VerticalStencil& get(int nz, double dz, int order) {
    static std::mutex mutex;
    static std::map<std::tuple<int, double, int>, std::unique_ptr<VerticalStencil>> cache;
    std::lock_guard<std::mutex> lock(mutex);
    auto& slot = cache[{nz, dz, order}];
    if (!slot) slot = std::make_unique<VerticalStencil>(nz, dz, order);
    return *slot;
  }

 private:
  struct Row {
    int start;
    std::vector<double> weights;
  };
  int order_;
  std::vector<Row> rows_;
};

/// Mixed horizontal derivative d^ax/dx^ax d^ay/dy^ay by spectral
/// multiplication with (i kx)^ax (i ky)^ay. Odd powers annihilate the
/// corresponding Nyquist mode so the result stays real.
template <int Dim>
SpectralField<Dim> horizontal_derivative(SpectralField<Dim> s, int ax, int ay) {
  const DomainSpec& d = s.domain();
  const Complex I(0.0, 1.0);
  std::vector<Complex> factor(d.spectral_plane_size());
  for (int n = 0; n < d.ny; ++n)
    for (int m = 0; m < d.nx_half(); ++m) {
      Complex f = 1.0;
      if ((ax % 2 == 1 && is_nyquist_x(d, m)) || (ay % 2 == 1 && is_nyquist_y(d, n))) {
        f = 0.0;
      } else {
        for (int r = 0; r < ax; ++r) f *= I * wavenumber_x(d, m);
        for (int r = 0; r < ay; ++r) f *= I * wavenumber_y(d, n);
      }
      factor[n * d.nx_half() + m] = f;
    }
  for (int c = 0; c < s.components(); ++c)
    for (int k = 0; k < s.levels(); ++k) {
      auto lv = s.level(c, k);
      for (std::size_t q = 0; q < lv.size(); ++q) lv[q] *= factor[q];
    }
  return s;
}

template <int Dim>
BasicField<Dim> horizontal_derivative(const BasicField<Dim>& f, int ax, int ay) {
  if (ax == 0 && ay == 0) return f;
  return inverse_transform(horizontal_derivative(forward_transform(f), ax, ay));
}

/// d^order/dz^order with the fourth-order stencils.
inline Field3D vertical_derivative(const Field3D& f, int order) {
  const DomainSpec& d = f.domain();
  const auto& st = VerticalStencil::get(d.nz, d.dz(), order);
  Field3D out(d, f.components());
  const std::size_t stride = d.plane_size();
  for (int c = 0; c < f.components(); ++c) {
    const double* in = f.component(c).data();
    double* o = out.component(c).data();
    for (std::size_t col = 0; col < stride; ++col) st.apply(in + col, o + col, stride);
  }
  return out;
}

/// Derivative along one axis: spectral in x and y, finite differences in z.
inline Field3D apply_derivative(const Field3D& f, Axis axis, int order) {
  switch (axis) {
    case Axis::x: return horizontal_derivative(f, order, 0);
    case Axis::y: return horizontal_derivative(f, 0, order);
    case Axis::z: return vertical_derivative(f, order);
  }
  return f;
}

inline Field2D apply_derivative(const Field2D& f, Axis axis, int order) {
  switch (axis) {
    case Axis::x: return horizontal_derivative(f, order, 0);
    case Axis::y: return horizontal_derivative(f, 0, order);
    case Axis::z: return Field2D(f.domain(), f.components());
  }
  return f;
}

/// d/dx v1 + d/dy v2 of a two-component field.
template <int Dim>
BasicField<Dim> divergence_h(const BasicField<Dim>& v) {
  const DomainSpec& d = v.domain();
  auto s = forward_transform(v);
  SpectralField<Dim> out(d, 1);
  const Complex I(0.0, 1.0);
  for (int k = 0; k < s.levels(); ++k)
    for (int n = 0; n < d.ny; ++n)
      for (int m = 0; m < d.nx_half(); ++m) {
        const double kx = is_nyquist_x(d, m) ? 0.0 : wavenumber_x(d, m);
        const double ky = is_nyquist_y(d, n) ? 0.0 : wavenumber_y(d, n);
        out.at(0, k, m, n) = I * kx * s.at(0, k, m, n) + I * ky * s.at(1, k, m, n);
      }
  return inverse_transform(out);
}

/// (d/dx f, d/dy f) of a scalar field.
template <int Dim>
BasicField<Dim> gradient_h(const BasicField<Dim>& f) {
  const DomainSpec& d = f.domain();
  auto s = forward_transform(f);
  BasicField<Dim> out(d, 2);
  auto gx = inverse_transform(horizontal_derivative(s, 1, 0));
  auto gy = inverse_transform(horizontal_derivative(s, 0, 1));
  std::copy(gx.values().begin(), gx.values().end(), out.component(0).begin());
  std::copy(gy.values().begin(), gy.values().end(), out.component(1).begin());
  return out;
}

/// Vertical quadrature weights summing to 2h: composite Simpson for odd nz;
/// for even nz, Simpson panels closed by one Simpson 3/8 panel. Exact for
/// cubics in z.
inline std::vector<double> vertical_weights(const DomainSpec& d) {
  const int nz = d.nz;
  const double dz = d.dz();
  std::vector<double> w(nz, 0.0);
  const int simpson_end = (nz % 2 == 1) ? nz - 1 : nz - 4;  // last node of the Simpson part
  for (int a = 0; a + 2 <= simpson_end; a += 2) {
    w[a] += dz / 3.0;
    w[a + 1] += 4.0 * dz / 3.0;
    w[a + 2] += dz / 3.0;
  }
  if (nz % 2 == 0) {
    const int a = nz - 4;
    w[a] += 3.0 * dz / 8.0;
    w[a + 1] += 9.0 * dz / 8.0;
    w[a + 2] += 9.0 * dz / 8.0;
    w[a + 3] += 3.0 * dz / 8.0;
  }
  return w;
}

inline Field2D vertical_average(const Field3D& f) {
  const DomainSpec& d = f.domain();
  const auto w = vertical_weights(d);
  const double inv = 1.0 / (2.0 * d.half_height);
  Field2D out(d, f.components());
  for (int c = 0; c < f.components(); ++c) {
    auto o = out.component(c);
    for (int k = 0; k < d.nz; ++k) {
      auto lv = f.level(c, k);
      const double wk = w[k] * inv;
      for (std::size_t q = 0; q < lv.size(); ++q) o[q] += wk * lv[q];
    }
  }
  return out;
}

/// Copy a 2D field onto every level.
inline Field3D broadcast(const Field2D& f) {
  const DomainSpec& d = f.domain();
  Field3D out(d, f.components());
  for (int c = 0; c < f.components(); ++c)
    for (int k = 0; k < d.nz; ++k) std::copy(f.component(c).begin(), f.component(c).end(), out.level(c, k).begin());
  return out;
}

/// Barotropic mean and baroclinic remainder.
struct SplitState {
  Field2D mean;
  Field3D fluct;

  Field3D reassemble() const { return broadcast(mean) + fluct; }
};

inline SplitState split_modes(const Field3D& v) {
  SplitState s{vertical_average(v), v};
  s.fluct -= broadcast(s.mean);
  return s;
}

/// Cumulative integral from z = -h. Per-interval formulas come from the
/// interpolant of the surrounding quadrature panel, so the value at z = +h
/// equals the vertical_weights quadrature to rounding.
inline Field3D vertical_integral(const Field3D& f) {
  const DomainSpec& d = f.domain();
  const int nz = d.nz;
  const double dz = d.dz();
  const std::size_t np = d.plane_size();
  Field3D out(d, f.components());
  const int simpson_end = (nz % 2 == 1) ? nz - 1 : nz - 4;
  for (int c = 0; c < f.components(); ++c) {
    auto lv = [&](int k) { return f.level(c, k).data(); };
    auto ov = [&](int k) { return out.level(c, k).data(); };
    for (int a = 0; a + 2 <= simpson_end; a += 2) {
      const double *f0 = lv(a), *f1 = lv(a + 1), *f2 = lv(a + 2);
      double *i0 = ov(a), *i1 = ov(a + 1), *i2 = ov(a + 2);
      for (std::size_t q = 0; q < np; ++q) {
        i1[q] = i0[q] + dz / 12.0 * (5.0 * f0[q] + 8.0 * f1[q] - f2[q]);
        i2[q] = i0[q] + dz / 3.0 * (f0[q] + 4.0 * f1[q] + f2[q]);
      }
    }
    if (nz % 2 == 0) {
      const int a = nz - 4;
      const double *f0 = lv(a), *f1 = lv(a + 1), *f2 = lv(a + 2), *f3 = lv(a + 3);
      double *i0 = ov(a), *i1 = ov(a + 1), *i2 = ov(a + 2), *i3 = ov(a + 3);
      for (std::size_t q = 0; q < np; ++q) {
        i1[q] = i0[q] + dz / 24.0 * (9.0 * f0[q] + 19.0 * f1[q] - 5.0 * f2[q] + f3[q]);
        i2[q] = i0[q] + dz / 3.0 * (f0[q] + 4.0 * f1[q] + f2[q]);
        i3[q] = i0[q] + 3.0 * dz / 8.0 * (f0[q] + 3.0 * f1[q] + 3.0 * f2[q] + f3[q]);
      }
    }
  }
  return out;
}

// Quadrature-based L2 inner products and norms on G and on Omega.

inline double inner(const Field2D& a, const Field2D& b) {
  double s = 0.0;
  auto av = a.values(), bv = b.values();
  for (std::size_t n = 0; n < av.size(); ++n) s += av[n] * bv[n];
  return s * a.domain().cell_area();
}

inline double inner(const Field3D& a, const Field3D& b) {
  const DomainSpec& d = a.domain();
  const auto w = vertical_weights(d);
  double s = 0.0;
  for (int c = 0; c < a.components(); ++c)
    for (int k = 0; k < d.nz; ++k) {
      auto al = a.level(c, k), bl = b.level(c, k);
      double lv = 0.0;
      for (std::size_t q = 0; q < al.size(); ++q) lv += al[q] * bl[q];
      s += w[k] * lv;
    }
  return s * d.cell_area();
}

template <int Dim>
double l2_norm(const BasicField<Dim>& f) {
  return std::sqrt(std::max(0.0, inner(f, f)));
}

inline constexpr double mean_free_tolerance = 1e-8;
/// Absolute allowance for rounding residue, e.g. the fluctuation of a z-independent field.
inline constexpr double mean_free_floor = 1e-13;

/// Throws MeanNotFree when the vertical mean of f exceeds tol * ||f|| + mean_free_floor.
inline void require_mean_free(const Field3D& f, double tol, const char* who) {
  const double mean_norm = l2_norm(vertical_average(f)) * std::sqrt(2.0 * f.domain().half_height);
  const double norm = l2_norm(f);
  if (mean_norm > tol * norm + mean_free_floor)
    throw SolverError(ErrorKind::MeanNotFree, std::string(who) + ": vertical mean " + std::to_string(mean_norm) +
                                                  " exceeds tolerance relative to field norm " +
                                                  std::to_string(norm));
}

/// w = -div_H int_{-h}^z vt, for a vertically mean-free vt.
inline Field3D reconstruct_w(const Field3D& vt) {
  require_mean_free(vt, mean_free_tolerance, "reconstruct_w");
  Field3D w = vertical_integral(divergence_h(vt));
  w *= -1.0;
  return w;
}

/// w = -int_{-h}^z div_H v + (z+h)/(2h) int_{-h}^h div_H v, which vanishes at
/// both z = +-h whatever the vertical mean of v.
inline Field3D reconstruct_w_corrected(const Field3D& v) {
  const DomainSpec& d = v.domain();
  Field3D w = vertical_integral(divergence_h(v));
  const auto top = w.level(0, d.nz - 1);
  std::vector<double> total(top.begin(), top.end());
  for (int k = 0; k < d.nz; ++k) {
    const double frac = static_cast<double>(k) / (d.nz - 1);
    auto lv = w.level(0, k);
    for (std::size_t q = 0; q < lv.size(); ++q) lv[q] = -lv[q] + frac * total[q];
  }
  return w;
}

}  // namespace primeq

#endif  // PRIMEQ_CALCULUS_HPP
