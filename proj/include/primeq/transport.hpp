#ifndef PRIMEQ_TRANSPORT_HPP
#define PRIMEQ_TRANSPORT_HPP

#include <algorithm>

#include "primeq/calculus.hpp"
#include "primeq/grid.hpp"

namespace primeq {

/// u1 d_x v + u2 d_y v, pseudo-spectral with 2/3-rule dealiasing of the
/// product. A 2D operand is broadcast over the levels of a 3D one.
template <int Du, int Dv>
BasicField<std::max(Du, Dv)> advect_horizontal(const BasicField<Du>& u, const BasicField<Dv>& v) {
  constexpr int D = std::max(Du, Dv);
  if (u.components() != 2) throw std::invalid_argument("advect_horizontal: advecting field needs 2 components");
  const DomainSpec& d = v.domain();
  const auto vs = forward_transform(v);
  const auto vx = inverse_transform(horizontal_derivative(vs, 1, 0));
  const auto vy = inverse_transform(horizontal_derivative(vs, 0, 1));
  BasicField<D> out(d, v.components());
  const int levels = D == 3 ? d.nz : 1;
  for (int c = 0; c < v.components(); ++c)
    for (int k = 0; k < levels; ++k) {
      const int ku = Du == 3 ? k : 0, kv = Dv == 3 ? k : 0;
      auto u1 = u.level(0, ku), u2 = u.level(1, ku);
      auto dx = vx.level(c, kv), dy = vy.level(c, kv);
      auto o = out.level(c, k);
      for (std::size_t q = 0; q < o.size(); ++q) o[q] = u1[q] * dx[q] + u2[q] * dy[q];
    }
  return dealias(out);
}

/// w d_z v with fourth-order vertical differences; dealiased.
inline Field3D advect_vertical(const Field3D& w, const Field3D& v) {
  const DomainSpec& d = v.domain();
  const Field3D vz = vertical_derivative(v, 1);
  Field3D out(d, v.components());
  auto wv = w.component(0);
  for (int c = 0; c < v.components(); ++c) {
    auto z = vz.component(c);
    auto o = out.component(c);
    for (std::size_t q = 0; q < o.size(); ++q) o[q] = wv[q] * z[q];
  }
  return dealias(out);
}

/// Coupling term in its defining form, the vertical mean of
/// vt . grad_H vt + vt div_H vt. Requires vt mean-free.
inline Field2D coupling_K(const Field3D& vt) {
  require_mean_free(vt, mean_free_tolerance, "coupling_K");
  Field3D integrand = advect_horizontal(vt, vt);
  const Field3D div = divergence_h(vt);
  Field3D prod(vt.domain(), 2);
  auto dv = div.component(0);
  for (int c = 0; c < 2; ++c) {
    auto a = vt.component(c);
    auto o = prod.component(c);
    for (std::size_t q = 0; q < o.size(); ++q) o[q] = a[q] * dv[q];
  }
  integrand += dealias(prod);
  return vertical_average(integrand);
}

/// Coupling term in advective form, the vertical mean of
/// vt . grad_H vt + w d_z vt. Equal to coupling_K after integrating by parts
/// in z (w vanishes at z = +-h and d_z w = -div_H vt). Built from the same
/// discrete products as the baroclinic transport, so that the vertical mean
/// of the baroclinic tendency cancels to rounding.
inline Field2D coupling_K_advective(const Field3D& vt, const Field3D& w) {
  Field3D integrand = advect_horizontal(vt, vt);
  integrand += advect_vertical(w, vt);
  return vertical_average(integrand);
}

}  // namespace primeq

#endif  // PRIMEQ_TRANSPORT_HPP
