#ifndef PRIMEQ_VISCOSITY_HPP
#define PRIMEQ_VISCOSITY_HPP

#include <Eigen/Dense>

#include <optional>
#include <string>

#include "primeq/calculus.hpp"
#include "primeq/grid.hpp"

namespace primeq {

/// The family of viscosity operators acting on v = (v1, v2):
///   Full(nu1, nu2)  nu1 Lap_H + nu2 d_zz
///   Horizontal      Lap_H
///   HalfPerp        diag(d_yy, d_xx)
///   HalfPar         diag(d_xx, d_yy)
///   Eps(e)          diag(e d_xx + d_yy, d_xx + e d_yy)
///   Inviscid        0
struct ViscosityModel {
  enum class Kind { Full, Horizontal, HalfPerp, HalfPar, Eps, Inviscid };

  Kind kind = Kind::Horizontal;
  double nu1 = 1.0;
  double nu2 = 0.0;
  double eps = 1.0;

  static ViscosityModel full(double nu1, double nu2) { return {Kind::Full, nu1, nu2, 1.0}; }
  static ViscosityModel horizontal() { return {Kind::Horizontal, 1.0, 0.0, 1.0}; }
  static ViscosityModel half_perp() { return {Kind::HalfPerp, 1.0, 0.0, 1.0}; }
  static ViscosityModel half_par() { return {Kind::HalfPar, 1.0, 0.0, 1.0}; }
  static ViscosityModel epsilon(double e) { return {Kind::Eps, 1.0, 0.0, e}; }
  static ViscosityModel inviscid() { return {Kind::Inviscid, 0.0, 0.0, 1.0}; }

  bool has_vertical_part() const { return kind == Kind::Full && nu2 != 0.0; }

  std::string tag() const {
    switch (kind) {
      case Kind::Full: return "full";
      case Kind::Horizontal: return "horizontal";
      case Kind::HalfPerp: return "half_perp";
      case Kind::HalfPar: return "half_par";
      case Kind::Eps: return "eps";
      case Kind::Inviscid: return "inviscid";
    }
    return "unknown";
  }

  static std::optional<Kind> kind_from_tag(const std::string& t) {
    if (t == "full") return Kind::Full;
    if (t == "horizontal") return Kind::Horizontal;
    if (t == "half_perp") return Kind::HalfPerp;
    if (t == "half_par") return Kind::HalfPar;
    if (t == "eps") return Kind::Eps;
    if (t == "inviscid") return Kind::Inviscid;
    return std::nullopt;
  }

  bool operator==(const ViscosityModel&) const = default;
};

/// Fourier symbol of the horizontal part of the operator for component
/// 0 (v1) or 1 (v2). Always <= 0.
inline double implicit_symbol(const ViscosityModel& m, double kx, double ky, int component) {
  const double xx = kx * kx, yy = ky * ky;
  using K = ViscosityModel::Kind;
  switch (m.kind) {
    case K::Full: return -m.nu1 * (xx + yy);
    case K::Horizontal: return -(xx + yy);
    case K::HalfPerp: return component == 0 ? -yy : -xx;
    case K::HalfPar: return component == 0 ? -xx : -yy;
    case K::Eps: return component == 0 ? -(m.eps * xx + yy) : -(xx + m.eps * yy);
    case K::Inviscid: return 0.0;
  }
  return 0.0;
}

/// Boundary closure of the second-order vertical Laplacian used by Full.
enum class VerticalClosure {
  OneSided,  ///< second-order one-sided second difference at z = +-h
  Neumann,   ///< ghost reflection enforcing d_z v = 0 at z = +-h
};

/// Second-order d_zz as an nz x nz matrix.
inline Eigen::MatrixXd vertical_laplacian_matrix(const DomainSpec& d, VerticalClosure closure) {
  const int nz = d.nz;
  const double s = 1.0 / (d.dz() * d.dz());
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(nz, nz);
  for (int k = 1; k < nz - 1; ++k) {
    L(k, k - 1) = s;
    L(k, k) = -2.0 * s;
    L(k, k + 1) = s;
  }
  if (closure == VerticalClosure::Neumann) {
    L(0, 0) = -2.0 * s;
    L(0, 1) = 2.0 * s;
    L(nz - 1, nz - 1) = -2.0 * s;
    L(nz - 1, nz - 2) = 2.0 * s;
  } else {
    L(0, 0) = 2.0 * s;
    L(0, 1) = -5.0 * s;
    L(0, 2) = 4.0 * s;
    L(0, 3) = -1.0 * s;
    L(nz - 1, nz - 1) = 2.0 * s;
    L(nz - 1, nz - 2) = -5.0 * s;
    L(nz - 1, nz - 3) = 4.0 * s;
    L(nz - 1, nz - 4) = -1.0 * s;
  }
  return L;
}

/// Apply a column operator (nz x nz) to every vertical column of f.
inline Field3D apply_columnwise(const Eigen::MatrixXd& op, const Field3D& f) {
  const DomainSpec& d = f.domain();
  Field3D out(d, f.components());
  const std::size_t np = d.plane_size();
  Eigen::VectorXd col(d.nz), res(d.nz);
  for (int c = 0; c < f.components(); ++c) {
    auto in = f.component(c);
    auto o = out.component(c);
    for (std::size_t q = 0; q < np; ++q) {
      for (int k = 0; k < d.nz; ++k) col[k] = in[k * np + q];
      res.noalias() = op * col;
      for (int k = 0; k < d.nz; ++k) o[k * np + q] = res[k];
    }
  }
  return out;
}

/// Horizontal part of the operator, applied spectrally, component by component.
template <int Dim>
BasicField<Dim> apply_horizontal_viscosity(const ViscosityModel& m, const BasicField<Dim>& v) {
  const DomainSpec& d = v.domain();
  auto s = forward_transform(v);
  for (int c = 0; c < s.components(); ++c)
    for (int k = 0; k < s.levels(); ++k)
      for (int n = 0; n < d.ny; ++n)
        for (int mm = 0; mm < d.nx_half(); ++mm)
          s.at(c, k, mm, n) *= implicit_symbol(m, wavenumber_x(d, mm), wavenumber_y(d, n), c);
  return inverse_transform(s);
}

/// Full operator applied to a two-component field. The nu2 d_zz part of
/// Full uses the second-order vertical Laplacian with the given closure.
inline Field3D apply_viscosity(const ViscosityModel& m, const Field3D& v,
                               VerticalClosure closure = VerticalClosure::OneSided) {
  if (m.kind == ViscosityModel::Kind::Inviscid) return Field3D(v.domain(), v.components());
  Field3D out = apply_horizontal_viscosity(m, v);
  if (m.has_vertical_part()) out.axpy(m.nu2, apply_columnwise(vertical_laplacian_matrix(v.domain(), closure), v));
  return out;
}

inline Field2D apply_viscosity(const ViscosityModel& m, const Field2D& v) {
  if (m.kind == ViscosityModel::Kind::Inviscid) return Field2D(v.domain(), v.components());
  return apply_horizontal_viscosity(m, v);
}

}  // namespace primeq

#endif  // PRIMEQ_VISCOSITY_HPP
