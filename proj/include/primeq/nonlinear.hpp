#ifndef PRIMEQ_NONLINEAR_HPP
#define PRIMEQ_NONLINEAR_HPP

#include "primeq/calculus.hpp"
#include "primeq/pressure.hpp"
#include "primeq/state.hpp"
#include "primeq/transport.hpp"
#include "primeq/viscosity.hpp"

namespace primeq {

/// Which discrete form of the coupling term drives the split system.
enum class CouplingForm {
  Integral,   ///< mean of vt . grad vt + vt div vt (coupling_K)
  Advective,  ///< mean of vt . grad vt + w d_z vt (coupling_K_advective)
};

struct NonlinearOptions {
  CouplingForm coupling = CouplingForm::Advective;
  VerticalClosure closure = VerticalClosure::OneSided;
};

/// Right-hand sides of the barotropic and baroclinic equations.
struct Tendency {
  Field2D mean_rhs;
  Field3D fluct_rhs;
};

inline Field2D coupling(const Field3D& fluct, const Field3D& w, CouplingForm form) {
  return form == CouplingForm::Integral ? coupling_K(fluct) : coupling_K_advective(fluct, w);
}

/// Vertical mean of the vertical viscous term nu2 d_zz vt (zero unless Full
/// with nu2 != 0). This flux belongs to the barotropic equation.
inline Field2D vertical_viscous_flux(const ViscosityModel& model, const Field3D& fluct, VerticalClosure closure) {
  Field2D flux(fluct.domain(), fluct.components());
  if (!model.has_vertical_part()) return flux;
  flux = vertical_average(apply_columnwise(vertical_laplacian_matrix(fluct.domain(), closure), fluct));
  flux *= model.nu2;
  return flux;
}

/// Pressure diagnosed from -Lap_H p = div_H(K + vbar . grad vbar - A vbar).
inline PressureField diagnose_pressure(const Field2D& mean, const Field2D& K, const ViscosityModel& model) {
  Field2D flux = K;
  flux += advect_horizontal(mean, mean);
  flux -= apply_viscosity(model, mean);
  return solve_poisson2d(divergence_h(flux));
}

/// Recompute the cached w and p of a state.
inline void refresh_diagnostics(SolverState& s, const ViscosityModel& model, CouplingForm form = CouplingForm::Advective) {
  s.w = reconstruct_w(s.split.fluct);
  const Field2D K = coupling(s.split.fluct, s.w, form);
  s.pressure = diagnose_pressure(s.split.mean, K, model);
}

/// Split right-hand side:
///   mean_rhs  = P[-vbar.grad vbar + A vbar - grad p - K]
///   fluct_rhs = -vt.grad vt - vbar.grad vt - vt.grad vbar - w d_z vt + A vt + K
/// with w reconstructed from vt. Under Full, the vertical mean of nu2 d_zz vt
/// is moved from the baroclinic to the barotropic right-hand side.
inline Tendency assemble_rhs(const SolverState& state, const ViscosityModel& model,
                             const NonlinearOptions& opt = {}) {
  const Field2D& mean = state.split.mean;
  const Field3D& fluct = state.split.fluct;
  const Field3D w = reconstruct_w(fluct);
  const Field2D K = coupling(fluct, w, opt.coupling);

  Field2D mean_rhs = apply_viscosity(model, mean);
  mean_rhs -= advect_horizontal(mean, mean);
  mean_rhs -= K;
  const PressureField p = diagnose_pressure(mean, K, model);
  mean_rhs -= gradient_h(p.p);

  Field3D fluct_rhs = apply_viscosity(model, fluct, opt.closure);
  fluct_rhs -= advect_horizontal(fluct, fluct);
  fluct_rhs -= advect_horizontal(mean, fluct);
  fluct_rhs -= advect_horizontal(fluct, mean);
  fluct_rhs -= advect_vertical(w, fluct);
  fluct_rhs += broadcast(K);

  if (model.has_vertical_part()) {
    const Field2D flux = vertical_viscous_flux(model, fluct, opt.closure);
    mean_rhs += flux;
    fluct_rhs -= broadcast(flux);
  }
  return {leray_project(mean_rhs), std::move(fluct_rhs)};
}

/// Right-hand side of the unsplit system -v.grad v - w d_z v + A v - grad p,
/// with w from the corrected reconstruction and p chosen so that the vertical
/// mean of the result is divergence free.
inline Field3D assemble_unsplit_rhs(const Field3D& v, const ViscosityModel& model,
                                    VerticalClosure closure = VerticalClosure::OneSided) {
  const Field3D w = reconstruct_w_corrected(v);
  Field3D rhs = apply_viscosity(model, v, closure);
  rhs -= advect_horizontal(v, v);
  rhs -= advect_vertical(w, v);
  const Field2D avg = vertical_average(rhs);
  Field2D gradient_part = avg;
  gradient_part -= leray_project(avg);
  rhs -= broadcast(gradient_part);
  return rhs;
}

}  // namespace primeq

#endif  // PRIMEQ_NONLINEAR_HPP
