#ifndef PRIMEQ_STATE_HPP
#define PRIMEQ_STATE_HPP

#include "primeq/calculus.hpp"
#include "primeq/pressure.hpp"

namespace primeq {

/// (vbar, vtilde) at time t together with the diagnosed w and p.
struct SolverState {
  double t = 0.0;
  SplitState split;
  PressureField pressure;
  Field3D w;

  const DomainSpec& domain() const { return split.fluct.domain(); }
  const Field2D& mean() const { return split.mean; }
  const Field3D& fluct() const { return split.fluct; }
  Field3D velocity() const { return split.reassemble(); }

  static SolverState zero(const DomainSpec& d) {
    SolverState s;
    s.split = SplitState{Field2D(d, 2), Field3D(d, 2)};
    s.pressure = PressureField{Field2D(d, 1)};
    s.w = Field3D(d, 1);
    return s;
  }
};

}  // namespace primeq

#endif  // PRIMEQ_STATE_HPP
