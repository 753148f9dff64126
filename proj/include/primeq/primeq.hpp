#ifndef PRIMEQ_PRIMEQ_HPP
#define PRIMEQ_PRIMEQ_HPP

#include "primeq/errors.hpp"
#include "primeq/grid.hpp"
#include "primeq/calculus.hpp"
#include "primeq/viscosity.hpp"
#include "primeq/transport.hpp"
#include "primeq/pressure.hpp"
#include "primeq/state.hpp"
#include "primeq/nonlinear.hpp"
#include "primeq/diagnostics.hpp"
#include "primeq/implicit.hpp"
#include "primeq/timestepper.hpp"
#include "primeq/galerkin.hpp"
#include "primeq/initial.hpp"
#include "primeq/studies.hpp"
#include "primeq/io.hpp"

#endif  // PRIMEQ_PRIMEQ_HPP
