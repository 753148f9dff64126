#ifndef PRIMEQ_TIMESTEPPER_HPP
#define PRIMEQ_TIMESTEPPER_HPP

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "primeq/diagnostics.hpp"
#include "primeq/implicit.hpp"
#include "primeq/nonlinear.hpp"
#include "primeq/state.hpp"

namespace primeq {

struct TimestepConfig {
  double dt_max = 1e-2;
  double cfl = 0.5;
  double t_end = 1.0;
  double picard_tol = 1e-10;
  int picard_max_iters = 50;
  double blowup_threshold = 1e6;

  void validate() const {
    if (!(dt_max > 0.0)) throw std::invalid_argument("dt_max must be positive");
    if (!(cfl > 0.0 && cfl <= 1.0)) throw std::invalid_argument("cfl must lie in (0, 1]");
    if (!(t_end > 0.0)) throw std::invalid_argument("t_end must be positive");
    if (!(picard_tol > 0.0)) throw std::invalid_argument("picard_tol must be positive");
    if (picard_max_iters <= 0) throw std::invalid_argument("picard_max_iters must be positive");
    if (!(blowup_threshold > 0.0)) throw std::invalid_argument("blowup_threshold must be positive");
  }
};

/// Body force on v; two components. An empty function means no forcing.
using Forcing = std::function<Field3D(double t)>;

/// Largest advective step: min(dt_max, cfl / (max|v1|/dx + max|v2|/dy + max|w|/dz)).
inline double cfl_dt(const SolverState& state, const TimestepConfig& config) {
  const DomainSpec& d = state.domain();
  const Field3D v = state.velocity();
  double m1 = 0.0, m2 = 0.0;
  for (double x : v.component(0)) m1 = std::max(m1, std::abs(x));
  for (double x : v.component(1)) m2 = std::max(m2, std::abs(x));
  const double mw = state.w.values().empty() ? reconstruct_w_corrected(state.split.fluct).max_abs() : state.w.max_abs();
  const double rate = m1 / d.dx() + m2 / d.dy() + mw / d.dz();
  if (rate == 0.0) return config.dt_max;
  return std::min(config.dt_max, config.cfl / rate);
}

/// Put a state in canonical form: vbar discretely solenoidal, vt mean-free,
/// w and p recomputed.
inline SolverState canonical_state(SolverState s, const ViscosityModel& model, CouplingForm form = CouplingForm::Advective) {
  s.split.mean = leray_project(s.split.mean);
  s.split.fluct -= broadcast(vertical_average(s.split.fluct));
  refresh_diagnostics(s, model, form);
  return s;
}

inline SolverState make_state(const Field3D& v, const ViscosityModel& model, double t = 0.0) {
  SolverState s;
  s.t = t;
  s.split = split_modes(v);
  return canonical_state(std::move(s), model);
}

/// Explicitly treated terms of the split system:
///   mean  : -vbar.grad vbar - K + mean(nu2 d_zz vt) + mean(F)
///   fluct : -vt.grad vt - vbar.grad vt - vt.grad vbar - w d_z vt + K + F - mean(F)
/// The horizontal viscosity, the vertical viscosity of vt (mean-free part)
/// and the pressure are implicit.
inline Tendency explicit_tendency(const SolverState& s, const ViscosityModel& model, const NonlinearOptions& opt,
                                  const Forcing& forcing) {
  const Field2D& mean = s.split.mean;
  const Field3D& fluct = s.split.fluct;
  const Field3D w = reconstruct_w(fluct);
  const Field2D K = coupling(fluct, w, opt.coupling);

  Tendency out{Field2D(mean.domain(), 2), Field3D(fluct.domain(), 2)};
  out.mean_rhs -= advect_horizontal(mean, mean);
  out.mean_rhs -= K;
  out.mean_rhs += vertical_viscous_flux(model, fluct, opt.closure);

  out.fluct_rhs -= advect_horizontal(fluct, fluct);
  out.fluct_rhs -= advect_horizontal(mean, fluct);
  out.fluct_rhs -= advect_horizontal(fluct, mean);
  out.fluct_rhs -= advect_vertical(w, fluct);
  out.fluct_rhs += broadcast(K);

  if (forcing) {
    const Field3D F = forcing(s.t);
    const Field2D Fm = vertical_average(F);
    out.mean_rhs += Fm;
    out.fluct_rhs += F;
    out.fluct_rhs -= broadcast(Fm);
  }
  return out;
}

/// Variable-step IMEX integrator: Crank-Nicolson on the viscosity,
/// second-order Adams-Bashforth on the explicit terms, first step by
/// IMEX-Euler. Keeps the previous explicit tendency between calls.
class ImexIntegrator {
 public:
  ImexIntegrator(ViscosityModel model, TimestepConfig config, Forcing forcing = {}, NonlinearOptions opt = {})
      : model_(model), config_(config), forcing_(std::move(forcing)), opt_(opt), fluct_solver_(model, opt.closure) {}

  /// Forget the history; the next step is IMEX-Euler.
  void reset() { previous_.reset(); }

  const ViscosityModel& model() const { return model_; }
  const TimestepConfig& config() const { return config_; }

  SolverState step(const SolverState& s, double dt) {
    if (!(dt > 0.0)) throw std::invalid_argument("step: dt must be positive");
    const double limit = cfl_dt(s, config_);
    if (dt > limit * (1.0 + 1e-12))
      throw SolverError(ErrorKind::CflViolation,
                        "dt " + std::to_string(dt) + " exceeds the advective limit " + std::to_string(limit));

    Tendency N = explicit_tendency(s, model_, opt_, forcing_);
    Tendency E = N;
    if (previous_) {
      const double r = dt / previous_dt_;
      E.mean_rhs *= 1.0 + 0.5 * r;
      E.mean_rhs.axpy(-0.5 * r, previous_->mean_rhs);
      E.fluct_rhs *= 1.0 + 0.5 * r;
      E.fluct_rhs.axpy(-0.5 * r, previous_->fluct_rhs);
    }

    SolverState next;
    next.t = s.t + dt;
    next.split.mean = leray_project(implicit_mean_update(s.split.mean, E.mean_rhs, model_, dt));
    next.split.fluct = fluct_solver_.update(s.split.fluct, E.fluct_rhs, dt);
    next.split.fluct -= broadcast(vertical_average(next.split.fluct));

    const Field3D v = next.split.reassemble();
    if (!v.all_finite())
      throw SolverError(ErrorKind::BlowupDetected, "non-finite values at t = " + std::to_string(next.t));
    const double h2 = sobolev_norm(v, 2);
    if (h2 > config_.blowup_threshold)
      throw SolverError(ErrorKind::BlowupDetected, "H2 norm " + std::to_string(h2) + " exceeds threshold at t = " +
                                                       std::to_string(next.t));
    refresh_diagnostics(next, model_, opt_.coupling);

    previous_ = std::move(N);
    previous_dt_ = dt;
    return next;
  }

 private:
  ViscosityModel model_;
  TimestepConfig config_;
  Forcing forcing_;
  NonlinearOptions opt_;
  FluctImplicitStepper fluct_solver_;
  std::optional<Tendency> previous_;
  double previous_dt_ = 0.0;
};

/// One IMEX-Euler step from a state without history.
inline SolverState imex_step(const SolverState& state, const ViscosityModel& model, double dt,
                             const TimestepConfig& config = {}) {
  ImexIntegrator integ(model, config);
  return integ.step(state, dt);
}

enum class RunStatus { Completed, BlowupDetected };

struct RunOptions {
  TimestepConfig timestep;
  NonlinearOptions nonlinear;
  Forcing forcing;
  std::optional<double> eta;
  long diagnostics_every = 1;
  bool sobolev_diagnostics = true;
  /// Fixed step instead of the adaptive CFL step (still checked against CFL).
  std::optional<double> fixed_dt;
  std::function<void(const DiagnosticsRecord&)> on_record;
  std::function<void(const SolverState&, long step)> on_step;
};

struct RunResult {
  RunStatus status = RunStatus::Completed;
  std::string message;
  SolverState final_state;
  std::vector<DiagnosticsRecord> records;
  long steps = 0;
};

/// Evolve from initial to timestep.t_end. Step errors other than blow-up
/// propagate; blow-up ends the run with the last accepted state.
inline RunResult run(const SolverState& initial_raw, const ViscosityModel& model, const RunOptions& opt) {
  opt.timestep.validate();
  const SolverState initial = canonical_state(initial_raw, model, opt.nonlinear.coupling);
  ImexIntegrator integ(model, opt.timestep, opt.forcing, opt.nonlinear);
  RecordOptions ro;
  ro.eta = opt.eta;
  ro.sobolev = opt.sobolev_diagnostics;

  RunResult res;
  auto emit = [&](const SolverState& s, long step, double dt) {
    DiagnosticsRecord rec = make_record(s, initial, model, ro, step, dt);
    if (opt.on_record) opt.on_record(rec);
    res.records.push_back(std::move(rec));
  };

  SolverState s = initial;
  emit(s, 0, 0.0);
  if (opt.on_step) opt.on_step(s, 0);
  const double t_end = opt.timestep.t_end;
  const double t_eps = 1e-12 * std::max(1.0, t_end);
  long step = 0;
  double dt = 0.0;
  try {
    while (s.t < t_end - t_eps) {
      dt = opt.fixed_dt ? *opt.fixed_dt : cfl_dt(s, opt.timestep);
      if (s.t + dt > t_end - t_eps) dt = t_end - s.t;
      s = integ.step(s, dt);
      ++step;
      const bool last = !(s.t < t_end - t_eps);
      if (step % opt.diagnostics_every == 0 || last) emit(s, step, dt);
      if (opt.on_step) opt.on_step(s, step);
    }
  } catch (const SolverError& e) {
    if (e.kind() != ErrorKind::BlowupDetected) throw;
    res.status = RunStatus::BlowupDetected;
    res.message = e.what();
  }
  res.final_state = std::move(s);
  res.steps = step;
  return res;
}

// Picard construction

struct PicardResult {
  std::vector<SolverState> trajectory;  ///< fixed point at t_j = j dt
  double dt = 0.0;
  int iterations = 0;
  std::vector<double> increments;  ///< max_j ||v_n(t_j) - v_{n-1}(t_j)||_H1 per iteration
};

inline bool picard_compatible(const ViscosityModel& m) {
  using K = ViscosityModel::Kind;
  return m.kind == K::Horizontal || m.kind == K::Full || m.kind == K::Eps;
}

/// Successive linearization: iterate n solves
///   d_t vbar_n + P[vbar_{n-1}.grad vbar_n + K(vt_{n-1}, w_{n-1})] = P A vbar_n
///   d_t vt_n + (vt_{n-1} + vbar_{n-1}).grad vt_n + vt_{n-1}.grad vbar_n + w_{n-1} d_z vt_n
///       = A vt_n + K(vt_{n-1}, w_{n-1})
/// with w_n from the corrected reconstruction of vt_n and no re-projection,
/// starting from the zero iterate. Each linear problem uses the IMEX scheme
/// of ImexIntegrator on the uniform step T / ceil(T / dt_max).
inline PicardResult picard_solve(const Field3D& v0, const ViscosityModel& model, double T,
                                 const TimestepConfig& config, const Forcing& forcing = {},
                                 const NonlinearOptions& opt = {}) {
  if (!picard_compatible(model))
    throw SolverError(ErrorKind::ValidationError,
                      "Picard construction needs the full horizontal Laplacian (horizontal, full or eps), got " +
                          model.tag());
  if (!(T > 0.0)) throw std::invalid_argument("picard_solve: T must be positive");
  const DomainSpec& d = v0.domain();
  const int steps = static_cast<int>(std::ceil(T / config.dt_max - 1e-12));
  const double dt = T / steps;

  struct Frame {
    Field2D mean;
    Field3D fluct;
    Field3D w;
  };
  const SolverState start = make_state(v0, model);
  std::vector<Frame> prev(steps + 1, Frame{Field2D(d, 2), Field3D(d, 2), Field3D(d, 1)});

  std::vector<Field3D> F(steps + 1);
  std::vector<Field2D> Fm(steps + 1);
  if (forcing)
    for (int j = 0; j <= steps; ++j) {
      F[j] = forcing(j * dt);
      Fm[j] = vertical_average(F[j]);
      F[j] -= broadcast(Fm[j]);
    }

  auto ab2 = [](auto N, const auto* prevN) {
    if (prevN) {
      N *= 1.5;
      N.axpy(-0.5, *prevN);
    }
    return N;
  };

  PicardResult res;
  res.dt = dt;
  double last_inc = std::numeric_limits<double>::infinity();
  int streak = 0;
  FluctImplicitStepper fluct_solver(model, opt.closure);

  for (int it = 1; it <= config.picard_max_iters; ++it) {
    std::vector<Frame> cur(steps + 1, Frame{Field2D(d, 2), Field3D(d, 2), Field3D(d, 1)});
    cur[0].mean = start.split.mean;
    cur[0].fluct = start.split.fluct;

    std::vector<Field2D> K(steps + 1);
    for (int j = 0; j <= steps; ++j) K[j] = coupling_K_advective(prev[j].fluct, prev[j].w);

    std::optional<Field2D> prev_mean_N;
    for (int j = 0; j < steps; ++j) {
      Field2D N(d, 2);
      N -= advect_horizontal(prev[j].mean, cur[j].mean);
      N -= K[j];
      N += vertical_viscous_flux(model, prev[j].fluct, opt.closure);
      if (forcing) N += Fm[j];
      const Field2D E = ab2(N, prev_mean_N ? &*prev_mean_N : nullptr);
      cur[j + 1].mean = leray_project(implicit_mean_update(cur[j].mean, E, model, dt));
      prev_mean_N = std::move(N);
    }

    std::optional<Field3D> prev_fluct_N;
    for (int j = 0; j < steps; ++j) {
      Field3D N(d, 2);
      N -= advect_horizontal(prev[j].fluct, cur[j].fluct);
      N -= advect_horizontal(prev[j].mean, cur[j].fluct);
      N -= advect_horizontal(prev[j].fluct, cur[j].mean);
      N -= advect_vertical(prev[j].w, cur[j].fluct);
      N += broadcast(K[j]);
      if (forcing) N += F[j];
      const Field3D E = ab2(N, prev_fluct_N ? &*prev_fluct_N : nullptr);
      cur[j + 1].fluct = fluct_solver.update(cur[j].fluct, E, dt);
      prev_fluct_N = std::move(N);
    }
    for (int j = 0; j <= steps; ++j) cur[j].w = reconstruct_w_corrected(cur[j].fluct);

    double inc = 0.0, scale = 0.0;
    bool finite = true;
    for (int j = 0; j <= steps; ++j) {
      Field3D vc = broadcast(cur[j].mean) + cur[j].fluct;
      Field3D diff = vc - (broadcast(prev[j].mean) + prev[j].fluct);
      finite = finite && vc.all_finite();
      inc = std::max(inc, sobolev_norm(diff, 1));
      scale = std::max(scale, sobolev_norm(vc, 1));
    }
    if (!finite) inc = std::numeric_limits<double>::infinity();
    res.increments.push_back(inc);
    res.iterations = it;
    prev = std::move(cur);

    if (inc <= config.picard_tol * std::max(1.0, scale)) {
      res.trajectory.reserve(steps + 1);
      for (int j = 0; j <= steps; ++j) {
        SolverState s;
        s.t = j * dt;
        s.split = SplitState{prev[j].mean, prev[j].fluct};
        s.w = prev[j].w;
        s.pressure = diagnose_pressure(s.split.mean, coupling_K_advective(s.split.fluct, s.w), model);
        res.trajectory.push_back(std::move(s));
      }
      return res;
    }
    streak = (inc >= last_inc) ? streak + 1 : 0;
    last_inc = inc;
    if (streak >= 5 || !finite)
      throw SolverError(ErrorKind::NoContraction, "increments stopped decreasing at iteration " +
                                                      std::to_string(it) + " (last " + std::to_string(inc) +
                                                      "); reduce T");
  }
  throw SolverError(ErrorKind::NoContraction, "no convergence within " + std::to_string(config.picard_max_iters) +
                                                  " iterations (last increment " +
                                                  std::to_string(res.increments.back()) + "); reduce T");
}

}  // namespace primeq

#endif  // PRIMEQ_TIMESTEPPER_HPP
