#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "primeq/primeq.hpp"

namespace fs = std::filesystem;
using namespace primeq;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_failure = 1;
constexpr int exit_blowup = 2;
constexpr int exit_no_contraction = 3;

void apply_thread_override() {
  const char* env = std::getenv("PRIMEQ_THREADS");
  if (!env) return;
  const int n = std::atoi(env);
  if (n <= 0) {
    std::cerr << "warning: ignoring PRIMEQ_THREADS=" << env << "\n";
    return;
  }
#ifdef _OPENMP
  omp_set_num_threads(n);
#endif
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

fs::path prepare_output(const RunConfig& cfg) {
  const fs::path dir(cfg.output_dir);
  fs::create_directories(dir);
  std::ofstream(dir / "config.echo") << config_echo(cfg);
  return dir;
}

Field3D load_initial(const RunConfig& cfg) {
  if (cfg.initial == "snapshot") {
    Snapshot s = read_snapshot(cfg.initial_snapshot);
    if (!(s.domain == cfg.domain))
      throw SolverError(ErrorKind::ValidationError, "snapshot domain differs from the configured domain");
    return s.v;
  }
  return initial_velocity(cfg.initial, cfg.domain, cfg.initial_amplitude, cfg.initial_seed);
}

fs::path snapshot_path(const fs::path& dir, long step) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "snap_%08ld.pesnap", step);
  return dir / buf;
}

int run_linearized(const RunConfig& cfg, const fs::path& dir);

int run_imex(const RunConfig& cfg, const fs::path& dir) {
  const fs::path series = dir / "timeseries.csv";
  fs::remove(series);
  NonlinearOptions nl;
  nl.closure = cfg.closure();
  const SolverState s0 = make_state(load_initial(cfg), cfg.model);
  write_snapshot(make_snapshot(s0, cfg.model), snapshot_path(dir, 0));

  std::optional<SolverState> last;
  long last_step = 0;
  RunOptions opt;
  opt.timestep = cfg.timestep;
  opt.nonlinear = nl;
  opt.eta = cfg.eta;
  opt.diagnostics_every = cfg.diagnostics_every;
  if (cfg.initial == "manufactured")
    opt.forcing = manufactured_forcing(cfg.domain, cfg.initial_amplitude, cfg.model, nl);
  opt.on_record = [&](const DiagnosticsRecord& r) { append_timeseries(r, series); };
  opt.on_step = [&](const SolverState& s, long step) {
    last = s;
    last_step = step;
    if (cfg.snapshot_every > 0 && step > 0 && step % cfg.snapshot_every == 0)
      write_snapshot(make_snapshot(s, cfg.model), snapshot_path(dir, step));
  };
  try {
    const RunResult r = run(s0, cfg.model, opt);
    write_snapshot(make_snapshot(r.final_state, cfg.model), snapshot_path(dir, r.steps));
    if (r.status == RunStatus::BlowupDetected) {
      std::cerr << r.message << "\n";
      return exit_blowup;
    }
    std::cout << "reached t = " << num(r.final_state.t) << " in " << r.steps << " steps\n";
    return exit_ok;
  } catch (...) {
    if (last) write_snapshot(make_snapshot(*last, cfg.model), snapshot_path(dir, last_step));
    throw;
  }
}

int run_picard(const RunConfig& cfg, const fs::path& dir) {
  const fs::path series = dir / "timeseries.csv";
  fs::remove(series);
  NonlinearOptions nl;
  nl.closure = cfg.closure();
  const Field3D v0 = load_initial(cfg);
  const SolverState s0 = make_state(v0, cfg.model);
  write_snapshot(make_snapshot(s0, cfg.model), snapshot_path(dir, 0));
  Forcing forcing;
  if (cfg.initial == "manufactured") forcing = manufactured_forcing(cfg.domain, cfg.initial_amplitude, cfg.model, nl);
  const PicardResult pr = picard_solve(v0, cfg.model, cfg.timestep.t_end, cfg.timestep, forcing, nl);
  RecordOptions ro;
  ro.eta = cfg.eta;
  const SolverState& initial = pr.trajectory.front();
  for (std::size_t j = 0; j < pr.trajectory.size(); ++j)
    if (static_cast<long>(j) % cfg.diagnostics_every == 0 || j + 1 == pr.trajectory.size())
      append_timeseries(make_record(pr.trajectory[j], initial, cfg.model, ro, static_cast<long>(j), j ? pr.dt : 0.0),
                        series);
  write_snapshot(make_snapshot(pr.trajectory.back(), cfg.model),
                 snapshot_path(dir, static_cast<long>(pr.trajectory.size()) - 1));
  std::ofstream inc(dir / "picard_increments.csv");
  inc << "iteration,increment\n";
  for (std::size_t i = 0; i < pr.increments.size(); ++i) inc << i + 1 << "," << num(pr.increments[i]) << "\n";
  std::cout << "picard converged in " << pr.iterations << " iterations\n";
  return exit_ok;
}

int run_linearized(const RunConfig& cfg, const fs::path& dir) {
  const DomainSpec& d = cfg.domain;
  const CoefficientData coeff = smooth_coefficients(d, cfg.coefficient_amplitude);
  const Field3D v0 = smooth_linear_initial(d);
  const double T = cfg.timestep.t_end, dt = cfg.linear_dt;
  const LinearizedTrajectory grid = solve_linearized_grid(coeff, v0, T, dt);
  const double bound = energy_bound_for(coeff, v0, T);

  std::vector<GalerkinBasis> bases;
  std::vector<std::vector<Eigen::VectorXd>> trajs;
  for (int n : cfg.galerkin_sizes) {
    const auto [nh, nz] = basis_shape(n);
    bases.push_back(build_basis(nh, nz, d));
    trajs.push_back(integrate_ode(assemble_system(coeff, bases.back(), &v0), T, dt));
  }

  std::vector<std::string> header{"t", "grid_H_sq"};
  for (int n : cfg.galerkin_sizes) {
    header.push_back("galerkin_" + std::to_string(n) + "_H_sq");
    header.push_back("distance_" + std::to_string(n));
  }
  header.push_back("energy_lhs");
  header.push_back("energy_bound");
  std::vector<std::vector<std::string>> rows;
  double sup = 0.0, integral = 0.0, prev_grad = 0.0;
  const long stride = std::max<long>(1, cfg.diagnostics_every);
  for (std::size_t i = 0; i < grid.states.size(); ++i) {
    const double h2 = H_norm_sq(grid.states[i]);
    const double g2 = grad_H_norm_sq(grid.states[i]);
    sup = std::max(sup, h2);
    if (i > 0) integral += 0.5 * (grid.times[i] - grid.times[i - 1]) * (g2 + prev_grad);
    prev_grad = g2;
    if (static_cast<long>(i) % stride != 0 && i + 1 != grid.states.size()) continue;
    std::vector<std::string> row{num(grid.times[i]), num(h2)};
    for (std::size_t b = 0; b < bases.size(); ++b) {
      const Field3D gv = synthesize(bases[b], trajs[b][i]);
      row.push_back(num(trajs[b][i].squaredNorm()));
      row.push_back(num(l2_norm(gv - grid.states[i])));
    }
    row.push_back(num(sup + integral));
    row.push_back(num(bound));
    rows.push_back(std::move(row));
  }
  write_csv(dir / "linearized.csv", header, rows);
  std::cout << "energy " << num(sup + integral) << " bound " << num(bound) << "\n";
  return exit_ok;
}

int cmd_run(const std::string& path) {
  const RunConfig cfg = load_config(path);
  const fs::path dir = prepare_output(cfg);
  switch (cfg.mode) {
    case RunMode::Imex: return run_imex(cfg, dir);
    case RunMode::Picard: return run_picard(cfg, dir);
    case RunMode::Linearized: return run_linearized(cfg, dir);
  }
  return exit_failure;
}

int cmd_linearized(const std::string& path) {
  const RunConfig cfg = load_config(path);
  return run_linearized(cfg, prepare_output(cfg));
}

int cmd_convergence(const std::string& path) {
  const RunConfig cfg = load_config(path);
  const fs::path dir = prepare_output(cfg);
  NonlinearOptions nl;
  nl.closure = cfg.closure();
  const TemporalStudy ts =
      temporal_convergence(cfg.domain, cfg.model, cfg.initial_amplitude, cfg.timestep.t_end, cfg.dt_ladder, nl);
  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 0; i < ts.dts.size(); ++i)
    rows.push_back({"dt", num(ts.dts[i]), num(ts.errors[i]), i == 0 ? "" : num(ts.orders[i - 1])});
  const SpatialStudy ss = vertical_convergence(cfg.domain.half_height, {9, 17, 33, 65});
  for (std::size_t i = 0; i < ss.nz.size(); ++i)
    rows.push_back({"dz", num(ss.dz[i]), num(ss.errors[i]), i == 0 ? "" : num(ss.orders[i - 1])});
  write_csv(dir / "convergence.csv", {"kind", "step", "error", "observed_order"}, rows);
  for (const auto& r : rows) std::cout << r[0] << " " << r[1] << " error " << r[2] << " order " << r[3] << "\n";
  return exit_ok;
}

int cmd_eps_study(const std::string& path) {
  const RunConfig cfg = load_config(path);
  const fs::path dir = prepare_output(cfg);
  const double eta = cfg.eta.value_or(2.5);
  const Field3D v0 = load_initial(cfg);
  const EpsStudy st = eps_continuation(v0, cfg.eps_ladder, eta, cfg.timestep.t_end, cfg.timestep.dt_max);
  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 0; i < st.eps.size(); ++i)
    rows.push_back({num(st.eps[i]), i + 1 < st.eps.size() ? num(st.eps[i + 1]) : "",
                    i < st.distances.size() ? num(st.distances[i]) : "", st.initial_pass[i] ? "true" : "false",
                    st.persistence[i] ? "true" : "false"});
  write_csv(dir / "eps_study.csv", {"eps", "eps_next", "distance", "rayleigh_initial_pass", "persistence"}, rows);
  for (const auto& r : rows) std::cout << "eps " << r[0] << " distance " << r[2] << " persistence " << r[4] << "\n";
  return exit_ok;
}

int cmd_check(const std::string& path, double eta) {
  const Snapshot snap = read_snapshot(path);
  SolverState s;
  s.t = snap.t;
  s.split = split_modes(snap.v);
  const InvariantResiduals r = invariant_residuals(s);
  std::cout << "t = " << num(snap.t) << " model = " << snap.model.tag() << "\n"
            << "div_mean_residual = " << num(r.div_mean_residual) << "\n"
            << "fluct_mean_residual = " << num(r.fluct_mean_residual) << "\n"
            << "w_boundary_residual = " << num(r.w_boundary_residual) << "\n"
            << "neumann_residual = " << num(r.neumann_residual) << "\n";
  if (snap.w) std::cout << "stored_w_boundary = " << num(boundary_max_abs(*snap.w)) << "\n";
  const RayleighReport rep = rayleigh_check(vertical_derivative(s.split.fluct, 1), eta);
  std::cout << "rayleigh eta = " << num(eta) << " pass = " << (rep.pass ? "true" : "false") << "\n";
  for (std::size_t c = 0; c < rep.components.size(); ++c) {
    const auto& rc = rep.components[c];
    std::cout << "  v" << c + 1 << ": min " << num(rc.min_inv) << " at (" << rc.argmin[0] << "," << rc.argmin[1]
              << "," << rc.argmin[2] << ") max " << num(rc.max_inv) << " at (" << rc.argmax[0] << ","
              << rc.argmax[1] << "," << rc.argmax[2] << ")" << (rc.capped ? " capped" : "") << "\n";
  }
  return exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Primitive-equations solver and verification tools"};
  app.require_subcommand(1);
  std::string config, snapshot;
  double eta = 2.0;

  auto* run = app.add_subcommand("run", "nonlinear evolution (mode from the config)");
  run->add_option("config", config, "configuration file")->required();
  auto* lin = app.add_subcommand("linearized", "linear problem: Galerkin and grid trajectories with the energy bound");
  lin->add_option("config", config, "configuration file")->required();
  auto* conv = app.add_subcommand("convergence", "time-step and vertical-resolution refinement");
  conv->add_option("config", config, "configuration file")->required();
  auto* eps = app.add_subcommand("eps-study", "continuation over the eps ladder");
  eps->add_option("config", config, "configuration file")->required();
  auto* check = app.add_subcommand("check", "invariant audit and Rayleigh report for a snapshot");
  check->add_option("snapshot", snapshot, "snapshot file")->required();
  check->add_option("--eta", eta, "Rayleigh band parameter")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  apply_thread_override();
  try {
    if (*run) return cmd_run(config);
    if (*lin) return cmd_linearized(config);
    if (*conv) return cmd_convergence(config);
    if (*eps) return cmd_eps_study(config);
    if (*check) return cmd_check(snapshot, eta);
  } catch (const SolverError& e) {
    std::cerr << "error: " << e.what() << "\n";
    if (e.kind() == ErrorKind::BlowupDetected) return exit_blowup;
    if (e.kind() == ErrorKind::NoContraction) return exit_no_contraction;
    return exit_failure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_failure;
  }
  return exit_failure;
}
