#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "primeq/initial.hpp"
#include "primeq/io.hpp"

using namespace primeq;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "primeq_test_io";
  fs::create_directories(dir);
  const fs::path p = dir / name;
  fs::remove(p);
  return p;
}

std::vector<std::string> lines_of(const fs::path& p) {
  std::ifstream f(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(f, l);) out.push_back(l);
  return out;
}

ErrorKind config_kind(const std::string& text) {
  try {
    parse_config(text);
  } catch (const SolverError& e) {
    return e.kind();
  }
  return ErrorKind::IoError;  // sentinel: no error
}

}  // namespace

TEST(Config, MinimalConfigUsesDefaults) {
  const RunConfig c = parse_config("# only a comment\n\n");
  EXPECT_EQ(c.domain, DomainSpec{});
  EXPECT_EQ(c.model, ViscosityModel::horizontal());
  EXPECT_EQ(c.mode, RunMode::Imex);
  EXPECT_EQ(c.timestep.cfl, 0.5);
  EXPECT_EQ(c.timestep.picard_tol, 1e-10);
  EXPECT_EQ(c.timestep.picard_max_iters, 50);
  EXPECT_EQ(c.timestep.blowup_threshold, 1e6);
  EXPECT_FALSE(c.eta.has_value());
  EXPECT_FALSE(c.neumann_test_mode);
}

TEST(Config, ParsesEveryField) {
  const RunConfig c = parse_config(
      "half_height = 0.5\nnx = 8\nny = 12\nnz = 11\nmodel = full\nnu1 = 2\nnu2 = 0.25\n"
      "initial = shear  # trailing comment\ninitial_amplitude = 0.3\ninitial_seed = 9\n"
      "dt_max = 0.002\ncfl = 0.4\nt_end = 0.1\nmode = picard\neta = 3\nneumann_test_mode = true\n"
      "eps_ladder = 0.5, 0.25\ngalerkin_sizes = 1, 8\noutput_dir = out/x\n");
  EXPECT_EQ(c.domain, (DomainSpec{0.5, 8, 12, 11}));
  EXPECT_EQ(c.model, ViscosityModel::full(2.0, 0.25));
  EXPECT_EQ(c.initial, "shear");
  EXPECT_EQ(c.initial_seed, 9u);
  EXPECT_EQ(c.timestep.dt_max, 0.002);
  EXPECT_EQ(c.mode, RunMode::Picard);
  EXPECT_EQ(c.eta, 3.0);
  EXPECT_EQ(c.closure(), VerticalClosure::Neumann);
  EXPECT_EQ(c.eps_ladder, (std::vector<double>{0.5, 0.25}));
  EXPECT_EQ(c.galerkin_sizes, (std::vector<int>{1, 8}));
  EXPECT_EQ(c.output_dir, "out/x");
}

TEST(Config, OddNxIsValidationErrorNamingField) {
  try {
    parse_config("nx = 7\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ValidationError);
    ASSERT_EQ(e.issues().size(), 1u);
    EXPECT_EQ(e.issues()[0].field, "nx");
    EXPECT_EQ(e.issues()[0].line, 1);
  }
}

TEST(Config, PicardWithHalfViscosityIsRejected) {
  try {
    parse_config("model = half_perp\nmode = picard\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ValidationError);
    EXPECT_EQ(e.issues()[0].field, "mode");
    EXPECT_NE(std::string(e.what()).find("horizontal Laplacian"), std::string::npos);
  }
  EXPECT_EQ(config_kind("model = eps\neps = 0.1\nmode = picard\n"), ErrorKind::IoError);
}

TEST(Config, ReportsAllProblems) {
  try {
    parse_config("nx = 7\nny = three\nbogus = 1\nnx = 8\ncfl = 2\nmodel = horizontal\neps = 0.3\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ParseError);
    EXPECT_EQ(e.issues().size(), 6u);  // ny, bogus, duplicate nx, nx parity, cfl, eps
  }
  EXPECT_EQ(config_kind("just some words\n"), ErrorKind::ParseError);
  EXPECT_EQ(config_kind("nz = 5\n"), ErrorKind::ValidationError);
  EXPECT_EQ(config_kind("initial = snapshot\n"), ErrorKind::ValidationError);
  EXPECT_EQ(config_kind("galerkin_sizes = 8, 10\n"), ErrorKind::ValidationError);
}

TEST(Config, EchoIsReparseable) {
  const RunConfig c = parse_config("model = eps\neps = 0.1\nt_end = 0.3\neta = 2.5\n");
  const RunConfig r = parse_config(config_echo(c));
  EXPECT_EQ(r.model, c.model);
  EXPECT_EQ(r.timestep.t_end, c.timestep.t_end);
  EXPECT_EQ(r.eta, c.eta);
  EXPECT_EQ(config_echo(r), config_echo(c));
}

TEST(Snapshot, RoundTripIsBitExact) {
  const DomainSpec d{0.6, 8, 6, 9};
  const ViscosityModel m = ViscosityModel::full(1.5, 0.1);
  SolverState s = make_state(initial_velocity("random", d, 0.7, 3), m, 0.125);
  const Snapshot snap = make_snapshot(s, m);
  const fs::path p = scratch("rt.pesnap");
  write_snapshot(snap, p);
  EXPECT_EQ(fs::file_size(p) > 3 * d.plane_size() * d.nz * 8, true);
  const Snapshot back = read_snapshot(p);
  EXPECT_TRUE(back == snap);
  EXPECT_EQ(back.model, m);
  ASSERT_TRUE(back.w && back.p);

  Snapshot bare = snap;
  bare.w.reset();
  bare.p.reset();
  write_snapshot(bare, p);
  EXPECT_TRUE(read_snapshot(p) == bare);
}

TEST(Snapshot, TruncatedFileIsFormatError) {
  const DomainSpec d{1.0, 4, 4, 9};
  const Snapshot snap = make_snapshot(make_state(initial_velocity("shear", d, 1.0), ViscosityModel::horizontal()),
                                      ViscosityModel::horizontal());
  const fs::path p = scratch("trunc.pesnap");
  write_snapshot(snap, p);
  fs::resize_file(p, fs::file_size(p) - 5);
  try {
    read_snapshot(p);
    FAIL();
  } catch (const SolverError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::FormatError);
  }
}

TEST(Snapshot, VersionMismatchNamesVersions) {
  const DomainSpec d{1.0, 4, 4, 9};
  const Snapshot snap = make_snapshot(SolverState::zero(d), ViscosityModel::horizontal());
  const fs::path p = scratch("ver.pesnap");
  write_snapshot(snap, p);
  std::string bytes;
  {
    std::ifstream f(p, std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(f), {});
  }
  bytes.replace(0, 8, "PESNAP 2");
  {
    std::ofstream f(p, std::ios::binary | std::ios::trunc);
    f << bytes;
  }
  try {
    read_snapshot(p);
    FAIL();
  } catch (const SolverError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::FormatError);
    const std::string msg = e.what();
    EXPECT_NE(msg.find('2'), std::string::npos);
    EXPECT_NE(msg.find('1'), std::string::npos);
  }
  EXPECT_THROW(read_snapshot(scratch("missing.pesnap")), SolverError);
}

TEST(Timeseries, HeaderThenRows) {
  const fs::path p = scratch("ts.csv");
  const DomainSpec d{1.0, 8, 8, 9};
  const SolverState s = make_state(initial_velocity("shear", d, 1.0), ViscosityModel::horizontal());
  const DiagnosticsRecord rec = make_record(s, s, ViscosityModel::horizontal(), {}, 0, 0.0);
  append_timeseries(rec, p);
  auto l = lines_of(p);
  ASSERT_EQ(l.size(), 2u);
  EXPECT_EQ(l[0].rfind("step,t,dt,", 0), 0u);
  for (int i = 1; i < 100; ++i) append_timeseries(rec, p);
  l = lines_of(p);
  EXPECT_EQ(l.size(), 101u);
  const auto ncols = timeseries_columns().size();
  for (const auto& line : l) EXPECT_EQ(static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1, ncols);
}

TEST(Timeseries, ViolatedRayleighEncoding) {
  const DomainSpec d{1.0, 8, 8, 9};
  const SolverState s = make_state(initial_velocity("shear", d, 1.0), ViscosityModel::horizontal());
  RecordOptions o;
  o.eta = 2.0;
  const DiagnosticsRecord rec = make_record(s, s, ViscosityModel::horizontal(), o, 0, 0.0);
  ASSERT_TRUE(rec.rayleigh);
  EXPECT_FALSE(rec.rayleigh->pass);
  const auto cols = timeseries_columns();
  std::vector<std::string> cells;
  std::stringstream ss(timeseries_row(rec));
  for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
  cells.resize(cols.size());
  auto col = [&](const std::string& name) {
    return cells[std::find(cols.begin(), cols.end(), name) - cols.begin()];
  };
  EXPECT_EQ(col("rayleigh_pass"), "false");
  EXPECT_EQ(col("eta_norm"), "");
}
