#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

#include "porotr/config.hpp"
#include "porotr/diagnostics.hpp"
#include "porotr/io.hpp"
#include "porotr/phantom.hpp"
#include "porotr/runners.hpp"
#include "test_util.hpp"

using namespace porotr;
namespace fs = std::filesystem;

namespace {

using X = std::array<double, 2>;

GridSpec<2> unit_grid(double h, int pad = 2) {
  GridSpec<2> g;
  g.omega_min = {0, 0};
  g.omega_max = {1, 1};
  g.h = h;
  g.pad_cells = pad;
  return g;
}

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = fs::temp_directory_path() / ("porotr_test_" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

fs::path write_text(const fs::path& p, const std::string& s) {
  std::ofstream(p) << s;
  return p;
}

const char* kMinimal = R"({
  "grid": {"omega_min": [0, 0], "omega_max": [1, 1], "h": 0.0625},
  "medium": {"rho11": 1, "rho12": 0, "rho22": 1, "mu": 1, "lambda": 1, "q": 1, "r": 2},
  "T": 0.5
})";

std::string with_line(const std::string& extra) {
  std::string s = kMinimal;
  return s.substr(0, s.rfind('}')) + ",\n  " + extra + "\n}";
}

std::string config_error(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

// ---------------------------------------------------------------------------
// Phantoms

TEST(Phantom, GaussianPeak) {
  const GridSpec<2> g = unit_grid(1.0 / 32);
  const SourceSpec<2> s = make_phantom(PhantomSpec<2>{PhantomKind::gaussian, {0.5, 0.5}, 0.1, 1.0, {false, 0}}, g);
  const Lattice<2> L = g.lattice();
  const std::size_t c = L.flat({2 + 16, 2 + 16});
  EXPECT_DOUBLE_EQ(s.f.s[0][c], 1.0);
  EXPECT_DOUBLE_EQ(test::max_abs(s.f.s[0]), 1.0);
  EXPECT_EQ(test::max_abs(s.f.s[1]), 0.0);
  EXPECT_EQ(test::max_abs(s.f.f[0]), 0.0);
  EXPECT_NO_THROW(check_interior_support(g, s.f));
}

TEST(Phantom, GaugeFieldIsDiscretelyDivergenceFree) {
  const GridSpec<2> g = unit_grid(1.0 / 64);
  const SourceSpec<2> s =
      make_phantom(PhantomSpec<2>{PhantomKind::divfree_gauge, {0.5, 0.45}, 0.08, 3.0, PhantomTarget::parse("gauge", 2)}, g);
  const double gmax = std::max(test::max_abs(s.f.f[0]), test::max_abs(s.f.f[1]));
  EXPECT_GT(gmax, 0.1);
  EXPECT_LT(test::max_abs(cell_divergence(g.lattice(), s.f.f)), 1e-13 * gmax);
  EXPECT_EQ(test::max_abs(s.f.s[0]), 0.0);
}

TEST(Phantom, AmplitudeZero) {
  const GridSpec<2> g = unit_grid(1.0 / 16);
  const SourceSpec<2> s = make_phantom(PhantomSpec<2>{PhantomKind::smoothed_ball, {0.5, 0.5}, 0.2, 0.0, {true, 1}}, g);
  EXPECT_EQ(max_abs(s.f), 0.0);
}

TEST(Phantom, SmoothedBallProfile) {
  EXPECT_DOUBLE_EQ(smoothed_ball(0.0, 0.2), 1.0);
  EXPECT_DOUBLE_EQ(smoothed_ball(0.1, 0.2), 1.0);
  EXPECT_DOUBLE_EQ(smoothed_ball(0.2, 0.2), 0.0);
  EXPECT_NEAR(smoothed_ball(0.15, 0.2), 0.5, 1e-12);
  EXPECT_DOUBLE_EQ(tapered_gaussian(0.4, 0.1), 0.0);
  EXPECT_NEAR(tapered_gaussian(0.1, 0.1), std::exp(-0.5), 1e-15);
}

TEST(Phantom, SupportViolation) {
  const GridSpec<2> g = unit_grid(1.0 / 32);
  EXPECT_THROW(make_phantom(PhantomSpec<2>{PhantomKind::gaussian, {0.2, 0.5}, 0.1, 1.0, {false, 0}}, g), InvalidPhantom);
  EXPECT_THROW(make_phantom(PhantomSpec<2>{PhantomKind::gaussian, {0.5, 0.5}, -0.1, 1.0, {false, 0}}, g), InvalidPhantom);
  EXPECT_THROW(make_phantom(PhantomSpec<2>{PhantomKind::divfree_gauge, {0.5, 0.5}, 0.05, 1.0, {false, 0}}, g),
               InvalidPhantom);
  EXPECT_THROW(PhantomTarget::parse("fs2", 2), InvalidInput);
  EXPECT_EQ(PhantomTarget::parse("ff1", 2).str(), "ff1");
}

// ---------------------------------------------------------------------------
// Diagnostics

TEST(FiniteSpeed, InitialSupport) {
  const GridSpec<2> g = unit_grid(1.0 / 32);
  const PhantomSpec<2> ps{PhantomKind::gaussian, {0.5, 0.5}, 0.06, 1.0, {false, 0}};
  const SourceSpec<2> s = make_phantom(ps, g);
  const double r = support_radius(g.lattice(), s.f, ps.center, 1e-8);
  EXPECT_LE(r, ps.support_radius(g.h));
  EXPECT_GT(r, 0.0);
}

TEST(FiniteSpeed, MarginMonotoneInCmax) {
  VerifySetup s;
  SimConfig<2> c = make_sim(s, 1.0 / 32, 0.3);
  c.snapshot_stride = 10;
  const PhantomSpec<2> ps = centered_gaussian(s, {false, 0});
  const ForwardResult<2> r = simulate_forward(make_phantom(ps, c.grid), c);
  std::vector<std::pair<double, Pair<2>>> snaps;
  for (const auto& sn : r.snapshots) snaps.emplace_back(sn.t, sn.u);
  double prev = -1e300;
  for (double cm : {1.0, 1.902, 2.5, 4.0}) {
    const FiniteSpeedReport rep = finite_speed_check(c.grid.lattice(), snaps, ps.center, ps.support_radius(c.grid.h), cm);
    EXPECT_GE(rep.min_margin, prev);
    prev = rep.min_margin;
  }
  EXPECT_TRUE(finite_speed_check(c.grid.lattice(), snaps, ps.center, ps.support_radius(c.grid.h), 4.0).pass);
}

TEST(ScalarVars, Examples) {
  const Lattice<2> L = test::unit_square(10);
  State<2> st;
  st.us[0] = sample(L, [](const X& x) { return x[0]; });
  st.us[1].assign(L.size(), 0.0);
  st.uf[0].assign(L.size(), 0.0);
  st.uf[1] = sample(L, [](const X& x) { return x[1]; });
  const ScalarVars<2> v = principally_scalar_vars(L, st);
  for (std::size_t i = 0; i < L.size(); ++i) {
    EXPECT_NEAR(v.v_s[i], 1.0, 1e-12);
    EXPECT_NEAR(v.v_f[i], 1.0, 1e-12);
    EXPECT_NEAR(v.curl_us[0][i], 0.0, 1e-12);
  }
  const Field chi = sample(L, [](const X& x) { return std::sin(x[0]) * std::exp(x[1]); });
  st.us = gradient(L, chi);
  EXPECT_LT(test::interior_max(L, principally_scalar_vars(L, st).curl_us[0], 1), 1e-12);
}

// ---------------------------------------------------------------------------
// Configuration

TEST(Config, MinimalFillsDefaults) {
  const Config c = parse_config(kMinimal);
  EXPECT_EQ(c.dim, 2);
  EXPECT_DOUBLE_EQ(c.cfl, 0.5);
  EXPECT_EQ(c.bc_mode, "zero-dirichlet");
  EXPECT_EQ(c.source, "delta");
  EXPECT_EQ(c.max_iter, 20);
  EXPECT_FALSE(c.pad_cells.has_value());
  ASSERT_TRUE(c.T.has_value());
  EXPECT_DOUBLE_EQ(*c.T, 0.5);
  EXPECT_EQ(c.suites, kSuiteNames);
  const Problem<2> p = build_problem<2>(c);
  EXPECT_EQ(p.sim.grid.pad_cells, required_padding(0.0625, p.c_max, 0.5));
}

TEST(Config, CflOutOfRange) {
  const std::string e = config_error(with_line("\"cfl\": 1.5"));
  EXPECT_NE(e.find("cfl ∈ (0,1]"), std::string::npos) << e;
  EXPECT_NE(e.find("line 6"), std::string::npos) << e;
}

TEST(Config, UnknownKey) {
  const std::string e = config_error(with_line("\"cflx\": 0.5"));
  EXPECT_NE(e.find("cflx"), std::string::npos) << e;
  const std::string n = config_error(R"({"grid": {"omega_min": [0, 0], "omega_max": [1, 1], "h": 0.0625, "hh": 1},
    "medium": {"rho11": 1, "rho12": 0, "rho22": 1, "mu": 1, "lambda": 1, "q": 1, "r": 2}, "T": 1})");
  EXPECT_NE(n.find("grid.hh"), std::string::npos) << n;
}

TEST(Config, ConstraintViolations) {
  EXPECT_NE(config_error(R"({"grid": {"omega_min": [0, 0], "omega_max": [1, 1], "h": 0.3},
    "medium": {"rho11": 1, "rho12": 0, "rho22": 1, "mu": 1, "lambda": 1, "q": 1, "r": 2}, "T": 1})")
                .find("grid.h"),
            std::string::npos);
  EXPECT_NE(config_error(with_line("\"T2\": 1")), "");
  EXPECT_NE(config_error(with_line("\"source\": \"delta-double-prime\"")).find("source"), std::string::npos);
  EXPECT_NE(config_error(with_line("\"phantom\": {\"kind\": \"gaussian\", \"center\": [0.5, 0.5], \"component\": \"gauge\"}"))
                .find("component"),
            std::string::npos);
  EXPECT_NE(config_error("{\"grid\": 3"), "");
}

TEST(Config, HypothesisFailureReported) {
  Config c = parse_config(kMinimal);
  c.medium[4] = 1.0;
  c.medium[5] = 2.0;
  c.medium[6] = 1.0;
  EXPECT_THROW(build_problem<2>(c), HypothesisViolation);
}

TEST(Config, EchoRoundTrip) {
  const Config c = parse_config(with_line(
      "\"phantom\": [{\"kind\": \"gaussian\", \"center\": [0.45, 0.55], \"width\": 0.06},"
      " {\"kind\": \"divfree-gauge\", \"center\": [0.5, 0.5], \"width\": 0.05}], \"seed\": 12,"
      " \"reconstruction\": {\"max_iter\": 7, \"tol\": 1e-4}, \"verify\": {\"suites\": [\"gauge\", \"uc\"]}"));
  const Config back = parse_config(to_json(c).dump(2));
  EXPECT_TRUE(back == c);
  EXPECT_EQ(back.phantoms.size(), 2u);
  EXPECT_EQ(back.phantoms[1].component, "gauge");
}

TEST(Config, EscapeTime) {
  const Config c = parse_config(R"({"grid": {"omega_min": [0, 0], "omega_max": [1, 1], "h": 0.0625},
    "medium": {"rho11": 1, "rho12": 0, "rho22": 1, "mu": 1, "lambda": 1, "q": 1, "r": 2}, "T": "escape"})");
  EXPECT_FALSE(c.T.has_value());
  const Problem<2> p = build_problem<2>(c);
  EXPECT_TRUE(p.escape_T);
  EXPECT_NEAR(p.sim.T, 3.0 * std::sqrt(2.0) / std::sqrt((5 - std::sqrt(5.0)) / 2), 1e-12);
}

// ---------------------------------------------------------------------------
// Files

TEST(Io, TraceRoundTripBitExact) {
  TempDir tmp;
  VerifySetup s;
  s.h = 1.0 / 16;
  const SimConfig<2> c = make_sim(s, s.h, 0.4);
  const BoundaryTrace t = simulate_forward(mixed_source(s, c.grid), c).trace;
  write_trace(tmp.path() / "t.pbt", t);
  EXPECT_TRUE(fs::exists(tmp.path() / "t.pbt.txt"));
  const BoundaryTrace r = read_trace(tmp.path() / "t.pbt");
  EXPECT_EQ(r.dim, t.dim);
  EXPECT_EQ(r.shape, t.shape);
  EXPECT_EQ(r.origin, t.origin);
  EXPECT_EQ(r.h, t.h);
  EXPECT_EQ(r.dt, t.dt);
  EXPECT_EQ(r.nt, t.nt);
  EXPECT_EQ(r.nodes, t.nodes);
  EXPECT_EQ(r.ordering_version, t.ordering_version);
  ASSERT_EQ(r.values.size(), t.values.size());
  EXPECT_EQ(std::memcmp(r.values.data(), t.values.data(), t.values.size() * sizeof(double)), 0);
}

TEST(Io, FieldRoundTripAndShapeCheck) {
  TempDir tmp;
  const Lattice<2> L = test::unit_square(8);
  Uniform U(3);
  Field f(L.size());
  for (double& x : f) x = U(-1, 1);
  write_fields(tmp.path() / "f.pbt", L, NamedFields{{"mu"}, {f}}, 0.5, 7);
  const NamedFields nf = read_fields(tmp.path() / "f.pbt", L);
  ASSERT_EQ(nf.names, std::vector<std::string>{"mu"});
  EXPECT_EQ(nf.fields[0], f);
  EXPECT_THROW(read_fields(tmp.path() / "f.pbt", test::unit_square(9)), ShapeMismatch);
  EXPECT_THROW(read_trace(tmp.path() / "f.pbt"), IoError);
  EXPECT_THROW(read_trace(tmp.path() / "missing.pbt"), IoError);
}

TEST(Io, CsvQuoting) {
  CsvTable t({"key", "value"});
  t.row({"a,b", "say \"hi\""});
  t.row({"plain", CsvTable::num(0.25)});
  EXPECT_EQ(t.str(), "key,value\n\"a,b\",\"say \"\"hi\"\"\"\nplain,0.25\n");
  EXPECT_THROW(t.row({"x"}), InvalidInput);
}

// ---------------------------------------------------------------------------
// Runners

TEST(Runner, ForwardZeroPhantom) {
  TempDir tmp;
  const fs::path cfg = write_text(tmp.path() / "c.json", with_line(
      "\"phantom\": {\"kind\": \"gaussian\", \"center\": [0.5, 0.5], \"width\": 0.06, \"amplitude\": 0},"
      " \"output\": {\"dir\": \"" + (tmp.path() / "out").string() + "\"}"));
  RunOptions o;
  o.config = cfg;
  o.quiet = true;
  EXPECT_EQ(run_forward(o), kOk);
  const BoundaryTrace t = read_trace(tmp.path() / "out" / "trace.pbt");
  EXPECT_GT(t.nt, 0);
  EXPECT_EQ(t.max_abs(), 0.0);
  EXPECT_TRUE(fs::exists(tmp.path() / "out" / "energy.csv"));
  EXPECT_TRUE(fs::exists(tmp.path() / "out" / "config.resolved.json"));
}

TEST(Runner, DeterministicCsv) {
  TempDir tmp;
  const fs::path cfg = write_text(tmp.path() / "c.json", with_line(
      "\"phantom\": {\"kind\": \"gaussian\", \"center\": [0.45, 0.55], \"width\": 0.06},"
      " \"reconstruction\": {\"max_iter\": 3, \"tol\": 0.5}"));
  RunOptions o;
  o.config = cfg;
  o.quiet = true;
  std::string a, b;
  for (int k = 0; k < 2; ++k) {
    o.out = tmp.path() / ("run" + std::to_string(k));
    EXPECT_EQ(run_forward(o), kOk);
    run_reconstruct(o);
  }
  for (const char* f : {"energy.csv", "reconstruction.csv", "reconstruction_summary.csv"})
    EXPECT_EQ(detail::read_all(tmp.path() / "run0" / f), detail::read_all(tmp.path() / "run1" / f)) << f;
}

TEST(Runner, ReconstructShortHorizonFails) {
  TempDir tmp;
  std::string text = with_line(
      "\"phantom\": {\"kind\": \"gaussian\", \"center\": [0.45, 0.55], \"width\": 0.06},"
      " \"reconstruction\": {\"max_iter\": 20, \"tol\": 1e-9}, \"output\": {\"dir\": \"" +
      (tmp.path() / "out").string() + "\"}");
  text.replace(text.find("\"T\": 0.5"), 8, "\"T\": 0.3");
  const fs::path cfg = write_text(tmp.path() / "c.json", text);
  RunOptions o;
  o.config = cfg;
  o.quiet = true;
  EXPECT_EQ(run_reconstruct(o), kVerifyFailure);
}

TEST(Runner, ConfigAndIoErrorsMapToExitCodes) {
  TempDir tmp;
  RunOptions o;
  o.quiet = true;
  o.config = write_text(tmp.path() / "bad.json", with_line("\"cflx\": 0.5"));
  EXPECT_EQ(run_forward(o), kConfigError);
  o.config = write_text(tmp.path() / "ok.json", kMinimal);
  write_text(tmp.path() / "blocker", "x");
  o.out = tmp.path() / "blocker" / "sub";
  EXPECT_EQ(run_forward(o), kIoFailure);
}

TEST(Runner, VerifySubset) {
  TempDir tmp;
  const fs::path cfg = write_text(tmp.path() / "c.json", R"({
    "grid": {"omega_min": [0, 0], "omega_max": [1, 1], "h": 0.03125},
    "medium": {"rho11": 1, "rho12": 0, "rho22": 1, "mu": 1, "lambda": 1, "q": 1, "r": 2},
    "T": "escape", "verify": {"suites": ["algebra", "gauge", "extension", "uc"]}})");
  RunOptions o;
  o.config = cfg;
  o.out = tmp.path() / "v";
  o.quiet = true;
  EXPECT_EQ(run_verify(o), kOk);
  const std::string csv = detail::read_all(tmp.path() / "v" / "verify.csv");
  EXPECT_NE(csv.find("gauge"), std::string::npos);
  EXPECT_EQ(csv.find("false"), std::string::npos) << csv;
}
