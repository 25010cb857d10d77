#pragma once

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "porotr/config.hpp"
#include "porotr/error.hpp"
#include "porotr/io.hpp"
#include "porotr/reversal.hpp"
#include "porotr/verify.hpp"

namespace porotr {

enum ExitCode : int { kOk = 0, kConfigError = 1, kSolverError = 2, kVerifyFailure = 3, kIoFailure = 4 };

struct RunOptions {
  std::filesystem::path config;
  std::optional<std::filesystem::path> out;  // overrides output.dir
  std::optional<std::uint64_t> seed;         // overrides seed
  bool quiet = false;
};

namespace detail {

class Log {
 public:
  explicit Log(bool quiet) : quiet_(quiet) {}
  template <class... A>
  void operator()(const A&... a) const {
    if (quiet_) return;
    (std::cout << ... << a) << '\n';
  }

 private:
  bool quiet_;
};

inline Config load_for_run(const RunOptions& o) {
  Config c = load_config(o.config);
  if (o.out) c.out_dir = o.out->string();
  if (o.seed) c.seed = *o.seed;
  return c;
}

inline std::filesystem::path prepare_out(const Config& c) {
  const std::filesystem::path dir(c.out_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
  write_file_atomic(dir / "config.resolved.json", to_json(c).dump(2) + "\n");
  return dir;
}

/// Runs body and maps the error taxonomy onto exit codes.
template <class F>
int guarded(F&& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigError;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return kIoFailure;
  } catch (const DivergenceDetected& e) {
    std::cerr << "divergence: " << e.what() << '\n';
    return kVerifyFailure;
  } catch (const UnstableConfiguration& e) {
    std::cerr << "unstable: " << e.what() << '\n';
    return kSolverError;
  } catch (const SolverFailure& e) {
    std::cerr << "solver failure: " << e.what() << '\n';
    return kSolverError;
  } catch (const Error& e) {
    // invalid input, hypotheses, phantoms, shapes, incompatible data
    std::cerr << "error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return kIoFailure;
  }
}

template <int D>
BoundaryTrace load_trace_for(const Config& c, const SimConfig<D>& sim) {
  BoundaryTrace tr = read_trace(c.trace_path);
  if (tr.dim != D) throw IncompatibleData("trace dimension does not match the configuration");
  for (int a = 0; a < D; ++a)
    if (tr.shape[a] != sim.grid.omega_nodes(a))
      throw IncompatibleData("trace grid shape does not match Omega of the configuration");
  if (tr.h > 0.0 && std::abs(tr.h - sim.grid.h) > 1e-12 * sim.grid.h)
    throw IncompatibleData("trace grid spacing does not match the configuration");
  return tr;
}

template <int D>
int forward_impl(const Config& c, const Log& log) {
  Problem<D> p = build_problem<D>(c);
  const auto dir = prepare_out(c);
  p.sim.record_energy = true;
  const SourceSpec<D> src = build_source(p);
  log("forward: grid ", p.sim.grid.lattice().size(), " nodes (pad ", p.sim.grid.pad_cells, "), T = ", p.sim.T,
      p.escape_T ? " (escape-time heuristic)" : "", ", c_max = ", p.c_max);
  const ForwardResult<D> res = simulate_forward(src, p.sim);
  write_trace(dir / "trace.pbt", res.trace);
  energy_table(res.energies).write(dir / "energy.csv");
  const Lattice<D> L = p.sim.grid.lattice();
  for (const auto& s : res.snapshots) {
    char name[64];
    std::snprintf(name, sizeof name, "snapshot_%06d.pbt", s.step);
    write_fields(dir / name, L, pair_fields(s.u), s.t, s.step);
  }
  log("forward: ", res.time.nt, " steps of dt = ", res.time.dt, "; wrote ", (dir / "trace.pbt").string());
  return kOk;
}

template <int D>
int reconstruct_impl(const Config& c, const Log& log) {
  const Problem<D> p = build_problem<D>(c);
  const auto dir = prepare_out(c);
  const Lattice<D> L = p.sim.grid.lattice();
  const Lattice<D> O = p.sim.grid.omega().lattice();
  BoundaryTrace data;
  std::optional<Quotient<D>> truth;
  if (!c.trace_path.empty()) {
    data = load_trace_for(c, p.sim);
    log("reconstruct: read ", c.trace_path);
  } else {
    if (p.phantoms.empty()) throw ConfigError("config: reconstruction needs reconstruction.trace or a phantom");
    const SourceSpec<D> src = build_source(p);
    SimConfig<D> s = p.sim;
    s.record_energy = false;
    s.snapshot_stride = 0;
    data = simulate_forward(src, s).trace;
    write_trace(dir / "trace.pbt", data);
    truth = project_quotient(O, restrict_pair(L, src.f, p.sim.grid.omega_box()));
    log("reconstruct: generated data from ", p.phantoms.size(), " phantom(s)");
  }
  if (p.source == SourceKind::delta_prime) data = differentiate_trace(data);

  NeumannOptions opt;
  opt.max_iter = c.max_iter;
  opt.tol = c.tol;
  opt.extension.tol = c.extension_tol;
  const ReconstructionReport<D> rep = neumann_reconstruct(data, p.sim, opt, truth);

  double terminal = 0.0;
  if (data.nt >= 1)
    for (std::size_t j = 0; j < data.nodes; ++j)
      for (int k = 0; k < data.ncomp(); ++k)
        terminal = std::max(terminal, std::abs(data.at(data.nt, j, k) - data.at(data.nt - 1, j, k)) / data.dt);

  CsvTable t({"iteration", "update_norm_B", "contraction_ratio", "relative_error_B"});
  for (std::size_t k = 0; k < rep.update_norms.size(); ++k)
    t.row({CsvTable::num(static_cast<long long>(k)), CsvTable::num(rep.update_norms[k]),
           k == 0 ? std::string() : CsvTable::num(rep.contraction_ratios[k - 1]),
           truth ? CsvTable::num(rep.errs_B[k]) : std::string()});
  t.write(dir / "reconstruction.csv");

  CsvTable summary({"key", "value"});
  summary.row({"converged", rep.converged ? "true" : "false"});
  summary.row({"iterations", std::to_string(rep.iterations)});
  summary.row({"T", CsvTable::num(p.sim.T)});
  summary.row({"T_source", p.escape_T ? "escape-time heuristic" : "config"});
  summary.row({"terminal_rate", CsvTable::num(terminal)});
  summary.write(dir / "reconstruction_summary.csv");

  NamedFields us;
  const char* axes = "xyz";
  for (int a = 0; a < D; ++a) {
    us.names.push_back(std::string("fs_") + axes[a]);
    us.fields.push_back(rep.result.us[a]);
  }
  write_fields(dir / "reconstruction_fs.pbt", O, us);
  write_fields(dir / "reconstruction_div_ff.pbt", cell_lattice(O), NamedFields{{"div_ff"}, {rep.result.div_uf}});

  log("reconstruct: ", rep.iterations, " iteration(s), last update ", rep.update_norms.back(),
      truth ? ", relative B error " + std::to_string(rep.errs_B.back()) : std::string(),
      p.escape_T ? " [T from the escape-time heuristic]" : "");
  if (!rep.converged) {
    std::cerr << "reconstruct: no convergence to tol " << c.tol << " within " << c.max_iter << " iterations\n";
    return kVerifyFailure;
  }
  return kOk;
}

inline VerifySetup setup_from(const Config& c) {
  if (c.dim != 2) throw ConfigError("config: dim: verification suites run in 2D");
  for (int k = 0; k < 7; ++k)
    if (!std::holds_alternative<double>(c.medium[k]))
      throw ConfigError(std::string("config: medium.") + kModuliNames[k] +
                        ": verification suites need constant coefficients");
  if (c.omega_min[0] != c.omega_min[1] || c.omega_max[0] != c.omega_max[1])
    throw ConfigError("config: grid: verification suites need a square Omega");
  VerifySetup s;
  double* dst[7] = {&s.medium.rho11, &s.medium.rho12, &s.medium.rho22, &s.medium.mu,
                    &s.medium.lambda, &s.medium.q, &s.medium.r};
  for (int k = 0; k < 7; ++k) *dst[k] = std::get<double>(c.medium[k]);
  const ValidationReport vr = validate_hypotheses(s.medium, c.floor);
  if (!vr.pass) throw HypothesisViolation("medium violates the hypotheses: " + vr.summary());
  s.omega_lo = c.omega_min[0];
  s.omega_hi = c.omega_max[0];
  s.h = c.h;
  s.cfl = c.cfl;
  s.T = c.T.value_or(0.0);
  s.max_iter = c.max_iter;
  s.tol = c.tol;
  s.extension_tol = c.extension_tol;
  s.seed = c.seed;
  for (const auto& pc : c.phantoms)
    s.phantoms.push_back({parse_phantom_kind(pc.kind), to_array<2>(pc.center), pc.width, pc.amplitude,
                          PhantomTarget::parse(pc.component, 2)});
  return s;
}

}  // namespace detail

/// Runs the named suites of a setup; `log` receives one line per result.
inline std::vector<SuiteResult> run_suites(const VerifySetup& s, const std::vector<std::string>& names,
                                           const std::function<void(const SuiteResult&)>& log = {}) {
  std::vector<SuiteResult> out;
  auto push = [&](SuiteResult r) {
    if (log) log(r);
    out.push_back(std::move(r));
  };
  std::optional<ReconstructionOutcome> recon;
  const double T = setup_T(s);
  for (const auto& n : names) {
    if (n == "algebra") push(suite_algebra(s.seed));
    if (n == "self-adjoint") push(suite_self_adjoint(s.medium, s.seed));
    if (n == "energy") {
      push(suite_energy_padded(s, s.h, 1.0));
      for (auto& r : suite_energy_modes(s, s.h, 1.0)) push(r);
    }
    if (n == "finite-speed") push(suite_finite_speed(s, s.h));
    if (n == "gauge") push(suite_gauge(s, s.h, T));
    if (n == "extension") push(suite_extension(s, s.h));
    if (n == "contraction") push(suite_contraction(s));
    if (n == "reconstruction") {
      ReconstructionOutcome o;
      push(suite_reconstruction(s, true, &o));
      recon = o;
    }
    if (n == "delta-prime") push(suite_delta_prime(s, recon ? &*recon : nullptr));
    if (n == "uc") push(suite_uc(s.medium));
  }
  return out;
}

inline int run_forward(const RunOptions& o) {
  return detail::guarded([&] {
    const Config c = detail::load_for_run(o);
    const detail::Log log(o.quiet);
    return c.dim == 2 ? detail::forward_impl<2>(c, log) : detail::forward_impl<3>(c, log);
  });
}

inline int run_reconstruct(const RunOptions& o) {
  return detail::guarded([&] {
    const Config c = detail::load_for_run(o);
    const detail::Log log(o.quiet);
    return c.dim == 2 ? detail::reconstruct_impl<2>(c, log) : detail::reconstruct_impl<3>(c, log);
  });
}

inline int run_verify(const RunOptions& o) {
  return detail::guarded([&] {
    const Config c = detail::load_for_run(o);
    const detail::Log log(o.quiet);
    const VerifySetup s = detail::setup_from(c);
    const auto dir = detail::prepare_out(c);
    const auto results = run_suites(s, c.suites, [&](const SuiteResult& r) {
      log(r.pass ? "PASS " : "FAIL ", r.name, "  measured ", r.measured, " threshold ", r.threshold, "  ", r.detail);
    });
    CsvTable t({"suite", "pass", "measured", "threshold", "detail"});
    bool all = true;
    for (const auto& r : results) {
      all = all && r.pass;
      t.row({r.name, r.pass ? "true" : "false", CsvTable::num(r.measured), CsvTable::num(r.threshold), r.detail});
    }
    t.write(dir / "verify.csv");
    return all ? kOk : kVerifyFailure;
  });
}

}  // namespace porotr
