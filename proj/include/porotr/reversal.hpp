#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "porotr/biot_ops.hpp"
#include "porotr/error.hpp"
#include "porotr/extension.hpp"
#include "porotr/fields.hpp"
#include "porotr/forward.hpp"
#include "porotr/medium.hpp"

namespace porotr {

/// Default measurement time: three slowest crossings of Omega.
template <int D>
double escape_time(const GridSpec<D>& g, const MediumParams& m) {
  const SpeedInfo sp = wave_speed_matrix(m);
  const double a2 = *std::min_element(sp.a2.begin(), sp.a2.end());
  return 3.0 * g.diameter() / std::sqrt(a2);
}

template <int D>
struct ReverseResult {
  Pair<D> v0;  // A h on the Omega lattice
  HarmonicExtension<D> extension;
  double terminal_rate = 0.0;  // max |dh/dt| at t = T, left difference
};

/// Time-reversal operator A: backward leapfrog on Omega from (phi, 0) at t = T
/// with the boundary forced to h(t_n) at every step; returns v(0).
template <int D>
ReverseResult<D> time_reverse(const BoundaryTrace& h, const SimConfig<D>& cfg, const ExtensionOptions& xo = {}) {
  const GridSpec<D> og = cfg.grid.omega();
  const Lattice<D> L = cfg.grid.lattice();
  const Lattice<D> O = og.lattice();
  const MediumParams mo = restrict_medium(L, cfg.medium, cfg.grid.omega_box());
  const SpeedInfo sp = wave_speed_matrix(cfg.medium);
  const TimeGrid tg = simulation_time(cfg, sp.c_max);
  if (h.dim != D || h.nt != tg.nt || std::abs(h.dt - tg.dt) > 1e-12 * tg.dt)
    throw IncompatibleData("trace time grid (dt=" + std::to_string(h.dt) + ", nt=" + std::to_string(h.nt) +
                           ") does not match the configuration (dt=" + std::to_string(tg.dt) +
                           ", nt=" + std::to_string(tg.nt) + ")");
  const auto nodes = boundary_nodes(O, full_box(O));
  if (h.nodes != nodes.size()) throw IncompatibleData("trace node count does not match Omega");

  const int N = h.nt;
  const int nc = 2 * D;
  auto slice = [&](int step) {
    return std::vector<double>(h.values.begin() + static_cast<std::ptrdiff_t>(step * h.nodes * nc),
                               h.values.begin() + static_cast<std::ptrdiff_t>((step + 1) * h.nodes * nc));
  };
  auto force = [&](Pair<D>& u, int step) {
    for (std::size_t j = 0; j < nodes.size(); ++j)
      for (int c = 0; c < nc; ++c) u.comp(c)[nodes[j]] = h.at(step, j, c);
  };

  ReverseResult<D> res;
  res.extension = harmonic_extension(O, slice(N), mo, xo);
  if (N >= 1) {
    double rate = 0.0;
    for (std::size_t j = 0; j < h.nodes; ++j)
      for (int c = 0; c < nc; ++c)
        rate = std::max(rate, std::abs(h.at(N, j, c) - h.at(N - 1, j, c)) / h.dt);
    res.terminal_rate = rate;
  }
  if (N == 0) {
    res.v0 = res.extension.phi;
    return res;
  }
  const BiotOperator<D> op(O, mo, BcMode::zero_dirichlet);
  Leapfrog<D> lf(op, h.dt);
  lf.start(res.extension.phi);  // u^{N-1}
  force(lf.current(), N - 1);
  for (int n = N - 1; n >= 1; --n) {
    lf.step();  // u^{n-1}
    force(lf.current(), n - 1);
  }
  res.v0 = lf.current();
  return res;
}

/// Lambda g for a field g given on the Omega lattice.
template <int D>
BoundaryTrace measure(const Pair<D>& g_omega, const SimConfig<D>& cfg, SourceKind kind = SourceKind::delta) {
  SimConfig<D> c = cfg;
  c.record_energy = false;
  c.snapshot_stride = 0;
  SourceSpec<D> src{embed_pair(cfg.grid.lattice(), g_omega, cfg.grid.omega_box()), kind};
  return simulate_forward(src, c).trace;
}

/// K g = g - A Lambda g, on the Omega lattice.
template <int D>
Pair<D> apply_K(const Pair<D>& g_omega, const SimConfig<D>& cfg, const ExtensionOptions& xo = {}) {
  const BoundaryTrace tr = measure(g_omega, cfg);
  const Pair<D> Ag = time_reverse(tr, cfg, xo).v0;
  return combine(1.0, g_omega, -1.0, Ag);
}

struct NeumannOptions {
  int max_iter = 20;
  double tol = 1e-3;
  bool keep_iterates = false;
  ExtensionOptions extension{};
};

template <int D>
struct ReconstructionReport {
  std::vector<Quotient<D>> iterates;
  std::vector<double> errs_B;           // relative B error against the truth, when given
  std::vector<double> update_norms;     // ||K^j A data||_B
  std::vector<double> contraction_ratios;  // update_norms[j+1] / update_norms[j]
  bool converged = false;
  int iterations = 0;                   // number of series terms summed
  Pair<D> f;                            // full-field iterate on the Omega lattice
  Quotient<D> result;                   // (f^s, div f^f)
};

/// Neumann series f = sum_j K^j A data in fixed-point form
///   f_0 = A data,  f_{k+1} = f_k + A(data - Lambda f_k).
/// Iterates are kept as full fields; norms and errors are taken in the
/// quotient space with B over Omega.
template <int D>
ReconstructionReport<D> neumann_reconstruct(const BoundaryTrace& data, const SimConfig<D>& cfg,
                                            const NeumannOptions& opt = {},
                                            const std::optional<Quotient<D>>& truth = std::nullopt) {
  if (opt.max_iter < 1) throw InvalidInput("max_iter must be at least 1");
  const Lattice<D> L = cfg.grid.lattice();
  const Lattice<D> O = cfg.grid.omega().lattice();
  const MediumParams mo = restrict_medium(L, cfg.medium, cfg.grid.omega_box());
  const double truth_norm = truth ? b_seminorm(O, *truth, mo) : 0.0;

  ReconstructionReport<D> rep;
  auto record = [&](const Pair<D>& update) {
    const Quotient<D> q = project_quotient(O, rep.f);
    rep.update_norms.push_back(b_seminorm(O, project_quotient(O, update), mo));
    if (rep.update_norms.size() > 1) {
      const std::size_t k = rep.update_norms.size() - 1;
      const double prev = rep.update_norms[k - 1];
      rep.contraction_ratios.push_back(prev > 0.0 ? rep.update_norms[k] / prev : 0.0);
    }
    if (truth) {
      const double e = b_seminorm(O, quotient_difference(q, *truth), mo);
      rep.errs_B.push_back(truth_norm > 0.0 ? e / truth_norm : e);
    }
    if (opt.keep_iterates) rep.iterates.push_back(q);
    rep.iterations = static_cast<int>(rep.update_norms.size());
  };

  rep.f = time_reverse(data, cfg, opt.extension).v0;
  record(rep.f);
  int rising = 0;
  for (int k = 1; k < opt.max_iter; ++k) {
    const double fnorm = b_seminorm(O, project_quotient(O, rep.f), mo);
    if (rep.update_norms.back() <= opt.tol * fnorm || fnorm == 0.0) {
      rep.converged = true;
      break;
    }
    const BoundaryTrace residual = trace_difference(data, measure(rep.f, cfg));
    const Pair<D> upd = time_reverse(residual, cfg, opt.extension).v0;
    axpy(1.0, upd, rep.f);
    record(upd);
    const std::size_t j = rep.update_norms.size() - 1;
    rising = rep.update_norms[j] > rep.update_norms[j - 1] ? rising + 1 : 0;
    if (rising >= 3)
      throw DivergenceDetected("update norm increased for 3 consecutive iterations (last " +
                               std::to_string(rep.update_norms[j]) + "); T may be below the escape time");
  }
  if (!rep.converged) {
    const double fnorm = b_seminorm(O, project_quotient(O, rep.f), mo);
    rep.converged = rep.update_norms.back() <= opt.tol * fnorm || fnorm == 0.0;
  }
  rep.result = project_quotient(O, rep.f);
  return rep;
}

/// sqrt(E_Omega(T) / E_Omega(0)) for the forward solution with data (f, 0).
template <int D>
double contraction_ratio(const Pair<D>& f_padded, const SimConfig<D>& cfg) {
  SimConfig<D> c = cfg;
  c.record_energy = true;
  c.energy_stride = 0;
  c.snapshot_stride = 0;
  const ForwardResult<D> r = simulate_forward(SourceSpec<D>{f_padded, SourceKind::delta}, c);
  const double e0 = r.energies.front().omega;
  if (!(e0 > 0.0)) throw DegenerateSource("E_Omega(0) vanishes");
  return std::sqrt(r.energies.back().omega / e0);
}

}  // namespace porotr
