#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "porotr/biot_ops.hpp"
#include "porotr/error.hpp"
#include "porotr/fields.hpp"
#include "porotr/medium.hpp"

namespace porotr {

struct TimeGrid {
  double dt = 0.0;
  int nt = 0;
};

/// Raw explicit step cfl*h/(c_max*sqrt(d)).
inline double raw_timestep(double h, double c_max, double cfl, int d) {
  if (!(c_max > 0.0)) throw InvalidInput("c_max must be positive");
  return cfl * h / (c_max * std::sqrt(static_cast<double>(d)));
}

/// nt = ceil(T/dt), then dt refit so that nt*dt = T.
inline TimeGrid fit_timestep(double raw_dt, double T) {
  if (T <= 0.0) return {raw_dt, 0};
  const int nt = static_cast<int>(std::ceil(T / raw_dt * (1.0 - 1e-14)));
  return {T / nt, nt};
}

inline TimeGrid cfl_timestep(double h, double c_max, double cfl, int d, double T) {
  return fit_timestep(raw_timestep(h, c_max, cfl, d), T);
}

/// ceil(c_max T / (2h)) + 2: reflections from the outer box cannot reach
/// Omega before time T.
inline int required_padding(double h, double c_max, double T) {
  return static_cast<int>(std::ceil(c_max * T / (2.0 * h) * (1.0 - 1e-14))) + 2;
}

enum class SourceKind { delta, delta_prime };

/// Initial displacement (delta source) or initial velocity (delta' source)
/// on the padded lattice.
template <int D>
struct SourceSpec {
  Pair<D> f;
  SourceKind kind = SourceKind::delta;
};

/// Checks that f vanishes outside Omega and within `margin` cells of its boundary.
template <int D>
void check_interior_support(const GridSpec<D>& g, const Pair<D>& f, int margin = 2) {
  const Lattice<D> L = g.lattice();
  Box<D> inner = g.omega_box();
  for (int a = 0; a < D; ++a) {
    inner.lo[a] += margin;
    inner.hi[a] -= margin;
  }
  for_each_node(L, [&](const auto& idx, std::size_t i) {
    if (inner.contains(idx) && !inner.on_face(idx)) return;
    for (int c = 0; c < 2 * D; ++c)
      if (f.comp(c)[i] != 0.0)
        throw InvalidInput("source is not supported strictly inside Omega (node " + std::to_string(i) + ")");
  });
}

template <int D>
struct SimConfig {
  GridSpec<D> grid;
  MediumParams medium;  // sampled on grid.lattice()
  double T = 1.0;
  double cfl = 0.5;
  BcMode bc = BcMode::zero_dirichlet;
  int snapshot_stride = 0;  // 0: no snapshots
  int energy_stride = 1;    // 0: first and last step only
  bool record_energy = true;
};

/// Time-indexed record of both displacements on the boundary nodes of Omega.
struct BoundaryTrace {
  int dim = 2;
  std::vector<int> shape;  // Omega nodes per axis
  std::vector<double> origin;  // lower corner of Omega
  double h = 0.0;
  double dt = 0.0;
  int nt = 0;
  int ordering_version = kNodeOrderingVersion;
  std::size_t nodes = 0;
  std::vector<double> values;  // [(step * nodes + node) * 2*dim + comp]

  int ncomp() const { return 2 * dim; }
  double& at(int step, std::size_t node, int c) {
    return values[(static_cast<std::size_t>(step) * nodes + node) * ncomp() + c];
  }
  double at(int step, std::size_t node, int c) const {
    return values[(static_cast<std::size_t>(step) * nodes + node) * ncomp() + c];
  }
  double max_abs() const {
    double m = 0.0;
    for (double v : values) m = std::max(m, std::abs(v));
    return m;
  }
};

inline BoundaryTrace trace_difference(const BoundaryTrace& a, const BoundaryTrace& b) {
  if (a.values.size() != b.values.size() || a.nt != b.nt || a.nodes != b.nodes)
    throw IncompatibleData("traces have different layouts");
  BoundaryTrace d = a;
  for (std::size_t i = 0; i < d.values.size(); ++i) d.values[i] -= b.values[i];
  return d;
}

struct EnergyRecord {
  int step = 0;
  double t = 0.0;
  double kinetic = 0.0;
  double potential = 0.0;
  double total = 0.0;
  double omega = 0.0;  // total energy restricted to Omega
};

template <int D>
struct Snapshot {
  int step = 0;
  double t = 0.0;
  Pair<D> u;
};

template <int D>
struct ForwardResult {
  BoundaryTrace trace;
  State<D> final;
  std::vector<EnergyRecord> energies;
  std::vector<Snapshot<D>> snapshots;
  double c_max = 0.0;
  TimeGrid time;
};

/// Explicit leapfrog for M u_tt + P_h u = 0 on one lattice.
template <int D>
class Leapfrog {
 public:
  Leapfrog(const BiotOperator<D>& op, double dt) : op_(op), dt_(dt) {
    const auto& L = op.lattice();
    for_each_node(L, [&](const auto& idx, std::size_t i) {
      if (!L.on_outer_layer(idx)) return;
      unsigned held = 0;
      for (int c = 0; c < 2 * D; ++c)
        if (component_held(L, op.mode(), idx, c)) held |= 1u << c;
      boundary_.push_back({i, held});
    });
    const std::size_t n = L.size();
    acc_ = Pair<D>::zeros(n);
  }

  /// Taylor start: u^1 = u^0 + dt v^0 + dt^2/2 a(u^0).
  void start(const Pair<D>& u0, const Pair<D>* v0 = nullptr) {
    prev_ = u0;
    accel(prev_);
    cur_ = u0;
    const double half = 0.5 * dt_ * dt_;
    for (int c = 0; c < 2 * D; ++c) {
      axpy(half, acc_.comp(c), cur_.comp(c));
      if (v0) axpy(dt_, v0->comp(c), cur_.comp(c));
    }
    enforce_held(cur_, prev_);
  }

  /// Same start-up for backward stepping: u^{-1} = u^0 - dt v^0 + dt^2/2 a(u^0).
  void start_backward(const Pair<D>& u0, const Pair<D>* v0 = nullptr) {
    if (!v0) {
      start(u0);
      return;
    }
    Pair<D> neg = *v0;
    for (int c = 0; c < 2 * D; ++c)
      for (double& x : neg.comp(c)) x = -x;
    start(u0, &neg);
  }

  /// Advances (prev, cur) -> (cur, next).
  void step() {
    accel(cur_);
    const double dt2 = dt_ * dt_;
    for (int c = 0; c < 2 * D; ++c) {
      double* p = prev_.comp(c).data();
      const double* u = cur_.comp(c).data();
      const double* a = acc_.comp(c).data();
      const std::size_t n = prev_.comp(c).size();
      for (std::size_t i = 0; i < n; ++i) p[i] = 2.0 * u[i] - p[i] + dt2 * a[i];
    }
    std::swap(prev_, cur_);
  }

  /// Swaps the two time levels so that step() runs backward in time.
  void reverse() { std::swap(prev_, cur_); }

  const Pair<D>& current() const { return cur_; }
  const Pair<D>& previous() const { return prev_; }
  Pair<D>& current() { return cur_; }
  Pair<D>& previous() { return prev_; }
  double dt() const { return dt_; }

 private:
  struct BoundaryNode {
    std::size_t index;
    unsigned held;
  };

  // acc = -M^{-1} P u on free components; held components get zero, and a
  // free component whose partner is held uses its own diagonal density.
  void accel(const Pair<D>& u) {
    op_.apply(u, acc_);
    const MediumParams& m = op_.medium();
    saved_.clear();
    for (const auto& b : boundary_)
      for (int c = 0; c < 2 * D; ++c) saved_.push_back(acc_.comp(c)[b.index]);
    const std::size_t n = op_.lattice().size();
    for (int k = 0; k < D; ++k) {
      double* ps = acc_.s[k].data();
      double* pf = acc_.f[k].data();
      for (std::size_t i = 0; i < n; ++i) {
        const double rho = m.rho11[i] * m.rho22[i] - m.rho12[i] * m.rho12[i];
        const double a = ps[i], b = pf[i];
        ps[i] = -(m.rho22[i] * a - m.rho12[i] * b) / rho;
        pf[i] = -(-m.rho12[i] * a + m.rho11[i] * b) / rho;
      }
    }
    std::size_t s = 0;
    for (const auto& b : boundary_) {
      const std::size_t i = b.index;
      for (int k = 0; k < D; ++k) {
        const bool hs = b.held & (1u << k), hf = b.held & (1u << (k + D));
        const double Ps = saved_[s + k], Pf = saved_[s + k + D];
        if (hs) acc_.s[k][i] = 0.0;
        if (hf) acc_.f[k][i] = 0.0;
        if (hs && !hf) acc_.f[k][i] = -Pf / m.rho22[i];
        if (hf && !hs) acc_.s[k][i] = -Ps / m.rho11[i];
      }
      s += 2 * D;
    }
  }

  void enforce_held(Pair<D>& u, const Pair<D>& ref) {
    for (const auto& b : boundary_)
      for (int c = 0; c < 2 * D; ++c)
        if (b.held & (1u << c)) u.comp(c)[b.index] = ref.comp(c)[b.index];
  }

  const BiotOperator<D>& op_;
  double dt_;
  Pair<D> prev_, cur_, acc_;
  std::vector<BoundaryNode> boundary_;
  std::vector<double> saved_;
};

/// Energy the leapfrog scheme conserves: kinetic (M v, v) with trapezoid
/// weights plus B_h(u, u) over the whole lattice.
template <int D>
EnergyBreakdown scheme_energy(const BiotOperator<D>& op, const Pair<D>& u, const Pair<D>& v) {
  const Lattice<D>& L = op.lattice();
  Pair<D> g;
  op.gradient(u, g);
  EnergyBreakdown e;
  e.kinetic = kinetic_energy(L, v, op.medium());
  double p = 0.0;
  for (int c = 0; c < 2 * D; ++c)
    for (std::size_t i = 0; i < L.size(); ++i) p += g.comp(c)[i] * u.comp(c)[i];
  e.potential = p;
  e.total = e.kinetic + e.potential;
  return e;
}

template <int D>
BoundaryTrace empty_trace(const GridSpec<D>& g, const TimeGrid& tg) {
  BoundaryTrace tr;
  tr.dim = D;
  for (int a = 0; a < D; ++a) {
    tr.shape.push_back(g.omega_nodes(a));
    tr.origin.push_back(g.omega_min[a]);
  }
  tr.h = g.h;
  tr.dt = tg.dt;
  tr.nt = tg.nt;
  tr.nodes = boundary_nodes(g).size();
  tr.values.assign(static_cast<std::size_t>(tg.nt + 1) * tr.nodes * 2 * D, 0.0);
  return tr;
}

template <int D>
void record_trace(BoundaryTrace& tr, int step, const Pair<D>& u, const std::vector<std::size_t>& nodes) {
  for (std::size_t j = 0; j < nodes.size(); ++j)
    for (int c = 0; c < 2 * D; ++c) tr.at(step, j, c) = u.comp(c)[nodes[j]];
}

template <int D>
TimeGrid simulation_time(const SimConfig<D>& cfg, double c_max) {
  if (!(cfg.cfl > 0.0 && cfg.cfl <= 1.0)) throw InvalidInput("cfl must lie in (0,1]");
  if (cfg.T < 0.0) throw InvalidInput("T must be non-negative");
  return cfl_timestep(cfg.grid.h, c_max, cfg.cfl, D, cfg.T);
}

/// Leapfrog solve of M u_tt + P(D) u = 0 with data (f, 0) (delta) or (0, f)
/// (delta'), recording the trace on the boundary of Omega at every step.
template <int D>
ForwardResult<D> simulate_forward(const SourceSpec<D>& src, const SimConfig<D>& cfg) {
  cfg.grid.validate();
  const Lattice<D> L = cfg.grid.lattice();
  const Box<D> om = cfg.grid.omega_box();
  for (int c = 0; c < 2 * D; ++c) check_shape(L, src.f.comp(c));
  const SpeedInfo sp = wave_speed_matrix(cfg.medium);
  ForwardResult<D> res;
  res.c_max = sp.c_max;
  res.time = simulation_time(cfg, sp.c_max);
  const double dt = res.time.dt;
  const int nt = res.time.nt;

  const BiotOperator<D> op(L, cfg.medium, cfg.bc);
  Leapfrog<D> lf(op, dt);
  const Pair<D> zero = Pair<D>::zeros(L.size());
  Pair<D> u0 = src.kind == SourceKind::delta ? src.f : zero;
  apply_bc(L, u0, cfg.bc);
  if (src.kind == SourceKind::delta) {
    lf.start(u0);
  } else {
    Pair<D> v0 = src.f;
    apply_bc(L, v0, cfg.bc);
    lf.start(u0, &v0);
  }

  const auto nodes = boundary_nodes(cfg.grid);
  res.trace = empty_trace(cfg.grid, res.time);

  // E(0) from the exact initial data.
  double e0 = 0.0;
  {
    const Pair<D> v0 = src.kind == SourceKind::delta ? zero : src.f;
    const EnergyBreakdown e = scheme_energy(op, u0, v0);
    e0 = e.total;
    if (cfg.record_energy)
      res.energies.push_back({0, 0.0, e.kinetic, e.potential, e.total,
                              energy(L, u0, v0, cfg.medium, om).total});
  }
  record_trace(res.trace, 0, u0, nodes);
  if (cfg.snapshot_stride > 0) res.snapshots.push_back({0, 0.0, u0});

  // lf holds (u^{n-1}, u^n) after the loop body for step n.
  Pair<D> vel = Pair<D>::zeros(L.size());
  auto velocity = [&](const Pair<D>& older, const Pair<D>& newer) {
    for (int c = 0; c < 2 * D; ++c)
      for (std::size_t i = 0; i < L.size(); ++i)
        vel.comp(c)[i] = (newer.comp(c)[i] - older.comp(c)[i]) / (2.0 * dt);
  };
  const int check_stride = 16;
  Pair<D> older = u0;
  for (int n = 1; n <= nt; ++n) {
    if (n > 1) {
      older = lf.previous();
      lf.step();
    }
    // lf.current() is u^n
    record_trace(res.trace, n, lf.current(), nodes);
    if (cfg.snapshot_stride > 0 && (n % cfg.snapshot_stride == 0 || n == nt))
      res.snapshots.push_back({n, n * dt, lf.current()});
    // energy of step n-1 needs u^n and u^{n-2}
    const int k = n - 1;
    const bool want = cfg.record_energy && k > 0 &&
                      (cfg.energy_stride > 0 && k % cfg.energy_stride == 0);
    const bool check = k > 0 && k % check_stride == 0;
    if ((want || check) && e0 > 0.0) {
      velocity(older, lf.current());
      const EnergyBreakdown e = scheme_energy(op, lf.previous(), vel);
      if (!std::isfinite(e.total) || e.total > 1e3 * e0)
        throw UnstableConfiguration("energy blow-up at step " + std::to_string(k) + " (dt=" +
                                    std::to_string(dt) + ", c_max=" + std::to_string(sp.c_max) + ")");
      if (want)
        res.energies.push_back({k, k * dt, e.kinetic, e.potential, e.total,
                                energy(L, lf.previous(), vel, cfg.medium, om).total});
    } else if (want) {
      res.energies.push_back({k, k * dt, 0.0, 0.0, 0.0, 0.0});
    }
  }

  // One extra step for the terminal velocity.
  Pair<D> uT = lf.current();
  Pair<D> vT;
  if (nt == 0) {
    vT = src.kind == SourceKind::delta ? zero : src.f;
  } else {
    older = lf.previous();
    lf.step();
    velocity(older, lf.current());
    vT = vel;
  }
  if (cfg.record_energy && nt > 0) {
    const EnergyBreakdown e = scheme_energy(op, uT, vT);
    if (!std::isfinite(e.total) || (e0 > 0.0 && e.total > 1e3 * e0))
      throw UnstableConfiguration("energy blow-up at the final step (dt=" + std::to_string(dt) +
                                  ", c_max=" + std::to_string(sp.c_max) + ")");
    res.energies.push_back({nt, nt * dt, e.kinetic, e.potential, e.total,
                            energy(L, uT, vT, cfg.medium, om).total});
  }
  res.final.us = std::move(uT.s);
  res.final.uf = std::move(uT.f);
  res.final.us_t = std::move(vT.s);
  res.final.uf_t = std::move(vT.f);
  return res;
}

/// Time derivative of a trace: centered differences inside, one-sided
/// second order at both ends.
inline BoundaryTrace differentiate_trace(const BoundaryTrace& h) {
  if (h.nt < 3) throw InvalidInput("differentiate_trace needs nt >= 3");
  BoundaryTrace d = h;
  const int N = h.nt;
  const double inv = 1.0 / (2.0 * h.dt);
  for (std::size_t j = 0; j < h.nodes; ++j)
    for (int c = 0; c < h.ncomp(); ++c) {
      d.at(0, j, c) = (-3.0 * h.at(0, j, c) + 4.0 * h.at(1, j, c) - h.at(2, j, c)) * inv;
      for (int n = 1; n < N; ++n) d.at(n, j, c) = (h.at(n + 1, j, c) - h.at(n - 1, j, c)) * inv;
      d.at(N, j, c) = (3.0 * h.at(N, j, c) - 4.0 * h.at(N - 1, j, c) + h.at(N - 2, j, c)) * inv;
    }
  return d;
}

}  // namespace porotr
