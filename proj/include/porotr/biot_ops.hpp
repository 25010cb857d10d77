#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "porotr/error.hpp"
#include "porotr/fields.hpp"
#include "porotr/medium.hpp"

namespace porotr {

/// Outer-boundary treatment of the simulated box.
///   zero_dirichlet: every component held at its boundary value.
///   mode_i:   u^s = 0 and u^f . nu = 0.
///   mode_ii:  u^s . nu = 0 and u^f = 0.
///   mode_iii: u^s . nu = 0 and u^f . nu = 0.
/// Free components on the outer layer are unknowns of the variational scheme
/// (half-weight nodes), which imposes the natural traction condition there.
enum class BcMode { zero_dirichlet, mode_i, mode_ii, mode_iii };

inline std::string to_string(BcMode m) {
  switch (m) {
    case BcMode::zero_dirichlet: return "zero-dirichlet";
    case BcMode::mode_i: return "mode-i";
    case BcMode::mode_ii: return "mode-ii";
    case BcMode::mode_iii: return "mode-iii";
  }
  return "?";
}

inline BcMode parse_bc_mode(const std::string& s) {
  if (s == "zero-dirichlet") return BcMode::zero_dirichlet;
  if (s == "mode-i") return BcMode::mode_i;
  if (s == "mode-ii") return BcMode::mode_ii;
  if (s == "mode-iii") return BcMode::mode_iii;
  throw InvalidInput("unknown boundary mode '" + s + "'");
}

/// True when component c (0..D-1 solid, D..2D-1 fluid) is held fixed at idx.
template <int D>
bool component_held(const Lattice<D>& L, BcMode mode, const typename Lattice<D>::Index& idx, int c) {
  if (!L.on_outer_layer(idx)) return false;
  const bool solid = c < D;
  const int axis = c % D;
  const bool normal = idx[axis] == 0 || idx[axis] == L.n[axis] - 1;
  switch (mode) {
    case BcMode::zero_dirichlet: return true;
    case BcMode::mode_i: return solid || normal;
    case BcMode::mode_ii: return !solid || normal;
    case BcMode::mode_iii: return normal;
  }
  return true;
}

/// Sets held components on the outer layer to zero.
template <int D>
void apply_bc(const Lattice<D>& L, Pair<D>& u, BcMode mode) {
  for_each_node(L, [&](const auto& idx, std::size_t i) {
    if (!L.on_outer_layer(idx)) return;
    for (int c = 0; c < 2 * D; ++c)
      if (component_held(L, mode, idx, c)) u.comp(c)[i] = 0.0;
  });
}

template <int D>
void apply_bc(const Lattice<D>& L, State<D>& s, BcMode mode) {
  Pair<D> u{s.us, s.uf}, v{s.us_t, s.uf_t};
  apply_bc(L, u, mode);
  apply_bc(L, v, mode);
  s.us = std::move(u.s);
  s.uf = std::move(u.f);
  s.us_t = std::move(v.s);
  s.uf_t = std::move(v.f);
}

// ---------------------------------------------------------------------------
// Mass matrix

inline void check_density(const MediumParams& m) {
  for (std::size_t i = 0; i < m.size(); ++i)
    if (!(m.rho11[i] * m.rho22[i] - m.rho12[i] * m.rho12[i] > 0.0))
      throw HypothesisViolation("singular mass matrix at node " + std::to_string(i));
}

template <int D>
Pair<D> apply_M(const MediumParams& m, const Pair<D>& a) {
  Pair<D> out = Pair<D>::zeros(a.size());
  for (int k = 0; k < D; ++k)
    for (std::size_t i = 0; i < a.size(); ++i) {
      out.s[k][i] = m.rho11[i] * a.s[k][i] + m.rho12[i] * a.f[k][i];
      out.f[k][i] = m.rho12[i] * a.s[k][i] + m.rho22[i] * a.f[k][i];
    }
  return out;
}

template <int D>
Pair<D> apply_M_inverse(const MediumParams& m, const Pair<D>& p) {
  check_density(m);
  Pair<D> out = Pair<D>::zeros(p.size());
  for (int k = 0; k < D; ++k)
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double rho = m.rho11[i] * m.rho22[i] - m.rho12[i] * m.rho12[i];
      out.s[k][i] = (m.rho22[i] * p.s[k][i] - m.rho12[i] * p.f[k][i]) / rho;
      out.f[k][i] = (-m.rho12[i] * p.s[k][i] + m.rho11[i] * p.f[k][i]) / rho;
    }
  return out;
}

// ---------------------------------------------------------------------------
// Discrete P(D)
//
// The scheme is variational. B_h is a midpoint sum over cells; in each cell
//   density = mu sum_ab <(D_b u^s_a)^2> + mu sum_ab g_ab g_ba
//           + lambda d_s^2 + 2 q d_s d_f + r d_f^2,
// where <.> averages over the 2^(D-1) cell edges parallel to b, g_ab is the
// cell-centred derivative of u^s_a along b (mean of those edge differences),
// and d_s, d_f are the cell divergences. Coefficients are corner averages.
// The density dominates 2 mu eps:eps + lambda d_s^2 + 2 q d_s d_f + r d_f^2,
// so it is non-negative under H3, and the edge term rules out zero-energy
// solid modes. P_h = H^{-1} grad(B_h / 2) with trapezoid node weights H.

namespace detail {

template <int D>
struct CellStencil {
  static constexpr int K = 1 << D;
  static constexpr int E = 1 << (D - 1);
  std::array<std::ptrdiff_t, K> corner{};
  std::array<std::array<std::array<int, 2>, E>, D> edge{};  // [axis][j] = {lo, hi} corner ids

  explicit CellStencil(const Lattice<D>& L) {
    for (int k = 0; k < K; ++k)
      for (int b = 0; b < D; ++b)
        if (k & (1 << b)) corner[k] += L.stride[b];
    for (int b = 0; b < D; ++b) {
      int j = 0;
      for (int k = 0; k < K; ++k)
        if (!(k & (1 << b))) edge[b][j++] = {k, k | (1 << b)};
    }
  }
};

/// Calls f(base, ci) for every cell: base is the flat index of the lower
/// corner node, ci the flat index on cell_lattice(L).
template <int D, class F>
void for_each_cell(const Lattice<D>& L, F&& f) {
  const Lattice<D> C = cell_lattice(L);
  if (C.size() == 0) return;
  typename Lattice<D>::Index idx{};
  const int last = D - 1;
  while (true) {
    idx[last] = 0;
    std::size_t base = L.flat(idx), ci = C.flat(idx);
    for (int t = 0; t < C.n[last]; ++t) f(base++, ci++);
    int a = last - 1;
    for (; a >= 0; --a) {
      if (++idx[a] < C.n[a]) break;
      idx[a] = 0;
    }
    if (a < 0) break;
  }
}

template <int D>
struct CellCoefficients {
  Field mu, lambda, q, r;
  explicit CellCoefficients(const Lattice<D>& L, const MediumParams& m)
      : mu(cell_average(L, m.mu)), lambda(cell_average(L, m.lambda)), q(cell_average(L, m.q)),
        r(cell_average(L, m.r)) {}
};

template <int D>
struct CellSolid {
  static constexpr int E = CellStencil<D>::E;
  std::array<std::array<std::array<double, E>, D>, D> e{};  // e[a][b][j]
  std::array<std::array<double, D>, D> g{};                 // g[a][b] ~ d_b u_a
  double div = 0.0;

  void load(const CellStencil<D>& cs, const std::array<const double*, D>& u, std::size_t base, double inv_h) {
    div = 0.0;
    for (int a = 0; a < D; ++a)
      for (int b = 0; b < D; ++b) {
        double s = 0.0;
        for (int j = 0; j < E; ++j) {
          const double d = (u[a][base + cs.corner[cs.edge[b][j][1]]] - u[a][base + cs.corner[cs.edge[b][j][0]]]) * inv_h;
          e[a][b][j] = d;
          s += d;
        }
        g[a][b] = s / E;
      }
    for (int a = 0; a < D; ++a) div += g[a][a];
  }
};

template <int D>
double cell_div(const CellStencil<D>& cs, const std::array<const double*, D>& u, std::size_t base, double inv_h) {
  constexpr int E = CellStencil<D>::E;
  double s = 0.0;
  for (int a = 0; a < D; ++a)
    for (int j = 0; j < E; ++j)
      s += u[a][base + cs.corner[cs.edge[a][j][1]]] - u[a][base + cs.corner[cs.edge[a][j][0]]];
  return s * inv_h / E;
}

template <int D>
std::array<const double*, D> ptrs(const VectorField<D>& v) {
  std::array<const double*, D> p{};
  for (int a = 0; a < D; ++a) p[a] = v[a].data();
  return p;
}

}  // namespace detail

/// Discrete P(D) on a lattice with a given outer-boundary treatment.
/// Held components of the outer layer get zero force; u^f enters only
/// through its cell divergence.
template <int D>
class BiotOperator {
 public:
  BiotOperator(const Lattice<D>& L, const MediumParams& m, BcMode mode = BcMode::zero_dirichlet)
      : L_(L), m_(m), mode_(mode), cs_(L), cc_((validate(L, m), L), m) {
    const std::size_t n = L.size();
    minv_ss_.resize(n);
    minv_sf_.resize(n);
    minv_ff_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double rho = m.rho11[i] * m.rho22[i] - m.rho12[i] * m.rho12[i];
      minv_ss_[i] = m.rho22[i] / rho;
      minv_sf_[i] = -m.rho12[i] / rho;
      minv_ff_[i] = m.rho11[i] / rho;
    }
    inv_w_ = trapezoid_weights(L, full_box(L));
    for (double& v : inv_w_) v = 1.0 / v;
    for_each_node(L, [&](const auto& idx, std::size_t i) {
      if (!L.on_outer_layer(idx)) return;
      unsigned mask = 0;
      for (int c = 0; c < 2 * D; ++c)
        if (component_held(L, mode, idx, c)) mask |= 1u << c;
      held_.push_back({i, mask});
    });
  }

  const Lattice<D>& lattice() const { return L_; }
  const MediumParams& medium() const { return m_; }
  BcMode mode() const { return mode_; }
  const detail::CellCoefficients<D>& cell_coefficients() const { return cc_; }

  /// g = grad of B_h(u, u) / 2 with respect to every nodal value.
  void gradient(const Pair<D>& u, Pair<D>& g) const {
    constexpr int E = detail::CellStencil<D>::E;
    const std::size_t n = L_.size();
    for (int c = 0; c < 2 * D; ++c) g.comp(c).assign(n, 0.0);
    const double inv_h = 1.0 / L_.h;
    const double fac = std::pow(L_.h, D - 1) / E;
    const auto us = detail::ptrs<D>(u.s);
    const auto uf = detail::ptrs<D>(u.f);
    std::array<double*, D> gs{}, gf{};
    for (int a = 0; a < D; ++a) {
      gs[a] = g.s[a].data();
      gf[a] = g.f[a].data();
    }
    const double *cmu = cc_.mu.data(), *clam = cc_.lambda.data(), *cq = cc_.q.data(), *cr = cc_.r.data();
    if constexpr (D == 2) {
      gradient_2d(us, uf, gs, gf, cmu, clam, cq, cr, inv_h, fac);
      return;
    }
    detail::CellSolid<D> cell;
    detail::for_each_cell(L_, [&](std::size_t base, std::size_t ci) {
      cell.load(cs_, us, base, inv_h);
      const double df = detail::cell_div<D>(cs_, uf, base, inv_h);
      const double mu = cmu[ci];
      const double tr = clam[ci] * cell.div + cq[ci] * df;
      const double pi = (cq[ci] * cell.div + cr[ci] * df) * fac;
      for (int a = 0; a < D; ++a)
        for (int b = 0; b < D; ++b) {
          const double S = mu * cell.g[b][a] + (a == b ? tr : 0.0);
          for (int j = 0; j < E; ++j) {
            const double v = (mu * cell.e[a][b][j] + S) * fac;
            gs[a][base + cs_.corner[cs_.edge[b][j][1]]] += v;
            gs[a][base + cs_.corner[cs_.edge[b][j][0]]] -= v;
          }
        }
      for (int a = 0; a < D; ++a)
        for (int j = 0; j < E; ++j) {
          gf[a][base + cs_.corner[cs_.edge[a][j][1]]] += pi;
          gf[a][base + cs_.corner[cs_.edge[a][j][0]]] -= pi;
        }
    });
  }

  void gradient_2d(const std::array<const double*, D>& us, const std::array<const double*, D>& uf,
                   const std::array<double*, D>& gs, const std::array<double*, D>& gf, const double* cmu,
                   const double* clam, const double* cq, const double* cr, double inv_h, double fac) const {
    const std::ptrdiff_t s0 = L_.stride[0], s1 = L_.stride[1];
    const double *x = us[0], *y = us[1], *p = uf[0], *w = uf[1];
    double *gx = gs[0], *gy = gs[1], *gp = gf[0], *gw = gf[1];
    const int n0 = L_.n[0] - 1, n1 = L_.n[1] - 1;
    for (int i0 = 0; i0 < n0; ++i0) {
      std::size_t b = static_cast<std::size_t>(i0) * s0;
      std::size_t ci = static_cast<std::size_t>(i0) * n1;
      for (int i1 = 0; i1 < n1; ++i1, ++b, ++ci) {
        const std::size_t c00 = b, c10 = b + s0, c01 = b + s1, c11 = b + s0 + s1;
        // e[a][axis][edge]
        const double x00 = (x[c10] - x[c00]) * inv_h, x01 = (x[c11] - x[c01]) * inv_h;
        const double x10 = (x[c01] - x[c00]) * inv_h, x11 = (x[c11] - x[c10]) * inv_h;
        const double y00 = (y[c10] - y[c00]) * inv_h, y01 = (y[c11] - y[c01]) * inv_h;
        const double y10 = (y[c01] - y[c00]) * inv_h, y11 = (y[c11] - y[c10]) * inv_h;
        const double gxx = 0.5 * (x00 + x01), gx1 = 0.5 * (x10 + x11);
        const double gyx = 0.5 * (y00 + y01), gyy = 0.5 * (y10 + y11);
        const double ds = gxx + gyy;
        const double df = 0.5 * ((p[c10] - p[c00]) + (p[c11] - p[c01]) + (w[c01] - w[c00]) + (w[c11] - w[c10])) * inv_h;
        const double mu = cmu[ci];
        const double tr = clam[ci] * ds + cq[ci] * df;
        const double pi = (cq[ci] * ds + cr[ci] * df) * fac;
        const double Sxx = mu * gxx + tr, Syy = mu * gyy + tr;
        const double Sx1 = mu * gyx, Sy0 = mu * gx1;  // S[a][b] = mu g[b][a]
        double v;
        v = (mu * x00 + Sxx) * fac; gx[c10] += v; gx[c00] -= v;
        v = (mu * x01 + Sxx) * fac; gx[c11] += v; gx[c01] -= v;
        v = (mu * x10 + Sx1) * fac; gx[c01] += v; gx[c00] -= v;
        v = (mu * x11 + Sx1) * fac; gx[c11] += v; gx[c10] -= v;
        v = (mu * y00 + Sy0) * fac; gy[c10] += v; gy[c00] -= v;
        v = (mu * y01 + Sy0) * fac; gy[c11] += v; gy[c01] -= v;
        v = (mu * y10 + Syy) * fac; gy[c01] += v; gy[c00] -= v;
        v = (mu * y11 + Syy) * fac; gy[c11] += v; gy[c10] -= v;
        gp[c10] += pi; gp[c00] -= pi; gp[c11] += pi; gp[c01] -= pi;
        gw[c01] += pi; gw[c00] -= pi; gw[c11] += pi; gw[c10] -= pi;
      }
    }
  }

  /// out = P_h u (held components zero).
  void apply(const Pair<D>& u, Pair<D>& out) const {
    gradient(u, out);
    for (int c = 0; c < 2 * D; ++c) {
      double* o = out.comp(c).data();
      for (std::size_t i = 0; i < L_.size(); ++i) o[i] *= inv_w_[i];
    }
    zero_held(out);
  }

  Pair<D> apply(const Pair<D>& u) const {
    Pair<D> out;
    apply(u, out);
    return out;
  }

  /// acc = -M^{-1} P_h u.
  void acceleration(const Pair<D>& u, Pair<D>& acc) const {
    apply(u, acc);
    for (int k = 0; k < D; ++k) {
      double* ps = acc.s[k].data();
      double* pf = acc.f[k].data();
      for (std::size_t i = 0; i < L_.size(); ++i) {
        const double a = ps[i], b = pf[i];
        ps[i] = -(minv_ss_[i] * a + minv_sf_[i] * b);
        pf[i] = -(minv_sf_[i] * a + minv_ff_[i] * b);
      }
    }
  }

  /// Diagonal of the Hessian of B_h / 2.
  Pair<D> gradient_diagonal() const {
    constexpr int E = detail::CellStencil<D>::E;
    Pair<D> d = Pair<D>::zeros(L_.size());
    const double hd = std::pow(L_.h, D - 2);
    detail::for_each_cell(L_, [&](std::size_t base, std::size_t ci) {
      const double vs = hd * (cc_.mu[ci] * D / E + (cc_.mu[ci] + cc_.lambda[ci]) / (E * E));
      const double vf = hd * cc_.r[ci] / (E * E);
      for (int k = 0; k < (1 << D); ++k)
        for (int a = 0; a < D; ++a) {
          d.s[a][base + cs_.corner[k]] += vs;
          d.f[a][base + cs_.corner[k]] += vf;
        }
    });
    return d;
  }

  /// Solid-solid block only: the discrete elastic operator at non-outer nodes.
  VectorField<D> elastic(const VectorField<D>& us) const {
    Pair<D> u = Pair<D>::zeros(L_.size());
    u.s = us;
    Pair<D> g;
    gradient(u, g);
    VectorField<D> out;
    for (int k = 0; k < D; ++k) out[k].assign(L_.size(), 0.0);
    for_each_node(L_, [&](const auto& idx, std::size_t i) {
      if (L_.on_outer_layer(idx)) return;
      for (int k = 0; k < D; ++k) out[k][i] = -g.s[k][i] * inv_w_[i];
    });
    return out;
  }

  void zero_held(Pair<D>& p) const {
    for (const auto& hn : held_)
      for (int c = 0; c < 2 * D; ++c)
        if (hn.mask & (1u << c)) p.comp(c)[hn.index] = 0.0;
  }

 private:
  struct HeldNode {
    std::size_t index;
    unsigned mask;
  };

  static void validate(const Lattice<D>& L, const MediumParams& m) {
    for (const Field* f : m.fields()) check_shape(L, *f);
    for (int a = 0; a < D; ++a)
      if (L.n[a] < 2) throw InvalidInput("operator needs at least 2 points per axis");
    check_density(m);
  }

  Lattice<D> L_;
  MediumParams m_;
  BcMode mode_;
  detail::CellStencil<D> cs_;
  detail::CellCoefficients<D> cc_;
  Field minv_ss_, minv_sf_, minv_ff_, inv_w_;
  std::vector<HeldNode> held_;
};

/// Discrete elastic operator at non-outer nodes (outer layer left at zero).
template <int D>
VectorField<D> elastic_operator(const Lattice<D>& L, const VectorField<D>& us, const MediumParams& m) {
  return BiotOperator<D>(L, m).elastic(us);
}

/// (-elastic(u^s) - grad(q div u^f), -grad(q div u^s) - grad(r div u^f)) at
/// nodes not held by the boundary mode.
template <int D>
Pair<D> apply_PD(const Lattice<D>& L, const Pair<D>& u, const MediumParams& m,
                 BcMode mode = BcMode::zero_dirichlet) {
  return BiotOperator<D>(L, m, mode).apply(u);
}

// ---------------------------------------------------------------------------
// Bilinear form and energy

struct FormValue {
  double value = 0.0;
  double scale = 0.0;  // sum of the absolute integrand terms
};

/// B_h over the cells inside `region`, from solid displacements (nodes) and
/// fluid divergences (cell_lattice(L)).
template <int D>
FormValue bilinear_B_div(const Lattice<D>& L, const VectorField<D>& vs, const Field& dvf,
                         const VectorField<D>& ws, const Field& dwf, const MediumParams& m,
                         const Box<D>& region) {
  constexpr int E = detail::CellStencil<D>::E;
  for (int a = 0; a < D; ++a) {
    check_shape(L, vs[a]);
    check_shape(L, ws[a]);
  }
  const Lattice<D> C = cell_lattice(L);
  check_shape(C, dvf);
  check_shape(C, dwf);
  const detail::CellStencil<D> cs(L);
  const detail::CellCoefficients<D> cc(L, m);
  const double inv_h = 1.0 / L.h;
  const auto pv = detail::ptrs<D>(vs), pw = detail::ptrs<D>(ws);
  detail::CellSolid<D> cv, cw;
  FormValue out;
  for_each_node(C, [&](const auto& idx, std::size_t ci) {
    for (int a = 0; a < D; ++a)
      if (idx[a] < region.lo[a] || idx[a] + 1 > region.hi[a]) return;
    const std::size_t base = L.flat(idx);
    cv.load(cs, pv, base, inv_h);
    cw.load(cs, pw, base, inv_h);
    const double mu = cc.mu[ci];
    double t1 = 0.0, t1a = 0.0, t2 = 0.0, t2a = 0.0;
    for (int a = 0; a < D; ++a)
      for (int b = 0; b < D; ++b) {
        for (int j = 0; j < E; ++j) {
          const double x = cv.e[a][b][j] * cw.e[a][b][j];
          t1 += x;
          t1a += std::abs(x);
        }
        const double y = cv.g[a][b] * cw.g[b][a];
        t2 += y;
        t2a += std::abs(y);
      }
    const double tl = cc.lambda[ci] * cv.div * cw.div;
    const double tq = cc.q[ci] * (dvf[ci] * cw.div + cv.div * dwf[ci]);
    const double tr = cc.r[ci] * dvf[ci] * dwf[ci];
    out.value += mu * (t1 / E + t2) + tl + tq + tr;
    out.scale += mu * (t1a / E + t2a) + std::abs(tl) + std::abs(tq) + std::abs(tr);
  });
  const double hd = std::pow(L.h, D);
  out.value *= hd;
  out.scale *= hd;
  return out;
}

template <int D>
FormValue bilinear_B_div(const Lattice<D>& L, const VectorField<D>& vs, const Field& dvf,
                         const VectorField<D>& ws, const Field& dwf, const MediumParams& m) {
  return bilinear_B_div(L, vs, dvf, ws, dwf, m, full_box(L));
}

/// B_h(v, w) over the cells inside a box of the lattice.
template <int D>
double bilinear_B(const Lattice<D>& L, const Pair<D>& v, const Pair<D>& w, const MediumParams& m,
                  const Box<D>& region) {
  return bilinear_B_div(L, v.s, cell_divergence(L, v.f), w.s, cell_divergence(L, w.f), m, region).value;
}

template <int D>
double bilinear_B(const Lattice<D>& L, const Pair<D>& v, const Pair<D>& w, const MediumParams& m) {
  return bilinear_B(L, v, w, m, full_box(L));
}

inline double clamp_seminorm(const FormValue& b) {
  if (b.value < -1e-12 * std::max(b.scale, 1e-300))
    throw HypothesisViolation("B(v,v) is negative beyond round-off: " + std::to_string(b.value));
  return std::sqrt(std::max(b.value, 0.0));
}

template <int D>
double b_seminorm(const Lattice<D>& L, const Quotient<D>& v, const MediumParams& m) {
  return clamp_seminorm(bilinear_B_div(L, v.us, v.div_uf, v.us, v.div_uf, m));
}

template <int D>
double b_seminorm(const Lattice<D>& L, const Pair<D>& v, const MediumParams& m, const Box<D>& region) {
  const Field dvf = cell_divergence(L, v.f);
  return clamp_seminorm(bilinear_B_div(L, v.s, dvf, v.s, dvf, m, region));
}

template <int D>
double b_seminorm(const Lattice<D>& L, const Pair<D>& v, const MediumParams& m) {
  return b_seminorm(L, v, m, full_box(L));
}

template <int D>
Quotient<D> quotient_difference(const Quotient<D>& a, const Quotient<D>& b) {
  Quotient<D> d = a;
  for (int k = 0; k < D; ++k) axpy(-1.0, b.us[k], d.us[k]);
  axpy(-1.0, b.div_uf, d.div_uf);
  return d;
}

struct EnergyBreakdown {
  double kinetic = 0.0;
  double potential = 0.0;
  double total = 0.0;
};

/// Sum of M v . v with trapezoid weights over a box.
template <int D>
double kinetic_energy(const Lattice<D>& L, const Pair<D>& v, const MediumParams& m, const Box<D>& region) {
  const Field w = trapezoid_weights(L, region);
  double k = 0.0;
  for (std::size_t i = 0; i < L.size(); ++i) {
    if (w[i] == 0.0) continue;
    double e = 0.0;
    for (int a = 0; a < D; ++a)
      e += m.rho11[i] * v.s[a][i] * v.s[a][i] + 2.0 * m.rho12[i] * v.s[a][i] * v.f[a][i] +
           m.rho22[i] * v.f[a][i] * v.f[a][i];
    k += w[i] * e;
  }
  return k;
}

template <int D>
double kinetic_energy(const Lattice<D>& L, const Pair<D>& v, const MediumParams& m) {
  return kinetic_energy(L, v, m, full_box(L));
}

template <int D>
EnergyBreakdown energy(const Lattice<D>& L, const Pair<D>& u, const Pair<D>& ut, const MediumParams& m,
                       const Box<D>& region) {
  EnergyBreakdown e;
  e.kinetic = kinetic_energy(L, ut, m, region);
  const Field df = cell_divergence(L, u.f);
  e.potential = std::max(bilinear_B_div(L, u.s, df, u.s, df, m, region).value, 0.0);
  e.total = e.kinetic + e.potential;
  return e;
}

template <int D>
EnergyBreakdown energy(const Lattice<D>& L, const State<D>& s, const MediumParams& m, const Box<D>& region) {
  return energy(L, s.displacement(), s.velocity(), m, region);
}

template <int D>
EnergyBreakdown energy(const Lattice<D>& L, const State<D>& s, const MediumParams& m) {
  return energy(L, s, m, full_box(L));
}

}  // namespace porotr
