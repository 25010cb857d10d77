#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "porotr/biot_ops.hpp"
#include "porotr/error.hpp"
#include "porotr/fields.hpp"
#include "porotr/medium.hpp"

namespace porotr {

struct ExtensionOptions {
  double tol = 1e-10;
  int max_iter = 10000;
};

template <int D>
struct HarmonicExtension {
  Pair<D> phi;           // phi^s and a realization of phi^f, on the Omega lattice
  Field div_phi_f;       // cell divergence of phi^f
  double c = 0.0;        // mean of the cell pressure q div phi^s + r div phi^f
  double pressure_spread = 0.0;  // max |pressure - c| over cells
  double flux = 0.0;     // sum of div phi^f over cells = boundary flux of h^f . nu
  double residual_norm = 0.0;  // relative residual of the linear solve
  int iterations = 0;

  const VectorField<D>& phi_s() const { return phi.s; }
  const VectorField<D>& phi_f() const { return phi.f; }
};

namespace detail {

template <int D>
double dot_free(const Pair<D>& a, const Pair<D>& b, const std::vector<char>& interior) {
  double s = 0.0;
  for (int c = 0; c < 2 * D; ++c) {
    const double* x = a.comp(c).data();
    const double* y = b.comp(c).data();
    for (std::size_t i = 0; i < interior.size(); ++i)
      if (interior[i]) s += x[i] * y[i];
  }
  return s;
}

}  // namespace detail

/// Discrete harmonic extension: phi takes the given values on the boundary
/// of the lattice and minimizes B_h(phi, phi) over the interior values, so
/// that B_h(phi, w) = 0 for every w vanishing on the boundary. Equivalent to
/// the variational discretization of P(D) phi = 0 with Dirichlet data.
/// `start` (optional) is the initial interior guess.
template <int D>
HarmonicExtension<D> harmonic_extension(const Lattice<D>& O, const Pair<D>& boundary_values,
                                        const MediumParams& m, const ExtensionOptions& opt = {},
                                        const Pair<D>* start = nullptr) {
  for (int c = 0; c < 2 * D; ++c) check_shape(O, boundary_values.comp(c));
  for (const Field* f : m.fields()) check_shape(O, *f);
  for (int a = 0; a < D; ++a)
    if (O.n[a] < 3) throw InvalidInput("extension needs at least 3 points per axis");
  const std::size_t n = O.size();
  std::vector<char> interior(n, 0);
  for_each_node(O, [&](const auto& idx, std::size_t i) { interior[i] = !O.on_outer_layer(idx); });
  auto mask = [&](Pair<D>& p) {
    for (int c = 0; c < 2 * D; ++c)
      for (std::size_t i = 0; i < n; ++i)
        if (interior[i] == 0) p.comp(c)[i] = 0.0;
  };
  const BiotOperator<D> op(O, m);
  auto grad = [&](const Pair<D>& u) {
    Pair<D> g;
    op.gradient(u, g);
    mask(g);
    return g;
  };

  // phi = g0 + x with g0 carrying the boundary data and x zero on the boundary.
  Pair<D> g0 = boundary_values;
  for (int c = 0; c < 2 * D; ++c)
    for (std::size_t i = 0; i < n; ++i)
      if (interior[i]) g0.comp(c)[i] = 0.0;
  Pair<D> x = Pair<D>::zeros(n);
  if (start) {
    x = *start;
    mask(x);
  }
  Pair<D> b = grad(g0);
  for (int c = 0; c < 2 * D; ++c)
    for (double& v : b.comp(c)) v = -v;
  mask(b);
  const double bnorm = std::sqrt(detail::dot_free(b, b, interior));

  Pair<D> r = b;
  {
    const Pair<D> Ax = grad(x);
    axpy(-1.0, Ax, r);
  }
  const Pair<D> diag = op.gradient_diagonal();
  auto precond = [&](const Pair<D>& res) {
    Pair<D> z = res;
    for (int c = 0; c < 2 * D; ++c)
      for (std::size_t i = 0; i < n; ++i) z.comp(c)[i] = interior[i] ? res.comp(c)[i] / diag.comp(c)[i] : 0.0;
    return z;
  };

  HarmonicExtension<D> ext;
  double rnorm = std::sqrt(detail::dot_free(r, r, interior));
  int it = 0;
  if (bnorm > 0.0 && rnorm > opt.tol * bnorm) {
    Pair<D> z = precond(r);
    Pair<D> p = z;
    double rz = detail::dot_free(r, z, interior);
    for (it = 1; it <= opt.max_iter; ++it) {
      const Pair<D> Ap = grad(p);
      const double curv = detail::dot_free(p, Ap, interior);
      if (!(curv > 0.0))
        throw SolverFailure("non-positive curvature " + std::to_string(curv) + " in the extension solve");
      const double alpha = rz / curv;
      axpy(alpha, p, x);
      axpy(-alpha, Ap, r);
      rnorm = std::sqrt(detail::dot_free(r, r, interior));
      if (rnorm <= opt.tol * bnorm) break;
      z = precond(r);
      const double rz_new = detail::dot_free(r, z, interior);
      const double beta = rz_new / rz;
      rz = rz_new;
      for (int c = 0; c < 2 * D; ++c)
        for (std::size_t i = 0; i < n; ++i) p.comp(c)[i] = z.comp(c)[i] + beta * p.comp(c)[i];
    }
    if (it > opt.max_iter)
      throw SolverFailure("extension solve did not converge: relative residual " +
                          std::to_string(rnorm / bnorm) + " after " + std::to_string(opt.max_iter) +
                          " iterations");
  }
  ext.iterations = it;
  ext.residual_norm = bnorm > 0.0 ? rnorm / bnorm : 0.0;
  ext.phi = g0;
  axpy(1.0, x, ext.phi);

  ext.div_phi_f = cell_divergence(O, ext.phi.f);
  const Field ds = cell_divergence(O, ext.phi.s);
  const auto& cc = op.cell_coefficients();
  Field pi(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) pi[i] = cc.q[i] * ds[i] + cc.r[i] * ext.div_phi_f[i];
  const double vol = std::pow(O.h, D) * static_cast<double>(ds.size());
  ext.c = integrate_cells(O, pi, full_box(O)) / vol;
  for (double v : pi) ext.pressure_spread = std::max(ext.pressure_spread, std::abs(v - ext.c));
  ext.flux = integrate_cells(O, ext.div_phi_f, full_box(O));
  return ext;
}

/// Boundary values given per boundary node (ordering of boundary_nodes over
/// the whole lattice), 2D components each.
template <int D>
HarmonicExtension<D> harmonic_extension(const Lattice<D>& O, const std::vector<double>& hT,
                                        const MediumParams& m, const ExtensionOptions& opt = {}) {
  const auto nodes = boundary_nodes(O, full_box(O));
  if (hT.size() != nodes.size() * 2 * D) throw ShapeMismatch("boundary data size does not match the grid");
  Pair<D> bv = Pair<D>::zeros(O.size());
  for (std::size_t j = 0; j < nodes.size(); ++j)
    for (int c = 0; c < 2 * D; ++c) bv.comp(c)[nodes[j]] = hT[j * 2 * D + c];
  return harmonic_extension(O, bv, m, opt);
}

template <int D>
double extension_b_norm(const Lattice<D>& O, const HarmonicExtension<D>& ext, const MediumParams& m) {
  return b_seminorm(O, Quotient<D>{ext.phi.s, ext.div_phi_f}, m);
}

}  // namespace porotr
