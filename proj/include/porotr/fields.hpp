#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "porotr/error.hpp"

namespace porotr {

using Field = std::vector<double>;

template <int D>
struct VectorField : std::array<Field, D> {};

/// Uniform collocated lattice: node counts, strides (last axis fastest),
/// coordinates of node 0 and the spacing.
template <int D>
struct Lattice {
  static_assert(D == 2 || D == 3, "dimension must be 2 or 3");
  using Index = std::array<int, D>;

  Index n{};
  std::array<std::ptrdiff_t, D> stride{};
  std::array<double, D> origin{};
  double h = 1.0;

  Lattice() = default;
  Lattice(const Index& counts, const std::array<double, D>& org, double spacing)
      : n(counts), origin(org), h(spacing) {
    std::ptrdiff_t s = 1;
    for (int a = D - 1; a >= 0; --a) {
      stride[a] = s;
      s *= n[a];
    }
  }

  std::size_t size() const {
    std::size_t s = 1;
    for (int a = 0; a < D; ++a) s *= static_cast<std::size_t>(n[a]);
    return s;
  }

  std::size_t flat(const Index& idx) const {
    std::ptrdiff_t f = 0;
    for (int a = 0; a < D; ++a) f += idx[a] * stride[a];
    return static_cast<std::size_t>(f);
  }

  Index unflatten(std::size_t i) const {
    Index idx{};
    for (int a = 0; a < D; ++a) {
      idx[a] = static_cast<int>(i / static_cast<std::size_t>(stride[a]));
      i -= static_cast<std::size_t>(idx[a]) * static_cast<std::size_t>(stride[a]);
    }
    return idx;
  }

  std::array<double, D> point(const Index& idx) const {
    std::array<double, D> x{};
    for (int a = 0; a < D; ++a) x[a] = origin[a] + idx[a] * h;
    return x;
  }

  bool on_outer_layer(const Index& idx) const {
    for (int a = 0; a < D; ++a)
      if (idx[a] == 0 || idx[a] == n[a] - 1) return true;
    return false;
  }

  bool operator==(const Lattice& o) const {
    return n == o.n && origin == o.origin && h == o.h;
  }
};

/// Visit every node in flat order, passing the multi-index and flat index.
template <int D, class F>
void for_each_node(const Lattice<D>& L, F&& f) {
  typename Lattice<D>::Index idx{};
  const std::size_t total = L.size();
  for (std::size_t i = 0; i < total; ++i) {
    f(idx, i);
    for (int a = D - 1; a >= 0; --a) {
      if (++idx[a] < L.n[a]) break;
      idx[a] = 0;
    }
  }
}

/// Inclusive index box inside a lattice.
template <int D>
struct Box {
  std::array<int, D> lo{};
  std::array<int, D> hi{};

  std::array<int, D> extent() const {
    std::array<int, D> e{};
    for (int a = 0; a < D; ++a) e[a] = hi[a] - lo[a] + 1;
    return e;
  }
  bool contains(const std::array<int, D>& idx) const {
    for (int a = 0; a < D; ++a)
      if (idx[a] < lo[a] || idx[a] > hi[a]) return false;
    return true;
  }
  bool on_face(const std::array<int, D>& idx) const {
    if (!contains(idx)) return false;
    for (int a = 0; a < D; ++a)
      if (idx[a] == lo[a] || idx[a] == hi[a]) return true;
    return false;
  }
};

template <int D>
Box<D> full_box(const Lattice<D>& L) {
  Box<D> b;
  for (int a = 0; a < D; ++a) {
    b.lo[a] = 0;
    b.hi[a] = L.n[a] - 1;
  }
  return b;
}

/// Omega (an axis-aligned box) plus a padding of pad_cells on every side.
template <int D>
struct GridSpec {
  std::array<double, D> omega_min{};
  std::array<double, D> omega_max{};
  double h = 0.0;
  int pad_cells = 0;

  int omega_nodes(int a) const {
    return static_cast<int>(std::lround((omega_max[a] - omega_min[a]) / h)) + 1;
  }

  void validate() const {
    if (!(h > 0.0) || !std::isfinite(h)) throw InvalidInput("grid spacing must be positive");
    if (pad_cells < 0) throw InvalidInput("pad_cells must be non-negative");
    for (int a = 0; a < D; ++a) {
      const double cells = (omega_max[a] - omega_min[a]) / h;
      if (!(cells > 0.0) || std::abs(cells - std::round(cells)) > 1e-9 * std::max(1.0, cells))
        throw InvalidInput("omega extent along axis " + std::to_string(a) +
                           " is not an integer multiple of h");
      if (omega_nodes(a) + 2 * pad_cells < 5)
        throw InvalidInput("fewer than 5 grid points along axis " + std::to_string(a));
    }
  }

  Lattice<D> lattice() const {
    typename Lattice<D>::Index n{};
    std::array<double, D> org{};
    for (int a = 0; a < D; ++a) {
      n[a] = omega_nodes(a) + 2 * pad_cells;
      org[a] = omega_min[a] - pad_cells * h;
    }
    return Lattice<D>(n, org, h);
  }

  /// Same Omega without padding.
  GridSpec omega() const {
    GridSpec g = *this;
    g.pad_cells = 0;
    return g;
  }

  /// Index box of Omega inside lattice().
  Box<D> omega_box() const {
    Box<D> b;
    for (int a = 0; a < D; ++a) {
      b.lo[a] = pad_cells;
      b.hi[a] = pad_cells + omega_nodes(a) - 1;
    }
    return b;
  }

  double diameter() const {
    double s = 0.0;
    for (int a = 0; a < D; ++a) s += (omega_max[a] - omega_min[a]) * (omega_max[a] - omega_min[a]);
    return std::sqrt(s);
  }
};

template <int D>
struct Pair {
  VectorField<D> s;
  VectorField<D> f;

  static Pair zeros(std::size_t n) {
    Pair p;
    for (int a = 0; a < D; ++a) {
      p.s[a].assign(n, 0.0);
      p.f[a].assign(n, 0.0);
    }
    return p;
  }
  std::size_t size() const { return s[0].size(); }
  Field& comp(int c) { return c < D ? s[c] : f[c - D]; }
  const Field& comp(int c) const { return c < D ? s[c] : f[c - D]; }
};

/// Displacement pair plus its time derivative.
template <int D>
struct State {
  VectorField<D> us, uf;
  VectorField<D> us_t, uf_t;

  Pair<D> displacement() const { return Pair<D>{us, uf}; }
  Pair<D> velocity() const { return Pair<D>{us_t, uf_t}; }
};

/// Element of the quotient space: solid displacement (nodes) and fluid
/// divergence (cell centres).
template <int D>
struct Quotient {
  VectorField<D> us;
  Field div_uf;
};

// ---------------------------------------------------------------------------
// Linear algebra on fields

inline void axpy(double alpha, const Field& x, Field& y) {
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += alpha * x[i];
}

template <int D>
void axpy(double alpha, const Pair<D>& x, Pair<D>& y) {
  for (int c = 0; c < 2 * D; ++c) axpy(alpha, x.comp(c), y.comp(c));
}

template <int D>
Pair<D> combine(double a, const Pair<D>& x, double b, const Pair<D>& y) {
  Pair<D> z = Pair<D>::zeros(x.size());
  for (int c = 0; c < 2 * D; ++c)
    for (std::size_t i = 0; i < x.size(); ++i) z.comp(c)[i] = a * x.comp(c)[i] + b * y.comp(c)[i];
  return z;
}

template <int D>
double max_abs(const Pair<D>& p) {
  double m = 0.0;
  for (int c = 0; c < 2 * D; ++c)
    for (double v : p.comp(c)) m = std::max(m, std::abs(v));
  return m;
}

template <int D>
void check_shape(const Lattice<D>& L, const Field& f) {
  if (f.size() != L.size())
    throw ShapeMismatch("field has " + std::to_string(f.size()) + " values, lattice has " +
                        std::to_string(L.size()));
}

// ---------------------------------------------------------------------------
// Difference operators

/// First derivative along axis a: centered in the interior, one-sided
/// second order on the outermost layer.
template <int D>
inline double diff(const Lattice<D>& L, const Field& u, std::size_t i, int ia, int a) {
  const std::ptrdiff_t s = L.stride[a];
  if (ia == 0) return (-3.0 * u[i] + 4.0 * u[i + s] - u[i + 2 * s]) / (2.0 * L.h);
  if (ia == L.n[a] - 1) return (3.0 * u[i] - 4.0 * u[i - s] + u[i - 2 * s]) / (2.0 * L.h);
  return (u[i + s] - u[i - s]) / (2.0 * L.h);
}

template <int D>
Field derivative(const Lattice<D>& L, const Field& u, int a) {
  check_shape(L, u);
  if (L.n[a] < 3) throw InvalidInput("derivative needs at least 3 points per axis");
  Field out(u.size());
  for_each_node(L, [&](const auto& idx, std::size_t i) { out[i] = diff(L, u, i, idx[a], a); });
  return out;
}

template <int D>
Field divergence(const Lattice<D>& L, const VectorField<D>& v) {
  for (int a = 0; a < D; ++a) {
    check_shape(L, v[a]);
    if (L.n[a] < 3) throw InvalidInput("divergence needs at least 3 points per axis");
  }
  Field out(L.size(), 0.0);
  for_each_node(L, [&](const auto& idx, std::size_t i) {
    double s = 0.0;
    for (int a = 0; a < D; ++a) s += diff(L, v[a], i, idx[a], a);
    out[i] = s;
  });
  return out;
}

template <int D>
VectorField<D> gradient(const Lattice<D>& L, const Field& u) {
  VectorField<D> g;
  for (int a = 0; a < D; ++a) g[a] = derivative(L, u, a);
  return g;
}

/// Scalar rotation d1 v2 - d2 v1 in 2D (one component); full curl in 3D.
template <int D>
std::vector<Field> curl(const Lattice<D>& L, const VectorField<D>& v) {
  if constexpr (D == 2) {
    Field r = derivative(L, v[1], 0);
    axpy(-1.0, derivative(L, v[0], 1), r);
    return {r};
  } else {
    std::vector<Field> out;
    for (int c = 0; c < 3; ++c) {
      const int j = (c + 1) % 3, k = (c + 2) % 3;
      Field r = derivative(L, v[k], j);
      axpy(-1.0, derivative(L, v[j], k), r);
      out.push_back(std::move(r));
    }
    return out;
  }
}

/// Index of the (a,b) entry in the packed upper-triangular strain storage.
template <int D>
constexpr int sym_index(int a, int b) {
  if (a > b) std::swap(a, b);
  return a * D - a * (a - 1) / 2 + (b - a);
}

/// Symmetrized gradient, packed as (00, 01, .., 0D-1, 11, ..).
template <int D>
std::vector<Field> strain(const Lattice<D>& L, const VectorField<D>& v) {
  std::array<std::array<Field, D>, D> g;
  for (int a = 0; a < D; ++a)
    for (int b = 0; b < D; ++b) g[a][b] = derivative(L, v[a], b);
  std::vector<Field> e(D * (D + 1) / 2);
  for (int a = 0; a < D; ++a)
    for (int b = a; b < D; ++b) {
      Field& out = e[sym_index<D>(a, b)];
      out.resize(L.size());
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = 0.5 * (g[a][b][i] + g[b][a][i]);
    }
  return e;
}

// ---------------------------------------------------------------------------
// Cell-centred operators (the discretization used by the wave operator)

/// Lattice of cell centres: one point per cell, offset by h/2.
template <int D>
Lattice<D> cell_lattice(const Lattice<D>& L) {
  typename Lattice<D>::Index n{};
  std::array<double, D> org{};
  for (int a = 0; a < D; ++a) {
    n[a] = L.n[a] - 1;
    org[a] = L.origin[a] + 0.5 * L.h;
  }
  return Lattice<D>(n, org, L.h);
}

/// Derivative of u along axis a at the cell centres: the mean of the
/// 2^(D-1) edge differences of the cell parallel to a.
template <int D>
Field cell_derivative(const Lattice<D>& L, const Field& u, int a) {
  check_shape(L, u);
  const Lattice<D> C = cell_lattice(L);
  Field out(C.size());
  constexpr int E = 1 << (D - 1);
  for_each_node(C, [&](const auto& idx, std::size_t ci) {
    const std::size_t base = L.flat(idx);
    double s = 0.0;
    for (int k = 0; k < (1 << D); ++k) {
      if (k & (1 << a)) continue;
      std::ptrdiff_t off = 0;
      for (int b = 0; b < D; ++b)
        if (k & (1 << b)) off += L.stride[b];
      s += u[base + off + L.stride[a]] - u[base + off];
    }
    out[ci] = s / (E * L.h);
  });
  return out;
}

/// Divergence at the cell centres; exact for linear fields.
template <int D>
Field cell_divergence(const Lattice<D>& L, const VectorField<D>& v) {
  Field out = cell_derivative(L, v[0], 0);
  for (int a = 1; a < D; ++a) axpy(1.0, cell_derivative(L, v[a], a), out);
  return out;
}

/// Mean of the 2^D corner values of every cell.
template <int D>
Field cell_average(const Lattice<D>& L, const Field& u) {
  check_shape(L, u);
  const Lattice<D> C = cell_lattice(L);
  Field out(C.size());
  for_each_node(C, [&](const auto& idx, std::size_t ci) {
    const std::size_t base = L.flat(idx);
    double s = 0.0;
    for (int k = 0; k < (1 << D); ++k) {
      std::ptrdiff_t off = 0;
      for (int b = 0; b < D; ++b)
        if (k & (1 << b)) off += L.stride[b];
      s += u[base + off];
    }
    out[ci] = s / (1 << D);
  });
  return out;
}

/// Midpoint sum over the cells lying inside box (cell field on cell_lattice(L)).
template <int D>
double integrate_cells(const Lattice<D>& L, const Field& cf, const Box<D>& box) {
  const Lattice<D> C = cell_lattice(L);
  check_shape(C, cf);
  double s = 0.0;
  for_each_node(C, [&](const auto& idx, std::size_t ci) {
    for (int a = 0; a < D; ++a)
      if (idx[a] < box.lo[a] || idx[a] + 1 > box.hi[a]) return;
    s += cf[ci];
  });
  return s * std::pow(L.h, D);
}

// ---------------------------------------------------------------------------
// Quadrature

/// Trapezoid weights over a box of the lattice (zero outside the box).
template <int D>
Field trapezoid_weights(const Lattice<D>& L, const Box<D>& box) {
  Field w(L.size(), 0.0);
  const double cell = std::pow(L.h, D);
  for_each_node(L, [&](const auto& idx, std::size_t i) {
    if (!box.contains(idx)) return;
    double wt = cell;
    for (int a = 0; a < D; ++a)
      if (box.lo[a] != box.hi[a] && (idx[a] == box.lo[a] || idx[a] == box.hi[a])) wt *= 0.5;
    w[i] = wt;
  });
  return w;
}

template <int D>
double integrate(const Lattice<D>& L, const Field& f, const Box<D>& box) {
  check_shape(L, f);
  for (int a = 0; a < D; ++a)
    if (box.lo[a] < 0 || box.hi[a] >= L.n[a] || box.lo[a] > box.hi[a])
      throw InvalidInput("integration region outside the grid");
  const Field w = trapezoid_weights(L, box);
  double s = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) s += w[i] * f[i];
  return s;
}

template <int D>
double integrate(const Lattice<D>& L, const Field& f) {
  return integrate(L, f, full_box(L));
}

// ---------------------------------------------------------------------------
// Boundary indexing and sub-lattices

/// Flat indices of the nodes on the faces of box, ascending (lexicographic).
template <int D>
std::vector<std::size_t> boundary_nodes(const Lattice<D>& L, const Box<D>& box) {
  std::vector<std::size_t> out;
  for_each_node(L, [&](const auto& idx, std::size_t i) {
    if (box.on_face(idx)) out.push_back(i);
  });
  return out;
}

template <int D>
std::vector<std::size_t> boundary_nodes(const GridSpec<D>& g) {
  return boundary_nodes(g.lattice(), g.omega_box());
}

/// Version tag of the boundary-node ordering written into trace headers.
inline constexpr int kNodeOrderingVersion = 1;

template <int D>
Lattice<D> sub_lattice(const Lattice<D>& L, const Box<D>& box) {
  typename Lattice<D>::Index n = box.extent();
  return Lattice<D>(n, L.point(box.lo), L.h);
}

template <int D>
Field restrict_field(const Lattice<D>& L, const Field& f, const Box<D>& box) {
  const Lattice<D> S = sub_lattice(L, box);
  Field out(S.size());
  for_each_node(S, [&](const auto& idx, std::size_t i) {
    typename Lattice<D>::Index g{};
    for (int a = 0; a < D; ++a) g[a] = idx[a] + box.lo[a];
    out[i] = f[L.flat(g)];
  });
  return out;
}

template <int D>
Field embed_field(const Lattice<D>& L, const Field& sub, const Box<D>& box) {
  const Lattice<D> S = sub_lattice(L, box);
  check_shape(S, sub);
  Field out(L.size(), 0.0);
  for_each_node(S, [&](const auto& idx, std::size_t i) {
    typename Lattice<D>::Index g{};
    for (int a = 0; a < D; ++a) g[a] = idx[a] + box.lo[a];
    out[L.flat(g)] = sub[i];
  });
  return out;
}

template <int D>
Pair<D> restrict_pair(const Lattice<D>& L, const Pair<D>& p, const Box<D>& box) {
  Pair<D> out;
  for (int c = 0; c < 2 * D; ++c) out.comp(c) = restrict_field(L, p.comp(c), box);
  return out;
}

template <int D>
Pair<D> embed_pair(const Lattice<D>& L, const Pair<D>& p, const Box<D>& box) {
  Pair<D> out;
  for (int c = 0; c < 2 * D; ++c) out.comp(c) = embed_field(L, p.comp(c), box);
  return out;
}

template <int D, class Fn>
Field sample(const Lattice<D>& L, Fn&& fn) {
  Field out(L.size());
  for_each_node(L, [&](const auto& idx, std::size_t i) { out[i] = fn(L.point(idx)); });
  return out;
}

/// (u^s, div u^f) with the fluid divergence taken at the cell centres, the
/// divergence through which the wave operator sees u^f.
template <int D>
Quotient<D> project_quotient(const Lattice<D>& L, const Pair<D>& p) {
  return Quotient<D>{p.s, cell_divergence(L, p.f)};
}

template <int D>
Quotient<D> project_quotient(const Lattice<D>& L, const State<D>& s) {
  return Quotient<D>{s.us, cell_divergence(L, s.uf)};
}

}  // namespace porotr
