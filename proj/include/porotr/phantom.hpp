#pragma once

#include <array>
#include <cmath>
#include <string>

#include "porotr/error.hpp"
#include "porotr/fields.hpp"
#include "porotr/forward.hpp"

namespace porotr {

enum class PhantomKind { gaussian, smoothed_ball, divfree_gauge };

inline std::string to_string(PhantomKind k) {
  switch (k) {
    case PhantomKind::gaussian: return "gaussian";
    case PhantomKind::smoothed_ball: return "smoothed-ball";
    case PhantomKind::divfree_gauge: return "divfree-gauge";
  }
  return "?";
}

inline PhantomKind parse_phantom_kind(const std::string& s) {
  if (s == "gaussian") return PhantomKind::gaussian;
  if (s == "smoothed-ball") return PhantomKind::smoothed_ball;
  if (s == "divfree-gauge") return PhantomKind::divfree_gauge;
  throw InvalidInput("unknown phantom kind '" + s + "'");
}

/// Target component: "fs<k>" (solid axis k), "ff<k>" (fluid axis k) or
/// "gauge" (stream potential, fluid only).
struct PhantomTarget {
  bool fluid = false;
  int axis = 0;

  static PhantomTarget parse(const std::string& s, int dim) {
    if (s == "gauge") return {true, -1};
    if (s.size() == 3 && (s.rfind("fs", 0) == 0 || s.rfind("ff", 0) == 0) && s[2] >= '0' &&
        s[2] < '0' + dim)
      return {s[1] == 'f', s[2] - '0'};
    throw InvalidInput("phantom component must be fs<k>, ff<k> or gauge, got '" + s + "'");
  }
  std::string str() const {
    if (axis < 0) return "gauge";
    return std::string(fluid ? "ff" : "fs") + static_cast<char>('0' + axis);
  }
};

template <int D>
struct PhantomSpec {
  PhantomKind kind = PhantomKind::gaussian;
  std::array<double, D> center{};
  double width = 0.1;
  double amplitude = 1.0;
  PhantomTarget target{};

  /// Radius outside which the phantom vanishes.
  double support_radius(double h) const {
    switch (kind) {
      case PhantomKind::gaussian: return 4.0 * width;
      case PhantomKind::smoothed_ball: return width;
      case PhantomKind::divfree_gauge: return 4.0 * width + 2.0 * h;
    }
    return 0.0;
  }
};

namespace detail {

// C-infinity step: 0 for x <= 0, 1 for x >= 1.
inline double smooth_step(double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double a = std::exp(-1.0 / x), b = std::exp(-1.0 / (1.0 - x));
  return a / (a + b);
}

}  // namespace detail

/// exp(-rho^2 / 2w^2), smoothly tapered to zero between 3w and 4w.
inline double tapered_gaussian(double rho, double w) {
  return std::exp(-rho * rho / (2.0 * w * w)) * (1.0 - detail::smooth_step((rho - 3.0 * w) / w));
}

/// 1 up to w/2, smooth fall-off to 0 at w.
inline double smoothed_ball(double rho, double w) {
  return 1.0 - detail::smooth_step((rho / w - 0.5) / 0.5);
}

/// curl of a nodal stream potential psi built from the cell-centred
/// derivatives, so that cell_divergence of the result vanishes identically.
/// 2D: (T_1 psi, -T_0 psi); 3D: curl of (0, 0, psi).
template <int D>
VectorField<D> stream_field(const Lattice<D>& L, const Field& psi) {
  check_shape(L, psi);
  const Lattice<D> C = cell_lattice(L);
  VectorField<D> g;
  for (int a = 0; a < D; ++a) g[a].assign(L.size(), 0.0);
  const Field t0 = cell_derivative(L, psi, 0), t1 = cell_derivative(L, psi, 1);
  for_each_node(C, [&](const auto& idx, std::size_t ci) {
    const std::size_t i = L.flat(idx);
    g[0][i] = t1[ci];
    g[1][i] = -t0[ci];
  });
  return g;
}

/// Samples the phantom on grid.lattice().
template <int D>
SourceSpec<D> make_phantom(const PhantomSpec<D>& spec, const GridSpec<D>& grid,
                           SourceKind kind = SourceKind::delta) {
  grid.validate();
  if (!(spec.width > 0.0) || !std::isfinite(spec.width)) throw InvalidPhantom("phantom width must be positive");
  if (!std::isfinite(spec.amplitude)) throw InvalidPhantom("phantom amplitude must be finite");
  if (spec.kind == PhantomKind::divfree_gauge) {
    if (spec.target.axis >= 0) throw InvalidPhantom("divfree-gauge phantoms take component 'gauge'");
  } else if (spec.target.axis < 0 || spec.target.axis >= D) {
    throw InvalidPhantom("phantom component axis out of range");
  }
  const double rs = spec.support_radius(grid.h);
  const double margin = 2.0 * grid.h;
  for (int a = 0; a < D; ++a)
    if (spec.center[a] - rs < grid.omega_min[a] + margin - 1e-12 ||
        spec.center[a] + rs > grid.omega_max[a] - margin + 1e-12)
      throw InvalidPhantom("phantom support (radius " + std::to_string(rs) +
                           ") leaves Omega minus a 2-cell margin along axis " + std::to_string(a));

  const Lattice<D> L = grid.lattice();
  auto rho = [&](const std::array<double, D>& x) {
    double s = 0.0;
    for (int a = 0; a < D; ++a) s += (x[a] - spec.center[a]) * (x[a] - spec.center[a]);
    return std::sqrt(s);
  };
  SourceSpec<D> src{Pair<D>::zeros(L.size()), kind};
  if (spec.amplitude == 0.0) return src;
  switch (spec.kind) {
    case PhantomKind::gaussian:
    case PhantomKind::smoothed_ball: {
      Field& out = spec.target.fluid ? src.f.f[spec.target.axis] : src.f.s[spec.target.axis];
      const bool gauss = spec.kind == PhantomKind::gaussian;
      for_each_node(L, [&](const auto& idx, std::size_t i) {
        const double r = rho(L.point(idx));
        out[i] = spec.amplitude * (gauss ? tapered_gaussian(r, spec.width) : smoothed_ball(r, spec.width));
      });
      break;
    }
    case PhantomKind::divfree_gauge: {
      const Field psi = sample(L, [&](const std::array<double, D>& x) {
        return spec.amplitude * spec.width * tapered_gaussian(rho(x), spec.width);
      });
      src.f.f = stream_field(L, psi);
      break;
    }
  }
  try {
    check_interior_support(grid, src.f, 2);
  } catch (const InvalidInput& e) {
    throw InvalidPhantom(e.what());
  }
  return src;
}

}  // namespace porotr
