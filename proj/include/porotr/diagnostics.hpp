#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <type_traits>
#include <vector>

#include "porotr/fields.hpp"
#include "porotr/medium.hpp"

namespace porotr {

/// The substituted variables (div u^s, div u^f, curl u^s), centered differences.
template <int D>
struct ScalarVars {
  Field v_s, v_f;
  std::vector<Field> curl_us;
};

template <int D>
ScalarVars<D> principally_scalar_vars(const Lattice<D>& L, const State<D>& s) {
  return {divergence(L, s.us), divergence(L, s.uf), curl(L, s.us)};
}

/// max |Q^{-1} A Q - diag(a1, a2)| relative to a1, over all nodes.
inline double diagonalization_defect(const MediumParams& m) {
  double worst = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    const Moduli v = m.at(i);
    const Mat2 A = speed_matrix(v);
    const SpeedEigen e = speed_eigen(v);
    const Mat2& Q = e.Q;
    const double det = Q[0][0] * Q[1][1] - Q[0][1] * Q[1][0];
    const Mat2 Qi{{{Q[1][1] / det, -Q[0][1] / det}, {-Q[1][0] / det, Q[0][0] / det}}};
    Mat2 AQ{}, R{};
    for (int r = 0; r < 2; ++r)
      for (int c = 0; c < 2; ++c) AQ[r][c] = A[r][0] * Q[0][c] + A[r][1] * Q[1][c];
    for (int r = 0; r < 2; ++r)
      for (int c = 0; c < 2; ++c) R[r][c] = Qi[r][0] * AQ[0][c] + Qi[r][1] * AQ[1][c];
    const double d = std::max({std::abs(R[0][0] - e.a1), std::abs(R[1][1] - e.a2), std::abs(R[0][1]),
                               std::abs(R[1][0])});
    worst = std::max(worst, d / e.a1);
  }
  return worst;
}

struct SpeedSample {
  double t = 0.0;
  double radius = 0.0;  // support radius at the threshold
  double bound = 0.0;   // r0 + c_max t + 3h
  double margin = 0.0;  // bound - radius
};

struct FiniteSpeedReport {
  std::vector<SpeedSample> samples;
  bool pass = true;
  double min_margin = 0.0;
};

/// Support radius about `center` of u^s (nodes) and the cell divergence of
/// u^f (cell centres); each field is thresholded against its own maximum.
template <int D>
double support_radius(const Lattice<D>& L, const Pair<D>& u, const std::type_identity_t<std::array<double, D>>& center,
                      double threshold) {
  auto dist = [&](const std::array<double, D>& x) {
    double s = 0.0;
    for (int a = 0; a < D; ++a) s += (x[a] - center[a]) * (x[a] - center[a]);
    return std::sqrt(s);
  };
  double ms = 0.0;
  for (int a = 0; a < D; ++a)
    for (double v : u.s[a]) ms = std::max(ms, std::abs(v));
  double radius = 0.0;
  if (ms > 0.0)
    for_each_node(L, [&](const auto& idx, std::size_t i) {
      for (int a = 0; a < D; ++a)
        if (std::abs(u.s[a][i]) > threshold * ms) {
          radius = std::max(radius, dist(L.point(idx)));
          return;
        }
    });
  const Lattice<D> C = cell_lattice(L);
  const Field df = cell_divergence(L, u.f);
  double mf = 0.0;
  for (double v : df) mf = std::max(mf, std::abs(v));
  if (mf > 0.0)
    for_each_node(C, [&](const auto& idx, std::size_t i) {
      if (std::abs(df[i]) > threshold * mf) radius = std::max(radius, dist(C.point(idx)));
    });
  return radius;
}

/// Checks radius <= r0 + c_max t + 3h for each (time, field) snapshot.
template <int D>
FiniteSpeedReport finite_speed_check(const Lattice<D>& L, const std::vector<std::pair<double, Pair<D>>>& snaps,
                                     const std::type_identity_t<std::array<double, D>>& center, double r0, double c_max,
                                     double threshold = 1e-8) {
  FiniteSpeedReport rep;
  rep.min_margin = std::numeric_limits<double>::infinity();
  for (const auto& [t, u] : snaps) {
    SpeedSample s;
    s.t = t;
    s.radius = support_radius(L, u, center, threshold);
    s.bound = r0 + c_max * t + 3.0 * L.h;
    s.margin = s.bound - s.radius;
    rep.min_margin = std::min(rep.min_margin, s.margin);
    if (s.margin < 0.0) rep.pass = false;
    rep.samples.push_back(s);
  }
  return rep;
}

}  // namespace porotr
