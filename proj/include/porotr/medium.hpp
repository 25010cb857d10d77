#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "porotr/error.hpp"
#include "porotr/fields.hpp"

namespace porotr {

/// Pointwise coefficient values.
struct Moduli {
  double rho11 = 1, rho12 = 0, rho22 = 1;
  double mu = 1, lambda = 1, q = 0, r = 1;
};

/// The seven coefficient fields sampled on a lattice.
struct MediumParams {
  Field rho11, rho12, rho22, mu, lambda, q, r;

  static MediumParams constant(std::size_t n, const Moduli& m) {
    return {Field(n, m.rho11), Field(n, m.rho12), Field(n, m.rho22), Field(n, m.mu),
            Field(n, m.lambda), Field(n, m.q),    Field(n, m.r)};
  }

  std::size_t size() const { return mu.size(); }

  Moduli at(std::size_t i) const {
    return {rho11[i], rho12[i], rho22[i], mu[i], lambda[i], q[i], r[i]};
  }

  std::array<const Field*, 7> fields() const {
    return {&rho11, &rho12, &rho22, &mu, &lambda, &q, &r};
  }
  std::array<Field*, 7> fields() { return {&rho11, &rho12, &rho22, &mu, &lambda, &q, &r}; }

  bool is_constant() const {
    for (const Field* f : fields())
      for (double v : *f)
        if (v != (*f)[0]) return false;
    return true;
  }
};

inline const std::array<const char*, 7> kModuliNames = {"rho11", "rho12", "rho22", "mu",
                                                        "lambda", "q", "r"};

template <int D, class Fn>
MediumParams sample_medium(const Lattice<D>& L, Fn&& fn) {
  MediumParams m = MediumParams::constant(L.size(), Moduli{});
  for_each_node(L, [&](const auto& idx, std::size_t i) {
    const Moduli v = fn(L.point(idx));
    m.rho11[i] = v.rho11;
    m.rho12[i] = v.rho12;
    m.rho22[i] = v.rho22;
    m.mu[i] = v.mu;
    m.lambda[i] = v.lambda;
    m.q[i] = v.q;
    m.r[i] = v.r;
  });
  return m;
}

template <int D>
MediumParams restrict_medium(const Lattice<D>& L, const MediumParams& m, const Box<D>& box) {
  MediumParams out;
  auto src = m.fields();
  auto dst = out.fields();
  for (int k = 0; k < 7; ++k) *dst[k] = restrict_field(L, *src[k], box);
  return out;
}

// ---------------------------------------------------------------------------
// Hypotheses

struct HypothesisCheck {
  std::string name;
  double margin = std::numeric_limits<double>::infinity();
  std::size_t index = 0;  // flat index of the worst node
  bool pass = true;
};

struct ValidationReport {
  HypothesisCheck h1, h2, h3;
  double max_gradient = 0.0;  // largest difference-quotient gradient over all fields
  bool gradient_ok = true;
  bool pass = true;

  std::string summary() const {
    std::string s;
    for (const HypothesisCheck* c : {&h1, &h2, &h3})
      if (!c->pass) s += c->name + " fails at node " + std::to_string(c->index) + " (margin " + std::to_string(c->margin) + "); ";
    if (!gradient_ok) s += "coefficient gradient " + std::to_string(max_gradient) + " exceeds the bound; ";
    return s.empty() ? "ok" : s.substr(0, s.size() - 2);
  }
};

namespace detail {

inline void require_finite(const MediumParams& m) {
  auto f = m.fields();
  for (int k = 0; k < 7; ++k)
    for (std::size_t i = 0; i < f[k]->size(); ++i)
      if (!std::isfinite((*f[k])[i]))
        throw InvalidInput(std::string("non-finite value of ") + kModuliNames[k] + " at node " +
                           std::to_string(i));
}

inline void track(HypothesisCheck& c, double margin, std::size_t i) {
  if (margin < c.margin) {
    c.margin = margin;
    c.index = i;
  }
}

}  // namespace detail

/// H1 positivity is measured on rho11, rho22, mu, lambda, q, r against floor
/// (rho12 may vanish or be negative). The gradient bound applies to all seven.
template <int D>
ValidationReport validate_hypotheses(const Lattice<D>& L, const MediumParams& m, double floor,
                                     double gradient_bound = 1e3) {
  detail::require_finite(m);
  for (const Field* f : m.fields()) check_shape(L, *f);
  ValidationReport rep;
  rep.h1.name = "H1";
  rep.h2.name = "H2";
  rep.h3.name = "H3";
  for (std::size_t i = 0; i < m.size(); ++i) {
    const Moduli v = m.at(i);
    const double lo = std::min({v.rho11, v.rho22, v.mu, v.lambda, v.q, v.r});
    detail::track(rep.h1, lo - floor, i);
    detail::track(rep.h2, v.rho11 * v.rho22 - v.rho12 * v.rho12, i);
    detail::track(rep.h3, v.lambda * v.r - v.q * v.q, i);
  }
  bool can_diff = true;
  for (int a = 0; a < D; ++a) can_diff = can_diff && L.n[a] >= 3;
  if (can_diff) {
    for (const Field* f : m.fields())
      for (int a = 0; a < D; ++a)
        for (double g : derivative(L, *f, a)) rep.max_gradient = std::max(rep.max_gradient, std::abs(g));
  }
  rep.gradient_ok = rep.max_gradient < gradient_bound;
  rep.h1.pass = rep.h1.margin > 0 && rep.gradient_ok;
  rep.h2.pass = rep.h2.margin > 0;
  rep.h3.pass = rep.h3.margin > 0;
  rep.pass = rep.h1.pass && rep.h2.pass && rep.h3.pass;
  return rep;
}

/// Pointwise variant for constant media.
inline ValidationReport validate_hypotheses(const Moduli& v, double floor) {
  MediumParams m = MediumParams::constant(1, v);
  return validate_hypotheses(Lattice<2>({1, 1}, {0.0, 0.0}, 1.0), m, floor);
}

// ---------------------------------------------------------------------------
// Derived coefficients

struct DerivedPoint {
  double rho, mu1, lambda1, q1, mu2, r2, q2;
};

inline DerivedPoint derive(const Moduli& v) {
  const double rho = v.rho11 * v.rho22 - v.rho12 * v.rho12;
  if (!(rho > 0.0)) throw HypothesisViolation("density determinant is not positive");
  return {rho,
          v.rho22 * v.mu / rho,
          (v.rho22 * v.lambda - v.rho12 * v.q) / rho,
          (v.rho22 * v.q - v.rho12 * v.r) / rho,
          v.rho12 * v.mu / rho,
          (v.rho11 * v.r - v.rho12 * v.q) / rho,
          (v.rho11 * v.q - v.rho12 * (v.mu + v.lambda)) / rho};
}

struct DerivedCoeffs {
  Field rho, mu1, lambda1, q1, mu2, r2, q2;
};

inline DerivedCoeffs derived_coefficients(const MediumParams& m) {
  detail::require_finite(m);
  const std::size_t n = m.size();
  DerivedCoeffs d{Field(n), Field(n), Field(n), Field(n), Field(n), Field(n), Field(n)};
  for (std::size_t i = 0; i < n; ++i) {
    const DerivedPoint p = derive(m.at(i));
    d.rho[i] = p.rho;
    d.mu1[i] = p.mu1;
    d.lambda1[i] = p.lambda1;
    d.q1[i] = p.q1;
    d.mu2[i] = p.mu2;
    d.r2[i] = p.r2;
    d.q2[i] = p.q2;
  }
  return d;
}

// ---------------------------------------------------------------------------
// Wave speeds

using Mat2 = std::array<std::array<double, 2>, 2>;

/// A = (1/rho) [[rho22, -rho12], [-rho12, rho11]] [[2mu+lambda, q], [q, r]].
inline Mat2 speed_matrix(const Moduli& v) {
  const double rho = v.rho11 * v.rho22 - v.rho12 * v.rho12;
  const Mat2 N{{{v.rho22, -v.rho12}, {-v.rho12, v.rho11}}};
  const Mat2 K{{{2 * v.mu + v.lambda, v.q}, {v.q, v.r}}};
  Mat2 A{};
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) A[i][j] = (N[i][0] * K[0][j] + N[i][1] * K[1][j]) / rho;
  return A;
}

struct SpeedEigen {
  double a1 = 0, a2 = 0;
  Mat2 Q{};  // columns are eigenvectors of A for a1, a2
};

/// Eigen-decomposition of A via the similar symmetric matrix L^T N L / rho,
/// where K = L L^T is the Cholesky factor of the stiffness block.
inline SpeedEigen speed_eigen(const Moduli& v) {
  const double rho = v.rho11 * v.rho22 - v.rho12 * v.rho12;
  if (!(rho > 0.0)) throw HypothesisViolation("density determinant is not positive");
  const double k11 = 2 * v.mu + v.lambda, k12 = v.q, k22 = v.r;
  if (!(k11 > 0.0)) throw HypothesisViolation("2mu+lambda is not positive");
  const double l11 = std::sqrt(k11), l21 = k12 / l11, d = k22 - l21 * l21;
  if (!(d > 0.0)) throw HypothesisViolation("stiffness block is not positive definite");
  const double l22 = std::sqrt(d);
  // S = L^T N L / rho with L = [[l11, 0], [l21, l22]]
  const double n11 = v.rho22, n12 = -v.rho12, n22 = v.rho11;
  const double s11 = (l11 * (n11 * l11 + n12 * l21) + l21 * (n12 * l11 + n22 * l21)) / rho;
  const double s12 = (l11 * n12 * l22 + l21 * n22 * l22) / rho;
  const double s22 = (l22 * n22 * l22) / rho;
  const double mean = 0.5 * (s11 + s22), half = 0.5 * (s11 - s22);
  const double rad = std::hypot(half, s12);
  SpeedEigen e;
  e.a1 = mean + rad;
  e.a2 = mean >= rad ? (s11 * s22 - s12 * s12) / e.a1 : mean - rad;
  if (!(e.a2 > 0.0)) throw HypothesisViolation("wave-speed matrix has a non-positive eigenvalue");
  // Eigenvectors of S, mapped back by A = L^{-T} S L^T  =>  x = L^{-T} y.
  auto vec = [&](double a) {
    std::array<double, 2> y = std::abs(s11 - a) + std::abs(s12) > std::abs(s22 - a) + std::abs(s12)
                                  ? std::array<double, 2>{-s12, s11 - a}
                                  : std::array<double, 2>{s22 - a, -s12};
    if (std::abs(y[0]) + std::abs(y[1]) == 0.0) y = {1.0, 0.0};
    // solve L^T x = y, L^T = [[l11, l21], [0, l22]]
    const double x2 = y[1] / l22;
    const double x1 = (y[0] - l21 * x2) / l11;
    const double nrm = std::hypot(x1, x2);
    return std::array<double, 2>{x1 / nrm, x2 / nrm};
  };
  if (rad == 0.0) {
    e.Q = Mat2{{{1.0, 0.0}, {0.0, 1.0}}};
  } else {
    const auto q1 = vec(e.a1), q2 = vec(e.a2);
    e.Q = Mat2{{{q1[0], q2[0]}, {q1[1], q2[1]}}};
  }
  return e;
}

struct SpeedInfo {
  Field a1, a2;
  double c_max = 0.0;
};

inline SpeedInfo wave_speed_matrix(const MediumParams& m) {
  detail::require_finite(m);
  SpeedInfo s{Field(m.size()), Field(m.size()), 0.0};
  double top = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    const Moduli v = m.at(i);
    const SpeedEigen e = speed_eigen(v);
    s.a1[i] = e.a1;
    s.a2[i] = e.a2;
    top = std::max({top, e.a1, derive(v).mu1});
  }
  s.c_max = std::sqrt(top);
  return s;
}

// ---------------------------------------------------------------------------
// Unique-continuation inequalities

struct UcReport {
  double min_slack = std::numeric_limits<double>::infinity();
  std::size_t worst_index = 0;
  int worst_field = 0;
  bool holds = true;         // both inequalities hold at every node of the ball
  bool theta_exists = true;  // some theta > 0 satisfies them
  double theta_sup = std::numeric_limits<double>::infinity();
  std::size_t nodes_checked = 0;
};

/// Checks theta^2 a (a + a^{-1/2} |t grad a|) < a + x.grad a / 2 at |t| = 3T/2
/// and theta^2 a <= 1 for each field a, over the closed ball |x| <= R + c_max 3T/2.
template <int D>
UcReport check_uc_fields(const Lattice<D>& L, const std::vector<const Field*>& as, double theta,
                         double T, double R, double c_max) {
  const double tw = 1.5 * T;
  const double radius = R + c_max * tw;
  for (int a = 0; a < D; ++a) {
    const double lo = L.origin[a], hi = L.origin[a] + (L.n[a] - 1) * L.h;
    if (lo > -radius + 1e-12 * radius || hi < radius - 1e-12 * radius)
      throw DomainTooSmall("grid does not cover the ball of radius " + std::to_string(radius));
  }
  UcReport rep;
  double theta2_sup = std::numeric_limits<double>::infinity();
  for (int k = 0; k < static_cast<int>(as.size()); ++k) {
    const Field& a = *as[k];
    check_shape(L, a);
    const VectorField<D> g = gradient(L, a);
    for_each_node(L, [&](const auto& idx, std::size_t i) {
      const auto x = L.point(idx);
      double r2 = 0.0, xg = 0.0, gn = 0.0;
      for (int d = 0; d < D; ++d) {
        r2 += x[d] * x[d];
        xg += x[d] * g[d][i];
        gn += g[d][i] * g[d][i];
      }
      if (r2 > radius * radius * (1 + 1e-12)) return;
      ++rep.nodes_checked;
      const double av = a[i];
      const double growth = av * (av + tw * std::sqrt(gn) / std::sqrt(av));
      const double rhs = av + 0.5 * xg;
      const double s1 = rhs - theta * theta * growth;
      const double s2 = 1.0 - theta * theta * av;
      const double s = std::min(s1, s2);
      if (s < rep.min_slack) {
        rep.min_slack = s;
        rep.worst_index = i;
        rep.worst_field = k;
      }
      if (!(s1 > 0.0) || s2 < 0.0) rep.holds = false;
      if (!(rhs > 0.0)) rep.theta_exists = false;
      theta2_sup = std::min({theta2_sup, rhs / growth, 1.0 / av});
    });
  }
  rep.theta_sup = rep.theta_exists ? std::sqrt(std::max(theta2_sup, 0.0)) : 0.0;
  return rep;
}

/// Runs check_uc_fields on a1, a2 and mu1 of the medium.
template <int D>
UcReport check_uc_inequalities(const Lattice<D>& L, const MediumParams& m, double theta, double T,
                               double R) {
  const SpeedInfo sp = wave_speed_matrix(m);
  const DerivedCoeffs dc = derived_coefficients(m);
  return check_uc_fields(L, {&sp.a1, &sp.a2, &dc.mu1}, theta, T, R, sp.c_max);
}

}  // namespace porotr
