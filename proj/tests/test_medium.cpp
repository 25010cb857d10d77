#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "porotr/diagnostics.hpp"
#include "porotr/medium.hpp"
#include "test_util.hpp"

using namespace porotr;

namespace {

const Moduli kCoupled{2.0, 1.0, 3.0, 1.0, 2.0, 1.0, 1.0};

}  // namespace

TEST(Validate, CoupledExampleMargins) {
  const ValidationReport r = validate_hypotheses(kCoupled, 0.1);
  EXPECT_TRUE(r.pass);
  EXPECT_DOUBLE_EQ(r.h2.margin, 5.0);
  EXPECT_DOUBLE_EQ(r.h3.margin, 1.0);
  EXPECT_DOUBLE_EQ(r.h1.margin, 0.9);
}

TEST(Validate, H3Failure) {
  Moduli v = test::kExample;
  v.lambda = 1;
  v.q = 2;
  v.r = 1;
  const ValidationReport r = validate_hypotheses(v, 0.1);
  EXPECT_FALSE(r.pass);
  EXPECT_FALSE(r.h3.pass);
  EXPECT_DOUBLE_EQ(r.h3.margin, -3.0);
  EXPECT_NE(r.summary().find("H3"), std::string::npos);
}

TEST(Validate, DiagonalDensity) {
  Moduli v{1, 0, 1, 1, 1, 1, 1};
  v.q = 0.5;
  const ValidationReport r = validate_hypotheses(v, 0.1);
  EXPECT_TRUE(r.pass);
  EXPECT_DOUBLE_EQ(r.h2.margin, 1.0);
}

TEST(Validate, FloorAndWorstLocation) {
  const Lattice<2> L = test::unit_square(8);
  MediumParams m = MediumParams::constant(L.size(), test::kExample);
  m.mu[40] = 0.05;
  const ValidationReport r = validate_hypotheses(L, m, 0.1, 1e6);
  EXPECT_FALSE(r.h1.pass);
  EXPECT_EQ(r.h1.index, 40u);
  EXPECT_NEAR(r.h1.margin, -0.05, 1e-15);
  EXPECT_TRUE(r.h2.pass);
}

TEST(Validate, GradientBound) {
  const Lattice<2> L = test::unit_square(8);
  MediumParams m = MediumParams::constant(L.size(), test::kExample);
  m.mu[40] = 3.0;  // jump of 2 over h = 1/8 -> difference quotient 8
  EXPECT_TRUE(validate_hypotheses(L, m, 0.1, 100.0).pass);
  const ValidationReport r = validate_hypotheses(L, m, 0.1, 5.0);
  EXPECT_FALSE(r.gradient_ok);
  EXPECT_FALSE(r.pass);
}

TEST(Validate, NonFiniteRejected) {
  Moduli v = test::kExample;
  v.r = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(validate_hypotheses(v, 0.1), InvalidInput);
}

TEST(Derived, CoupledExample) {
  const DerivedPoint p = derive(kCoupled);
  EXPECT_NEAR(p.rho, 5.0, 1e-15);
  EXPECT_NEAR(p.mu1, 0.6, 1e-15);
  EXPECT_NEAR(p.lambda1, 1.0, 1e-15);
  EXPECT_NEAR(p.q1, 0.4, 1e-15);
  EXPECT_NEAR(p.mu2, 0.2, 1e-15);
  EXPECT_NEAR(p.r2, 0.2, 1e-15);
  EXPECT_NEAR(p.q2, -0.2, 1e-15);
}

TEST(Derived, DecoupledDensities) {
  const Moduli v{1, 0, 1, 1.5, 2.5, 0.7, 3.0};
  const DerivedPoint p = derive(v);
  EXPECT_EQ(p.mu1, v.mu);
  EXPECT_EQ(p.lambda1, v.lambda);
  EXPECT_EQ(p.q1, v.q);
  EXPECT_EQ(p.mu2, 0.0);
  EXPECT_EQ(p.r2, v.r);
  EXPECT_EQ(p.q2, v.q);
}

TEST(Derived, SingularDensityThrows) {
  const Moduli v{1, 1, 1, 1, 1, 0.5, 1};
  EXPECT_THROW(derive(v), HypothesisViolation);
}

TEST(Derived, RecombinationOnRandomMedia) {
  Uniform U(11);
  for (int k = 0; k < 200; ++k) {
    const Moduli v = random_medium(U);
    const DerivedPoint p = derive(v);
    const double s = 1e-13 * (1 + std::abs(v.rho22 * v.mu) + std::abs(v.rho11 * v.r) + std::abs(v.rho12 * v.lambda));
    EXPECT_NEAR(p.rho * p.mu1, v.rho22 * v.mu, s);
    EXPECT_NEAR(p.rho * p.lambda1, v.rho22 * v.lambda - v.rho12 * v.q, s);
    EXPECT_NEAR(p.rho * p.q1, v.rho22 * v.q - v.rho12 * v.r, s);
    EXPECT_NEAR(p.rho * p.mu2, v.rho12 * v.mu, s);
    EXPECT_NEAR(p.rho * p.r2, v.rho11 * v.r - v.rho12 * v.q, s);
    EXPECT_NEAR(p.rho * p.q2, v.rho11 * v.q - v.rho12 * (v.mu + v.lambda), s);
    EXPECT_GT(p.rho, 0.0);
    EXPECT_GT(p.mu1, 0.0);
  }
}

TEST(Speed, ExampleMedium) {
  const Mat2 A = speed_matrix(test::kExample);
  EXPECT_DOUBLE_EQ(A[0][0], 3.0);
  EXPECT_DOUBLE_EQ(A[0][1], 1.0);
  EXPECT_DOUBLE_EQ(A[1][0], 1.0);
  EXPECT_DOUBLE_EQ(A[1][1], 2.0);
  const SpeedEigen e = speed_eigen(test::kExample);
  EXPECT_NEAR(e.a1, (5 + std::sqrt(5.0)) / 2, 1e-14);
  EXPECT_NEAR(e.a2, (5 - std::sqrt(5.0)) / 2, 1e-14);
  const SpeedInfo s = wave_speed_matrix(MediumParams::constant(4, test::kExample));
  EXPECT_NEAR(s.c_max, 1.902113032590307, 1e-12);
}

TEST(Speed, DiagonalLimit) {
  const Moduli v{1, 0, 1, 1.0, 2.0, 0.0, 1.5};
  const SpeedEigen e = speed_eigen(v);
  EXPECT_NEAR(e.a1, 4.0, 1e-14);
  EXPECT_NEAR(e.a2, 1.5, 1e-14);
}

TEST(Speed, CoupledExample) {
  // (1/5)[[3,-1],[-1,2]] [[4,1],[1,1]] = (1/5)[[11,2],[-2,1]]: trace 12/5, det 3/5
  const Mat2 A = speed_matrix(kCoupled);
  EXPECT_NEAR(A[0][0], 11.0 / 5, 1e-15);
  EXPECT_NEAR(A[0][1], 2.0 / 5, 1e-15);
  EXPECT_NEAR(A[1][0], -2.0 / 5, 1e-15);
  EXPECT_NEAR(A[1][1], 1.0 / 5, 1e-15);
  const double tr = 12.0 / 5, det = 3.0 / 5;
  const double disc = std::sqrt(tr * tr - 4 * det);
  const SpeedEigen e = speed_eigen(kCoupled);
  EXPECT_NEAR(e.a1, (tr + disc) / 2, 1e-14);
  EXPECT_NEAR(e.a2, (tr - disc) / 2, 1e-14);
  EXPECT_GT(e.a2, 0.0);
}

TEST(Speed, TraceDeterminantAndEigenvectorsOnRandomMedia) {
  Uniform U(5);
  for (int k = 0; k < 200; ++k) {
    const Moduli v = random_medium(U);
    const Mat2 A = speed_matrix(v);
    const SpeedEigen e = speed_eigen(v);
    const double tr = A[0][0] + A[1][1], det = A[0][0] * A[1][1] - A[0][1] * A[1][0];
    EXPECT_NEAR(e.a1 + e.a2, tr, 1e-12 * std::abs(tr));
    EXPECT_NEAR(e.a1 * e.a2, det, 1e-12 * std::abs(tr * tr));
    EXPECT_GE(e.a1, e.a2);
    EXPECT_GT(e.a2, 0.0);
    for (int j = 0; j < 2; ++j) {
      const double lam = j == 0 ? e.a1 : e.a2;
      for (int i = 0; i < 2; ++i) {
        const double Aq = A[i][0] * e.Q[0][j] + A[i][1] * e.Q[1][j];
        EXPECT_NEAR(Aq, lam * e.Q[i][j], 1e-11 * e.a1);
      }
    }
  }
}

TEST(Speed, CmaxOverField) {
  const Lattice<2> L = test::unit_square(4);
  Uniform U(3);
  MediumParams m = MediumParams::constant(L.size(), test::kExample);
  for (std::size_t i = 0; i < m.size(); ++i) {
    const Moduli v = random_medium(U);
    m.rho11[i] = v.rho11, m.rho12[i] = v.rho12, m.rho22[i] = v.rho22;
    m.mu[i] = v.mu, m.lambda[i] = v.lambda, m.q[i] = v.q, m.r[i] = v.r;
  }
  const SpeedInfo s = wave_speed_matrix(m);
  const DerivedCoeffs d = derived_coefficients(m);
  double top = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) top = std::max({top, s.a1[i], s.a2[i], d.mu1[i]});
  EXPECT_DOUBLE_EQ(s.c_max, std::sqrt(top));
  EXPECT_LT(diagonalization_defect(m), 1e-12);
}

TEST(Uc, ConstantThreshold) {
  const double c_max = std::sqrt(3.618);
  const Lattice<2> L({41, 41}, {-5.0, -5.0}, 0.25);
  const Field a(L.size(), 3.618);
  const UcReport r = check_uc_fields(L, {&a}, 0.5, 1.0, 1.0, c_max);
  EXPECT_NEAR(r.theta_sup, 1.0 / std::sqrt(3.618), 1e-12);
  EXPECT_NEAR(r.theta_sup, 0.5257, 1e-4);
  EXPECT_TRUE(r.holds);
  EXPECT_FALSE(check_uc_fields(L, {&a}, 0.53, 1.0, 1.0, c_max).holds);
}

TEST(Uc, ThetaZeroHoldsOnSmoothMedia) {
  const Lattice<2> L({61, 61}, {-6.0, -6.0}, 0.2);
  Uniform U(9);
  for (int k = 0; k < 10; ++k) {
    const double b0 = U(-0.05, 0.05), b1 = U(-0.05, 0.05), s = U(0.5, 3.0);
    const Field a = sample(L, [&](const std::array<double, 2>& x) {
      return s * (1.0 + b0 * std::sin(x[0]) + b1 * std::cos(0.5 * x[1]));
    });
    EXPECT_TRUE(check_uc_fields(L, {&a}, 0.0, 1.0, 1.0, 2.0).holds);
  }
}

TEST(Uc, LinearFieldAgainstDenseScan) {
  const double theta = 0.5, T = 1.0, R = 1.0, c_max = 1.0;
  const double tw = 1.5 * T, radius = R + c_max * tw;
  const double h = 0.05;
  const int n = static_cast<int>(std::lround(2 * radius / h)) + 1;
  const Lattice<2> L({n, n}, {-radius, -radius}, h);
  const Field a = sample(L, [](const std::array<double, 2>& x) { return 1.0 + 0.1 * x[0]; });
  const UcReport rep = check_uc_fields(L, {&a}, theta, T, R, c_max);

  // Dense oracle: analytic gradient (0.1, 0), 10x finer polar scan of the disc.
  double oracle = std::numeric_limits<double>::infinity();
  const int nr = 500, nt = 2000;
  for (int i = 0; i <= nr; ++i)
    for (int j = 0; j < nt; ++j) {
      const double rr = radius * i / nr, ang = 2 * M_PI * j / nt;
      const double x0 = rr * std::cos(ang);
      const double av = 1.0 + 0.1 * x0;
      const double s1 = av + 0.5 * 0.1 * x0 - theta * theta * av * (av + tw * 0.1 / std::sqrt(av));
      const double s2 = 1.0 - theta * theta * av;
      oracle = std::min({oracle, s1, s2});
    }
  EXPECT_GT(oracle, 0.0);
  EXPECT_TRUE(rep.holds);
  EXPECT_NEAR(rep.min_slack, oracle, 1e-6);
}

TEST(Uc, DomainTooSmall) {
  const Lattice<2> L = test::unit_square(8);
  const MediumParams m = MediumParams::constant(L.size(), test::kExample);
  EXPECT_THROW(check_uc_inequalities(L, m, 0.1, 1.0, 1.0), DomainTooSmall);
}

TEST(Uc, ExampleMediumSuite) {
  const SuiteResult r = suite_uc(test::kExample);
  EXPECT_TRUE(r.pass) << r.detail;
}
