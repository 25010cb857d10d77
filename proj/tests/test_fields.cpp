#include <gtest/gtest.h>

#include <cmath>

#include "porotr/fields.hpp"
#include "porotr/phantom.hpp"
#include "test_util.hpp"

using namespace porotr;
using test::max_abs;

namespace {

using X = std::array<double, 2>;

VectorField<2> vfield(const Lattice<2>& L, double (*f0)(const X&), double (*f1)(const X&)) {
  VectorField<2> v;
  v[0] = sample(L, f0);
  v[1] = sample(L, f1);
  return v;
}

double zero(const X&) { return 0.0; }
double x0(const X& x) { return x[0]; }
double x1(const X& x) { return x[1]; }
double minus_x1(const X& x) { return -x[1]; }
double three(const X&) { return 3.0; }
double minus_two(const X&) { return -2.0; }

}  // namespace

TEST(Divergence, LinearFieldExactEverywhere) {
  const Lattice<2> L = test::unit_square(10);
  const Field d = divergence(L, vfield(L, x0, zero));
  for (double v : d) EXPECT_NEAR(v, 1.0, 1e-12);
}

TEST(Divergence, ConstantIsZero) {
  const Lattice<2> L = test::unit_square(10);
  EXPECT_LT(max_abs(divergence(L, vfield(L, three, minus_two))), 1e-12);
}

TEST(Divergence, QuadraticExactIncludingBoundary) {
  const Lattice<2> L = test::unit_square(8);
  VectorField<2> v;
  v[0] = sample(L, [](const X& x) { return x[0] * x[0] + x[0] * x[1]; });
  v[1] = sample(L, [](const X& x) { return x[1] * x[1]; });
  const Field d = divergence(L, v);
  for_each_node(L, [&](const auto& idx, std::size_t i) {
    const X p = L.point(idx);
    EXPECT_NEAR(d[i], 2 * p[0] + p[1] + 2 * p[1], 1e-12);
  });
}

TEST(Divergence, TooFewPoints) {
  const Lattice<2> L({2, 5}, {0, 0}, 0.25);
  VectorField<2> v;
  v[0].assign(L.size(), 0.0);
  v[1].assign(L.size(), 0.0);
  EXPECT_THROW(divergence(L, v), InvalidInput);
}

TEST(Curl, GradientOfQuadraticIsCurlFree) {
  const Lattice<2> L = test::unit_square(12);
  const Field chi = sample(L, [](const X& x) { return x[0] * x[0] - 3 * x[0] * x[1] + 2 * x[1] * x[1]; });
  const Field c = curl(L, gradient(L, chi))[0];
  EXPECT_LT(test::interior_max(L, c, 1), 1e-11);
}

TEST(Curl, RotationIsTwo) {
  const Lattice<2> L = test::unit_square(10);
  const Field c = curl(L, vfield(L, minus_x1, x0))[0];
  for (double v : c) EXPECT_NEAR(v, 2.0, 1e-12);
  EXPECT_LT(max_abs(curl(L, vfield(L, three, minus_two))[0]), 1e-12);
}

TEST(Curl, ThreeDimensionalRotation) {
  const Lattice<3> L({6, 6, 6}, {0, 0, 0}, 0.2);
  VectorField<3> v;
  v[0] = sample(L, [](const std::array<double, 3>& x) { return -x[1]; });
  v[1] = sample(L, [](const std::array<double, 3>& x) { return x[0]; });
  v[2].assign(L.size(), 0.0);
  const auto c = curl(L, v);
  ASSERT_EQ(c.size(), 3u);
  EXPECT_LT(max_abs(c[0]), 1e-12);
  EXPECT_LT(max_abs(c[1]), 1e-12);
  for (double x : c[2]) EXPECT_NEAR(x, 2.0, 1e-12);
}

TEST(Strain, Examples) {
  const Lattice<2> L = test::unit_square(8);
  auto check = [&](const VectorField<2>& v, double e00, double e01, double e11) {
    const auto e = strain(L, v);
    ASSERT_EQ(e.size(), 3u);
    for (std::size_t i = 0; i < L.size(); ++i) {
      EXPECT_NEAR(e[sym_index<2>(0, 0)][i], e00, 1e-12);
      EXPECT_NEAR(e[sym_index<2>(0, 1)][i], e01, 1e-12);
      EXPECT_NEAR(e[sym_index<2>(1, 0)][i], e01, 1e-12);
      EXPECT_NEAR(e[sym_index<2>(1, 1)][i], e11, 1e-12);
    }
  };
  check(vfield(L, x0, zero), 1, 0, 0);
  check(vfield(L, x1, x0), 0, 1, 0);
  check(vfield(L, minus_x1, x0), 0, 0, 0);
}

TEST(Operators, SecondOrderConvergence) {
  // v = (sin(2x) cos(y), exp(x) sin(3y)) on the unit square, errors in max norm
  std::vector<double> hs, ed, ec, es;
  for (int n : {16, 32, 64, 128}) {
    const Lattice<2> L = test::unit_square(n);
    VectorField<2> v;
    v[0] = sample(L, [](const X& x) { return std::sin(2 * x[0]) * std::cos(x[1]); });
    v[1] = sample(L, [](const X& x) { return std::exp(x[0]) * std::sin(3 * x[1]); });
    const Field d = divergence(L, v);
    const Field c = curl(L, v)[0];
    const auto e = strain(L, v);
    double md = 0, mc = 0, ms = 0;
    for_each_node(L, [&](const auto& idx, std::size_t i) {
      const X p = L.point(idx);
      const double u0x = 2 * std::cos(2 * p[0]) * std::cos(p[1]);
      const double u0y = -std::sin(2 * p[0]) * std::sin(p[1]);
      const double u1x = std::exp(p[0]) * std::sin(3 * p[1]);
      const double u1y = 3 * std::exp(p[0]) * std::cos(3 * p[1]);
      md = std::max(md, std::abs(d[i] - (u0x + u1y)));
      mc = std::max(mc, std::abs(c[i] - (u1x - u0y)));
      ms = std::max(ms, std::abs(e[sym_index<2>(0, 1)][i] - 0.5 * (u0y + u1x)));
    });
    hs.push_back(L.h);
    ed.push_back(md);
    ec.push_back(mc);
    es.push_back(ms);
  }
  EXPECT_GE(detail::observed_order(hs, ed), 1.9);
  EXPECT_GE(detail::observed_order(hs, ec), 1.9);
  EXPECT_GE(detail::observed_order(hs, es), 1.9);
}

TEST(Operators, Linearity) {
  const Lattice<2> L = test::unit_square(16);
  Uniform U(4);
  VectorField<2> u, v, w;
  for (int a = 0; a < 2; ++a) {
    u[a].resize(L.size());
    v[a].resize(L.size());
    for (std::size_t i = 0; i < L.size(); ++i) u[a][i] = U(-1, 1), v[a][i] = U(-1, 1);
  }
  const double al = 0.7, be = -1.3;
  for (int a = 0; a < 2; ++a) {
    w[a] = u[a];
    for (double& x : w[a]) x *= al;
    axpy(be, v[a], w[a]);
  }
  auto lin = [&](const Field& fu, const Field& fv, const Field& fw) {
    double m = 0;
    for (std::size_t i = 0; i < fw.size(); ++i) m = std::max(m, std::abs(fw[i] - al * fu[i] - be * fv[i]));
    return m;
  };
  EXPECT_LT(lin(divergence(L, u), divergence(L, v), divergence(L, w)), 1e-12);
  EXPECT_LT(lin(curl(L, u)[0], curl(L, v)[0], curl(L, w)[0]), 1e-12);
  EXPECT_LT(lin(cell_divergence(L, u), cell_divergence(L, v), cell_divergence(L, w)), 1e-12);
}

TEST(Operators, CenteredCurlPotentialIsDivergenceFree) {
  const Lattice<2> L = test::unit_square(20);
  const Field psi = sample(L, [](const X& x) { return std::sin(3 * x[0]) * std::cos(2 * x[1]) + x[0] * x[1]; });
  VectorField<2> g;
  g[0] = derivative(L, psi, 1);
  g[1] = derivative(L, psi, 0);
  for (double& x : g[1]) x = -x;
  // Stencils commute two layers in from the boundary.
  EXPECT_LT(test::interior_max(L, divergence(L, g), 2), 1e-12);
}

TEST(Integrate, ConstantsAndLinear) {
  const Lattice<2> L = test::unit_square(7);
  EXPECT_NEAR(integrate(L, Field(L.size(), 1.0)), 1.0, 1e-15);
  EXPECT_NEAR(integrate(L, sample(L, x0)), 0.5, 1e-15);
  const Lattice<2> R({9, 5}, {-1.0, 2.0}, 0.25);
  EXPECT_NEAR(integrate(R, Field(R.size(), 1.0)), 2.0 * 1.0, 1e-15);
}

TEST(Integrate, SubBox) {
  const Lattice<2> L = test::unit_square(8);
  const Box<2> b{{2, 2}, {6, 6}};
  EXPECT_NEAR(integrate(L, Field(L.size(), 1.0), b), 0.25, 1e-15);
  EXPECT_THROW(integrate(L, Field(L.size(), 1.0), Box<2>{{0, 0}, {9, 3}}), InvalidInput);
}

TEST(BoundaryNodes, Counts) {
  const Lattice<2> L5({5, 5}, {0, 0}, 0.25);
  EXPECT_EQ(boundary_nodes(L5, full_box(L5)).size(), 16u);
  const Lattice<3> L3({5, 5, 5}, {0, 0, 0}, 0.25);
  EXPECT_EQ(boundary_nodes(L3, full_box(L3)).size(), 98u);
  const Lattice<2> L33({3, 3}, {0, 0}, 0.5);
  const auto n = boundary_nodes(L33, full_box(L33));
  EXPECT_EQ(n.size(), 8u);
  EXPECT_TRUE(std::is_sorted(n.begin(), n.end()));
  EXPECT_EQ(std::find(n.begin(), n.end(), 4u), n.end());
}

TEST(BoundaryNodes, OmegaInsidePadding) {
  GridSpec<2> g;
  g.omega_min = {0, 0};
  g.omega_max = {1, 1};
  g.h = 0.25;
  g.pad_cells = 3;
  const auto n = boundary_nodes(g);
  EXPECT_EQ(n.size(), 16u);
  const Lattice<2> L = g.lattice();
  for (std::size_t i : n) EXPECT_TRUE(g.omega_box().on_face(L.unflatten(i)));
}

TEST(GridSpec, Validation) {
  GridSpec<2> g;
  g.omega_min = {0, 0};
  g.omega_max = {1, 1};
  g.h = 0.3;
  EXPECT_THROW(g.validate(), InvalidInput);
  g.h = 0.5;
  EXPECT_THROW(g.validate(), InvalidInput);  // 3 points per axis
  g.pad_cells = 1;
  EXPECT_NO_THROW(g.validate());
  g.pad_cells = -1;
  EXPECT_THROW(g.validate(), InvalidInput);
}

TEST(Quotient, FluidLinearField) {
  const Lattice<2> L = test::unit_square(8);
  Pair<2> p = Pair<2>::zeros(L.size());
  p.f[0] = sample(L, x0);
  const Quotient<2> q = project_quotient(L, p);
  EXPECT_EQ(max_abs(q.us[0]), 0.0);
  EXPECT_EQ(max_abs(q.us[1]), 0.0);
  ASSERT_EQ(q.div_uf.size(), 64u);
  for (double v : q.div_uf) EXPECT_NEAR(v, 1.0, 1e-12);
}

TEST(Quotient, StreamFieldIsZero) {
  const Lattice<2> L = test::unit_square(16);
  const Field psi = sample(L, [](const X& x) { return test::bump(x[0], x[1], 0.2, 0.8); });
  Pair<2> p = Pair<2>::zeros(L.size());
  p.f = stream_field(L, psi);
  const Quotient<2> q = project_quotient(L, p);
  EXPECT_LT(max_abs(q.div_uf), 1e-13 * max_abs(p));
}

TEST(SubLattice, RestrictEmbedRoundTrip) {
  const Lattice<2> L = test::unit_square(10);
  const Box<2> b{{2, 3}, {7, 8}};
  Uniform U(2);
  Field f(L.size());
  for (double& x : f) x = U(-1, 1);
  const Field sub = restrict_field(L, f, b);
  EXPECT_EQ(sub.size(), 36u);
  const Field back = embed_field(L, sub, b);
  for_each_node(L, [&](const auto& idx, std::size_t i) { EXPECT_EQ(back[i], b.contains(idx) ? f[i] : 0.0); });
}
