#include <gtest/gtest.h>

#include <cmath>

#include "porotr/extension.hpp"
#include "porotr/forward.hpp"
#include "test_util.hpp"

using namespace porotr;
using test::max_abs;

namespace {

using X = std::array<double, 2>;

ExtensionOptions tight() {
  ExtensionOptions o;
  o.tol = 1e-13;
  return o;
}

/// Terminal state of a short forward run, restricted to Omega.
Pair<2> forward_output(const VerifySetup& s, double h, double T) {
  const SimConfig<2> c = make_sim(s, h, T);
  const ForwardResult<2> r = simulate_forward(mixed_source(s, c.grid), c);
  return restrict_pair(c.grid.lattice(), r.final.displacement(), c.grid.omega_box());
}

}  // namespace

TEST(Extension, ConstantData) {
  const Lattice<2> O = test::unit_square(16);
  const MediumParams m = MediumParams::constant(O.size(), test::kExample);
  Pair<2> bv = Pair<2>::zeros(O.size());
  const double vals[4] = {0.3, -1.2, 2.0, 0.7};
  for (int k = 0; k < 4; ++k) bv.comp(k).assign(O.size(), vals[k]);
  const HarmonicExtension<2> e = harmonic_extension(O, bv, m, tight());
  for (int k = 0; k < 4; ++k)
    for (double v : e.phi.comp(k)) EXPECT_NEAR(v, vals[k], 1e-9);
  EXPECT_NEAR(e.c, 0.0, 1e-9);
  EXPECT_LT(extension_b_norm(O, e, m), 1e-9);
}

TEST(Extension, LinearDataAndPressureConstant) {
  const Lattice<2> O = test::unit_square(16);
  const MediumParams m = MediumParams::constant(O.size(), test::kExample);
  Pair<2> bv = Pair<2>::zeros(O.size());
  bv.s[0] = sample(O, [](const X& x) { return x[0]; });
  bv.f[0] = bv.s[0];
  const HarmonicExtension<2> e = harmonic_extension(O, bv, m, tight());
  EXPECT_LT(e.residual_norm, 1e-13);
  for (std::size_t i = 0; i < O.size(); ++i) {
    EXPECT_NEAR(e.phi.s[0][i], bv.s[0][i], 1e-10);
    EXPECT_NEAR(e.phi.s[1][i], 0.0, 1e-10);
  }
  for (double d : e.div_phi_f) EXPECT_NEAR(d, 1.0, 1e-10);
  EXPECT_NEAR(e.c, test::kExample.q + test::kExample.r, 1e-10);
  EXPECT_LT(e.pressure_spread, 1e-10);
  EXPECT_NEAR(e.flux, 1.0, 1e-12);
}

TEST(Extension, BoundaryNodeOrderingOverload) {
  const Lattice<2> O = test::unit_square(8);
  const MediumParams m = MediumParams::constant(O.size(), test::kExample);
  const auto nodes = boundary_nodes(O, full_box(O));
  std::vector<double> hT(nodes.size() * 4);
  for (std::size_t j = 0; j < nodes.size(); ++j) {
    const X x = O.point(O.unflatten(nodes[j]));
    hT[j * 4 + 0] = x[0];
    hT[j * 4 + 2] = x[0];
  }
  const HarmonicExtension<2> e = harmonic_extension(O, hT, m, tight());
  EXPECT_NEAR(e.c, 3.0, 1e-10);
  hT.pop_back();
  EXPECT_THROW(harmonic_extension(O, hT, m), ShapeMismatch);
}

TEST(Extension, UniaxialNorm) {
  const Lattice<2> O = test::unit_square(16);
  const MediumParams m = MediumParams::constant(O.size(), Moduli{1, 0, 1, 1.0, 2.0, 0.5, 1.0});
  Pair<2> bv = Pair<2>::zeros(O.size());
  bv.s[0] = sample(O, [](const X& x) { return x[0]; });
  const HarmonicExtension<2> e = harmonic_extension(O, bv, m, tight());
  EXPECT_NEAR(extension_b_norm(O, e, m), 2.0, 1e-9);
}

TEST(Extension, ResidualBelowTolerance) {
  VerifySetup s;
  const Pair<2> u = forward_output(s, 1.0 / 32, 0.25);
  const Lattice<2> O = square_grid(s, 1.0 / 32, 0).lattice();
  const MediumParams m = MediumParams::constant(O.size(), s.medium);
  ExtensionOptions o;
  o.tol = 1e-9;
  const HarmonicExtension<2> e = harmonic_extension(O, u, m, o);
  EXPECT_LT(e.residual_norm, 1e-8);
  EXPECT_GT(e.iterations, 0);
  // boundary values are reproduced exactly
  for (std::size_t i : boundary_nodes(O, full_box(O)))
    for (int k = 0; k < 4; ++k) EXPECT_EQ(e.phi.comp(k)[i], u.comp(k)[i]);
}

TEST(Extension, OrthogonalityAndPythagoras) {
  VerifySetup s;
  const Pair<2> u = forward_output(s, 1.0 / 32, 0.25);
  const Lattice<2> O = square_grid(s, 1.0 / 32, 0).lattice();
  const MediumParams m = MediumParams::constant(O.size(), s.medium);
  const HarmonicExtension<2> e = harmonic_extension(O, u, m, tight());
  const Pair<2> diff = combine(1.0, u, -1.0, e.phi);
  const double nu = b_seminorm(O, u, m), np = b_seminorm(O, e.phi, m), nd = b_seminorm(O, diff, m);
  EXPECT_GT(np, 0.0);
  EXPECT_LE(std::abs(bilinear_B(O, diff, e.phi, m)), 1e-6 * nu * np);
  EXPECT_NEAR(nu * nu, np * np + nd * nd, 1e-9 * nu * nu);
  EXPECT_LE(np, nu * (1 + 1e-12));
}

TEST(Extension, MinimizesEnergyAmongMatchingFields) {
  VerifySetup s;
  const Lattice<2> O = test::unit_square(16);
  const MediumParams m = MediumParams::constant(O.size(), s.medium);
  Uniform U(6);
  Pair<2> bv = Pair<2>::zeros(O.size());
  for (std::size_t i : boundary_nodes(O, full_box(O)))
    for (int k = 0; k < 4; ++k) bv.comp(k)[i] = U(-1, 1);
  const HarmonicExtension<2> e = harmonic_extension(O, bv, m, tight());
  const double base = bilinear_B(O, e.phi, e.phi, m);
  for (int t = 0; t < 5; ++t) {
    Pair<2> w = e.phi;
    axpy(0.1, test::random_nodal_pair(O, U), w);
    EXPECT_GE(bilinear_B(O, w, w, m), base);
  }
}

TEST(Extension, QuotientIndependentOfStart) {
  VerifySetup s;
  const Pair<2> u = forward_output(s, 1.0 / 32, 0.25);
  const Lattice<2> O = square_grid(s, 1.0 / 32, 0).lattice();
  const MediumParams m = MediumParams::constant(O.size(), s.medium);
  const HarmonicExtension<2> a = harmonic_extension(O, u, m, tight());
  Uniform U(7);
  Pair<2> start = test::random_nodal_pair(O, U);
  const HarmonicExtension<2> b = harmonic_extension(O, u, m, tight(), &start);
  const Quotient<2> d = quotient_difference(project_quotient(O, a.phi), project_quotient(O, b.phi));
  EXPECT_LT(b_seminorm(O, d, m), 1e-8 * extension_b_norm(O, a, m));
  // phi^f itself may differ by an interior div-free field
  EXPECT_NEAR(a.c, b.c, 1e-8 * std::max(1.0, std::abs(a.c)));
}

TEST(Extension, IterationCapRaisesSolverFailure) {
  VerifySetup s;
  const Pair<2> u = forward_output(s, 1.0 / 32, 0.25);
  const Lattice<2> O = square_grid(s, 1.0 / 32, 0).lattice();
  const MediumParams m = MediumParams::constant(O.size(), s.medium);
  ExtensionOptions o;
  o.max_iter = 2;
  EXPECT_THROW(harmonic_extension(O, u, m, o), SolverFailure);
}
