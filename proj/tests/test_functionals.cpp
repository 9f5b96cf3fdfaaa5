#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "ch/ch.hpp"
#include "test_util.hpp"

using ch::Point;
using std::numbers::pi;

namespace {

const ch::ModelParams& model() {
  static const ch::ModelParams m = ch::validate(ch::reference_model());
  return m;
}

ch::ModelParams without_potential() {
  auto raw = ch::reference_model();
  raw.f_coeffs = {};
  return ch::validate(raw);
}

}  // namespace

TEST(Functionals, MassAndNorms) {
  const auto s = ch::build_space(0);
  EXPECT_NEAR(ch::mass(ch::test::constant_field(s, 0.2)), 0.2, 1e-15);
  EXPECT_NEAR(ch::l2_norm(ch::test::constant_field(s, 3.0)), 3.0, 1e-14);
  EXPECT_NEAR(ch::h1_seminorm(ch::test::constant_field(s, 3.0)), 0.0, 1e-12);
  const auto u = ch::test::random_field(s);
  EXPECT_NEAR(ch::h1_norm(u), ch::test::gram_norm(u), 1e-12);
}

TEST(Functionals, EnergyOfConstants) {
  const auto s = ch::build_space(0);
  EXPECT_NEAR(ch::energy(ch::test::constant_field(s, 0.99), model()), 0.0, 1e-15);
  EXPECT_NEAR(ch::energy(ch::test::constant_field(s, 0.0), model()), 0.3 * std::pow(0.99, 4), 1e-14);
}

TEST(Functionals, EnergyOfReferenceInitialCondition) {
  const auto ic = ch::reference_initial_condition();
  const auto s = ch::build_space(3);
  const auto phi = ch::h1_project(s, ic.value, ic.gradient);
  // gradient part: gamma/2 * 0.04 * (16 pi^2 / 4 + 4 pi^2 / 4) = 0.0003 pi^2
  EXPECT_NEAR(ch::energy(phi, without_potential()), 0.0003 * pi * pi, 1e-7);
  // potential part against a periodic trapezoid rule (spectrally accurate)
  const int m = 400;
  double fint = 0.0;
  for (int j = 0; j < m; ++j)
    for (int i = 0; i < m; ++i) fint += model().f(ic.value(double(i) / m, double(j) / m));
  fint /= double(m) * m;
  EXPECT_NEAR(ch::energy(phi, model()), 0.0003 * pi * pi + fint, 1e-7);
}

TEST(Functionals, RelativeEnergyVanishesOnDiagonal) {
  const auto s = ch::build_space(0);
  const auto u = ch::test::random_field(s);
  EXPECT_EQ(ch::relative_energy(u, u, model()), 0.0);
}

TEST(Functionals, RelativeEnergyQuadraticCase) {
  const auto s = ch::build_space(0);
  const auto m = without_potential();
  const auto u = ch::test::random_field(s), v = ch::test::random_field(s);
  const ch::Vector e = u.coeffs - v.coeffs;
  const double ref = 0.5 * m.gamma() * e.dot(ch::stiffness_matrix(*s) * e) + 0.5 * m.alpha() * e.dot(ch::mass_matrix(*s) * e);
  EXPECT_NEAR(ch::relative_energy(u, v, m), ref, 1e-12 * ref);
}

TEST(Functionals, RelativeEnergyMatchesBregmanDefinition) {
  // E(phi) - E(phi_hat) - <E'(phi_hat), e> + alpha/2 ||e||^2, assembled term by term.
  const auto s = ch::build_space(0);
  const auto u = ch::test::random_field(s, -1, 1), v = ch::test::random_field(s, -1, 1);
  const ch::Vector e = u.coeffs - v.coeffs;
  const double de = model().gamma() * v.coeffs.dot(ch::stiffness_matrix(*s) * e) + ch::nonlinear_load(v, model(), 1).dot(e);
  const double ref = ch::energy(u, model()) - ch::energy(v, model()) - de + 0.5 * model().alpha() * e.dot(ch::mass_matrix(*s) * e);
  EXPECT_NEAR(ch::relative_energy(u, v, model()), ref, 1e-12);
}

TEST(Functionals, RelativeEnergyLowerBound) {
  const auto s = ch::build_space(0);
  double worst_ratio = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto u = ch::test::random_field(s, -2, 2), v = ch::test::random_field(s, -2, 2);
    const ch::FeField d(s, u.coeffs - v.coeffs);
    const double h1sq = std::pow(ch::h1_norm(d), 2);
    const double re = ch::relative_energy(u, v, model());
    EXPECT_GE(re - 0.5 * model().gamma() * h1sq, -1e-12);
    worst_ratio = std::max(worst_ratio, re / ((1 + std::pow(ch::h1_norm(u), 2) + std::pow(ch::h1_norm(v), 2)) * h1sq));
  }
  RecordProperty("upper_bound_ratio", std::to_string(worst_ratio));
  EXPECT_TRUE(std::isfinite(worst_ratio));
}

TEST(Functionals, Dissipation) {
  const auto s = ch::build_space(0);
  const auto mu = ch::test::random_field(s);
  const auto k = ch::stiffness_matrix(*s);
  const double grad2 = mu.coeffs.dot(k * mu.coeffs);
  EXPECT_NEAR(ch::dissipation(ch::test::random_field(s), ch::test::constant_field(s, 0.4), model()), 0.0, 1e-12);
  EXPECT_NEAR(ch::dissipation(ch::test::constant_field(s, 0.3), mu, model()), model().b(0.3) * grad2, 1e-12 * grad2);
  for (int trial = 0; trial < 20; ++trial) {
    const auto phi = ch::test::random_field(s, -1.5, 1.5);
    EXPECT_GE(ch::dissipation(phi, mu, model()), model().b1() * grad2 - 1e-12);
  }
}

TEST(Functionals, RelativeDissipation) {
  const auto s = ch::build_space(0);
  const auto mu = ch::test::random_field(s), mh = ch::test::random_field(s);
  const ch::Vector d = mu.coeffs - mh.coeffs;
  const double grad2 = d.dot(ch::stiffness_matrix(*s) * d);
  EXPECT_EQ(ch::relative_dissipation(ch::test::random_field(s), mu, mu, model()), 0.0);
  EXPECT_NEAR(ch::relative_dissipation(ch::test::constant_field(s, -0.2), mu, mh, model()), 0.5 * model().b(-0.2) * grad2,
              1e-12 * grad2);
  for (int trial = 0; trial < 20; ++trial)
    EXPECT_GE(ch::relative_dissipation(ch::test::random_field(s, -1.5, 1.5), mu, mh, model()), 0.5 * model().b1() * grad2 - 1e-12);
}

TEST(Functionals, DualNormRieszIdentity) {
  const auto s = ch::build_space(0);
  const ch::DualNorm dual(*s);
  EXPECT_EQ(dual(ch::Vector::Zero(s->dof_count())), 0.0);
  for (int trial = 0; trial < 20; ++trial) {
    const auto c = ch::test::random_field(s);
    const double ref = ch::test::gram_norm(c);
    EXPECT_NEAR(dual(dual.gram() * c.coeffs), ref, 1e-10 * ref);
  }
  const auto c = ch::test::random_field(s);
  EXPECT_NEAR(ch::dual_norm_discrete(dual.gram() * c.coeffs, *s), ch::test::gram_norm(c), 1e-10 * ch::test::gram_norm(c));
}

TEST(Functionals, DualNormIsSupremum) {
  const auto s = ch::build_space(0);
  const ch::DualNorm dual(*s);
  const auto& a = dual.gram();
  const int n = s->dof_count();
  // r in a 3-dimensional span; trial directions drawn from the same span.
  const ch::Vector b0 = ch::test::random_vector(n), b1 = ch::test::random_vector(n), b2 = ch::test::random_vector(n);
  const ch::Vector c = 0.7 * b0 - 0.2 * b1 + 0.4 * b2;
  const ch::Vector r = a * c;
  const double value = dual(r);
  double best = 0.0;
  for (int trial = 0; trial < 10000; ++trial) {
    const ch::Vector v = ch::test::uniform(-1, 1) * b0 + ch::test::uniform(-1, 1) * b1 + ch::test::uniform(-1, 1) * b2;
    const double q = r.dot(v) / std::sqrt(v.dot(a * v));
    ASSERT_LE(q, value * (1 + 1e-12));
    best = std::max(best, q);
  }
  EXPECT_GE(best, 0.95 * value);
  // unrestricted random directions never exceed the dual norm either
  for (int trial = 0; trial < 1000; ++trial) {
    const ch::Vector v = ch::test::random_vector(n);
    ASSERT_LE(r.dot(v) / std::sqrt(v.dot(a * v)), value * (1 + 1e-12));
  }
}

TEST(Functionals, ResidualsOfStationaryState) {
  const auto s = ch::build_space(0);
  const double c = 0.3;
  const auto phi = ch::test::constant_field(s, c);
  const auto mu = ch::test::constant_field(s, model().f(c, 1));
  const auto [r1, r2] = ch::residuals(phi, ch::FeField(s), mu, phi, model());
  EXPECT_LE(r1.lpNorm<Eigen::Infinity>(), 1e-15);
  EXPECT_LE(r2.lpNorm<Eigen::Infinity>(), 1e-15);
}

TEST(Functionals, ResidualsVanishOnSolverOutput) {
  const auto s = ch::build_space(0);
  const auto ic = ch::reference_initial_condition();
  const auto phi0 = ch::h1_project(s, ic.value, ic.gradient);
  ch::Stepper stepper(s, model(), 0.02);
  const auto r = stepper.step(phi0, stepper.initial_mu(phi0));
  const auto [r1, r2] = ch::interval_residuals(phi0, r.phi, r.mu, 0.02, phi0, r.phi, model());
  // interval averages are the algebraic residuals divided by tau
  EXPECT_LE(r1.lpNorm<Eigen::Infinity>(), 1e-10 / 0.02);
  EXPECT_LE(r2.lpNorm<Eigen::Infinity>(), 1e-10 / 0.02);
  const ch::DualNorm dual(*s);
  EXPECT_LE(dual(r1) + dual(r2), 1e-8);
}

TEST(Functionals, SecondResidualMatchesIndependentAssembly) {
  const auto s = ch::build_space(0);
  const auto phi = ch::test::random_field(s, -0.9, 0.9);
  const auto mu = ch::test::random_field(s);
  const auto [r1, r2] = ch::residuals(phi, ch::FeField(s), mu, phi, model());
  // r2_i by collapsed-Gauss quadrature of the weak form, cell by cell.
  ch::Vector ref = ch::Vector::Zero(s->dof_count());
  for (int i = 0; i < s->dof_count(); ++i) {
    ch::FeField psi(s);
    psi.coeffs[i] = 1.0;
    ref[i] = ch::test::duffy_integrate(*s, [&](int t, Point p) {
      const auto& d = s->cell_dofs(t);
      if (std::find(d.begin(), d.end(), i) == d.end()) return 0.0;
      const double h = 1e-6;
      auto gx = [&](const ch::FeField& u) { return (ch::eval_in_cell(u, t, {p.x + h, p.y}) - ch::eval_in_cell(u, t, {p.x - h, p.y})) / (2 * h); };
      auto gy = [&](const ch::FeField& u) { return (ch::eval_in_cell(u, t, {p.x, p.y + h}) - ch::eval_in_cell(u, t, {p.x, p.y - h})) / (2 * h); };
      const double ph = ch::eval_in_cell(phi, t, p), ps = ch::eval_in_cell(psi, t, p);
      return ch::eval_in_cell(mu, t, p) * ps - model().gamma() * (gx(phi) * gx(psi) + gy(phi) * gy(psi)) - model().f(ph, 1) * ps;
    });
  }
  EXPECT_LE((r2 - ref).lpNorm<Eigen::Infinity>(), 1e-8);
  const ch::DualNorm dual(*s);
  EXPECT_NEAR(dual(r2), dual(ref), 1e-8);
}
