#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "ch/ch.hpp"
#include "test_util.hpp"

using ch::Point;
using std::numbers::pi;

namespace {

auto sinx = [](double x, double) { return std::sin(2 * pi * x); };
auto dsinx = [](double x, double) { return Point{2 * pi * std::cos(2 * pi * x), 0.0}; };

const ch::ModelParams& model() {
  static const ch::ModelParams m = ch::validate(ch::reference_model());
  return m;
}

}  // namespace

TEST(Projections, IdentityOnTheSubspace) {
  const auto s = ch::build_space(0);
  const ch::Projector proj(s);
  const auto u = ch::test::random_field(s);
  auto g = [&](double x, double y) { return ch::eval(u, Point{x, y}); };
  auto dg = [&](double x, double y) {
    const Point p{x, y};
    return ch::eval_gradient(u, std::span<const Point>(&p, 1))[0];
  };
  EXPECT_LE((proj.l2(g).coeffs - u.coeffs).lpNorm<Eigen::Infinity>(), 1e-12);
  EXPECT_LE((proj.h1(g, dg).coeffs - u.coeffs).lpNorm<Eigen::Infinity>(), 1e-12);
  EXPECT_LE((proj.l2(u).coeffs - u.coeffs).lpNorm<Eigen::Infinity>(), 1e-12);
}

TEST(Projections, L2ProjectionOfFinerField) {
  const auto c = ch::build_space(0);
  const auto f = ch::build_space(2);
  const ch::Projector proj(c);
  const auto u = ch::test::random_field(c);
  // A coarse field viewed on a finer mesh projects back to itself.
  const auto pu = ch::FeField(f, ch::prolongation_chain(c, f) * u.coeffs);
  EXPECT_LE((proj.l2(pu).coeffs - u.coeffs).lpNorm<Eigen::Infinity>(), 1e-11);
  // Galerkin orthogonality against every coarse basis function.
  const auto g = ch::test::random_field(f);
  const auto pg = proj.l2(g);
  const auto p = ch::prolongation_chain(c, f);
  const ch::Vector defect = p.transpose() * (ch::mass_matrix(*f) * (p * pg.coeffs - g.coeffs));
  EXPECT_LE(defect.lpNorm<Eigen::Infinity>(), 1e-14);
  EXPECT_THROW((void)ch::Projector(f).l2(u), ch::Error);
}

TEST(Projections, L2SelfAdjointAndIdempotent) {
  const auto c = ch::build_space(0);
  const auto f = ch::build_space(1);
  const ch::Projector proj(c);
  const auto p = ch::prolongation_matrix(*c, *f);
  const auto mf = ch::mass_matrix(*f);
  const auto u = ch::test::random_field(f), v = ch::test::random_field(f);
  const ch::Vector pu = p * proj.l2(u).coeffs, pv = p * proj.l2(v).coeffs;
  EXPECT_NEAR(pu.dot(mf * v.coeffs), u.coeffs.dot(mf * pv), 1e-12);
  const auto once = proj.l2(u);
  EXPECT_LE((proj.l2(once).coeffs - once.coeffs).lpNorm<Eigen::Infinity>(), 1e-12);
}

TEST(Projections, MassPreserved) {
  const auto s = ch::build_space(1);
  auto g = [](double x, double y) { return 0.3 + std::sin(2 * pi * x) * std::cos(4 * pi * y) + 0.1 * std::cos(2 * pi * y); };
  EXPECT_NEAR(ch::mass(ch::l2_project(s, g)), 0.3, 1e-12);
}

TEST(Projections, OrdersForSine) {
  std::vector<double> l2, h1, h1_l2;
  for (int level = 0; level <= 3; ++level) {
    const ch::Projector proj(ch::build_space(level));
    l2.push_back(ch::error_norms(proj.l2(sinx), sinx, dsinx).l2);
    const auto e1 = ch::error_norms(proj.h1(sinx, dsinx), sinx, dsinx);
    h1.push_back(e1.h1);
    h1_l2.push_back(e1.l2);
  }
  for (std::size_t k = 1; k < l2.size(); ++k) {
    EXPECT_NEAR(ch::eoc(l2[k - 1], l2[k]), 3.0, 0.3) << k;
    EXPECT_NEAR(ch::eoc(h1[k - 1], h1[k]), 2.0, 0.3) << k;
    EXPECT_NEAR(ch::eoc(h1_l2[k - 1], h1_l2[k]), 3.0, 0.3) << k;
  }
}

TEST(Projections, H1ProjectionIdempotentAndStable) {
  const auto s = ch::build_space(1);
  const ch::Projector proj(s);
  const auto u = proj.h1(sinx, dsinx);
  const ch::Vector again = proj.solve_gram(proj.gram() * u.coeffs);
  EXPECT_LE((again - u.coeffs).lpNorm<Eigen::Infinity>(), 1e-12);
  // ||sin(2 pi x)||_1^2 = 1/2 + 2 pi^2
  EXPECT_LE(ch::test::gram_norm(u), std::sqrt(0.5 + 2 * pi * pi) + 1e-12);
}

TEST(Projections, MuHatForDiscretePhiIsL2ProjectionOfMu) {
  const auto s = ch::build_space(0);
  const ch::Projector proj(s);
  const auto u = ch::test::random_field(s, -0.5, 0.5);
  auto phi = [&](double x, double y) { return ch::eval(u, Point{x, y}); };
  auto dphi = [&](double x, double y) {
    const Point p{x, y};
    return ch::eval_gradient(u, std::span<const Point>(&p, 1))[0];
  };
  auto mu = [](double x, double y) { return std::cos(2 * pi * x) * std::sin(2 * pi * y); };
  const auto phi_hat = proj.h1(phi, dphi);
  const auto mh = proj.mu_hat(phi, dphi, mu, phi_hat, model());
  EXPECT_LE((mh.coeffs - proj.l2(mu).coeffs).lpNorm<Eigen::Infinity>(), 1e-10);
}

TEST(Projections, MuHatSatisfiesDefiningIdentity) {
  const auto s = ch::build_space(1);
  const ch::Projector proj(s);
  auto phi = [](double x, double y) { return 0.1 + 0.5 * std::sin(2 * pi * x) * std::cos(2 * pi * y); };
  auto dphi = [](double x, double y) {
    return Point{pi * std::cos(2 * pi * x) * std::cos(2 * pi * y), -pi * std::sin(2 * pi * x) * std::sin(2 * pi * y)};
  };
  auto mu = [](double x, double y) { return std::sin(2 * pi * (x + y)); };
  const auto ph = proj.h1(phi, dphi);
  const auto mh = proj.mu_hat(phi, dphi, mu, ph, model());
  // <mu_hat - mu, w> - gamma <grad(phi_hat - phi), grad w> - <f'(phi_hat) - f'(phi), w>
  const auto& tab = s->nonlin_table();
  const auto pts = ch::quadrature_points(*s, tab);
  ch::QpValues fex(pts.size());
  for (std::size_t k = 0; k < pts.size(); ++k) fex[k] = model().f(phi(pts[k].x, pts[k].y), 1);
  const ch::Vector r = proj.mass() * mh.coeffs - proj.analytic_load(mu) -
                       model().gamma() * (proj.stiffness() * ph.coeffs - proj.analytic_gradient_load(dphi)) -
                       (ch::nonlinear_load(ph, model(), 1) - ch::load_qp(*s, tab, fex));
  for (int trial = 0; trial < 10; ++trial) {
    const ch::Vector w = ch::test::random_vector(s->dof_count());
    EXPECT_LE(std::abs(w.dot(r)), 1e-10);
  }
}

TEST(Projections, MuHatOrder) {
  const auto rows = ch::projection_study(model(), 0, 3);
  for (std::size_t k = 1; k < rows.size(); ++k) {
    EXPECT_NEAR(rows[k].eoc_mu, 2.0, 0.3) << k;
    EXPECT_NEAR(rows[k].eoc_l2, 3.0, 0.3) << k;
    EXPECT_NEAR(rows[k].eoc_h1, 2.0, 0.3) << k;
  }
}

TEST(Projections, InverseInequalityConstantBounded) {
  double first = 0.0, worst = 0.0;
  for (int level = 0; level <= 2; ++level) {
    const auto s = ch::build_space(level);
    double c = 0.0;
    for (int trial = 0; trial < 5; ++trial) {
      const auto v = ch::test::random_field(s);
      c = std::max(c, ch::h1_norm(v) * s->mesh().h / ch::l2_norm(v));
    }
    if (level == 0) first = c;
    worst = std::max(worst, c);
    RecordProperty("c_inv_level" + std::to_string(level), std::to_string(c));
  }
  EXPECT_LE(worst, 1.5 * first);
}

TEST(TimeOperators, GridEndsAtT) {
  const auto g = ch::TimeGrid::uniform(0.16, 64);
  EXPECT_NEAR(g.final_time(), 0.16, 1e-14);
  EXPECT_EQ(g.n_steps, 64);
}

TEST(TimeOperators, ExactForLinearFunctions) {
  const auto grid = ch::TimeGrid::uniform(1.0, 8);
  auto u = [](double t) { return 2.0 - 3.0 * t; };
  const auto lin = ch::time_interp(u, grid);
  for (double t : {0.0, 0.03, 0.5, 0.77, 1.0}) EXPECT_NEAR(lin(t), u(t), 1e-15);
  const auto avg = ch::time_avg(u, grid);
  for (int n = 0; n < 8; ++n) EXPECT_NEAR(avg[n], u(grid.midpoint(n)), 1e-15);
}

TEST(TimeOperators, SlopeCommutesWithAveraging) {
  const auto grid = ch::TimeGrid::uniform(1.0, 8);
  const auto lin = ch::time_interp([](double t) { return t * t * t; }, grid);
  const auto avg = ch::time_avg([](double t) { return 3 * t * t; }, grid);
  for (int n = 0; n < 8; ++n) EXPECT_NEAR(lin.slope(n), avg[n], 1e-13);
}

TEST(TimeOperators, ProductDefect) {
  const auto grid = ch::TimeGrid::uniform(1.0, 8);
  auto one = [](double) { return 1.5; };
  auto s = [](double t) { return std::sin(t); };
  EXPECT_NEAR(ch::product_projection_defect(one, s, grid, 2.0), 0.0, 1e-15);
  auto t = [](double x) { return x; };
  for (int n : {8, 16, 64}) {
    const auto g = ch::TimeGrid::uniform(1.0, n);
    EXPECT_NEAR(ch::product_projection_defect(t, t, g, INFINITY), g.tau * g.tau / 12.0, 1e-12);
    EXPECT_NEAR(ch::product_projection_defect(t, t, g, 2.0), g.tau * g.tau / 12.0, 1e-12);
  }
}

TEST(TimeOperators, Orders) {
  const auto rows = ch::time_operator_study(3, 6);
  for (std::size_t k = 1; k < rows.size(); ++k) {
    EXPECT_NEAR(rows[k].eoc_avg, 1.0, 0.2);
    EXPECT_NEAR(rows[k].eoc_interp, 2.0, 0.2);
    EXPECT_NEAR(rows[k].eoc_product, 2.0, 0.2);
  }
}
