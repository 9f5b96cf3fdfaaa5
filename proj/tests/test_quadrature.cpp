#include <gtest/gtest.h>

#include <cmath>

#include "ch/quadrature.hpp"

namespace {

double factorial(int n) {
  double r = 1.0;
  for (int k = 2; k <= n; ++k) r *= k;
  return r;
}

// int over the reference triangle of x^a y^b = a! b! / (a + b + 2)!
double monomial_exact(int a, int b) { return factorial(a) * factorial(b) / factorial(a + b + 2); }

double apply(const ch::TriangleRule& r, int a, int b) {
  double s = 0.0;
  for (std::size_t q = 0; q < r.size(); ++q) s += r.weights[q] * std::pow(r.points[q][0], a) * std::pow(r.points[q][1], b);
  return s;
}

void check_rule(const ch::TriangleRule& r) {
  for (int d = 0; d <= r.degree; ++d)
    for (int a = 0; a <= d; ++a) {
      const double ex = monomial_exact(a, d - a);
      EXPECT_NEAR(apply(r, a, d - a), ex, 1e-15 + 1e-13 * ex) << "x^" << a << " y^" << d - a;
    }
  for (std::size_t q = 0; q < r.size(); ++q) {
    EXPECT_GT(r.points[q][0], 0.0);
    EXPECT_GT(r.points[q][1], 0.0);
    EXPECT_LT(r.points[q][0] + r.points[q][1], 1.0);
    EXPECT_GT(r.weights[q], 0.0);
  }
}

}  // namespace

TEST(Quadrature, Degree4RuleIsExact) {
  const auto& r = ch::rule_degree4();
  EXPECT_EQ(r.size(), 6u);
  EXPECT_GE(r.degree, 4);
  check_rule(r);
}

TEST(Quadrature, Degree10RuleIsExact) {
  const auto& r = ch::rule_degree10();
  EXPECT_EQ(r.size(), 25u);
  EXPECT_GE(r.degree, 10);
  check_rule(r);
}

TEST(Quadrature, Degree10RuleIsNotExactBeyond) {
  // Sanity that the monomial check can fail: degree 12 is not integrated exactly.
  const auto& r = ch::rule_degree10();
  double worst = 0.0;
  for (int a = 0; a <= 12; ++a) worst = std::max(worst, std::abs(apply(r, a, 12 - a) - monomial_exact(a, 12 - a)));
  EXPECT_GT(worst, 1e-12);
}

TEST(Quadrature, GaussThreeExactToDegreeFive) {
  const auto& g = ch::gauss3();
  for (int k = 0; k <= 5; ++k) {
    double s = 0.0;
    for (int q = 0; q < 3; ++q) s += g.weights[q] * std::pow(g.nodes[q], k);
    EXPECT_NEAR(s, 1.0 / (k + 1), 1e-15) << k;
  }
  double s6 = 0.0;
  for (int q = 0; q < 3; ++q) s6 += g.weights[q] * std::pow(g.nodes[q], 6);
  EXPECT_GT(std::abs(s6 - 1.0 / 7.0), 1e-6);
}
