#pragma once

#include <array>
#include <cmath>
#include <vector>

namespace ch {

/// Quadrature on the reference triangle (0,0),(1,0),(0,1); weights sum to 1/2.
struct TriangleRule {
  int degree = 0;
  std::vector<std::array<double, 2>> points;
  std::vector<double> weights;

  std::size_t size() const noexcept { return weights.size(); }
};

namespace detail {

inline void add_s3(TriangleRule& r, double w) {
  r.points.push_back({1.0 / 3.0, 1.0 / 3.0});
  r.weights.push_back(0.5 * w);
}

// Barycentric orbit (a, b, b).
inline void add_s21(TriangleRule& r, double a, double w) {
  const double b = 0.5 * (1.0 - a);
  for (auto p : {std::array{b, b}, std::array{a, b}, std::array{b, a}}) {
    r.points.push_back(p);
    r.weights.push_back(0.5 * w);
  }
}

// Barycentric orbit of (a, b, c) with distinct entries: six permutations.
inline void add_s111(TriangleRule& r, double a, double b, double w) {
  const double c = 1.0 - a - b;
  for (auto p : {std::array{b, c}, std::array{c, b}, std::array{a, c}, std::array{c, a},
                 std::array{a, b}, std::array{b, a}}) {
    r.points.push_back(p);
    r.weights.push_back(0.5 * w);
  }
}

}  // namespace detail

/// Symmetric 6-point rule, exact for polynomials of degree 4.
inline const TriangleRule& rule_degree4() {
  static const TriangleRule rule = [] {
    TriangleRule r;
    r.degree = 4;
    detail::add_s21(r, 0.10810301816807022736, 0.22338158967801146570);
    detail::add_s21(r, 0.81684757298045851308, 0.10995174365532186764);
    return r;
  }();
  return rule;
}

/// Symmetric 25-point rule, exact for polynomials of degree 10.
inline const TriangleRule& rule_degree10() {
  static const TriangleRule rule = [] {
    TriangleRule r;
    r.degree = 10;
    detail::add_s3(r, 0.090817990382753580095);
    detail::add_s21(r, 0.028844733232685245265, 0.036725957756466704717);
    detail::add_s21(r, 0.78103684902992589041, 0.045321059435527934783);
    detail::add_s111(r, 0.14170721941487995476, 0.30793983876412095017, 0.072757916845420108604);
    detail::add_s111(r, 0.025003534762686386074, 0.24667256063990269392, 0.028327242531057484837);
    detail::add_s111(r, 0.0095408154002994575802, 0.066803251012200265774,
                     0.0094216669637328234599);
    return r;
  }();
  return rule;
}

/// 3-point Gauss-Legendre rule on [0, 1]; exact to degree 5.
struct TimeRule {
  std::array<double, 3> nodes;
  std::array<double, 3> weights;
};

inline const TimeRule& gauss3() {
  static const TimeRule rule = [] {
    const double d = 0.5 * std::sqrt(0.6);
    return TimeRule{{0.5 - d, 0.5, 0.5 + d}, {5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0}};
  }();
  return rule;
}

}  // namespace ch
