#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <unsupported/Eigen/Polynomials>

#include "ch/error.hpp"

namespace ch {

/// Real polynomial in monomial form, coefficients in ascending order.
class Polynomial {
 public:
  Polynomial() = default;
  explicit Polynomial(std::vector<double> coeffs) : coeffs_(std::move(coeffs)) { trim(); }

  const std::vector<double>& coeffs() const noexcept { return coeffs_; }
  int degree() const noexcept { return static_cast<int>(coeffs_.size()) - 1; }
  bool is_zero() const noexcept { return coeffs_.empty(); }

  double operator()(double s) const noexcept { return eval(s, 0); }

  /// k-th derivative at s, Horner form on the differentiated coefficients.
  double eval(double s, int order) const noexcept {
    const int n = static_cast<int>(coeffs_.size());
    if (order >= n) return 0.0;
    double acc = 0.0;
    for (int i = n - 1; i >= order; --i) acc = acc * s + coeffs_[i] * falling(i, order);
    return acc;
  }

  Polynomial derivative() const {
    std::vector<double> d;
    for (std::size_t i = 1; i < coeffs_.size(); ++i) d.push_back(coeffs_[i] * static_cast<double>(i));
    return Polynomial(std::move(d));
  }

  /// Minimum and maximum over [lo, hi] from endpoints and interior critical points.
  std::pair<double, double> extrema(double lo, double hi) const {
    double mn = std::min(eval(lo, 0), eval(hi, 0));
    double mx = std::max(eval(lo, 0), eval(hi, 0));
    for (double r : derivative().real_roots()) {
      if (r < lo || r > hi) continue;
      const double v = eval(r, 0);
      mn = std::min(mn, v);
      mx = std::max(mx, v);
    }
    return {mn, mx};
  }

  std::vector<double> real_roots() const {
    std::vector<double> roots;
    if (degree() < 1) return roots;
    if (degree() == 1) {
      roots.push_back(-coeffs_[0] / coeffs_[1]);
      return roots;
    }
    Eigen::VectorXd c = Eigen::Map<const Eigen::VectorXd>(coeffs_.data(), coeffs_.size());
    Eigen::PolynomialSolver<double, Eigen::Dynamic> solver;
    solver.compute(c);
    solver.realRoots(roots, 1e-10);
    std::sort(roots.begin(), roots.end());
    return roots;
  }

  friend bool operator==(const Polynomial&, const Polynomial&) = default;

 private:
  static double falling(int i, int k) noexcept {
    double r = 1.0;
    for (int j = 0; j < k; ++j) r *= static_cast<double>(i - j);
    return r;
  }
  void trim() {
    while (!coeffs_.empty() && coeffs_.back() == 0.0) coeffs_.pop_back();
  }

  std::vector<double> coeffs_;
};

/// Unvalidated model inputs as they come from a configuration file.
struct RawModel {
  double gamma = 0.0;
  std::array<double, 5> f_coeffs{};     // c0..c4 of the quartic potential
  std::vector<double> mobility_coeffs;  // ascending, b(s) = poly(s) + floor
  double mobility_floor = 0.0;
  double admissible_range = 4.0;        // bound checks on [-A, A]

  friend bool operator==(const RawModel&, const RawModel&) = default;
};

/// a (s - c)^2 (s + c)^2 expanded to monomial coefficients.
inline std::array<double, 5> factored_quartic(double a, double c) {
  const double c2 = c * c;
  return {a * c2 * c2, 0.0, -2.0 * a * c2, 0.0, a};
}

/// Double-well test problem: f = 0.3 (s-0.99)^2 (s+0.99)^2,
/// b = (1-s)^2 (1+s)^2 + 1e-3, gamma = 0.003.
inline RawModel reference_model() {
  RawModel raw;
  raw.gamma = 0.003;
  raw.f_coeffs = factored_quartic(0.3, 0.99);
  raw.mobility_coeffs = {1.0, 0.0, -2.0, 0.0, 1.0};
  raw.mobility_floor = 1e-3;
  raw.admissible_range = 4.0;
  return raw;
}

/// Validated, immutable model: potential f, mobility b and derived constants.
class ModelParams {
 public:
  double gamma() const noexcept { return raw_.gamma; }
  /// Lower bound constant with f(s), f''(s) >= -f1.
  double f1() const noexcept { return f1_; }
  /// Convexification parameter max(gamma, gamma + f1).
  double alpha() const noexcept { return alpha_; }
  double b1() const noexcept { return b1_; }
  double b2() const noexcept { return b2_; }
  /// Suprema of |b'| and |b''| over the admissible range; informational only.
  double b3() const noexcept { return b3_; }
  double b4() const noexcept { return b4_; }
  double admissible_range() const noexcept { return raw_.admissible_range; }
  const RawModel& raw() const noexcept { return raw_; }
  const Polynomial& potential() const noexcept { return f_; }

  /// f^(order)(s) for order 0..4; higher orders vanish.
  double f(double s, int order = 0) const noexcept { return f_.eval(s, order); }
  /// b^(order)(s); the floor only enters the value.
  double b(double s, int order = 0) const noexcept {
    return mobility_.eval(s, order) + (order == 0 ? raw_.mobility_floor : 0.0);
  }

  friend ModelParams validate(const RawModel& raw);

 private:
  RawModel raw_;
  Polynomial f_;
  Polynomial mobility_;
  double f1_ = 0.0;
  double alpha_ = 0.0;
  double b1_ = 0.0, b2_ = 0.0, b3_ = 0.0, b4_ = 0.0;
};

/// Checks gamma > 0, positivity of b on [-A, A] and that f is bounded below,
/// then fills f1, alpha and the mobility bounds.
inline ModelParams validate(const RawModel& raw) {
  if (!(raw.gamma > 0.0)) throw Error(Errc::NonPositiveGamma, "gamma must be positive", "gamma");
  if (!(raw.admissible_range > 0.0))
    throw Error(Errc::ValidationError, "admissible_range must be positive", "admissible_range");

  ModelParams p;
  p.raw_ = raw;
  p.f_ = Polynomial(std::vector<double>(raw.f_coeffs.begin(), raw.f_coeffs.end()));
  p.mobility_ = Polynomial(raw.mobility_coeffs);

  // Bounded below iff the leading term has even degree and positive sign.
  if (!p.f_.is_zero() && (p.f_.degree() % 2 != 0 || p.f_.coeffs().back() < 0.0))
    throw Error(Errc::PotentialUnboundedBelow, "quartic potential is unbounded below", "f");

  const double lo = -raw.admissible_range;
  const double hi = raw.admissible_range;

  Polynomial b_poly = p.mobility_;
  auto [bmin, bmax] = b_poly.is_zero() ? std::pair{0.0, 0.0} : b_poly.extrema(lo, hi);
  bmin += raw.mobility_floor;
  bmax += raw.mobility_floor;
  if (!(bmin > 0.0))
    throw Error(Errc::MobilityNotBoundedBelow, "mobility is not positive on the admissible range",
                "mobility");
  p.b1_ = bmin;
  p.b2_ = bmax;
  const Polynomial db = b_poly.derivative();
  const Polynomial ddb = db.derivative();
  auto sup_abs = [&](const Polynomial& q) {
    if (q.is_zero()) return 0.0;
    auto [mn, mx] = q.extrema(lo, hi);
    return std::max(std::abs(mn), std::abs(mx));
  };
  p.b3_ = sup_abs(db);
  p.b4_ = sup_abs(ddb);

  // f'' = 12 c4 s^2 + 6 c3 s + 2 c2 is a convex quadratic (or constant) here.
  const auto& c = raw.f_coeffs;
  const double fpp_min = c[4] > 0.0 ? 2.0 * c[2] - 3.0 * c[3] * c[3] / (4.0 * c[4]) : 2.0 * c[2];
  const double f_min = p.f_.is_zero() ? 0.0 : p.f_.extrema(lo, hi).first;
  p.f1_ = std::max({0.0, -fpp_min, -f_min});
  p.alpha_ = std::max(raw.gamma, raw.gamma + p.f1_);
  return p;
}

}  // namespace ch
