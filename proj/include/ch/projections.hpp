#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include <Eigen/SparseCholesky>
#include <boost/math/quadrature/gauss.hpp>

#include "ch/assembly.hpp"
#include "ch/error.hpp"
#include "ch/fespace.hpp"
#include "ch/model.hpp"

namespace ch {

/// Spatial projections onto a FeSpace. Keeps factorizations of the mass and
/// H1 Gram matrices so repeated projections cost one solve each.
class Projector {
 public:
  explicit Projector(SpacePtr space)
      : space_(std::move(space)),
        mass_(mass_matrix(*space_)),
        stiffness_(stiffness_matrix(*space_)),
        gram_(h1_gram(*space_)) {
    mass_solver_.compute(mass_);
    if (mass_solver_.info() != Eigen::Success)
      throw Error(Errc::SingularMass, "mass matrix factorization failed");
    gram_solver_.compute(gram_);
    if (gram_solver_.info() != Eigen::Success)
      throw Error(Errc::SingularMass, "H1 Gram matrix factorization failed");
  }

  const SpacePtr& space() const noexcept { return space_; }
  const SparseMatrix& mass() const noexcept { return mass_; }
  const SparseMatrix& stiffness() const noexcept { return stiffness_; }
  const SparseMatrix& gram() const noexcept { return gram_; }

  Vector solve_mass(const Vector& rhs) const { return checked(mass_solver_.solve(rhs)); }
  Vector solve_gram(const Vector& rhs) const { return checked(gram_solver_.solve(rhs)); }

  /// L2-orthogonal projection of an analytic g(x, y).
  template <class Fn>
  FeField l2(Fn&& g) const {
    return FeField(space_, solve_mass(analytic_load(g)));
  }

  /// L2-orthogonal projection of a field living on a uniform refinement
  /// (any number of levels finer). Exact: the moments are transferred through
  /// the prolongation.
  FeField l2(const FeField& fine) const {
    const int levels = fine.space->mesh().level - space_->mesh().level;
    if (levels < 0) throw Error(Errc::SpaceNotNested, "source field is coarser than the target space");
    if (levels == 0) return FeField(space_, solve_mass(mass_ * fine.coeffs));
    std::vector<SpacePtr> chain{space_};
    for (int k = 1; k < levels; ++k) chain.push_back(build_space(space_->mesh().level + k));
    chain.push_back(fine.space);
    Vector moments = mass_matrix(*fine.space) * fine.coeffs;
    for (int k = levels; k >= 1; --k)
      moments = prolongation_matrix(*chain[k - 1], *chain[k]).transpose() * moments;
    return FeField(space_, solve_mass(moments));
  }

  /// H1-elliptic projection of g with gradient dg.
  template <class Fn, class GradFn>
  FeField h1(Fn&& g, GradFn&& dg) const {
    const Vector rhs = analytic_load(g) + analytic_gradient_load(dg);
    return FeField(space_, solve_gram(rhs));
  }

  /// Discrete chemical potential paired with phi_hat = h1(phi):
  /// <mu_hat - mu, w> - gamma <grad(phi_hat - phi), grad w>
  ///                  - <f'(phi_hat) - f'(phi), w> = 0 for all w.
  template <class PhiFn, class PhiGradFn, class MuFn>
  FeField mu_hat(PhiFn&& phi, PhiGradFn&& grad_phi, MuFn&& mu, const FeField& phi_hat,
                 const ModelParams& model) const {
    const auto& tab = space_->nonlin_table();
    const auto pts = quadrature_points(*space_, tab);
    QpValues fprime_exact(pts.size());
    for (std::size_t k = 0; k < pts.size(); ++k) fprime_exact[k] = model.f(phi(pts[k].x, pts[k].y), 1);
    Vector rhs = analytic_load(mu);
    rhs += model.gamma() * (stiffness_ * phi_hat.coeffs - analytic_gradient_load(grad_phi));
    rhs += nonlinear_load(phi_hat, model, 1) - load_qp(*space_, tab, fprime_exact);
    return FeField(space_, solve_mass(rhs));
  }

  /// int g psi_i with the degree-10 rule.
  template <class Fn>
  Vector analytic_load(Fn&& g) const {
    const auto& tab = space_->nonlin_table();
    const auto pts = quadrature_points(*space_, tab);
    QpValues v(pts.size());
    for (std::size_t k = 0; k < pts.size(); ++k) v[k] = g(pts[k].x, pts[k].y);
    return load_qp(*space_, tab, v);
  }

  /// int dg . grad psi_i with the degree-10 rule; dg returns a Point.
  template <class GradFn>
  Vector analytic_gradient_load(GradFn&& dg) const {
    const auto& tab = space_->nonlin_table();
    const auto pts = quadrature_points(*space_, tab);
    QpGradients v(pts.size());
    for (std::size_t k = 0; k < pts.size(); ++k) v[k] = dg(pts[k].x, pts[k].y);
    return gradient_load_qp(*space_, tab, v);
  }

 private:
  static Vector checked(Vector x) {
    if (!x.allFinite()) throw Error(Errc::SingularMass, "projection solve produced non-finite values");
    return x;
  }

  SpacePtr space_;
  SparseMatrix mass_;
  SparseMatrix stiffness_;
  SparseMatrix gram_;
  Eigen::SimplicialLDLT<SparseMatrix> mass_solver_;
  Eigen::SimplicialLDLT<SparseMatrix> gram_solver_;
};

template <class Fn>
FeField l2_project(SpacePtr space, Fn&& g) {
  return Projector(std::move(space)).l2(g);
}

template <class Fn, class GradFn>
FeField h1_project(SpacePtr space, Fn&& g, GradFn&& dg) {
  return Projector(std::move(space)).h1(g, dg);
}

template <class PhiFn, class PhiGradFn, class MuFn>
FeField mu_hat(SpacePtr space, PhiFn&& phi, PhiGradFn&& grad_phi, MuFn&& mu,
               const FeField& phi_hat, const ModelParams& model) {
  return Projector(std::move(space)).mu_hat(phi, grad_phi, mu, phi_hat, model);
}

struct ErrorNorms {
  double l2 = 0.0;
  double h1 = 0.0;  // full norm: sqrt(l2^2 + |.|_1^2)
};

/// ||g - u_h|| in L2 and H1 with the degree-10 rule.
template <class Fn, class GradFn>
ErrorNorms error_norms(const FeField& u, Fn&& g, GradFn&& dg) {
  const FeSpace& space = *u.space;
  const auto& tab = space.nonlin_table();
  const auto pts = quadrature_points(space, tab);
  const auto uv = values_at_quadrature(space, u.coeffs, tab);
  const auto ug = gradients_at_quadrature(space, u.coeffs, tab);
  const std::size_t nq = tab.size();
  double l2 = 0.0, semi = 0.0;
  for (std::size_t k = 0; k < pts.size(); ++k) {
    const double w = tab.weights[k % nq];
    const double e = g(pts[k].x, pts[k].y) - uv[k];
    const Point dge = dg(pts[k].x, pts[k].y);
    const double ex = dge.x - ug[k].x, ey = dge.y - ug[k].y;
    l2 += w * e * e;
    semi += w * (ex * ex + ey * ey);
  }
  return {std::sqrt(l2), std::sqrt(l2 + semi)};
}

// ---------------------------------------------------------------------------
// Time operators

/// Equidistant grid t^n = n tau, n = 0..N.
struct TimeGrid {
  double tau = 0.0;
  int n_steps = 0;

  static TimeGrid uniform(double T, int n_steps) { return {T / n_steps, n_steps}; }

  double node(int n) const noexcept { return n * tau; }
  double final_time() const noexcept { return n_steps * tau; }
  double midpoint(int interval) const noexcept { return (interval + 0.5) * tau; }

  friend bool operator==(const TimeGrid&, const TimeGrid&) = default;
};

/// Continuous piecewise linear function through nodal values.
template <class V>
class PiecewiseLinear {
 public:
  PiecewiseLinear(TimeGrid grid, std::vector<V> nodal) : grid_(grid), nodal_(std::move(nodal)) {}

  V operator()(double t) const {
    int n = static_cast<int>(std::floor(t / grid_.tau));
    n = std::clamp(n, 0, grid_.n_steps - 1);
    const double s = (t - grid_.node(n)) / grid_.tau;
    return V((1.0 - s) * nodal_[n] + s * nodal_[n + 1]);
  }
  /// Constant time derivative on interval n (0-based, covering [t^n, t^{n+1}]).
  V slope(int n) const { return V((nodal_[n + 1] - nodal_[n]) / grid_.tau); }

  const TimeGrid& grid() const noexcept { return grid_; }
  const std::vector<V>& nodal() const noexcept { return nodal_; }

 private:
  TimeGrid grid_;
  std::vector<V> nodal_;
};

template <class Fn>
auto time_interp(Fn&& u, const TimeGrid& grid) {
  using V = std::decay_t<decltype(u(0.0))>;
  std::vector<V> nodal;
  for (int n = 0; n <= grid.n_steps; ++n) nodal.push_back(u(grid.node(n)));
  return PiecewiseLinear<V>(grid, std::move(nodal));
}

/// Interval averages (L2 projection onto piecewise constants), 3-point Gauss.
template <class Fn>
auto time_avg(Fn&& g, const TimeGrid& grid) {
  using V = std::decay_t<decltype(g(0.0))>;
  const auto& rule = gauss3();
  std::vector<V> out;
  out.reserve(grid.n_steps);
  for (int n = 0; n < grid.n_steps; ++n) {
    V acc = rule.weights[0] * g(grid.node(n) + rule.nodes[0] * grid.tau);
    for (int q = 1; q < 3; ++q) acc = V(acc + rule.weights[q] * g(grid.node(n) + rule.nodes[q] * grid.tau));
    out.push_back(acc);
  }
  return out;
}

/// ||u_bar v_bar - (uv)_bar||_{L^p(0,T)}; p = infinity gives the max norm.
template <class U, class W>
double product_projection_defect(U&& u, W&& v, const TimeGrid& grid, double p) {
  const auto ub = time_avg(u, grid);
  const auto vb = time_avg(v, grid);
  const auto uvb = time_avg([&](double t) { return u(t) * v(t); }, grid);
  double acc = 0.0;
  for (int n = 0; n < grid.n_steps; ++n) {
    const double d = std::abs(ub[n] * vb[n] - uvb[n]);
    if (std::isinf(p)) acc = std::max(acc, d);
    else acc += grid.tau * std::pow(d, p);
  }
  return std::isinf(p) ? acc : std::pow(acc, 1.0 / p);
}

/// ||u - w||_{L2(0,T)} for piecewise w(n, t) on each interval, 10-point Gauss.
template <class U, class PieceFn>
double time_l2_distance(U&& u, PieceFn&& piece, const TimeGrid& grid) {
  double acc = 0.0;
  for (int n = 0; n < grid.n_steps; ++n) {
    acc += boost::math::quadrature::gauss<double, 10>::integrate(
        [&](double t) {
          const double e = u(t) - piece(n, t);
          return e * e;
        },
        grid.node(n), grid.node(n + 1));
  }
  return std::sqrt(acc);
}

}  // namespace ch
