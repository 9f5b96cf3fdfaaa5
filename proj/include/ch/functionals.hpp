#pragma once

#include <algorithm>
#include <cmath>
#include <utility>

#include <Eigen/SparseCholesky>

#include "ch/assembly.hpp"
#include "ch/error.hpp"
#include "ch/fespace.hpp"
#include "ch/model.hpp"
#include "ch/quadrature.hpp"

namespace ch {

/// One row of the per-step diagnostics series.
struct DiagnosticsRecord {
  double t = 0.0;
  double mass = 0.0;
  double energy = 0.0;
  double cumulative_dissipation = 0.0;
  int newton_iters = 0;
  double linear_residual = 0.0;
};

namespace detail {

/// Sum over cells and quadrature points of weight * fn(k) for the given table.
template <class Fn>
double integrate_qp(const FeSpace& space, const ElementTable& tab, Fn&& fn) {
  const std::size_t nq = tab.size();
  double acc = 0.0;
  for (int t = 0; t < space.num_cells(); ++t) {
    double cell = 0.0;
    for (std::size_t q = 0; q < nq; ++q) cell += tab.weights[q] * fn(t * nq + q);
    acc += cell;
  }
  return acc;
}

}  // namespace detail

/// int u dx
inline double mass(const FeField& u) {
  const auto& tab = u.space->stiff_table();
  const auto v = values_at_quadrature(*u.space, u.coeffs, tab);
  return detail::integrate_qp(*u.space, tab, [&](std::size_t k) { return v[k]; });
}

inline double l2_norm(const FeField& u) {
  const auto& tab = u.space->stiff_table();
  const auto v = values_at_quadrature(*u.space, u.coeffs, tab);
  return std::sqrt(detail::integrate_qp(*u.space, tab, [&](std::size_t k) { return v[k] * v[k]; }));
}

inline double h1_seminorm(const FeField& u) {
  const auto& tab = u.space->stiff_table();
  const auto g = gradients_at_quadrature(*u.space, u.coeffs, tab);
  return std::sqrt(detail::integrate_qp(
      *u.space, tab, [&](std::size_t k) { return g[k].x * g[k].x + g[k].y * g[k].y; }));
}

inline double h1_norm(const FeField& u) {
  const double a = l2_norm(u), b = h1_seminorm(u);
  return std::sqrt(a * a + b * b);
}

/// E(phi) = int gamma/2 |grad phi|^2 + f(phi), degree-10 rule.
inline double energy(const FeField& phi, const ModelParams& model) {
  const auto& tab = phi.space->nonlin_table();
  const auto v = values_at_quadrature(*phi.space, phi.coeffs, tab);
  const auto g = gradients_at_quadrature(*phi.space, phi.coeffs, tab);
  const double half_gamma = 0.5 * model.gamma();
  return detail::integrate_qp(*phi.space, tab, [&](std::size_t k) {
    return half_gamma * (g[k].x * g[k].x + g[k].y * g[k].y) + model.f(v[k]);
  });
}

/// Bregman distance of the alpha-regularized energy:
/// E(phi) - E(phi_hat) - <E'(phi_hat), phi - phi_hat> + alpha/2 ||phi - phi_hat||^2.
/// Evaluated pointwise in expanded form; the potential part uses the exact
/// Taylor remainder of the quartic about phi_hat.
inline double relative_energy(const FeField& phi, const FeField& phi_hat, const ModelParams& model) {
  const FeSpace& space = *phi.space;
  const auto& tab = space.nonlin_table();
  const Vector diff = phi.coeffs - phi_hat.coeffs;
  const auto e = values_at_quadrature(space, diff, tab);
  const auto ge = gradients_at_quadrature(space, diff, tab);
  const auto vh = values_at_quadrature(space, phi_hat.coeffs, tab);
  const double half_gamma = 0.5 * model.gamma();
  const double half_alpha = 0.5 * model.alpha();
  return detail::integrate_qp(space, tab, [&](std::size_t k) {
    const double d = e[k];
    const double s = vh[k];
    const double remainder =
        d * d * (model.f(s, 2) / 2.0 + d * (model.f(s, 3) / 6.0 + d * model.f(s, 4) / 24.0));
    return half_gamma * (ge[k].x * ge[k].x + ge[k].y * ge[k].y) + remainder + half_alpha * d * d;
  });
}

/// D_phi(mu) = || b(phi)^{1/2} grad mu ||^2.
inline double dissipation(const FeField& phi, const FeField& mu, const ModelParams& model) {
  const FeSpace& space = *phi.space;
  const auto& tab = space.nonlin_table();
  const auto v = values_at_quadrature(space, phi.coeffs, tab);
  const auto g = gradients_at_quadrature(space, mu.coeffs, tab);
  return detail::integrate_qp(space, tab, [&](std::size_t k) {
    return model.b(v[k]) * (g[k].x * g[k].x + g[k].y * g[k].y);
  });
}

/// D_phi(mu | mu_hat) = 1/2 || b(phi)^{1/2} grad (mu - mu_hat) ||^2.
inline double relative_dissipation(const FeField& phi, const FeField& mu, const FeField& mu_hat,
                                   const ModelParams& model) {
  return 0.5 * dissipation(phi, FeField(mu.space, mu.coeffs - mu_hat.coeffs), model);
}

/// int over one interval of D_{phi(s)}(mu) with phi linear in time between
/// phi_prev and phi_next and mu constant; 3-point Gauss in time.
inline double interval_dissipation(const FeField& phi_prev, const FeField& phi_next,
                                   const FeField& mu, double tau, const ModelParams& model) {
  const FeSpace& space = *mu.space;
  const auto& tab = space.nonlin_table();
  const auto a = values_at_quadrature(space, phi_prev.coeffs, tab);
  const auto x = values_at_quadrature(space, phi_next.coeffs, tab);
  const auto g = gradients_at_quadrature(space, mu.coeffs, tab);
  const auto& tr = gauss3();
  return tau * detail::integrate_qp(space, tab, [&](std::size_t k) {
    double bbar = 0.0;
    for (int q = 0; q < 3; ++q) bbar += tr.weights[q] * model.b((1.0 - tr.nodes[q]) * a[k] + tr.nodes[q] * x[k]);
    return bbar * (g[k].x * g[k].x + g[k].y * g[k].y);
  });
}

/// Discrete dual norm sup_v <r, v> / ||v||_1 = sqrt(r^T A^{-1} r), A the H1 Gram
/// matrix. Holds the factorization for repeated evaluation.
class DualNorm {
 public:
  explicit DualNorm(const FeSpace& space) : gram_(h1_gram(space)) {
    solver_.compute(gram_);
    if (solver_.info() != Eigen::Success) throw Error(Errc::SingularMass, "H1 Gram factorization failed");
  }

  double operator()(const Vector& r) const { return std::sqrt(std::max(0.0, r.dot(riesz(r)))); }
  /// Representative c with A c = r.
  Vector riesz(const Vector& r) const {
    Vector c = solver_.solve(r);
    if (!c.allFinite()) throw Error(Errc::SingularMass, "H1 Gram solve failed");
    return c;
  }
  const SparseMatrix& gram() const noexcept { return gram_; }

 private:
  SparseMatrix gram_;
  Eigen::SimplicialLDLT<SparseMatrix> solver_;
};

inline double dual_norm_discrete(const Vector& r, const FeSpace& space) { return DualNorm(space)(r); }

/// Residual functionals of a perturbed pair at one instant:
///   r1_i = <d_t phi_hat, psi_i> + <b(phi_background) grad mu_hat, grad psi_i>
///   r2_i = <mu_hat, psi_i> - gamma <grad phi_hat, grad psi_i> - <f'(phi_hat), psi_i>
inline std::pair<Vector, Vector> residuals(const FeField& phi_hat, const FeField& dphi_hat_dt,
                                           const FeField& mu_hat, const FeField& phi_background,
                                           const ModelParams& model) {
  const FeSpace& space = *phi_hat.space;
  const SparseMatrix m = mass_matrix(space);
  const SparseMatrix k = stiffness_matrix(space);
  const SparseMatrix w = weighted_stiffness(phi_background, model);
  Vector r1 = m * dphi_hat_dt.coeffs + w * mu_hat.coeffs;
  Vector r2 = m * mu_hat.coeffs - model.gamma() * (k * phi_hat.coeffs) - nonlinear_load(phi_hat, model, 1);
  return {std::move(r1), std::move(r2)};
}

/// Interval averages of the residual functionals for a trajectory piece that
/// is linear in time (phi_hat, background) and constant (mu_hat). d_t phi_hat
/// is the exact slope; time integrals use 3-point Gauss.
inline std::pair<Vector, Vector> interval_residuals(const FeField& phi_hat_prev,
                                                    const FeField& phi_hat_next,
                                                    const FeField& mu_hat, double tau,
                                                    const FeField& background_prev,
                                                    const FeField& background_next,
                                                    const ModelParams& model) {
  const FeSpace& space = *mu_hat.space;
  const auto& tab = space.nonlin_table();
  const auto& tr = gauss3();
  const auto bp = values_at_quadrature(space, background_prev.coeffs, tab);
  const auto bn = values_at_quadrature(space, background_next.coeffs, tab);
  const auto hp = values_at_quadrature(space, phi_hat_prev.coeffs, tab);
  const auto hn = values_at_quadrature(space, phi_hat_next.coeffs, tab);
  QpValues bbar(bp.size()), fbar(bp.size());
  for (std::size_t k = 0; k < bp.size(); ++k) {
    double sb = 0.0, sf = 0.0;
    for (int q = 0; q < 3; ++q) {
      const double s = tr.nodes[q];
      sb += tr.weights[q] * model.b((1.0 - s) * bp[k] + s * bn[k]);
      sf += tr.weights[q] * model.f((1.0 - s) * hp[k] + s * hn[k], 1);
    }
    bbar[k] = sb;
    fbar[k] = sf;
  }
  const SparseMatrix m = mass_matrix(space);
  const SparseMatrix k = stiffness_matrix(space);
  const SparseMatrix w = weighted_stiffness_qp(space, tab, bbar);
  Vector r1 = m * ((phi_hat_next.coeffs - phi_hat_prev.coeffs) / tau) + w * mu_hat.coeffs;
  Vector r2 = m * mu_hat.coeffs - model.gamma() * (k * (0.5 * (phi_hat_prev.coeffs + phi_hat_next.coeffs))) -
              load_qp(space, tab, fbar);
  return {std::move(r1), std::move(r2)};
}

}  // namespace ch
