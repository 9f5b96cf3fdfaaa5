#pragma once

#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/OrderingMethods>
#include <Eigen/SparseLU>
#include <unsupported/Eigen/IterativeSolvers>

#include "ch/assembly.hpp"
#include "ch/error.hpp"
#include "ch/fespace.hpp"
#include "ch/functionals.hpp"
#include "ch/model.hpp"
#include "ch/projections.hpp"
#include "ch/quadrature.hpp"

namespace ch {

struct NewtonSettings {
  double tol = 1e-10;  // max-norm of the algebraic residual
  int max_iter = 25;
  // Linear solves: GMRES preconditioned by the most recent LU factorization
  // of the Jacobian; refactorized when GMRES needs more than refactor_after
  // iterations. refactor_after = 0 factorizes every Newton iterate.
  int refactor_after = 20;
  double linear_tol = 1e-10;
};

namespace detail {

/// Preconditioner adaptor around an externally owned SparseLU.
template <class Lu>
class LuPreconditioner {
 public:
  LuPreconditioner() = default;
  void bind(const Lu* lu) { lu_ = lu; }
  template <class Mat>
  LuPreconditioner& analyzePattern(const Mat&) { return *this; }
  template <class Mat>
  LuPreconditioner& factorize(const Mat&) { return *this; }
  template <class Mat>
  LuPreconditioner& compute(const Mat&) { return *this; }
  template <class Rhs>
  Vector solve(const Rhs& b) const { return lu_->solve(b); }
  Eigen::ComputationInfo info() const { return Eigen::Success; }

 private:
  const Lu* lu_ = nullptr;
};

}  // namespace detail

struct StepStats {
  int iterations = 0;                   // Newton updates applied
  std::vector<double> residual_history; // max-norm before each update and at exit
  double linear_residual = 0.0;         // max-norm of J dx + R of the last solve
  double interval_dissipation = 0.0;    // int over the interval of D_phi(mu)
};

struct StepResult {
  FeField phi;
  FeField mu;
  StepStats stats;
};

/// One step of the Petrov-Galerkin scheme: phi continuous piecewise linear in
/// time, mu and the test functions piecewise constant. With phi(s) the linear
/// interpolant between phi_prev (s = 0) and phi_next (s = 1), the residuals are
///
///   R1 = M (phi_next - phi_prev) + tau * int_0^1 <b(phi(s)) grad mu, grad v> ds
///   R2 = tau M mu - gamma tau K (phi_next + phi_prev) / 2
///        - tau * int_0^1 <f'(phi(s)), w> ds
///
/// and are driven to zero by Newton's method on the full 2x2 block Jacobian. Time integrals use 3-point Gauss, exact for quartic b
/// and f along a linear path.
class Stepper {
 public:
  Stepper(SpacePtr space, const ModelParams& model, double tau, NewtonSettings settings = {})
      : space_(std::move(space)),
        model_(model),
        tau_(tau),
        settings_(settings),
        mass_(mass_matrix(*space_)),
        stiffness_(stiffness_matrix(*space_)) {
    build_block_pattern();
  }

  double tau() const noexcept { return tau_; }
  const SpacePtr& space() const noexcept { return space_; }
  const ModelParams& model() const noexcept { return model_; }
  const SparseMatrix& mass() const noexcept { return mass_; }

  /// Chemical potential consistent with phi0: M mu = gamma K phi0 + F'(phi0).
  FeField initial_mu(const FeField& phi0) const {
    const Vector rhs = model_.gamma() * (stiffness_ * phi0.coeffs) + nonlinear_load(phi0, model_, 1);
    Eigen::SimplicialLDLT<SparseMatrix> solver(mass_);
    if (solver.info() != Eigen::Success) throw Error(Errc::LinearSolveFailed, "mass factorization failed");
    return FeField(space_, solver.solve(rhs));
  }

  /// Newton from phi_next = phi_prev and the given mu.
  StepResult step(const FeField& phi_prev, const FeField& mu_guess) {
    return step(phi_prev, mu_guess, phi_prev);
  }

  StepResult step(const FeField& phi_prev, const FeField& mu_guess, const FeField& phi_guess) {
    const int n = space_->dof_count();
    const auto& tab = space_->nonlin_table();
    const QpValues prev_qp = values_at_quadrature(*space_, phi_prev.coeffs, tab);

    Vector x = phi_guess.coeffs;
    Vector m = mu_guess.coeffs;
    Vector residual(2 * n);
    StepStats stats;

    for (int it = 0;; ++it) {
      const Operators ops = assemble(prev_qp, x, m);
      residual.head(n) = mass_ * (x - phi_prev.coeffs) + tau_ * (ops.w * m);
      residual.tail(n) = tau_ * (mass_ * m) -
                         (0.5 * model_.gamma() * tau_) * (stiffness_ * (x + phi_prev.coeffs)) -
                         tau_ * ops.fbar;
      const double res = residual.lpNorm<Eigen::Infinity>();
      stats.residual_history.push_back(res);
      if (!std::isfinite(res)) throw Error(Errc::NewtonDiverged, "non-finite Newton residual");
      if (res <= settings_.tol) {
        stats.interval_dissipation = tau_ * m.dot(ops.w * m);
        break;
      }
      if (it >= settings_.max_iter)
        throw Error(Errc::NewtonDiverged, "residual " + std::to_string(res) + " above tolerance after " +
                                              std::to_string(it) + " iterations");

      fill_jacobian(ops);
      const Vector delta = solve_linear(residual);
      stats.linear_residual = (jacobian_ * delta + residual).lpNorm<Eigen::Infinity>();
      x += delta.head(n);
      m += delta.tail(n);
      stats.iterations = it + 1;
    }
    return {FeField(space_, std::move(x)), FeField(space_, std::move(m)), std::move(stats)};
  }

 private:
  using Lu = Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>>;

  void refactorize() {
    if (!analyzed_) {
      lu_.analyzePattern(jacobian_);
      analyzed_ = true;
    }
    lu_.factorize(jacobian_);
    if (lu_.info() != Eigen::Success) throw Error(Errc::LinearSolveFailed, lu_.lastErrorMessage());
    factorized_ = true;
  }

  Vector direct_solve(const Vector& residual) {
    refactorize();
    Vector delta = lu_.solve(-residual);
    if (lu_.info() != Eigen::Success || !delta.allFinite())
      throw Error(Errc::LinearSolveFailed, "sparse LU solve failed");
    return delta;
  }

  // J delta = -R. Exact Jacobian; the factorization may be from an earlier
  // iterate and only serves as preconditioner.
  Vector solve_linear(const Vector& residual) {
    if (!factorized_ || settings_.refactor_after <= 0) return direct_solve(residual);
    Eigen::GMRES<SparseMatrix, detail::LuPreconditioner<Lu>> gmres;
    gmres.preconditioner().bind(&lu_);
    gmres.setTolerance(settings_.linear_tol);
    gmres.setMaxIterations(2 * settings_.refactor_after);
    gmres.set_restart(2 * settings_.refactor_after);
    gmres.compute(jacobian_);
    Vector delta = gmres.solve(-residual);
    const bool ok = gmres.info() == Eigen::Success && delta.allFinite();
    if (!ok) return direct_solve(residual);
    if (gmres.iterations() > settings_.refactor_after) refactorize();
    return delta;
  }

  struct Operators {
    SparseMatrix w;   // int bbar grad psi_j . grad psi_i
    SparseMatrix c;   // int cb psi_j grad mu . grad psi_i
    SparseMatrix g;   // int cf psi_j psi_i
    Vector fbar;      // int fbar psi_i
  };

  Operators assemble(const QpValues& prev_qp, const Vector& x, const Vector& m) const {
    const auto& tab = space_->nonlin_table();
    const auto& tr = gauss3();
    const QpValues next_qp = values_at_quadrature(*space_, x, tab);
    const QpGradients grad_mu = gradients_at_quadrature(*space_, m, tab);
    const std::size_t nk = prev_qp.size();
    QpValues bbar(nk), cb(nk), fbar(nk), cf(nk);
    for (std::size_t k = 0; k < nk; ++k) {
      double sb = 0.0, sdb = 0.0, sf = 0.0, sdf = 0.0;
      for (int q = 0; q < 3; ++q) {
        const double s = tr.nodes[q];
        const double w = tr.weights[q];
        const double phi = (1.0 - s) * prev_qp[k] + s * next_qp[k];
        sb += w * model_.b(phi);
        sdb += w * s * model_.b(phi, 1);
        sf += w * model_.f(phi, 1);
        sdf += w * s * model_.f(phi, 2);
      }
      bbar[k] = sb;
      cb[k] = sdb;
      fbar[k] = sf;
      cf[k] = sdf;
    }
    Operators ops;
    ops.w = weighted_stiffness_qp(*space_, tab, bbar);
    ops.c = gradient_coupling_qp(*space_, tab, cb, grad_mu);
    ops.g = weighted_mass_qp(*space_, tab, cf);
    ops.fbar = load_qp(*space_, tab, fbar);
    return ops;
  }

  // Block column c < n holds [J00(:,c); J10(:,c)], column n + c holds
  // [J01(:,c); J11(:,c)]; all four blocks share the P2 pattern.
  void build_block_pattern() {
    const SparseMatrix& p = space_->pattern();
    const int n = space_->dof_count();
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(4 * static_cast<std::size_t>(p.nonZeros()));
    for (int c = 0; c < n; ++c) {
      for (SparseMatrix::InnerIterator itr(p, c); itr; ++itr) {
        const int r = static_cast<int>(itr.row());
        trips.emplace_back(r, c, 0.0);
        trips.emplace_back(r + n, c, 0.0);
        trips.emplace_back(r, c + n, 0.0);
        trips.emplace_back(r + n, c + n, 0.0);
      }
    }
    jacobian_.resize(2 * n, 2 * n);
    jacobian_.setFromTriplets(trips.begin(), trips.end());
    jacobian_.makeCompressed();
  }

  void fill_jacobian(const Operators& ops) {
    const SparseMatrix& p = space_->pattern();
    const int n = space_->dof_count();
    const int* outer = p.outerIndexPtr();
    const double* mv = mass_.valuePtr();
    const double* kv = stiffness_.valuePtr();
    const double* wv = ops.w.valuePtr();
    const double* cv = ops.c.valuePtr();
    const double* gv = ops.g.valuePtr();
    double* jv = jacobian_.valuePtr();
    const int* jouter = jacobian_.outerIndexPtr();
    const double half_gt = 0.5 * model_.gamma() * tau_;
    for (int c = 0; c < n; ++c) {
      const int len = outer[c + 1] - outer[c];
      double* left = jv + jouter[c];
      double* right = jv + jouter[c + n];
      for (int e = 0; e < len; ++e) {
        const int k = outer[c] + e;
        left[e] = mv[k] + tau_ * cv[k];
        left[len + e] = -half_gt * kv[k] - tau_ * gv[k];
        right[e] = tau_ * wv[k];
        right[len + e] = tau_ * mv[k];
      }
    }
  }

  SpacePtr space_;
  ModelParams model_;
  double tau_;
  NewtonSettings settings_;
  SparseMatrix mass_;
  SparseMatrix stiffness_;
  SparseMatrix jacobian_;
  Lu lu_;
  bool analyzed_ = false;
  bool factorized_ = false;
};

/// Initial phase field, given analytically (value + gradient, H1-projected)
/// or directly as coefficients on the run's space.
struct InitialCondition {
  std::function<double(double, double)> value;
  std::function<Point(double, double)> gradient;
  std::optional<Vector> coefficients;
};

/// offset + amplitude sin(2 pi kx x) sin(2 pi ky y).
inline InitialCondition product_sine_initial_condition(double amplitude, int kx, int ky, double offset) {
  using std::numbers::pi;
  InitialCondition ic;
  ic.value = [=](double x, double y) {
    return offset + amplitude * std::sin(2.0 * pi * kx * x) * std::sin(2.0 * pi * ky * y);
  };
  ic.gradient = [=](double x, double y) {
    return Point{amplitude * 2.0 * pi * kx * std::cos(2.0 * pi * kx * x) * std::sin(2.0 * pi * ky * y),
                 amplitude * 2.0 * pi * ky * std::sin(2.0 * pi * kx * x) * std::cos(2.0 * pi * ky * y)};
  };
  return ic;
}

/// 0.2 sin(4 pi x) sin(2 pi y) + 0.2
inline InitialCondition reference_initial_condition() { return product_sine_initial_condition(0.2, 2, 1, 0.2); }

struct RunSpec {
  int level = 0;
  TimeGrid grid;
  RawModel model;
  InitialCondition initial;
  NewtonSettings newton;
};

/// phi at the N+1 time nodes, mu on the N intervals, diagnostics per node.
struct Trajectory {
  SpacePtr space;
  TimeGrid grid;
  std::vector<Vector> phi;
  std::vector<Vector> mu;
  std::vector<DiagnosticsRecord> diagnostics;
  std::vector<StepStats> step_stats;
  std::string failure;  // empty when all steps converged
  Errc failure_code = Errc::NewtonDiverged;

  bool complete() const noexcept { return failure.empty() && static_cast<int>(mu.size()) == grid.n_steps; }
  FeField phi_at(int n) const { return FeField(space, phi[n]); }
  FeField mu_on(int interval) const { return FeField(space, mu[interval]); }
};

inline FeField initial_field(const SpacePtr& space, const InitialCondition& ic) {
  if (ic.coefficients) {
    if (ic.coefficients->size() != space->dof_count())
      throw Error(Errc::ValidationError, "initial coefficient vector has wrong length", "initial_condition");
    return FeField(space, *ic.coefficients);
  }
  return h1_project(space, ic.value, ic.gradient);
}

/// Runs all steps; a failing step ends the run and is recorded in `failure`.
inline Trajectory run(const RunSpec& spec) {
  const ModelParams model = validate(spec.model);
  Trajectory traj;
  traj.space = build_space(spec.level);
  traj.grid = spec.grid;
  Stepper stepper(traj.space, model, spec.grid.tau, spec.newton);

  FeField phi = initial_field(traj.space, spec.initial);
  FeField mu = stepper.initial_mu(phi);
  traj.phi.push_back(phi.coeffs);
  DiagnosticsRecord rec;
  rec.mass = mass(phi);
  rec.energy = energy(phi, model);
  traj.diagnostics.push_back(rec);

  double cumulative = 0.0;
  for (int n = 1; n <= spec.grid.n_steps; ++n) {
    try {
      StepResult r = stepper.step(phi, mu);
      cumulative += r.stats.interval_dissipation;
      phi = std::move(r.phi);
      mu = std::move(r.mu);
      traj.phi.push_back(phi.coeffs);
      traj.mu.push_back(mu.coeffs);
      DiagnosticsRecord d;
      d.t = spec.grid.node(n);
      d.mass = mass(phi);
      d.energy = energy(phi, model);
      d.cumulative_dissipation = cumulative;
      d.newton_iters = r.stats.iterations;
      d.linear_residual = r.stats.linear_residual;
      traj.diagnostics.push_back(d);
      traj.step_stats.push_back(std::move(r.stats));
    } catch (const Error& e) {
      traj.failure = "step " + std::to_string(n) + ": " + e.what();
      traj.failure_code = e.code();
      break;
    }
  }
  return traj;
}

}  // namespace ch
