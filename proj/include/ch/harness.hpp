#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "ch/assembly.hpp"
#include "ch/error.hpp"
#include "ch/fespace.hpp"
#include "ch/functionals.hpp"
#include "ch/integrator.hpp"
#include "ch/model.hpp"
#include "ch/projections.hpp"

namespace ch {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// log2(e_coarse / e_fine).
inline double eoc(double e_coarse, double e_fine) {
  if (!(e_coarse > 0.0) || !(e_fine > 0.0))
    throw Error(Errc::NonPositiveError, "errors must be positive to compute an order");
  return std::log2(e_coarse / e_fine);
}

/// log(e_a / e_b) / log(p_a / p_b) for a general parameter ratio.
inline double eoc(double e_a, double e_b, double p_a, double p_b) {
  return std::log(e_a / e_b) / std::log(p_a / p_b);
}

/// Composite prolongation from `coarse` to a space any number of uniform
/// refinements finer (identity for equal levels).
inline SparseMatrix prolongation_chain(const SpacePtr& coarse, const SpacePtr& fine) {
  const int lc = coarse->mesh().level, lf = fine->mesh().level;
  if (lf < lc) throw Error(Errc::GridsNotNested, "fine trajectory lives on a coarser mesh");
  SparseMatrix p(coarse->dof_count(), coarse->dof_count());
  p.setIdentity();
  SpacePtr from = coarse;
  for (int l = lc + 1; l <= lf; ++l) {
    SpacePtr to = l == lf ? fine : build_space(l);
    p = SparseMatrix(prolongation_matrix(*from, *to) * p);
    from = std::move(to);
  }
  return p;
}

struct ErrorParts {
  double phi = 0.0;  // max over coarse nodes of the H1 distance
  double mu = 0.0;   // L2-in-time H1 distance of the interval values
  double total() const noexcept { return phi + mu; }
};

/// Distance between two nested trajectories measured in the fine space.
/// The fine time grid must subdivide every coarse interval into the same
/// number of steps and end at the same time.
inline ErrorParts error_parts(const Trajectory& coarse, const Trajectory& fine) {
  if (!coarse.complete() || !fine.complete())
    throw Error(Errc::GridsNotNested, "both trajectories must cover the full time grid");
  const int nc = coarse.grid.n_steps, nf = fine.grid.n_steps;
  if (nc <= 0 || nf % nc != 0) throw Error(Errc::GridsNotNested, "fine time grid does not subdivide the coarse one");
  const double tc = coarse.grid.final_time(), tf = fine.grid.final_time();
  if (std::abs(tc - tf) > 1e-12 * std::max(1.0, std::abs(tc)))
    throw Error(Errc::GridsNotNested, "trajectories end at different times");
  const int ratio = nf / nc;

  SparseMatrix p;
  try {
    p = prolongation_chain(coarse.space, fine.space);
  } catch (const Error& e) {
    if (e.code() == Errc::GridsNotNested) throw;
    throw Error(Errc::GridsNotNested, e.what());
  }
  const SparseMatrix gram = h1_gram(*fine.space);
  auto h1_sq = [&](const Vector& d) { return d.dot(gram * d); };

  ErrorParts out;
  for (int n = 0; n <= nc; ++n) {
    const Vector d = p * coarse.phi[n] - fine.phi[n * ratio];
    out.phi = std::max(out.phi, std::sqrt(std::max(0.0, h1_sq(d))));
  }
  double acc = 0.0;
  for (int j = 0; j < nf; ++j) {
    const Vector d = p * coarse.mu[j / ratio] - fine.mu[j];
    acc += fine.grid.tau * std::max(0.0, h1_sq(d));
  }
  out.mu = std::sqrt(acc);
  return out;
}

inline double error_between(const Trajectory& coarse, const Trajectory& fine) {
  return error_parts(coarse, fine).total();
}

// ---------------------------------------------------------------------------
// Convergence study

enum class StudyMode { Full, Semi, Time };

inline std::string_view to_string(StudyMode m) noexcept {
  switch (m) {
    case StudyMode::Full: return "full";
    case StudyMode::Semi: return "semi";
    case StudyMode::Time: return "time";
  }
  return "full";
}

struct StudySettings {
  RawModel model = reference_model();
  InitialCondition initial = reference_initial_condition();
  NewtonSettings newton;
  double T = 0.16;
  double tau_factor = 0.16;
  int tau_star_exp = 9;
  int time_level = 1;  // mesh level held fixed in StudyMode::Time
  std::function<void(const std::string&)> log;
};

struct StudyRow {
  int k = 0;
  double h = 0.0;
  double tau = 0.0;
  double e = 0.0;
  double e_phi = 0.0;
  double e_mu = 0.0;
  double eoc = kNaN;  // NaN on the first row
};

struct ConvergenceReport {
  StudyMode mode = StudyMode::Full;
  double T = 0.0;
  std::vector<StudyRow> rows;
};

/// Published errors and rates for the reference problem (unstated final
/// time); used only for side-by-side printing.
struct PublishedRow {
  int k;
  double e_h, eoc_h, e_htau, eoc_htau;
};

inline const std::array<PublishedRow, 5>& published_table() {
  static const std::array<PublishedRow, 5> rows{{
      {0, 1.4794, kNaN, 1.5183, kNaN},
      {1, 3.7373e-1, 1.98, 3.7896e-1, 2.00},
      {2, 9.2554e-2, 2.01, 9.2797e-2, 2.02},
      {3, 2.3622e-2, 1.97, 2.3795e-2, 1.96},
      {4, 5.9391e-3, 1.99, 6.0902e-3, 1.96},
  }};
  return rows;
}

inline double mesh_width(int k) { return std::ldexp(1.0, -(3 + k)); }

/// Number of steps T / tau, rejecting grids that do not end at T.
inline int step_count(double T, double tau, const std::string& key = "T") {
  if (!(T > 0.0) || !(tau > 0.0)) throw Error(Errc::ValidationError, "T and tau must be positive", key);
  const double r = T / tau;
  const double n = std::round(r);
  if (n < 1.0 || std::abs(r - n) > 1e-9 * std::max(1.0, r))
    throw Error(Errc::ValidationError, "T / tau is not an integer", key);
  return static_cast<int>(n);
}

namespace detail {

inline Trajectory checked_run(const RunSpec& spec) {
  Trajectory t = run(spec);
  if (!t.complete()) throw Error(t.failure_code, t.failure);
  return t;
}

}  // namespace detail

/// For each k in [k_min, k_max] compares the run at index k with the run at
/// index k + 1. Each distinct run is computed once.
inline ConvergenceReport convergence_study(const StudySettings& cfg, int k_min, int k_max, StudyMode mode) {
  if (k_min < 0 || k_max < k_min) throw Error(Errc::ValidationError, "k range must be ascending and non-negative", "k");
  auto level_of = [&](int k) { return mode == StudyMode::Time ? cfg.time_level : k; };
  auto tau_of = [&](int k) {
    return mode == StudyMode::Semi ? cfg.tau_factor * std::ldexp(1.0, -cfg.tau_star_exp)
                                   : cfg.tau_factor * mesh_width(k);
  };

  std::map<int, Trajectory> runs;
  auto get = [&](int k) -> const Trajectory& {
    auto it = runs.find(k);
    if (it != runs.end()) return it->second;
    RunSpec spec;
    spec.level = level_of(k);
    spec.grid = TimeGrid::uniform(cfg.T, step_count(cfg.T, tau_of(k)));
    spec.model = cfg.model;
    spec.initial = cfg.initial;
    spec.newton = cfg.newton;
    if (cfg.log)
      cfg.log("run k=" + std::to_string(k) + " level=" + std::to_string(spec.level) +
              " steps=" + std::to_string(spec.grid.n_steps));
    return runs.emplace(k, detail::checked_run(spec)).first->second;
  };

  ConvergenceReport rep;
  rep.mode = mode;
  rep.T = cfg.T;
  for (int k = k_min; k <= k_max; ++k) {
    const ErrorParts parts = error_parts(get(k), get(k + 1));
    runs.erase(k);  // no longer needed
    StudyRow row;
    row.k = k;
    row.h = mesh_width(level_of(k));
    row.tau = tau_of(k);
    row.e_phi = parts.phi;
    row.e_mu = parts.mu;
    row.e = parts.total();
    if (!rep.rows.empty()) row.eoc = eoc(rep.rows.back().e, row.e);
    rep.rows.push_back(row);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Perturbation probe

struct StabilityRow {
  double eps = 0.0;
  std::vector<double> relative_energy;  // E_alpha(phi_eps | phi) at every node
  double amplification = 0.0;           // sup_n E(t^n) / E(0); 0 when E(0) = 0
  double eoc = kNaN;                     // order in eps against the previous row
};

struct StabilityReport {
  std::vector<double> times;
  std::vector<StabilityRow> rows;
};

/// Adds eps sin(2 pi x) to the initial condition.
inline InitialCondition perturbed_initial_condition(const InitialCondition& base, double eps, int level) {
  using std::numbers::pi;
  InitialCondition ic = base;
  if (base.coefficients) {
    const FeField s = h1_project(
        build_space(level), [](double x, double) { return std::sin(2.0 * pi * x); },
        [](double x, double) { return Point{2.0 * pi * std::cos(2.0 * pi * x), 0.0}; });
    ic.coefficients = *base.coefficients + eps * s.coeffs;
    return ic;
  }
  auto v = base.value;
  auto g = base.gradient;
  ic.value = [v, eps](double x, double y) { return v(x, y) + eps * std::sin(2.0 * pi * x); };
  ic.gradient = [g, eps](double x, double y) {
    Point p = g(x, y);
    p.x += eps * 2.0 * pi * std::cos(2.0 * pi * x);
    return p;
  };
  return ic;
}

inline StabilityReport stability_probe(const RunSpec& base, const std::vector<double>& epsilons) {
  const ModelParams model = validate(base.model);
  const Trajectory ref = detail::checked_run(base);
  StabilityReport rep;
  for (int n = 0; n <= base.grid.n_steps; ++n) rep.times.push_back(base.grid.node(n));
  for (double eps : epsilons) {
    RunSpec spec = base;
    spec.initial = perturbed_initial_condition(base.initial, eps, base.level);
    const Trajectory pert = detail::checked_run(spec);
    StabilityRow row;
    row.eps = eps;
    for (int n = 0; n <= base.grid.n_steps; ++n)
      row.relative_energy.push_back(relative_energy(pert.phi_at(n), ref.phi_at(n), model));
    const double e0 = row.relative_energy.front();
    if (e0 > 0.0)
      for (double e : row.relative_energy) row.amplification = std::max(row.amplification, e / e0);
    if (!rep.rows.empty()) {
      const StabilityRow& prev = rep.rows.back();
      const double a = prev.relative_energy.back(), b = row.relative_energy.back();
      if (a > 0.0 && b > 0.0 && prev.eps > 0.0 && eps > 0.0 && prev.eps != eps) row.eoc = eoc(a, b, prev.eps, eps);
    }
    rep.rows.push_back(std::move(row));
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Projection and time-operator orders

struct ProjectionRow {
  int level = 0;
  double h = 0.0;
  double l2_error = 0.0;  // ||g - pi0 g||_0
  double h1_error = 0.0;  // ||g - pi1 g||_1
  double mu_error = 0.0;  // ||mu - mu_hat||_1 for the manufactured pair
  double eoc_l2 = kNaN, eoc_h1 = kNaN, eoc_mu = kNaN;
};

/// g = sin(2 pi x) cos(2 pi y); the chemical potential pair uses
/// phi = 0.1 + 0.5 g and mu = -gamma lap phi + f'(phi).
inline std::vector<ProjectionRow> projection_study(const ModelParams& model, int level_min, int level_max) {
  using std::numbers::pi;
  const double tp = 2.0 * pi;
  auto g = [=](double x, double y) { return std::sin(tp * x) * std::cos(tp * y); };
  auto dg = [=](double x, double y) {
    return Point{tp * std::cos(tp * x) * std::cos(tp * y), -tp * std::sin(tp * x) * std::sin(tp * y)};
  };
  auto phi = [=](double x, double y) { return 0.1 + 0.5 * g(x, y); };
  auto dphi = [=](double x, double y) {
    const Point d = dg(x, y);
    return Point{0.5 * d.x, 0.5 * d.y};
  };
  const double lap_coef = 2.0 * tp * tp;  // -lap g = 8 pi^2 g
  auto mu = [=, &model](double x, double y) {
    return model.gamma() * 0.5 * lap_coef * g(x, y) + model.f(phi(x, y), 1);
  };
  auto dmu = [=, &model](double x, double y) {
    const Point d = dg(x, y);
    const double s = model.gamma() * 0.5 * lap_coef + 0.5 * model.f(phi(x, y), 2);
    return Point{s * d.x, s * d.y};
  };

  std::vector<ProjectionRow> rows;
  for (int level = level_min; level <= level_max; ++level) {
    const Projector proj(build_space(level));
    ProjectionRow r;
    r.level = level;
    r.h = mesh_width(level);
    r.l2_error = error_norms(proj.l2(g), g, dg).l2;
    r.h1_error = error_norms(proj.h1(g, dg), g, dg).h1;
    const FeField phi_hat = proj.h1(phi, dphi);
    r.mu_error = error_norms(proj.mu_hat(phi, dphi, mu, phi_hat, model), mu, dmu).h1;
    if (!rows.empty()) {
      const ProjectionRow& p = rows.back();
      r.eoc_l2 = eoc(p.l2_error, r.l2_error);
      r.eoc_h1 = eoc(p.h1_error, r.h1_error);
      r.eoc_mu = eoc(p.mu_error, r.mu_error);
    }
    rows.push_back(r);
  }
  return rows;
}

struct TimeOperatorRow {
  double tau = 0.0;
  double avg_error = 0.0;     // ||u - avg u||_L2
  double interp_error = 0.0;  // ||u - interp u||_L2
  double product_defect = 0.0;
  double eoc_avg = kNaN, eoc_interp = kNaN, eoc_product = kNaN;
};

/// u = sin t, v = cos t on (0, 1) with tau = 2^-j for j in [j_min, j_max].
inline std::vector<TimeOperatorRow> time_operator_study(int j_min, int j_max) {
  auto u = [](double t) { return std::sin(t); };
  auto v = [](double t) { return std::cos(t); };
  std::vector<TimeOperatorRow> rows;
  for (int j = j_min; j <= j_max; ++j) {
    const int n = 1 << j;
    const TimeGrid grid = TimeGrid::uniform(1.0, n);
    const auto avg = time_avg(u, grid);
    const auto lin = time_interp(u, grid);
    TimeOperatorRow r;
    r.tau = grid.tau;
    r.avg_error = time_l2_distance(u, [&](int i, double) { return avg[i]; }, grid);
    r.interp_error = time_l2_distance(u, [&](int, double t) { return lin(t); }, grid);
    r.product_defect = product_projection_defect(u, v, grid, 2.0);
    if (!rows.empty()) {
      const TimeOperatorRow& p = rows.back();
      r.eoc_avg = eoc(p.avg_error, r.avg_error);
      r.eoc_interp = eoc(p.interp_error, r.interp_error);
      r.eoc_product = eoc(p.product_defect, r.product_defect);
    }
    rows.push_back(r);
  }
  return rows;
}

}  // namespace ch
