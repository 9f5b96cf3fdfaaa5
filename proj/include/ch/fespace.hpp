#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "ch/error.hpp"
#include "ch/mesh.hpp"
#include "ch/quadrature.hpp"

namespace ch {

using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double>;

/// Quadratic Lagrange basis on the reference triangle with barycentrics
/// l0 = 1 - xi - eta, l1 = xi, l2 = eta. Order: three vertices, then the
/// midpoints of edges (0,1), (1,2), (2,0).
inline std::array<double, 6> p2_values(double xi, double eta) noexcept {
  const double l0 = 1.0 - xi - eta, l1 = xi, l2 = eta;
  return {l0 * (2.0 * l0 - 1.0), l1 * (2.0 * l1 - 1.0), l2 * (2.0 * l2 - 1.0),
          4.0 * l0 * l1,         4.0 * l1 * l2,         4.0 * l2 * l0};
}

inline std::array<std::array<double, 2>, 6> p2_reference_gradients(double xi, double eta) noexcept {
  const double l0 = 1.0 - xi - eta, l1 = xi, l2 = eta;
  const std::array<double, 2> d0{-1.0, -1.0}, d1{1.0, 0.0}, d2{0.0, 1.0};
  auto scale = [](double s, const std::array<double, 2>& d) { return std::array{s * d[0], s * d[1]}; };
  auto sum = [](const std::array<double, 2>& a, const std::array<double, 2>& b) {
    return std::array{a[0] + b[0], a[1] + b[1]};
  };
  return {scale(4.0 * l0 - 1.0, d0),
          scale(4.0 * l1 - 1.0, d1),
          scale(4.0 * l2 - 1.0, d2),
          sum(scale(4.0 * l1, d0), scale(4.0 * l0, d1)),
          sum(scale(4.0 * l2, d1), scale(4.0 * l1, d2)),
          sum(scale(4.0 * l0, d2), scale(4.0 * l2, d0))};
}

/// Affine map of one triangle shape: x = v0 + J (xi, eta).
struct AffineMap {
  std::array<double, 4> jac{};      // row-major J
  std::array<double, 4> inv_jac{};  // row-major J^{-1}
  double det = 0.0;

  static AffineMap from_corners(const std::array<Point, 3>& c) {
    AffineMap m;
    m.jac = {c[1].x - c[0].x, c[2].x - c[0].x, c[1].y - c[0].y, c[2].y - c[0].y};
    m.det = m.jac[0] * m.jac[3] - m.jac[1] * m.jac[2];
    m.inv_jac = {m.jac[3] / m.det, -m.jac[1] / m.det, -m.jac[2] / m.det, m.jac[0] / m.det};
    return m;
  }
  Point to_physical_offset(double xi, double eta) const noexcept {
    return {jac[0] * xi + jac[1] * eta, jac[2] * xi + jac[3] * eta};
  }
  std::array<double, 2> to_reference(Point offset) const noexcept {
    return {inv_jac[0] * offset.x + inv_jac[1] * offset.y,
            inv_jac[2] * offset.x + inv_jac[3] * offset.y};
  }
  /// J^{-T} applied to a reference gradient.
  Point physical_gradient(const std::array<double, 2>& g) const noexcept {
    return {inv_jac[0] * g[0] + inv_jac[2] * g[1], inv_jac[1] * g[0] + inv_jac[3] * g[1]};
  }
};

/// Basis values, physical gradients and weights tabulated at the points of a
/// triangle rule, for both triangle shapes of the uniform mesh.
struct ElementTable {
  const TriangleRule* rule = nullptr;
  std::vector<std::array<double, 6>> values;                 // [q][a]
  std::array<std::vector<std::array<Point, 6>>, 2> grads;    // [shape][q][a]
  std::array<std::vector<Point>, 2> offsets;                 // physical point minus v0
  std::vector<double> weights;                               // physical weights

  std::size_t size() const noexcept { return values.size(); }
};

/// Periodic, continuous, piecewise quadratic Lagrange space. Dofs: the n^2
/// vertices first, then the 3n^2 edge midpoints.
class FeSpace {
 public:
  explicit FeSpace(Mesh mesh) : mesh_(std::move(mesh)) {
    const int nv = static_cast<int>(mesh_.num_vertices());
    dof_count_ = nv + static_cast<int>(mesh_.num_edges());
    dof_points_ = mesh_.vertices;
    dof_points_.insert(dof_points_.end(), mesh_.edge_midpoints.begin(), mesh_.edge_midpoints.end());

    cell_dofs_.resize(mesh_.num_triangles());
    for (std::size_t t = 0; t < mesh_.num_triangles(); ++t) {
      const auto& v = mesh_.triangles[t];
      const auto& e = mesh_.triangle_edges[t];
      cell_dofs_[t] = {v[0], v[1], v[2], nv + e[0], nv + e[1], nv + e[2]};
    }
    maps_[0] = AffineMap::from_corners(mesh_.corners(0));
    maps_[1] = AffineMap::from_corners(mesh_.corners(1));
    stiff_table_ = tabulate(rule_degree4());
    nonlin_table_ = tabulate(rule_degree10());
    build_pattern();
  }

  const Mesh& mesh() const noexcept { return mesh_; }
  int dof_count() const noexcept { return dof_count_; }
  int num_cells() const noexcept { return static_cast<int>(cell_dofs_.size()); }
  const std::array<int, 6>& cell_dofs(int t) const noexcept { return cell_dofs_[t]; }
  const std::vector<Point>& dof_points() const noexcept { return dof_points_; }
  const AffineMap& map(int t) const noexcept { return maps_[shape_index(t)]; }
  int shape_index(int t) const noexcept { return mesh_.shape(t) == Mesh::Shape::Lower ? 0 : 1; }

  /// Degree-4 table for bilinear forms of P2 functions.
  const ElementTable& stiff_table() const noexcept { return stiff_table_; }
  /// Degree-10 table for every form involving b(phi) or f(phi).
  const ElementTable& nonlin_table() const noexcept { return nonlin_table_; }

  /// Zero-valued matrix with the P2 coupling pattern.
  const SparseMatrix& pattern() const noexcept { return pattern_; }
  /// Position in pattern().valuePtr() of entry (row = dof a, col = dof b),
  /// stored at [t][6a + b].
  const std::array<int, 36>& scatter(int t) const noexcept { return scatter_[t]; }

  Point corner0(int t) const noexcept { return mesh_.corners(t)[0]; }

 private:
  ElementTable tabulate(const TriangleRule& rule) const {
    ElementTable tab;
    tab.rule = &rule;
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const auto [xi, eta] = rule.points[q];
      tab.values.push_back(p2_values(xi, eta));
      tab.weights.push_back(rule.weights[q] * std::abs(maps_[0].det));
      const auto rg = p2_reference_gradients(xi, eta);
      for (int s = 0; s < 2; ++s) {
        std::array<Point, 6> g;
        for (int a = 0; a < 6; ++a) g[a] = maps_[s].physical_gradient(rg[a]);
        tab.grads[s].push_back(g);
        tab.offsets[s].push_back(maps_[s].to_physical_offset(xi, eta));
      }
    }
    return tab;
  }

  void build_pattern() {
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(cell_dofs_.size() * 36);
    for (const auto& d : cell_dofs_)
      for (int a = 0; a < 6; ++a)
        for (int b = 0; b < 6; ++b) trips.emplace_back(d[a], d[b], 0.0);
    pattern_.resize(dof_count_, dof_count_);
    pattern_.setFromTriplets(trips.begin(), trips.end());
    pattern_.makeCompressed();

    const int* outer = pattern_.outerIndexPtr();
    const int* inner = pattern_.innerIndexPtr();
    scatter_.resize(cell_dofs_.size());
    for (std::size_t t = 0; t < cell_dofs_.size(); ++t) {
      const auto& d = cell_dofs_[t];
      for (int a = 0; a < 6; ++a) {
        for (int b = 0; b < 6; ++b) {
          const int* first = inner + outer[d[b]];
          const int* last = inner + outer[d[b] + 1];
          scatter_[t][6 * a + b] = static_cast<int>(std::lower_bound(first, last, d[a]) - inner);
        }
      }
    }
  }

  Mesh mesh_;
  int dof_count_ = 0;
  std::vector<std::array<int, 6>> cell_dofs_;
  std::vector<Point> dof_points_;
  std::array<AffineMap, 2> maps_{};
  ElementTable stiff_table_;
  ElementTable nonlin_table_;
  SparseMatrix pattern_;
  std::vector<std::array<int, 36>> scatter_;
};

using SpacePtr = std::shared_ptr<const FeSpace>;

inline SpacePtr build_space(Mesh mesh) { return std::make_shared<const FeSpace>(std::move(mesh)); }
inline SpacePtr build_space(int level) { return build_space(build_uniform(level)); }

/// Coefficient vector of a scalar field in a FeSpace.
struct FeField {
  SpacePtr space;
  Vector coeffs;

  FeField() = default;
  explicit FeField(SpacePtr s) : space(std::move(s)), coeffs(Vector::Zero(space->dof_count())) {}
  FeField(SpacePtr s, Vector c) : space(std::move(s)), coeffs(std::move(c)) {}
};

namespace detail {

struct LocalPoint {
  int cell = 0;
  double xi = 0.0;
  double eta = 0.0;
};

inline LocalPoint localize(const FeSpace& space, Point p) {
  const Point w{p.x - std::floor(p.x), p.y - std::floor(p.y)};
  const int t = space.mesh().locate(w);
  const Point v0 = space.corner0(t);
  const auto r = space.map(t).to_reference({w.x - v0.x, w.y - v0.y});
  return {t, r[0], r[1]};
}

}  // namespace detail

/// Evaluates the local polynomial of triangle `cell` at a point given in that
/// triangle's unwrapped frame; extrapolates outside the triangle.
inline double eval_in_cell(const FeField& u, int cell, Point p) {
  const FeSpace& s = *u.space;
  const Point v0 = s.corner0(cell);
  const auto r = s.map(cell).to_reference({p.x - v0.x, p.y - v0.y});
  const auto phi = p2_values(r[0], r[1]);
  const auto& d = s.cell_dofs(cell);
  double v = 0.0;
  for (int a = 0; a < 6; ++a) v += u.coeffs[d[a]] * phi[a];
  return v;
}

/// Point values; points outside [0,1)^2 are wrapped periodically.
inline std::vector<double> eval(const FeField& u, std::span<const Point> points) {
  std::vector<double> out;
  out.reserve(points.size());
  for (const Point& p : points) {
    const auto lp = detail::localize(*u.space, p);
    const auto phi = p2_values(lp.xi, lp.eta);
    const auto& d = u.space->cell_dofs(lp.cell);
    double v = 0.0;
    for (int a = 0; a < 6; ++a) v += u.coeffs[d[a]] * phi[a];
    out.push_back(v);
  }
  return out;
}

inline double eval(const FeField& u, Point p) { return eval(u, std::span<const Point>(&p, 1))[0]; }

inline std::vector<Point> eval_gradient(const FeField& u, std::span<const Point> points) {
  std::vector<Point> out;
  out.reserve(points.size());
  for (const Point& p : points) {
    const auto lp = detail::localize(*u.space, p);
    const auto rg = p2_reference_gradients(lp.xi, lp.eta);
    const auto& d = u.space->cell_dofs(lp.cell);
    const auto& m = u.space->map(lp.cell);
    Point g;
    for (int a = 0; a < 6; ++a) {
      const Point ga = m.physical_gradient(rg[a]);
      g.x += u.coeffs[d[a]] * ga.x;
      g.y += u.coeffs[d[a]] * ga.y;
    }
    out.push_back(g);
  }
  return out;
}

/// Nodal interpolation: coefficients are g at the dof coordinates.
template <class Fn>
FeField interpolate(SpacePtr space, Fn&& g) {
  FeField u(space);
  const auto& pts = space->dof_points();
  for (int i = 0; i < space->dof_count(); ++i) u.coeffs[i] = g(pts[i].x, pts[i].y);
  return u;
}

/// Sparse matrix P with P * coarse_coeffs = coefficients of the same function
/// in the refined space.
inline SparseMatrix prolongation_matrix(const FeSpace& coarse, const FeSpace& fine) {
  if (fine.mesh().level != coarse.mesh().level + 1 || fine.mesh().n != 2 * coarse.mesh().n)
    throw Error(Errc::SpaceNotNested, "fine space is not the uniform refinement of the coarse space");
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(fine.dof_count()) * 6);
  const auto& pts = fine.dof_points();
  for (int i = 0; i < fine.dof_count(); ++i) {
    const auto lp = detail::localize(coarse, pts[i]);
    const auto phi = p2_values(lp.xi, lp.eta);
    const auto& d = coarse.cell_dofs(lp.cell);
    for (int a = 0; a < 6; ++a)
      if (phi[a] != 0.0) trips.emplace_back(i, d[a], phi[a]);
  }
  SparseMatrix p(fine.dof_count(), coarse.dof_count());
  p.setFromTriplets(trips.begin(), trips.end());
  p.makeCompressed();
  return p;
}

inline FeField prolong(const FeField& u, SpacePtr fine) {
  const SparseMatrix p = prolongation_matrix(*u.space, *fine);
  return FeField(fine, p * u.coeffs);
}

}  // namespace ch
