#pragma once

#include <array>
#include <span>
#include <vector>

#include "ch/fespace.hpp"
#include "ch/model.hpp"

namespace ch {

/// Values of a scalar (or vector) quantity at every quadrature point of a
/// table, laid out cell-major: index t * table.size() + q.
using QpValues = std::vector<double>;
using QpGradients = std::vector<Point>;

inline QpValues values_at_quadrature(const FeSpace& space, const Vector& coeffs,
                                     const ElementTable& tab) {
  const std::size_t nq = tab.size();
  QpValues out(static_cast<std::size_t>(space.num_cells()) * nq);
  for (int t = 0; t < space.num_cells(); ++t) {
    const auto& d = space.cell_dofs(t);
    std::array<double, 6> c;
    for (int a = 0; a < 6; ++a) c[a] = coeffs[d[a]];
    for (std::size_t q = 0; q < nq; ++q) {
      double v = 0.0;
      for (int a = 0; a < 6; ++a) v += c[a] * tab.values[q][a];
      out[t * nq + q] = v;
    }
  }
  return out;
}

inline QpGradients gradients_at_quadrature(const FeSpace& space, const Vector& coeffs,
                                           const ElementTable& tab) {
  const std::size_t nq = tab.size();
  QpGradients out(static_cast<std::size_t>(space.num_cells()) * nq);
  for (int t = 0; t < space.num_cells(); ++t) {
    const auto& d = space.cell_dofs(t);
    const auto& grads = tab.grads[space.shape_index(t)];
    std::array<double, 6> c;
    for (int a = 0; a < 6; ++a) c[a] = coeffs[d[a]];
    for (std::size_t q = 0; q < nq; ++q) {
      Point g;
      for (int a = 0; a < 6; ++a) {
        g.x += c[a] * grads[q][a].x;
        g.y += c[a] * grads[q][a].y;
      }
      out[t * nq + q] = g;
    }
  }
  return out;
}

/// Physical coordinates of the quadrature points (unwrapped per cell).
inline std::vector<Point> quadrature_points(const FeSpace& space, const ElementTable& tab) {
  const std::size_t nq = tab.size();
  std::vector<Point> out(static_cast<std::size_t>(space.num_cells()) * nq);
  for (int t = 0; t < space.num_cells(); ++t) {
    const Point v0 = space.corner0(t);
    const auto& off = tab.offsets[space.shape_index(t)];
    for (std::size_t q = 0; q < nq; ++q) out[t * nq + q] = Point{v0.x + off[q].x, v0.y + off[q].y};
  }
  return out;
}

namespace detail {

/// Element loop in fixed cell order; `local(t, block)` fills a 6x6 block
/// (row a = test function, column b = trial function).
template <class LocalFn>
SparseMatrix assemble_matrix(const FeSpace& space, LocalFn&& local) {
  SparseMatrix mat = space.pattern();
  double* val = mat.valuePtr();
  std::array<double, 36> block;
  for (int t = 0; t < space.num_cells(); ++t) {
    block.fill(0.0);
    local(t, block);
    const auto& sc = space.scatter(t);
    for (int k = 0; k < 36; ++k) val[sc[k]] += block[k];
  }
  return mat;
}

template <class LocalFn>
Vector assemble_vector(const FeSpace& space, LocalFn&& local) {
  Vector vec = Vector::Zero(space.dof_count());
  std::array<double, 6> block;
  for (int t = 0; t < space.num_cells(); ++t) {
    block.fill(0.0);
    local(t, block);
    const auto& d = space.cell_dofs(t);
    for (int a = 0; a < 6; ++a) vec[d[a]] += block[a];
  }
  return vec;
}

}  // namespace detail

/// Weighted mass form: entries int w psi_i psi_j with w given at the
/// quadrature points of `tab`.
inline SparseMatrix weighted_mass_qp(const FeSpace& space, const ElementTable& tab,
                                     std::span<const double> weight) {
  const std::size_t nq = tab.size();
  return detail::assemble_matrix(space, [&](int t, std::array<double, 36>& blk) {
    for (std::size_t q = 0; q < nq; ++q) {
      const double wq = tab.weights[q] * weight[t * nq + q];
      const auto& phi = tab.values[q];
      for (int a = 0; a < 6; ++a)
        for (int b = 0; b < 6; ++b) blk[6 * a + b] += wq * phi[a] * phi[b];
    }
  });
}

/// Weighted stiffness form: entries int w grad psi_i . grad psi_j.
inline SparseMatrix weighted_stiffness_qp(const FeSpace& space, const ElementTable& tab,
                                          std::span<const double> weight) {
  const std::size_t nq = tab.size();
  return detail::assemble_matrix(space, [&](int t, std::array<double, 36>& blk) {
    const auto& grads = tab.grads[space.shape_index(t)];
    for (std::size_t q = 0; q < nq; ++q) {
      const double wq = tab.weights[q] * weight[t * nq + q];
      const auto& g = grads[q];
      for (int a = 0; a < 6; ++a)
        for (int b = 0; b < 6; ++b) blk[6 * a + b] += wq * (g[a].x * g[b].x + g[a].y * g[b].y);
    }
  });
}

/// Nonsymmetric coupling: entry (i, j) = int c psi_j (grad mu . grad psi_i).
/// This is the derivative of the mobility form with respect to phi.
inline SparseMatrix gradient_coupling_qp(const FeSpace& space, const ElementTable& tab,
                                         std::span<const double> coef,
                                         std::span<const Point> grad_mu) {
  const std::size_t nq = tab.size();
  return detail::assemble_matrix(space, [&](int t, std::array<double, 36>& blk) {
    const auto& grads = tab.grads[space.shape_index(t)];
    for (std::size_t q = 0; q < nq; ++q) {
      const double wq = tab.weights[q] * coef[t * nq + q];
      const Point gm = grad_mu[t * nq + q];
      const auto& phi = tab.values[q];
      for (int a = 0; a < 6; ++a) {
        const double ga = gm.x * grads[q][a].x + gm.y * grads[q][a].y;
        for (int b = 0; b < 6; ++b) blk[6 * a + b] += wq * ga * phi[b];
      }
    }
  });
}

/// Load vector int v psi_i for v given at quadrature points.
inline Vector load_qp(const FeSpace& space, const ElementTable& tab, std::span<const double> v) {
  const std::size_t nq = tab.size();
  return detail::assemble_vector(space, [&](int t, std::array<double, 6>& blk) {
    for (std::size_t q = 0; q < nq; ++q) {
      const double wq = tab.weights[q] * v[t * nq + q];
      for (int a = 0; a < 6; ++a) blk[a] += wq * tab.values[q][a];
    }
  });
}

/// Load vector int g . grad psi_i for a vector field g at quadrature points.
inline Vector gradient_load_qp(const FeSpace& space, const ElementTable& tab,
                               std::span<const Point> g) {
  const std::size_t nq = tab.size();
  return detail::assemble_vector(space, [&](int t, std::array<double, 6>& blk) {
    const auto& grads = tab.grads[space.shape_index(t)];
    for (std::size_t q = 0; q < nq; ++q) {
      const double w = tab.weights[q];
      const Point gq = g[t * nq + q];
      for (int a = 0; a < 6; ++a) blk[a] += w * (gq.x * grads[q][a].x + gq.y * grads[q][a].y);
    }
  });
}

/// <u, v>
inline SparseMatrix mass_matrix(const FeSpace& space) {
  const auto& tab = space.stiff_table();
  const QpValues ones(static_cast<std::size_t>(space.num_cells()) * tab.size(), 1.0);
  return weighted_mass_qp(space, tab, ones);
}

/// <grad u, grad v>
inline SparseMatrix stiffness_matrix(const FeSpace& space) {
  const auto& tab = space.stiff_table();
  const QpValues ones(static_cast<std::size_t>(space.num_cells()) * tab.size(), 1.0);
  return weighted_stiffness_qp(space, tab, ones);
}

/// <grad u, grad v> + <u, v>, the H1 inner product.
inline SparseMatrix h1_gram(const FeSpace& space) {
  SparseMatrix a = stiffness_matrix(space);
  const SparseMatrix m = mass_matrix(space);
  // Identical patterns: add value arrays directly.
  Eigen::Map<Vector>(a.valuePtr(), a.nonZeros()) += Eigen::Map<const Vector>(m.valuePtr(), m.nonZeros());
  return a;
}

/// <weight(phi_h) grad u, grad v> with the degree-10 rule.
template <class WeightFn>
SparseMatrix weighted_stiffness(const FeSpace& space, const Vector& phi, WeightFn&& weight) {
  const auto& tab = space.nonlin_table();
  QpValues w = values_at_quadrature(space, phi, tab);
  for (double& x : w) x = weight(x);
  return weighted_stiffness_qp(space, tab, w);
}

inline SparseMatrix weighted_stiffness(const FeField& phi, const ModelParams& model) {
  return weighted_stiffness(*phi.space, phi.coeffs, [&](double s) { return model.b(s); });
}

/// Entries int f^(order)(phi_h) psi_i with the degree-10 rule.
inline Vector nonlinear_load(const FeField& phi, const ModelParams& model, int order = 1) {
  const FeSpace& space = *phi.space;
  const auto& tab = space.nonlin_table();
  QpValues v = values_at_quadrature(space, phi.coeffs, tab);
  for (double& x : v) x = model.f(x, order);
  return load_qp(space, tab, v);
}

}  // namespace ch
