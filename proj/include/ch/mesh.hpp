#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <vector>

#include "ch/error.hpp"

namespace ch {

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

inline constexpr int kMaxMeshLevel = 9;

/// Uniform periodic triangulation of the unit square with n = 2^(3+level)
/// cells per side. Each cell (i, j) is split along its bottom-left to
/// top-right diagonal into a lower triangle (2c) and an upper triangle (2c+1),
/// c = j*n + i. Periodic images are identifications: only the n^2 primary
/// vertices and 3n^2 primary edges are stored.
struct Mesh {
  enum class Shape { Lower, Upper };

  /// A vertex or edge position on the closed grid [0, n]^2 that is an image of
  /// a primary entity.
  struct PeriodicImage {
    int i = 0;
    int j = 0;
    int primary = 0;
  };

  int level = 0;
  int n = 0;
  double h = 0.0;

  std::vector<Point> vertices;                    // index j*n + i
  std::vector<std::array<int, 3>> triangles;      // counter-clockwise vertex indices
  std::vector<std::array<int, 3>> triangle_edges; // local edge k joins local vertices k, k+1
  std::vector<std::array<int, 2>> edges;          // edge 3c+{0,1,2}: horizontal, vertical, diagonal
  std::vector<Point> edge_midpoints;

  /// Boundary vertex images (i == n or j == n) mapped to their primaries.
  std::vector<PeriodicImage> periodic_vertices;

  std::size_t num_vertices() const noexcept { return vertices.size(); }
  std::size_t num_edges() const noexcept { return edges.size(); }
  std::size_t num_triangles() const noexcept { return triangles.size(); }

  int vertex_index(int i, int j) const noexcept { return wrap(j) * n + wrap(i); }
  int cell_index(int i, int j) const noexcept { return wrap(j) * n + wrap(i); }
  int horizontal_edge(int i, int j) const noexcept { return 3 * cell_index(i, j); }
  int vertical_edge(int i, int j) const noexcept { return 3 * cell_index(i, j) + 1; }
  int diagonal_edge(int i, int j) const noexcept { return 3 * cell_index(i, j) + 2; }

  Shape shape(int t) const noexcept { return (t % 2 == 0) ? Shape::Lower : Shape::Upper; }
  int cell_i(int t) const noexcept { return (t / 2) % n; }
  int cell_j(int t) const noexcept { return (t / 2) / n; }

  /// Unwrapped corner coordinates of triangle t (may reach x = 1 or y = 1).
  std::array<Point, 3> corners(int t) const noexcept {
    const double x0 = cell_i(t) * h;
    const double y0 = cell_j(t) * h;
    if (shape(t) == Shape::Lower) return {Point{x0, y0}, Point{x0 + h, y0}, Point{x0 + h, y0 + h}};
    return {Point{x0, y0}, Point{x0 + h, y0 + h}, Point{x0, y0 + h}};
  }

  double triangle_area(int t) const noexcept {
    const auto c = corners(t);
    return 0.5 * ((c[1].x - c[0].x) * (c[2].y - c[0].y) - (c[2].x - c[0].x) * (c[1].y - c[0].y));
  }

  /// Triangle containing p after periodic wrapping into [0,1)^2.
  int locate(Point p) const noexcept {
    const double x = p.x - std::floor(p.x);
    const double y = p.y - std::floor(p.y);
    int i = std::min(static_cast<int>(x * n), n - 1);
    int j = std::min(static_cast<int>(y * n), n - 1);
    const double xi = x * n - i;
    const double eta = y * n - j;
    return 2 * (j * n + i) + (eta <= xi ? 0 : 1);
  }

  int wrap(int k) const noexcept { return ((k % n) + n) % n; }
};

namespace detail {

inline void fill_mesh_topology(Mesh& m) {
  const int n = m.n;
  m.vertices.resize(static_cast<std::size_t>(n) * n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) m.vertices[j * n + i] = Point{i * m.h, j * m.h};

  m.edges.resize(3 * static_cast<std::size_t>(n) * n);
  m.edge_midpoints.resize(m.edges.size());
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const int v = m.vertex_index(i, j);
      m.edges[m.horizontal_edge(i, j)] = {v, m.vertex_index(i + 1, j)};
      m.edges[m.vertical_edge(i, j)] = {v, m.vertex_index(i, j + 1)};
      m.edges[m.diagonal_edge(i, j)] = {v, m.vertex_index(i + 1, j + 1)};
      m.edge_midpoints[m.horizontal_edge(i, j)] = Point{(i + 0.5) * m.h, j * m.h};
      m.edge_midpoints[m.vertical_edge(i, j)] = Point{i * m.h, (j + 0.5) * m.h};
      m.edge_midpoints[m.diagonal_edge(i, j)] = Point{(i + 0.5) * m.h, (j + 0.5) * m.h};
    }
  }

  m.triangles.resize(2 * static_cast<std::size_t>(n) * n);
  m.triangle_edges.resize(m.triangles.size());
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const int c = j * n + i;
      const int v00 = m.vertex_index(i, j), v10 = m.vertex_index(i + 1, j);
      const int v11 = m.vertex_index(i + 1, j + 1), v01 = m.vertex_index(i, j + 1);
      m.triangles[2 * c] = {v00, v10, v11};
      m.triangle_edges[2 * c] = {m.horizontal_edge(i, j), m.vertical_edge(i + 1, j),
                                 m.diagonal_edge(i, j)};
      m.triangles[2 * c + 1] = {v00, v11, v01};
      m.triangle_edges[2 * c + 1] = {m.diagonal_edge(i, j), m.horizontal_edge(i, j + 1),
                                     m.vertical_edge(i, j)};
    }
  }

  m.periodic_vertices.clear();
  for (int k = 0; k <= n; ++k) {
    m.periodic_vertices.push_back({n, k, m.vertex_index(0, k)});
    if (k < n) m.periodic_vertices.push_back({k, n, m.vertex_index(k, 0)});
  }
}

inline void check_level(int level) {
  if (level < 0 || level > kMaxMeshLevel)
    throw Error(Errc::LevelTooLarge, "mesh level " + std::to_string(level) + " outside [0, " +
                                         std::to_string(kMaxMeshLevel) + "]");
}

}  // namespace detail

inline Mesh build_uniform(int level) {
  detail::check_level(level);
  Mesh m;
  m.level = level;
  m.n = 1 << (3 + level);
  m.h = 1.0 / m.n;
  detail::fill_mesh_topology(m);
  return m;
}

/// Red refinement result: the fine mesh plus the nesting maps.
struct RefinedMesh {
  Mesh fine;
  std::vector<std::array<int, 4>> children;  // per coarse triangle
  std::vector<int> coarse_to_fine_vertex;
};

/// Splits every triangle into four by its edge midpoints and canonicalizes the
/// result into the level+1 numbering (vertices sorted by (y, x), triangles by
/// cell and shape).
inline RefinedMesh refine(const Mesh& coarse) {
  detail::check_level(coarse.level + 1);
  const int nf = 2 * coarse.n;
  const double hf = 1.0 / nf;

  // Fine vertices as a point cloud: coarse vertices and edge midpoints.
  std::vector<Point> cloud(coarse.vertices);
  cloud.insert(cloud.end(), coarse.edge_midpoints.begin(), coarse.edge_midpoints.end());
  std::vector<std::size_t> order(cloud.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (cloud[a].y != cloud[b].y) return cloud[a].y < cloud[b].y;
    return cloud[a].x < cloud[b].x;
  });

  RefinedMesh out;
  Mesh& f = out.fine;
  f.level = coarse.level + 1;
  f.n = nf;
  f.h = hf;
  f.vertices.reserve(cloud.size());
  for (std::size_t k : order) f.vertices.push_back(cloud[k]);

  auto grid_index = [&](Point p) {
    const int i = static_cast<int>(std::lround(p.x * nf));
    const int j = static_cast<int>(std::lround(p.y * nf));
    return std::array{i, j};
  };

  out.coarse_to_fine_vertex.resize(coarse.num_vertices());
  for (std::size_t v = 0; v < coarse.num_vertices(); ++v) {
    auto [i, j] = grid_index(coarse.vertices[v]);
    out.coarse_to_fine_vertex[v] = f.vertex_index(i, j);
  }

  // Children in unwrapped coordinates; slot each into its canonical position.
  f.triangles.assign(2 * static_cast<std::size_t>(nf) * nf, {-1, -1, -1});
  out.children.resize(coarse.num_triangles());
  for (int t = 0; t < static_cast<int>(coarse.num_triangles()); ++t) {
    const auto c = coarse.corners(t);
    auto mid = [](Point a, Point b) { return Point{0.5 * (a.x + b.x), 0.5 * (a.y + b.y)}; };
    const Point m01 = mid(c[0], c[1]), m12 = mid(c[1], c[2]), m20 = mid(c[2], c[0]);
    const std::array<std::array<Point, 3>, 4> kids = {{
        {c[0], m01, m20}, {m01, c[1], m12}, {m20, m12, c[2]}, {m01, m12, m20}}};
    for (int k = 0; k < 4; ++k) {
      const auto& tri = kids[k];
      const Point g{(tri[0].x + tri[1].x + tri[2].x) / 3.0, (tri[0].y + tri[1].y + tri[2].y) / 3.0};
      const int slot = f.locate(g);
      // Rotate so that local vertex 0 is the bottom-left corner of the cell.
      std::array<int, 3> idx{};
      int start = 0;
      for (int a = 0; a < 3; ++a) {
        auto [i, j] = grid_index(tri[a]);
        idx[a] = f.vertex_index(i, j);
        if (std::abs(tri[a].x - f.cell_i(slot) * hf) < 0.25 * hf &&
            std::abs(tri[a].y - f.cell_j(slot) * hf) < 0.25 * hf)
          start = a;
      }
      f.triangles[slot] = {idx[start], idx[(start + 1) % 3], idx[(start + 2) % 3]};
      out.children[t][k] = slot;
    }
  }

  // Edge numbering follows from the canonical cell structure.
  Mesh reference_topology = f;
  detail::fill_mesh_topology(reference_topology);
  f.edges = std::move(reference_topology.edges);
  f.edge_midpoints = std::move(reference_topology.edge_midpoints);
  f.triangle_edges = std::move(reference_topology.triangle_edges);
  f.periodic_vertices = std::move(reference_topology.periodic_vertices);
  return out;
}

}  // namespace ch
