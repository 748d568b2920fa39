#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "wardrop/geometry.hpp"

namespace wardrop {

/// How each square of a structured grid is split in two.
enum class DiagonalPattern {
  parallel,     ///< every square split along its (0,0)-(1,1) diagonal
  alternating,  ///< checkerboard of both diagonals; mirror symmetric for even n
};

/// Conforming triangulation of a rectangle with obstacle holes.
///
/// Triangles are counterclockwise. Edges are stored as sorted vertex pairs in
/// order of first appearance; triangle t owns local edges (0,1), (1,2), (2,0).
struct Mesh {
  Rect domain;
  std::vector<Obstacle> obstacles;
  std::vector<Vec2> vertices;
  std::vector<std::array<std::size_t, 3>> triangles;
  std::vector<std::array<std::size_t, 2>> edges;
  std::vector<std::array<long, 2>> edge_triangles;  ///< -1 marks a missing neighbour
  std::vector<std::array<std::size_t, 3>> triangle_edges;
  std::vector<bool> boundary_edge;
  /// Boundary edges oriented as in their triangle, so the outward normal is on the right.
  std::vector<std::array<std::size_t, 2>> boundary_segments;

  std::size_t num_vertices() const { return vertices.size(); }
  std::size_t num_edges() const { return edges.size(); }
  std::size_t num_triangles() const { return triangles.size(); }
  std::size_t p2_dofs() const { return vertices.size() + edges.size(); }

  double signed_area(std::size_t t) const {
    const auto& tri = triangles[t];
    return 0.5 * cross(vertices[tri[1]] - vertices[tri[0]], vertices[tri[2]] - vertices[tri[0]]);
  }

  double total_area() const {
    double a = 0.0;
    for (std::size_t t = 0; t < triangles.size(); ++t) a += signed_area(t);
    return a;
  }

  Vec2 centroid(std::size_t t) const {
    const auto& tri = triangles[t];
    return (vertices[tri[0]] + vertices[tri[1]] + vertices[tri[2]]) / 3.0;
  }

  Vec2 midpoint(std::size_t e) const { return 0.5 * (vertices[edges[e][0]] + vertices[edges[e][1]]); }

  /// Position of P2 degree of freedom i (vertices first, then edge midpoints).
  Vec2 p2_node(std::size_t i) const {
    return i < vertices.size() ? vertices[i] : midpoint(i - vertices.size());
  }

  long euler_characteristic() const {
    return static_cast<long>(vertices.size()) - static_cast<long>(edges.size()) +
           static_cast<long>(triangles.size());
  }

  /// Rebuilds edges, adjacency and boundary data from vertices and triangles.
  void build_topology() {
    edges.clear();
    edge_triangles.clear();
    triangle_edges.assign(triangles.size(), {});
    boundary_segments.clear();
    std::map<std::pair<std::size_t, std::size_t>, std::size_t> index;
    for (std::size_t t = 0; t < triangles.size(); ++t) {
      for (std::size_t l = 0; l < 3; ++l) {
        const std::size_t a = triangles[t][l], b = triangles[t][(l + 1) % 3];
        const auto key = std::minmax(a, b);
        auto [it, inserted] = index.try_emplace({key.first, key.second}, edges.size());
        if (inserted) {
          edges.push_back({key.first, key.second});
          edge_triangles.push_back({static_cast<long>(t), -1});
        } else {
          auto& adj = edge_triangles[it->second];
          if (adj[1] != -1) throw std::runtime_error("non-manifold edge in triangulation");
          adj[1] = static_cast<long>(t);
        }
        triangle_edges[t][l] = it->second;
      }
    }
    boundary_edge.assign(edges.size(), false);
    for (std::size_t e = 0; e < edges.size(); ++e) {
      if (edge_triangles[e][1] != -1) continue;
      boundary_edge[e] = true;
      const auto& tri = triangles[static_cast<std::size_t>(edge_triangles[e][0])];
      for (std::size_t l = 0; l < 3; ++l) {
        const std::size_t a = tri[l], b = tri[(l + 1) % 3];
        if (std::minmax(a, b) == std::minmax(edges[e][0], edges[e][1])) boundary_segments.push_back({a, b});
      }
    }
  }

  /// Outward unit normal and length of a boundary segment.
  std::pair<Vec2, double> segment_normal(const std::array<std::size_t, 2>& seg) const {
    const Vec2 d = vertices[seg[1]] - vertices[seg[0]];
    const double len = norm(d);
    return {Vec2{d.y, -d.x} / len, len};
  }

  /// Throws if some triangle is degenerate or inverted.
  void check_orientation() const {
    for (std::size_t t = 0; t < triangles.size(); ++t) {
      if (!(signed_area(t) > 0.0)) throw std::runtime_error("degenerate triangle " + std::to_string(t));
    }
  }
};

/// n x n squares over the rectangle, two triangles per square. Triangles whose
/// centroid falls inside an obstacle are dropped; the cut becomes boundary.
inline Mesh build_structured_mesh(std::size_t n, const Rect& domain, const std::vector<Obstacle>& obstacles = {},
                                  DiagonalPattern pattern = DiagonalPattern::alternating) {
  if (n < 1) throw std::invalid_argument("mesh needs at least one subdivision");
  if (!(domain.width() > 0.0 && domain.height() > 0.0)) throw std::invalid_argument("empty domain");
  for (const auto& o : obstacles) {
    if (!o.strictly_inside(domain)) throw std::invalid_argument("obstacle must lie strictly inside the domain");
  }
  Mesh mesh;
  mesh.domain = domain;
  mesh.obstacles = obstacles;
  const std::size_t side = n + 1;
  std::vector<Vec2> grid(side * side);
  for (std::size_t j = 0; j < side; ++j) {
    for (std::size_t i = 0; i < side; ++i) {
      // Exact endpoints; interior nodes by the same affine formula everywhere.
      const double x = i == n ? domain.xmax : domain.xmin + domain.width() * static_cast<double>(i) / n;
      const double y = j == n ? domain.ymax : domain.ymin + domain.height() * static_cast<double>(j) / n;
      grid[j * side + i] = {x, y};
    }
  }
  std::vector<std::array<std::size_t, 3>> tris;
  tris.reserve(2 * n * n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t a = j * side + i, b = a + 1, c = a + side + 1, d = a + side;
      const bool forward = pattern == DiagonalPattern::parallel || (i + j) % 2 == 0;
      if (forward) {
        tris.push_back({a, b, c});
        tris.push_back({a, c, d});
      } else {
        tris.push_back({a, b, d});
        tris.push_back({b, c, d});
      }
    }
  }
  std::vector<std::array<std::size_t, 3>> kept;
  std::vector<long> remap(grid.size(), -1);
  for (const auto& t : tris) {
    const Vec2 g = (grid[t[0]] + grid[t[1]] + grid[t[2]]) / 3.0;
    if (inside_any(obstacles, g)) continue;
    kept.push_back(t);
    for (auto v : t) remap[v] = 0;
  }
  // Surviving vertices keep grid (row-major) order.
  for (std::size_t v = 0; v < grid.size(); ++v) {
    if (remap[v] < 0) continue;
    remap[v] = static_cast<long>(mesh.vertices.size());
    mesh.vertices.push_back(grid[v]);
  }
  for (const auto& t : kept) {
    mesh.triangles.push_back({static_cast<std::size_t>(remap[t[0]]), static_cast<std::size_t>(remap[t[1]]),
                              static_cast<std::size_t>(remap[t[2]])});
  }
  if (mesh.triangles.empty()) throw std::runtime_error("obstacles cover the whole domain: empty mesh");
  mesh.build_topology();
  mesh.check_orientation();
  return mesh;
}

/// Uniform bucket grid for point location.
class PointLocator {
 public:
  explicit PointLocator(const Mesh& mesh, std::size_t buckets_per_side = 0) : mesh_(&mesh) {
    nb_ = buckets_per_side ? buckets_per_side
                           : std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(mesh.num_triangles() / 2.0)));
    cells_.assign(nb_ * nb_, {});
    for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
      double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
      for (auto v : mesh.triangles[t]) {
        x0 = std::min(x0, mesh.vertices[v].x);
        x1 = std::max(x1, mesh.vertices[v].x);
        y0 = std::min(y0, mesh.vertices[v].y);
        y1 = std::max(y1, mesh.vertices[v].y);
      }
      const auto [i0, j0] = bucket({x0, y0});
      const auto [i1, j1] = bucket({x1, y1});
      for (std::size_t j = j0; j <= j1; ++j)
        for (std::size_t i = i0; i <= i1; ++i) cells_[j * nb_ + i].push_back(t);
    }
  }

  struct Hit {
    std::size_t triangle;
    std::array<double, 3> bary;
  };

  /// Triangle containing p (closed, with tolerance) and its barycentric coordinates.
  std::optional<Hit> locate(const Vec2& p, double tol = 1e-12) const {
    if (!mesh_->domain.contains(p)) return std::nullopt;
    const auto [i, j] = bucket(p);
    for (std::size_t t : cells_[j * nb_ + i]) {
      const auto& tri = mesh_->triangles[t];
      const Vec2 a = mesh_->vertices[tri[0]], b = mesh_->vertices[tri[1]], c = mesh_->vertices[tri[2]];
      const double area2 = cross(b - a, c - a);
      // Barycentric coordinates via sub-areas.
      const double w0 = cross(b - p, c - p) / area2;
      const double w1 = cross(c - p, a - p) / area2;
      const double w2 = 1.0 - w0 - w1;
      if (w0 >= -tol && w1 >= -tol && w2 >= -tol) return Hit{t, {w0, w1, w2}};
    }
    return std::nullopt;
  }

 private:
  std::pair<std::size_t, std::size_t> bucket(const Vec2& p) const {
    const auto& d = mesh_->domain;
    auto idx = [&](double v, double lo, double w) {
      const double s = (v - lo) / w * static_cast<double>(nb_);
      if (s <= 0.0) return std::size_t{0};
      return std::min(nb_ - 1, static_cast<std::size_t>(s));
    };
    return {idx(p.x, d.xmin, d.width()), idx(p.y, d.ymin, d.height())};
  }

  const Mesh* mesh_;
  std::size_t nb_;
  std::vector<std::vector<std::size_t>> cells_;
};

/// Plain-text dump: `vertex x y`, `triangle i j k`, `edge i j boundary_flag`.
inline void write_mesh(std::ostream& os, const Mesh& mesh) {
  os.precision(17);
  for (const auto& v : mesh.vertices) os << "vertex " << v.x << ' ' << v.y << '\n';
  for (const auto& t : mesh.triangles) os << "triangle " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  for (std::size_t e = 0; e < mesh.num_edges(); ++e) {
    os << "edge " << mesh.edges[e][0] << ' ' << mesh.edges[e][1] << ' ' << (mesh.boundary_edge[e] ? 1 : 0) << '\n';
  }
}

}  // namespace wardrop
