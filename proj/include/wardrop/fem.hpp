#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "wardrop/errors.hpp"
#include "wardrop/expression.hpp"
#include "wardrop/geometry.hpp"
#include "wardrop/mesh.hpp"
#include "wardrop/sparse.hpp"

namespace wardrop {

/// P2 coefficients: vertex values first, then edge-midpoint values (V + E entries).
struct P2ScalarField {
  std::vector<double> values;
};

/// Continuous P1 vector field: one 2-vector per vertex.
struct P1VectorField {
  std::vector<Vec2> values;
};

struct QuadraturePoint {
  std::array<double, 3> bary;
  double weight;  ///< fraction of the triangle area; weights sum to 1
};

/// Degree 2: exact for products of P2 gradients.
inline const std::array<QuadraturePoint, 3>& quadrature3() {
  static const std::array<QuadraturePoint, 3> rule{{
      {{2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0}, 1.0 / 3.0},
      {{1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0}, 1.0 / 3.0},
      {{1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0}, 1.0 / 3.0},
  }};
  return rule;
}

/// Degree 4 (Dunavant), used for loads, P2 mass and nonlinear integrands.
inline const std::array<QuadraturePoint, 6>& quadrature6() {
  constexpr double a = 0.445948490915965, b = 0.108103018168070;
  constexpr double c = 0.091576213509771, d = 0.816847572980459;
  constexpr double wa = 0.223381589678011, wc = 0.109951743655322;
  static const std::array<QuadraturePoint, 6> rule{{
      {{a, a, b}, wa},
      {{a, b, a}, wa},
      {{b, a, a}, wa},
      {{c, c, d}, wc},
      {{c, d, c}, wc},
      {{d, c, c}, wc},
  }};
  return rule;
}

struct ElementGeometry {
  double area = 0.0;
  std::array<Vec2, 3> grad_lambda;  ///< gradients of the barycentric coordinates
};

inline ElementGeometry element_geometry(const Mesh& mesh, std::size_t t) {
  const auto& tri = mesh.triangles[t];
  const Vec2 p0 = mesh.vertices[tri[0]], p1 = mesh.vertices[tri[1]], p2 = mesh.vertices[tri[2]];
  const double twice = cross(p1 - p0, p2 - p0);
  if (!(twice > 0.0)) throw std::runtime_error("assembly: degenerate triangle " + std::to_string(t));
  ElementGeometry g;
  g.area = 0.5 * twice;
  g.grad_lambda[0] = Vec2{p1.y - p2.y, p2.x - p1.x} / twice;
  g.grad_lambda[1] = Vec2{p2.y - p0.y, p0.x - p2.x} / twice;
  g.grad_lambda[2] = Vec2{p0.y - p1.y, p1.x - p0.x} / twice;
  return g;
}

inline Vec2 barycentric_point(const Mesh& mesh, std::size_t t, const std::array<double, 3>& l) {
  const auto& tri = mesh.triangles[t];
  return l[0] * mesh.vertices[tri[0]] + l[1] * mesh.vertices[tri[1]] + l[2] * mesh.vertices[tri[2]];
}

/// Global P2 dof numbers of triangle t: its vertices, then its edges (0,1), (1,2), (2,0).
inline std::array<std::size_t, 6> p2_element_dofs(const Mesh& mesh, std::size_t t) {
  const auto& tri = mesh.triangles[t];
  const auto& te = mesh.triangle_edges[t];
  const std::size_t nv = mesh.num_vertices();
  return {tri[0], tri[1], tri[2], nv + te[0], nv + te[1], nv + te[2]};
}

inline std::array<double, 6> p2_basis(const std::array<double, 3>& l) {
  return {l[0] * (2.0 * l[0] - 1.0), l[1] * (2.0 * l[1] - 1.0), l[2] * (2.0 * l[2] - 1.0),
          4.0 * l[0] * l[1],         4.0 * l[1] * l[2],         4.0 * l[2] * l[0]};
}

inline std::array<Vec2, 6> p2_gradients(const ElementGeometry& g, const std::array<double, 3>& l) {
  const auto& d = g.grad_lambda;
  return {(4.0 * l[0] - 1.0) * d[0],
          (4.0 * l[1] - 1.0) * d[1],
          (4.0 * l[2] - 1.0) * d[2],
          4.0 * (l[1] * d[0] + l[0] * d[1]),
          4.0 * (l[2] * d[1] + l[1] * d[2]),
          4.0 * (l[0] * d[2] + l[2] * d[0])};
}

/// K_ij = int grad phi_i . grad phi_j over P2 (kernel: constants).
inline SparseMatrix assemble_stiffness(const Mesh& mesh) {
  std::vector<Triplet> trip;
  trip.reserve(36 * mesh.num_triangles());
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const auto g = element_geometry(mesh, t);
    const auto dofs = p2_element_dofs(mesh, t);
    std::array<std::array<double, 6>, 6> ke{};
    for (const auto& qp : quadrature3()) {
      const auto grad = p2_gradients(g, qp.bary);
      for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j) ke[i][j] += qp.weight * g.area * dot(grad[i], grad[j]);
    }
    for (int i = 0; i < 6; ++i) {
      for (int j = 0; j < 6; ++j) {
        // Symmetrize the element matrix so the assembled one is exactly symmetric.
        trip.push_back({dofs[i], dofs[j], i <= j ? ke[i][j] : ke[j][i]});
      }
    }
  }
  return assemble_csr(mesh.p2_dofs(), mesh.p2_dofs(), trip);
}

/// P2 mass matrix, exact by the degree-4 rule.
inline SparseMatrix assemble_p2_mass(const Mesh& mesh) {
  std::vector<Triplet> trip;
  trip.reserve(36 * mesh.num_triangles());
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const auto g = element_geometry(mesh, t);
    const auto dofs = p2_element_dofs(mesh, t);
    std::array<std::array<double, 6>, 6> me{};
    for (const auto& qp : quadrature6()) {
      const auto phi = p2_basis(qp.bary);
      for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j) me[i][j] += qp.weight * g.area * phi[i] * phi[j];
    }
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 6; ++j) trip.push_back({dofs[i], dofs[j], i <= j ? me[i][j] : me[j][i]});
  }
  return assemble_csr(mesh.p2_dofs(), mesh.p2_dofs(), trip);
}

/// Mass matrix of the P1 vector space. It is block diagonal with two identical
/// scalar blocks, so only the scalar block is stored.
struct P1VectorMass {
  SparseMatrix scalar;
  std::vector<double> lumped;  ///< row sums of the scalar block
};

inline P1VectorMass assemble_p1_vector_mass(const Mesh& mesh) {
  std::vector<Triplet> trip;
  trip.reserve(9 * mesh.num_triangles());
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const double area = element_geometry(mesh, t).area;
    const auto& tri = mesh.triangles[t];
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) trip.push_back({tri[i], tri[j], area / 12.0 * (i == j ? 2.0 : 1.0)});
  }
  P1VectorMass m;
  m.scalar = assemble_csr(mesh.num_vertices(), mesh.num_vertices(), trip);
  const auto offs = m.scalar.row_offsets();
  const auto vals = m.scalar.values();
  m.lumped.assign(mesh.num_vertices(), 0.0);
  for (std::size_t i = 0; i < mesh.num_vertices(); ++i)
    for (std::size_t k = offs[i]; k < offs[i + 1]; ++k) m.lumped[i] += vals[k];
  return m;
}

/// Coupling between P1 vector fields and P2 gradients:
/// (Bx)_ia = int psi_a d_x phi_i, (By)_ia = int psi_a d_y phi_i.
/// B(w)_i = int w . grad phi_i = Bx w_x + By w_y, and the gradient-projection
/// right-hand side int psi_a grad u is (Bx^T u, By^T u).
struct GradientCoupling {
  SparseMatrix bx, by;    ///< P2 x V
  SparseMatrix bxt, byt;  ///< V x P2
};

inline GradientCoupling assemble_gradient_coupling(const Mesh& mesh) {
  std::vector<Triplet> tx, ty, txt, tyt;
  tx.reserve(18 * mesh.num_triangles());
  ty.reserve(18 * mesh.num_triangles());
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const auto g = element_geometry(mesh, t);
    const auto dofs = p2_element_dofs(mesh, t);
    const auto& tri = mesh.triangles[t];
    std::array<std::array<Vec2, 3>, 6> be{};
    for (const auto& qp : quadrature3()) {
      const auto grad = p2_gradients(g, qp.bary);
      for (int i = 0; i < 6; ++i)
        for (int a = 0; a < 3; ++a) be[i][a] += (qp.weight * g.area * qp.bary[a]) * grad[i];
    }
    for (int i = 0; i < 6; ++i) {
      for (int a = 0; a < 3; ++a) {
        tx.push_back({dofs[i], tri[a], be[i][a].x});
        ty.push_back({dofs[i], tri[a], be[i][a].y});
        txt.push_back({tri[a], dofs[i], be[i][a].x});
        tyt.push_back({tri[a], dofs[i], be[i][a].y});
      }
    }
  }
  const std::size_t n2 = mesh.p2_dofs(), n1 = mesh.num_vertices();
  return {assemble_csr(n2, n1, tx), assemble_csr(n2, n1, ty), assemble_csr(n1, n2, txt), assemble_csr(n1, n2, tyt)};
}

/// B(w)_i = int w . grad phi_i
inline std::vector<double> apply_divergence_tests(const GradientCoupling& b, const P1VectorField& w) {
  std::vector<double> wx(w.values.size()), wy(w.values.size());
  for (std::size_t a = 0; a < w.values.size(); ++a) {
    wx[a] = w.values[a].x;
    wy[a] = w.values[a].y;
  }
  auto out = b.bx * wx;
  const auto oy = b.by * wy;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += oy[i];
  return out;
}

/// L2 projection of grad u (elementwise P1, discontinuous) onto continuous P1.
class GradientProjector {
 public:
  GradientProjector(const P1VectorMass& mass, const GradientCoupling& coupling)
      : mass_(&mass), coupling_(&coupling) {}

  P1VectorField project(const P2ScalarField& u) const {
    const auto rx = coupling_->bxt * u.values;
    const auto ry = coupling_->byt * u.values;
    const std::size_t n = rx.size();
    std::vector<double> gx(n), gy(n);
    // Lumped-mass initial guess; CG then solves the consistent system.
    for (std::size_t a = 0; a < n; ++a) {
      gx[a] = rx[a] / mass_->lumped[a];
      gy[a] = ry[a] / mass_->lumped[a];
    }
    CgOptions opt;
    opt.tol = 1e-13;
    for (auto* pr : {&rx, &ry}) {
      auto& g = pr == &rx ? gx : gy;
      const auto rep = cg_solve(mass_->scalar, *pr, g, opt);
      if (rep.breakdown && rep.relative_residual > 1e-10) {
        throw NumericError("gradient projection: mass solve failed");
      }
    }
    P1VectorField out;
    out.values.resize(n);
    for (std::size_t a = 0; a < n; ++a) out.values[a] = {gx[a], gy[a]};
    return out;
  }

 private:
  const P1VectorMass* mass_;
  const GradientCoupling* coupling_;
};

inline P1VectorField project_gradient(const Mesh& mesh, const P2ScalarField& u) {
  const auto mass = assemble_p1_vector_mass(mesh);
  const auto coupling = assemble_gradient_coupling(mesh);
  return GradientProjector(mass, coupling).project(u);
}

/// Nodal interpolation into P2.
template <class F>
P2ScalarField interpolate_p2(const Mesh& mesh, F&& f) {
  P2ScalarField u;
  u.values.resize(mesh.p2_dofs());
  for (std::size_t i = 0; i < mesh.p2_dofs(); ++i) u.values[i] = f(mesh.p2_node(i));
  return u;
}

template <class F>
P1VectorField interpolate_p1(const Mesh& mesh, F&& f) {
  P1VectorField w;
  w.values.resize(mesh.num_vertices());
  for (std::size_t a = 0; a < mesh.num_vertices(); ++a) w.values[a] = f(mesh.vertices[a]);
  return w;
}

/// int_Omega f by the degree-4 rule.
template <class F>
double integrate(const Mesh& mesh, F&& f) {
  double s = 0.0;
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const double area = mesh.signed_area(t);
    for (const auto& qp : quadrature6()) s += qp.weight * area * f(barycentric_point(mesh, t, qp.bary));
  }
  return s;
}

/// int_Omega f with the degree-4 rule on each triangle split into k^2 similar pieces.
template <class F>
double integrate_refined(const Mesh& mesh, F&& f, int k = 4) {
  double s = 0.0;
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles[t];
    const Vec2 a = mesh.vertices[tri[0]];
    const Vec2 u = (mesh.vertices[tri[1]] - a) / k, w = (mesh.vertices[tri[2]] - a) / k;
    const double area = mesh.signed_area(t) / (k * k);
    for (int i = 0; i < k; ++i) {
      for (int j = 0; i + j < k; ++j) {
        const Vec2 p = a + static_cast<double>(i) * u + static_cast<double>(j) * w;
        for (const auto& qp : quadrature6()) s += qp.weight * area * f(p + qp.bary[1] * u + qp.bary[2] * w);
        if (i + j + 1 < k) {
          const Vec2 o = p + u + w;
          for (const auto& qp : quadrature6()) s += qp.weight * area * f(o - qp.bary[1] * u - qp.bary[2] * w);
        }
      }
    }
  }
  return s;
}

/// rhs_i = int phi_i f by the degree-4 rule (no mean correction).
template <class F>
std::vector<double> assemble_load(const Mesh& mesh, F&& f) {
  std::vector<double> rhs(mesh.p2_dofs(), 0.0);
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const double area = element_geometry(mesh, t).area;
    const auto dofs = p2_element_dofs(mesh, t);
    for (const auto& qp : quadrature6()) {
      const double fv = f(barycentric_point(mesh, t, qp.bary));
      const auto phi = p2_basis(qp.bary);
      for (int i = 0; i < 6; ++i) rhs[dofs[i]] += qp.weight * area * fv * phi[i];
    }
  }
  return rhs;
}

/// Source f = f_+ - f_- with each marginal scaled to unit mass on the meshed domain.
struct SourceData {
  Expression f_plus;
  Expression f_minus;
  double plus_scale = 0.0;
  double minus_scale = 0.0;
  std::vector<double> load;  ///< P2 load vector with exactly zero sum

  double operator()(const Vec2& x) const { return plus_scale * f_plus(x) - minus_scale * f_minus(x); }
  bool is_zero() const { return plus_scale == 0.0 && minus_scale == 0.0; }
};

inline SourceData make_source(const Mesh& mesh, const Expression& f_plus, const Expression& f_minus) {
  SourceData s{f_plus, f_minus, 0.0, 0.0, {}};
  const bool zp = f_plus.is_zero(), zm = f_minus.is_zero();
  if (zp != zm) throw std::invalid_argument("source and sink must both be zero or both carry mass");
  if (!zp) {
    // Masses on a refined rule: sharp sources are under-resolved by one rule per triangle.
    const double mp = integrate_refined(mesh, f_plus), mm = integrate_refined(mesh, f_minus);
    if (!(mp > 0.0) || !(mm > 0.0)) throw std::invalid_argument("source densities must have positive mass");
    s.plus_scale = 1.0 / mp;
    s.minus_scale = 1.0 / mm;
  }
  if (f_plus == f_minus) {
    s.load.assign(mesh.p2_dofs(), 0.0);
    return s;
  }
  s.load = assemble_load(mesh, [&](const Vec2& x) { return s(x); });
  detail::remove_mean(s.load);
  return s;
}

/// Evaluation of P2 / P1 fields inside a triangle.
inline double eval_p2(const Mesh& mesh, const P2ScalarField& u, std::size_t t, const std::array<double, 3>& l) {
  const auto dofs = p2_element_dofs(mesh, t);
  const auto phi = p2_basis(l);
  double s = 0.0;
  for (int i = 0; i < 6; ++i) s += u.values[dofs[i]] * phi[i];
  return s;
}

inline Vec2 eval_p1(const Mesh& mesh, const P1VectorField& w, std::size_t t, const std::array<double, 3>& l) {
  const auto& tri = mesh.triangles[t];
  return l[0] * w.values[tri[0]] + l[1] * w.values[tri[1]] + l[2] * w.values[tri[2]];
}

/// ||u_h - u||_{L2} by the degree-4 rule.
template <class F>
double l2_error(const Mesh& mesh, const P2ScalarField& u, F&& exact) {
  double s = 0.0;
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const double area = mesh.signed_area(t);
    for (const auto& qp : quadrature6()) {
      const double d = eval_p2(mesh, u, t, qp.bary) - exact(barycentric_point(mesh, t, qp.bary));
      s += qp.weight * area * d * d;
    }
  }
  return std::sqrt(s);
}

/// (int |w|^2)^{1/2} for a P1 vector field using the consistent mass.
inline double l2_norm(const P1VectorMass& mass, const P1VectorField& w) {
  const std::size_t n = w.values.size();
  std::vector<double> x(n), y(n);
  for (std::size_t a = 0; a < n; ++a) {
    x[a] = w.values[a].x;
    y[a] = w.values[a].y;
  }
  const auto mx = mass.scalar * x;
  const auto my = mass.scalar * y;
  return std::sqrt(std::max(0.0, detail::dotv(x, mx) + detail::dotv(y, my)));
}

}  // namespace wardrop
