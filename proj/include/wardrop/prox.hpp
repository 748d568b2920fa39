#pragma once

#include <array>
#include <cmath>
#include <stdexcept>

#include "wardrop/core_model.hpp"
#include "wardrop/errors.hpp"
#include "wardrop/geometry.hpp"

namespace wardrop {

/// One pointwise step-2 problem: minimize G*(x, q) + (r/2)|q - target|^2.
struct ProxQuery {
  Vec2 x;
  Vec2 target;  ///< grad u^{k+1}(x) + sigma^k(x) / r
  double r = 1.0;
};

/// Residual of the dichotomy equation b (lambda|s| - c)_+^{p-1} + r lambda |s| - r |s|.
inline double prox_scalar_residual(double b, double c, double p, double r, double s, double lambda) {
  const double as = std::abs(s);
  return b * detail::positive_pow(lambda * as - c, p - 1.0) + r * lambda * as - r * as;
}

/// argmin_t (b/p)(|t| - c)_+^p + (r/2)(t - s)^2, as t = lambda s with lambda in [0,1]
/// found by bisection on the monotone residual.
inline double prox_scalar(double b, double c, double p, double r, double s) {
  const double as = std::abs(s);
  if (as <= c) return s;
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 200 && hi - lo > 1e-14; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (prox_scalar_residual(b, c, p, r, s, mid) > 0.0) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return 0.5 * (lo + hi) * s;
}

/// Objective of the pointwise problem.
inline double prox_objective(const PointModel& pm, const Vec2& target, double r, const Vec2& q) {
  return pm.dual_density(q) + 0.5 * r * norm2(q - target);
}

inline Vec2 prox_gradient(const PointModel& pm, const Vec2& target, double r, const Vec2& q) {
  return pm.dual_gradient(q) + r * (q - target);
}

/// Cartesian system: the problem separates into one scalar prox per component,
/// using the coefficients of the direction on the side of the target's sign.
inline Vec2 prox_cartesian(const PointModel& pm, const Vec2& target, double r) {
  if (!pm.cartesian) throw std::invalid_argument("prox_cartesian needs the cartesian direction system");
  const std::size_t kx = target.x >= 0.0 ? 0 : 2;
  const std::size_t ky = target.y >= 0.0 ? 1 : 3;
  return {prox_scalar(pm.b[kx], pm.theta[kx], pm.p, r, target.x),
          prox_scalar(pm.b[ky], pm.theta[ky], pm.p, r, target.y)};
}

/// Compass search on the prox objective; the fallback when Newton stalls.
inline Vec2 prox_pattern_search(const PointModel& pm, const Vec2& target, double r, Vec2 q) {
  const double scale = std::max(1.0, norm(target));
  double step = 0.5 * scale;
  double fq = prox_objective(pm, target, r, q);
  static const std::array<Vec2, 8> dirs{Vec2{1, 0},  Vec2{0, 1},  Vec2{-1, 0}, Vec2{0, -1},
                                        Vec2{1, 1},  Vec2{-1, 1}, Vec2{-1, -1}, Vec2{1, -1}};
  while (step > 1e-15 * scale) {
    bool improved = false;
    for (const auto& d : dirs) {
      const Vec2 trial = q + step * d;
      const double ft = prox_objective(pm, target, r, trial);
      if (ft < fq) {
        q = trial;
        fq = ft;
        improved = true;
      }
    }
    if (!improved) step *= 0.5;
  }
  return q;
}

/// Damped Newton with Armijo backtracking, started at the target (which is the
/// exact answer whenever the target lies in the degeneracy polytope). Needs p >= 2
/// so the Hessian stays bounded.
inline Vec2 prox_newton(const PointModel& pm, const Vec2& target, double r) {
  if (pm.p < 2.0) throw std::domain_error("prox_newton requires p >= 2");
  if (!(r > 0.0)) throw std::invalid_argument("prox penalty r must be positive");
  const double tol = 1e-10 * std::max(1.0, r * norm(target));
  Vec2 q = target;
  Vec2 g = prox_gradient(pm, target, r, q);
  if (norm(g) <= tol) return q;
  double fq = prox_objective(pm, target, r, q);
  for (int it = 0; it < 100; ++it) {
    Sym2 h = pm.dual_hessian(q);
    h.xx += r;
    h.yy += r;
    const Vec2 d = -1.0 * h.solve(g);
    const double slope = dot(g, d);
    double alpha = 1.0;
    Vec2 trial = q + d;
    double ft = prox_objective(pm, target, r, trial);
    // Predicted decrease below the resolution of f: judge the step by the gradient instead.
    if (std::abs(slope) <= 1e-13 * std::max(1.0, std::abs(fq))) {
      const Vec2 gt = prox_gradient(pm, target, r, trial);
      if (norm(gt) < norm(g)) {
        q = trial;
        fq = ft;
        g = gt;
        if (norm(g) <= tol) return q;
        continue;
      }
    }
    int backtracks = 0;
    while (ft > fq + 1e-4 * alpha * slope && backtracks < 60) {
      alpha *= 0.5;
      trial = q + alpha * d;
      ft = prox_objective(pm, target, r, trial);
      ++backtracks;
    }
    if (backtracks == 60) break;  // no descent possible at this precision
    q = trial;
    fq = ft;
    g = prox_gradient(pm, target, r, q);
    if (norm(g) <= tol) return q;
  }
  q = prox_pattern_search(pm, target, r, q);
  if (norm(prox_gradient(pm, target, r, q)) <= 1e-8 * (1.0 + r * norm(target))) return q;
  throw NumericError("prox_newton: no convergence");
}

/// Model-appropriate solver: per-component bisection for the cartesian system,
/// Newton otherwise.
inline Vec2 prox(const PointModel& pm, const Vec2& target, double r) {
  return pm.cartesian ? prox_cartesian(pm, target, r) : prox_newton(pm, target, r);
}

inline Vec2 prox(const CongestionModel& model, const ProxQuery& query) {
  return prox(model.at(query.x), query.target, query.r);
}

}  // namespace wardrop
