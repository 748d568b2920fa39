#pragma once

// Anisotropic congestion integrands.
//
// Each direction v_k carries a congestion law g_k(x, m) = a_k(x) m^{q-1} + delta_k
// with primitive G_k. The flux density G(x, sigma) is the cheapest nonnegative
// decomposition of sigma along the v_k; its Legendre transform has the closed form
//
//   G*(x, z) = sum_k b_k(x)/p (z.v_k - delta_k c_k(x))_+^p,   b_k = (a_k c_k)^{-1/(q-1)}.
//
// G* vanishes on the degeneracy polytope {z : z.v_k <= delta_k c_k for all k}.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "wardrop/errors.hpp"
#include "wardrop/expression.hpp"
#include "wardrop/geometry.hpp"

namespace wardrop {

enum class DirectionKind { cartesian, hexagonal, custom };

inline std::string to_string(DirectionKind k) {
  switch (k) {
    case DirectionKind::cartesian: return "cartesian";
    case DirectionKind::hexagonal: return "hexagonal";
    case DirectionKind::custom: return "custom";
  }
  return "custom";
}

/// Finite set of unit directions whose positive cone is the whole plane.
class DirectionSystem {
 public:
  /// v = (1,0), (0,1), (-1,0), (0,-1)
  static DirectionSystem cartesian() {
    return DirectionSystem(DirectionKind::cartesian, {{1, 0}, {0, 1}, {-1, 0}, {0, -1}});
  }

  /// v_k = (cos(k pi/3), sin(k pi/3)), k = 1..6, stored with exact mirror symmetry.
  static DirectionSystem hexagonal() {
    const double s = std::sqrt(3.0) / 2.0;
    return DirectionSystem(DirectionKind::hexagonal,
                           {{0.5, s}, {-0.5, s}, {-1, 0}, {-0.5, -s}, {0.5, -s}, {1, 0}});
  }

  static DirectionSystem custom(std::vector<Vec2> v) {
    for (const auto& d : v) {
      if (std::abs(norm(d) - 1.0) > 1e-12) throw std::invalid_argument("direction is not a unit vector");
    }
    DirectionSystem s(DirectionKind::custom, std::move(v));
    if (!s.positively_spans()) throw std::invalid_argument("directions do not positively span the plane");
    return s;
  }

  DirectionKind kind() const { return kind_; }
  std::size_t size() const { return v_.size(); }
  const Vec2& operator[](std::size_t k) const { return v_[k]; }
  std::span<const Vec2> directions() const { return v_; }

  /// Every nonzero w has some v_k with w.v_k > 0, i.e. no angular gap reaches pi.
  bool positively_spans() const {
    if (v_.size() < 3) return false;
    std::vector<double> ang;
    ang.reserve(v_.size());
    for (const auto& d : v_) ang.push_back(std::atan2(d.y, d.x));
    std::sort(ang.begin(), ang.end());
    double gap = ang.front() + 2.0 * std::numbers::pi - ang.back();
    for (std::size_t i = 1; i < ang.size(); ++i) gap = std::max(gap, ang[i] - ang[i - 1]);
    return gap < std::numbers::pi - 1e-12;
  }

  friend bool operator==(const DirectionSystem&, const DirectionSystem&) = default;

 private:
  DirectionSystem(DirectionKind kind, std::vector<Vec2> v) : kind_(kind), v_(std::move(v)) {}

  DirectionKind kind_;
  std::vector<Vec2> v_;
};

namespace detail {
inline double positive_part(double t) { return t > 0.0 ? t : 0.0; }

inline double positive_pow(double t, double e) { return t > 0.0 ? std::pow(t, e) : 0.0; }
}  // namespace detail

/// Outcome of the inner maximization defining G as the conjugate of G*.
struct ConjugateResult {
  double value = 0.0;  ///< sup_z {z.sigma - G*(z)} (a lower bound when !converged)
  Vec2 argmax;
  int iterations = 0;
  bool converged = false;
};

/// Congestion coefficients frozen at one point x. All pointwise algebra lives here;
/// solvers that revisit the same node precompute one of these per node.
struct PointModel {
  double p = 2.0;
  std::vector<Vec2> v;
  std::vector<double> b;      ///< b_k(x)
  std::vector<double> theta;  ///< delta_k c_k(x)
  std::vector<double> a;      ///< a_k(x)
  std::vector<double> c;      ///< c_k(x)
  std::vector<double> delta;
  bool cartesian = false;

  double q() const { return p / (p - 1.0); }

  double dual_density(const Vec2& z) const {
    double s = 0.0;
    for (std::size_t k = 0; k < v.size(); ++k) s += b[k] * detail::positive_pow(dot(z, v[k]) - theta[k], p);
    return s / p;
  }

  Vec2 dual_gradient(const Vec2& z) const {
    Vec2 g;
    for (std::size_t k = 0; k < v.size(); ++k) {
      const double t = dot(z, v[k]) - theta[k];
      if (t > 0.0) g += (b[k] * std::pow(t, p - 1.0)) * v[k];
    }
    return g;
  }

  /// Hessian of G*; positive semidefinite, unbounded near the kinks when p < 2.
  Sym2 dual_hessian(const Vec2& z) const {
    Sym2 h;
    for (std::size_t k = 0; k < v.size(); ++k) {
      const double t = dot(z, v[k]) - theta[k];
      if (t <= 0.0) continue;
      const double w = b[k] * (p - 1.0) * std::pow(t, p - 2.0);
      h.xx += w * v[k].x * v[k].x;
      h.xy += w * v[k].x * v[k].y;
      h.yy += w * v[k].y * v[k].y;
    }
    return h;
  }

  bool in_polytope(const Vec2& z) const {
    for (std::size_t k = 0; k < v.size(); ++k) {
      if (dot(z, v[k]) - theta[k] > 0.0) return false;
    }
    return true;
  }

  /// c_k G_k(m) summed over the one-sided cartesian decomposition of sigma.
  double cartesian_primal(const Vec2& sigma) const {
    const double qq = q();
    auto term = [&](std::size_t k, double m) {
      return m > 0.0 ? c[k] * (a[k] * std::pow(m, qq) / qq + delta[k] * m) : 0.0;
    };
    const std::size_t kx = sigma.x >= 0.0 ? 0 : 2;
    const std::size_t ky = sigma.y >= 0.0 ? 1 : 3;
    return term(kx, std::abs(sigma.x)) + term(ky, std::abs(sigma.y));
  }

  double ascent_objective(const Vec2& z, const Vec2& sigma) const { return dot(z, sigma) - dual_density(z); }

  /// sup_z {z.sigma - G*(z)} by damped, Levenberg-regularized Newton ascent.
  /// Starts from the best point on the ray through sigma.
  ConjugateResult conjugate_newton(const Vec2& sigma, int max_iterations = 50, double tol = 1e-10) const {
    ConjugateResult res;
    const double smag = norm(sigma);
    if (smag == 0.0) {
      res.converged = in_polytope({0, 0});
      res.value = -dual_density({0, 0});
      return res;
    }
    const Vec2 dir = sigma / smag;
    // Ray search: d/ds psi(s dir) = |sigma| - dir.grad G*(s dir) is nonincreasing.
    auto ray_slope = [&](double s) { return smag - dot(dir, dual_gradient(s * dir)); };
    double lo = 0.0, hi = 1.0;
    while (ray_slope(hi) > 0.0) {
      lo = hi;
      hi *= 2.0;
      if (hi > 1e200) return res;
    }
    for (int i = 0; i < 200 && hi - lo > 1e-15 * hi; ++i) {
      const double mid = 0.5 * (lo + hi);
      (ray_slope(mid) > 0.0 ? lo : hi) = mid;
    }
    Vec2 z = (0.5 * (lo + hi)) * dir;
    double psi = ascent_objective(z, sigma);
    double lambda = 1e-10;
    const double gtol = tol * std::max(1.0, smag);
    for (int it = 0; it < max_iterations; ++it) {
      res.iterations = it;
      const Vec2 g = sigma - dual_gradient(z);
      if (norm(g) <= gtol) {
        res.converged = true;
        break;
      }
      Sym2 h = dual_hessian(z);
      const double tr = h.xx + h.yy;
      const double mu = tr > 0.0 ? lambda * tr : 1.0;
      h.xx += mu;
      h.yy += mu;
      const Vec2 d = h.solve(g);
      const double slope = dot(g, d);
      double t = 1.0;
      bool accepted = false;
      for (int ls = 0; ls < 80; ++ls) {
        const Vec2 trial = z + t * d;
        const double val = ascent_objective(trial, sigma);
        if (val >= psi + 1e-4 * t * slope) {
          z = trial;
          psi = val;
          accepted = true;
          break;
        }
        t *= 0.5;
      }
      if (!accepted) break;
      lambda = t == 1.0 ? std::max(lambda * 0.01, 1e-14) : std::min(lambda * 100.0, 1e6);
    }
    if (!res.converged && norm(sigma - dual_gradient(z)) <= gtol) res.converged = true;
    res.argmax = z;
    res.value = psi;
    return res;
  }

  /// sup_z {z.sigma - G*(z)}: bisection on the partial derivative in z.x, golden
  /// section on the resulting concave profile in z.y.
  ///
  /// For p close to 1 the slope (.)^{p-1} is numerically a step, so the inner
  /// maximizer often sits on a kink and the envelope derivative is useless; the
  /// outer search therefore compares values only. Slow but robust.
  ConjugateResult conjugate_bisection(const Vec2& sigma) const {
    ConjugateResult res;
    bool ok = true;
    auto inner = [&](double zy) {
      auto slope = [&](double zx) { return sigma.x - dual_gradient({zx, zy}).x; };
      double lo = -1.0, hi = 1.0;
      int guard = 0;
      while (slope(hi) > 0.0) {
        lo = hi;
        hi *= 2.0;
        if (++guard > 1000) { ok = false; return hi; }
      }
      while (slope(lo) < 0.0) {
        hi = lo;
        lo *= 2.0;
        if (++guard > 2000) { ok = false; return lo; }
      }
      for (int i = 0; i < 300; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if (hi - lo <= 1e-15 * std::max({1.0, std::abs(lo), std::abs(hi)})) break;
        (slope(mid) > 0.0 ? lo : hi) = mid;
      }
      return 0.5 * (lo + hi);
    };
    auto profile = [&](double zy) { return ascent_objective({inner(zy), zy}, sigma); };
    // bracket the maximizer of the concave profile: h(lo) <= h(mid) >= h(hi)
    double lo = -1.0, mid = 0.0, hi = 1.0;
    double hlo = profile(lo), hmid = profile(mid), hhi = profile(hi);
    for (int guard = 0; (hhi > hmid || hlo > hmid) && ok; ++guard) {
      if (guard > 2000 || !std::isfinite(hmid)) { ok = false; break; }
      if (hhi > hmid) {
        lo = mid, hlo = hmid;
        mid = hi, hmid = hhi;
        hi = mid + 2.0 * (mid - lo), hhi = profile(hi);
      } else {
        hi = mid, hhi = hmid;
        mid = lo, hmid = hlo;
        lo = mid - 2.0 * (hi - mid), hlo = profile(lo);
      }
    }
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = hi - g * (hi - lo), d = lo + g * (hi - lo);
    double hc = profile(c), hd = profile(d);
    for (int i = 0; i < 400 && hi - lo > 1e-15 * std::max({1.0, std::abs(lo), std::abs(hi)}); ++i) {
      if (hc >= hd) {
        hi = d, d = c, hd = hc;
        c = hi - g * (hi - lo), hc = profile(c);
      } else {
        lo = c, c = d, hc = hd;
        d = lo + g * (hi - lo), hd = profile(d);
      }
    }
    // best of every candidate seen near the end
    double zy = mid, best = hmid;
    for (auto [y, h] : {std::pair{c, hc}, std::pair{d, hd}}) {
      if (h > best) zy = y, best = h;
    }
    const Vec2 z{inner(zy), zy};
    res.argmax = z;
    res.value = ascent_objective(z, sigma);
    res.converged = ok && std::isfinite(res.value);
    res.iterations = 1;
    return res;
  }

  /// G(x, sigma) through the conjugate route only (no cartesian shortcut).
  double primal_by_conjugate(const Vec2& sigma) const {
    if (p >= 2.0) {
      const auto r = conjugate_newton(sigma);
      if (r.converged) return r.value;
    }
    const auto r = conjugate_bisection(sigma);
    if (!r.converged) throw ConjugateError("conjugate ascent did not converge", r.value);
    return r.value;
  }

  /// G(x, sigma): closed form for the cartesian system, conjugate of G* otherwise.
  double primal_density(const Vec2& sigma) const {
    if (cartesian) return cartesian_primal(sigma);
    return primal_by_conjugate(sigma);
  }
};

/// Congestion model: directions, exponent p (conjugate q), free-flow costs delta_k,
/// weights a_k(x) and volume coefficients c_k(x). Direction indices are 0-based.
class CongestionModel {
 public:
  CongestionModel(DirectionSystem dirs, double p, std::vector<double> delta, std::vector<Expression> a,
                  std::vector<Expression> c)
      : dirs_(std::move(dirs)), p_(p), delta_(std::move(delta)), a_(std::move(a)), c_(std::move(c)) {
    if (!(p_ > 1.0) || !std::isfinite(p_)) throw std::invalid_argument("p must exceed 1");
    const std::size_t n = dirs_.size();
    if (delta_.size() != n || a_.size() != n || c_.size() != n) {
      throw std::invalid_argument("coefficient lists must have one entry per direction");
    }
    for (std::size_t k = 0; k < n; ++k) {
      if (!(delta_[k] >= 0.0)) throw std::invalid_argument("delta_k must be nonnegative");
      if (!(lower_bound(a_[k]) > 0.0)) throw std::invalid_argument("a_k must be positive");
      if (!(lower_bound(c_[k]) > 0.0)) throw std::invalid_argument("c_k must be positive");
    }
  }

  /// Same coefficients on every direction.
  static CongestionModel uniform(DirectionSystem dirs, double p, double delta = 1.0, Expression a = 1.0,
                                 Expression c = 1.0) {
    const std::size_t n = dirs.size();
    return CongestionModel(std::move(dirs), p, std::vector<double>(n, delta), std::vector<Expression>(n, a),
                           std::vector<Expression>(n, c));
  }

  const DirectionSystem& directions() const { return dirs_; }
  std::size_t size() const { return dirs_.size(); }
  double p() const { return p_; }
  double q() const { return p_ / (p_ - 1.0); }
  double delta(std::size_t k) const { return delta_.at(k); }
  const Expression& a_expr(std::size_t k) const { return a_.at(k); }
  const Expression& c_expr(std::size_t k) const { return c_.at(k); }
  const std::vector<double>& deltas() const { return delta_; }
  const std::vector<Expression>& a_exprs() const { return a_; }
  const std::vector<Expression>& c_exprs() const { return c_; }

  double b(std::size_t k, const Vec2& x) const { return std::pow(a_.at(k)(x) * c_.at(k)(x), -(p_ - 1.0)); }
  double threshold(std::size_t k, const Vec2& x) const { return delta_.at(k) * c_.at(k)(x); }

  /// g_k(x, m) = a_k(x) m^{q-1} + delta_k
  double arc_congestion(std::size_t k, const Vec2& x, double m) const {
    check_mass(m);
    return a_.at(k)(x) * detail::positive_pow(m, q() - 1.0) + delta_.at(k);
  }

  /// G_k(x, m) = a_k(x) m^q / q + delta_k m
  double primitive_G(std::size_t k, const Vec2& x, double m) const {
    check_mass(m);
    const double qq = q();
    return a_.at(k)(x) * detail::positive_pow(m, qq) / qq + delta_.at(k) * m;
  }

  PointModel at(const Vec2& x) const {
    PointModel pm;
    pm.p = p_;
    pm.cartesian = dirs_.kind() == DirectionKind::cartesian;
    const std::size_t n = size();
    pm.v.assign(dirs_.directions().begin(), dirs_.directions().end());
    pm.b.resize(n);
    pm.theta.resize(n);
    pm.a.resize(n);
    pm.c.resize(n);
    pm.delta = delta_;
    for (std::size_t k = 0; k < n; ++k) {
      pm.a[k] = a_[k](x);
      pm.c[k] = c_[k](x);
      pm.b[k] = std::pow(pm.a[k] * pm.c[k], -(p_ - 1.0));
      pm.theta[k] = delta_[k] * pm.c[k];
    }
    return pm;
  }

  double dual_density(const Vec2& x, const Vec2& z) const { return at(x).dual_density(z); }
  Vec2 dual_gradient(const Vec2& x, const Vec2& z) const { return at(x).dual_gradient(z); }
  double primal_density(const Vec2& x, const Vec2& sigma) const { return at(x).primal_density(sigma); }

  /// F_k(z) = (z.v_k - delta_k c_k)_+^{p-1} v_k, defined for p >= 2.
  Vec2 f_map(std::size_t k, const Vec2& x, const Vec2& z) const {
    require_p_at_least_two();
    return detail::positive_pow(dot(z, dirs_[k]) - threshold(k, x), p_ - 1.0) * dirs_[k];
  }

  /// H_k(z) = (z.v_k - delta_k c_k)_+^{p/2} v_k, defined for p >= 2.
  Vec2 h_map(std::size_t k, const Vec2& x, const Vec2& z) const {
    require_p_at_least_two();
    return detail::positive_pow(dot(z, dirs_[k]) - threshold(k, x), p_ / 2.0) * dirs_[k];
  }

  friend bool operator==(const CongestionModel&, const CongestionModel&) = default;

 private:
  static double lower_bound(const Expression& e) {
    double lb = e.constant;
    for (const auto& bump : e.bumps) lb += std::min(bump.amplitude, 0.0);
    return lb;
  }
  static void check_mass(double m) {
    if (!(m >= 0.0)) throw std::domain_error("arc mass must be nonnegative");
  }
  void require_p_at_least_two() const {
    if (p_ < 2.0) throw std::domain_error("F_k and H_k require p >= 2");
  }

  DirectionSystem dirs_;
  double p_;
  std::vector<double> delta_;
  std::vector<Expression> a_;
  std::vector<Expression> c_;
};

}  // namespace wardrop
