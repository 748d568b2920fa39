// Independent reference computations used by the unit tests and the acceptance run.
// Nothing here calls the solver code paths it is meant to check.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include "wardrop/wardrop.hpp"

namespace oracle {

using wardrop::Vec2;

/// Golden-section minimum of a unimodal function on [lo, hi].
inline double golden_min(const std::function<double(double)>& f, double lo, double hi, double tol = 1e-13) {
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol * std::max(1.0, std::abs(a) + std::abs(b))) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

/// Compass search in R^n from x0 with initial step h; stops when the step drops below tol.
inline std::vector<double> pattern_min(const std::function<double(const std::vector<double>&)>& f,
                                       std::vector<double> x, double h, double tol = 1e-12) {
  double fx = f(x);
  while (h > tol) {
    bool moved = false;
    for (std::size_t i = 0; i < x.size(); ++i) {
      for (double s : {1.0, -1.0}) {
        auto y = x;
        y[i] += s * h;
        const double fy = f(y);
        if (fy < fx) {
          x = y;
          fx = fy;
          moved = true;
        }
      }
    }
    if (!moved) h *= 0.5;
  }
  return x;
}

/// Composite Simpson rule.
inline double simpson(const std::function<double(double)>& f, double a, double b, int n = 2000) {
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
  return s * h / 3.0;
}

/// Scalar coefficients at one point: per direction a, c, delta, and exponent p (q = p/(p-1)).
struct Coeffs {
  std::vector<Vec2> v;
  std::vector<double> a, c, delta;
  double p = 2.0;
  double q() const { return p / (p - 1.0); }
};

inline Coeffs coeffs(const wardrop::CongestionModel& m, const Vec2& x) {
  Coeffs k;
  k.p = m.p();
  for (std::size_t i = 0; i < m.size(); ++i) {
    k.v.push_back(m.directions()[i]);
    k.a.push_back(m.a_expr(i)(x));
    k.c.push_back(m.c_expr(i)(x));
    k.delta.push_back(m.delta(i));
  }
  return k;
}

/// c G(rho) = c (a rho^q / q + delta rho): the cost of mass rho on one direction.
inline double arc_cost(const Coeffs& k, std::size_t i, double rho) {
  return k.c[i] * (k.a[i] * std::pow(rho, k.q()) / k.q() + k.delta[i] * rho);
}

/// Legendre transform of the inf-convolution = sum of 1-D conjugates:
/// G*(z) = sum_k sup_{rho >= 0} (z.v_k rho - c_k G_k(rho)), each sup by golden section.
inline double dual_density(const Coeffs& k, const Vec2& z) {
  double s = 0.0;
  for (std::size_t i = 0; i < k.v.size(); ++i) {
    const double t = wardrop::dot(z, k.v[i]);
    auto neg = [&](double rho) { return -(t * rho - arc_cost(k, i, rho)); };
    // Bracket: the maximizer satisfies c a rho^{q-1} = t - c delta.
    const double hi = std::max(1.0, 2.0 * std::pow(std::max(0.0, t) / (k.c[i] * k.a[i]) + 1.0, 1.0 / (k.q() - 1.0)));
    const double rho = golden_min(neg, 0.0, hi);
    s += std::max(0.0, -neg(rho));
  }
  return s;
}

/// G(sigma) = min over rho >= 0 with sum rho_k v_k = sigma of sum c_k G_k(rho_k).
/// For every choice of two basis directions, the other masses are searched by a
/// coarse grid then compass refinement (the basis masses follow from the
/// constraint, infeasible points penalized); the best over all bases is returned.
inline double primal_density(const Coeffs& k, const Vec2& sigma) {
  const std::size_t n = k.v.size();
  double best_all = std::numeric_limits<double>::infinity();
  for (std::size_t bi = 0; bi < n; ++bi)
    for (std::size_t bj = bi + 1; bj < n; ++bj) {
      const double d = wardrop::cross(k.v[bi], k.v[bj]);
      if (std::abs(d) < 1e-6) continue;
      std::vector<std::size_t> free;
      for (std::size_t i = 0; i < n; ++i)
        if (i != bi && i != bj) free.push_back(i);
      auto total = [&](const std::vector<double>& y) {
        Vec2 rest = sigma;
        double cost = 0.0, penalty = 0.0;
        for (std::size_t f = 0; f < free.size(); ++f) {
          if (y[f] < 0.0) penalty += -y[f];
          const double rc = std::max(0.0, y[f]);
          rest -= rc * k.v[free[f]];
          cost += arc_cost(k, free[f], rc);
        }
        const double ri = wardrop::cross(rest, k.v[bj]) / d, rj = wardrop::cross(k.v[bi], rest) / d;
        if (ri < 0.0) penalty += -ri;
        if (rj < 0.0) penalty += -rj;
        cost += arc_cost(k, bi, std::max(0.0, ri)) + arc_cost(k, bj, std::max(0.0, rj));
        return cost + 1e6 * penalty;
      };
      const double scale = wardrop::norm(sigma) + 0.1;
      const int g = free.size() <= 2 ? 16 : 6;
      std::vector<double> y(free.size(), 0.0), best_y = y;
      double best_f = std::numeric_limits<double>::infinity();
      std::vector<int> idx(free.size(), 0);
      while (true) {
        for (std::size_t f = 0; f < free.size(); ++f) y[f] = scale * idx[f] / (g - 1);
        const double v = total(y);
        if (v < best_f) {
          best_f = v;
          best_y = y;
        }
        std::size_t f = 0;
        while (f < idx.size() && ++idx[f] == g) idx[f++] = 0;
        if (f == idx.size()) break;
      }
      best_y = pattern_min(total, best_y, scale / g, 1e-14);
      best_all = std::min(best_all, total(best_y));
    }
  return best_all;
}

/// Central-difference gradient.
inline Vec2 fd_gradient(const std::function<double(const Vec2&)>& f, const Vec2& z, double h) {
  return {(f({z.x + h, z.y}) - f({z.x - h, z.y})) / (2 * h), (f({z.x, z.y + h}) - f({z.x, z.y - h})) / (2 * h)};
}

/// Minimizer of G*(q) + (r/2)|q - target|^2 by grid plus compass refinement.
inline Vec2 prox_bruteforce(const Coeffs& k, const Vec2& target, double r) {
  auto phi = [&](const std::vector<double>& q) {
    double s = 0.0;
    for (std::size_t i = 0; i < k.v.size(); ++i) {
      const double b = std::pow(k.a[i] * k.c[i], -(k.p - 1.0));
      const double t = q[0] * k.v[i].x + q[1] * k.v[i].y - k.delta[i] * k.c[i];
      if (t > 0.0) s += b / k.p * std::pow(t, k.p);
    }
    return s + 0.5 * r * ((q[0] - target.x) * (q[0] - target.x) + (q[1] - target.y) * (q[1] - target.y));
  };
  const double R = wardrop::norm(target) + 1.0;
  std::vector<double> best{target.x, target.y};
  double fb = phi(best);
  const int g = 60;
  for (int i = 0; i <= g; ++i)
    for (int j = 0; j <= g; ++j) {
      std::vector<double> q{target.x - R + 2 * R * i / g, target.y - R + 2 * R * j / g};
      const double v = phi(q);
      if (v < fb) {
        fb = v;
        best = q;
      }
    }
  auto x = pattern_min(phi, best, 2 * R / g, 1e-13);
  return {x[0], x[1]};
}

/// Dense symmetric solve by Gaussian elimination with partial pivoting.
inline std::vector<double> dense_solve(std::vector<std::vector<double>> A, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(A[r][c]) > std::abs(A[piv][c])) piv = r;
    std::swap(A[c], A[piv]);
    std::swap(b[c], b[piv]);
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = A[r][c] / A[c][c];
      for (std::size_t k = c; k < n; ++k) A[r][k] -= f * A[c][k];
      b[r] -= f * b[c];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t k = i + 1; k < n; ++k) s -= A[i][k] * x[k];
    x[i] = s / A[i][i];
  }
  return x;
}

inline Vec2 random_in_disc(std::mt19937_64& rng, double radius) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  while (true) {
    Vec2 z{u(rng), u(rng)};
    if (wardrop::norm2(z) <= 1.0) return radius * z;
  }
}

// ---------------------------------------------------------------------------
// Property checks shared by the unit tests and the acceptance binary.

struct CheckResult {
  std::size_t samples = 0;
  std::size_t failures = 0;
  double worst = 0.0;  ///< largest violation seen (tolerance-normalized where noted)
  bool ok() const { return failures == 0 && samples > 0; }
};

/// Fenchel-Young inequality at random (z, sigma) and equality at sigma = grad G*(z);
/// finite-difference check of grad G*. Returns {fenchel, gradient}.
inline std::pair<CheckResult, CheckResult> convex_analysis(const wardrop::CongestionModel& m, std::size_t points,
                                                           std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  CheckResult fy, grad;
  const auto pm = m.at({0.3, 0.6});
  // Keep (z.v_k - theta)_+ <= 1 for p large so values stay representable.
  const double zr = m.p() > 20 ? 2.0 : 4.0;
  for (std::size_t s = 0; s < points; ++s) {
    const Vec2 z = random_in_disc(rng, zr);
    const Vec2 sig = random_in_disc(rng, 3.0);
    // inequality with an arbitrary sigma
    {
      double g;
      try {
        g = pm.primal_density(sig);
      } catch (const wardrop::ConjugateError& e) {
        g = e.lower_bound();
      }
      const double v = dot(z, sig) - 1e-8 - (g + pm.dual_density(z));
      ++fy.samples;
      fy.worst = std::max(fy.worst, v);
      if (v > 0.0) ++fy.failures;
    }
    // equality at the gradient
    {
      const Vec2 sg = pm.dual_gradient(z);
      const double scale = std::max(1.0, std::abs(dot(z, sg)));
      const double v = std::abs(pm.primal_density(sg) + pm.dual_density(z) - dot(z, sg)) / scale;
      ++fy.samples;
      fy.worst = std::max(fy.worst, v / 1e-6);
      if (v > 1e-6) ++fy.failures;
    }
    // finite differences, step kept away from the kinks
    {
      const Vec2 zg = random_in_disc(rng, m.p() > 20 ? 2.0 : 10.0);
      double kink = std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < pm.v.size(); ++k) kink = std::min(kink, std::abs(dot(zg, pm.v[k]) - pm.theta[k]));
      double h = 1e-6 * std::max(1.0, norm(zg));
      if (kink < 4 * h) h = kink / 4;
      if (h < 1e-10) continue;
      const Vec2 fd = fd_gradient([&](const Vec2& w) { return pm.dual_density(w); }, zg, h);
      const Vec2 g = pm.dual_gradient(zg);
      const double v = norm(fd - g) / std::max(1.0, norm(g));
      ++grad.samples;
      grad.worst = std::max(grad.worst, v / 1e-5);
      if (v > 1e-5) ++grad.failures;
    }
  }
  return {fy, grad};
}

/// Lemma inequalities (12), (13) in (z, w) form, (14), at random pairs.
inline CheckResult lemma_inequalities(const wardrop::CongestionModel& m, std::size_t pairs, std::uint64_t seed,
                                      double slack = 1e-10) {
  std::mt19937_64 rng(seed);
  CheckResult r;
  const double p = m.p();
  const Vec2 x{0.5, 0.5};
  for (std::size_t s = 0; s < pairs; ++s) {
    const Vec2 z = random_in_disc(rng, 3.0), w = random_in_disc(rng, 3.0);
    for (std::size_t k = 0; k < m.size(); ++k) {
      const Vec2 fz = m.f_map(k, x, z), fw = m.f_map(k, x, w);
      const Vec2 hz = m.h_map(k, x, z), hw = m.h_map(k, x, w);
      const double e12 = norm(fz) - std::pow(norm(z), p - 1.0) - slack;
      const double e13 = norm(fz - fw) -
                         (p - 1.0) * (std::pow(norm(hz), (p - 2.0) / p) + std::pow(norm(hw), (p - 2.0) / p)) *
                             norm(hz - hw) -
                         slack;
      const double e14 = 4.0 / (p * p) * norm2(hz - hw) - dot(fz - fw, z - w) - slack;
      const double v = std::max({e12, e13, e14});
      r.samples += 3;
      r.worst = std::max(r.worst, v);
      if (e12 > 0) ++r.failures;
      if (e13 > 0) ++r.failures;
      if (e14 > 0) ++r.failures;
    }
  }
  return r;
}

/// prox_scalar vs golden section on the 1-D objective.
inline CheckResult prox_scalar_vs_golden(std::size_t queries, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ub(0.2, 3.0), uc(0.0, 2.0), ur(0.2, 5.0), us(-6.0, 6.0);
  const double ps[] = {1.01, 1.5, 2.0, 3.0, 10.0, 100.0};
  CheckResult res;
  for (std::size_t i = 0; i < queries; ++i) {
    const double b = ub(rng), c = uc(rng), r = ur(rng), s = us(rng), p = ps[i % 6];
    const double t = wardrop::prox_scalar(b, c, p, r, s);
    auto obj = [&](double t) {
      const double e = std::abs(t) - c;
      return (e > 0 ? b / p * std::pow(e, p) : 0.0) + 0.5 * r * (t - s) * (t - s);
    };
    const double ref = golden_min(obj, std::min(0.0, s) - 1.0, std::max(0.0, s) + 1.0);
    const double v = std::abs(t - ref);
    ++res.samples;
    res.worst = std::max(res.worst, v);
    if (v > 1e-6) ++res.failures;
  }
  return res;
}

/// prox_newton vs brute-force 2-D minimization on random hexagonal / cartesian / weighted queries.
inline CheckResult prox_newton_vs_search(std::size_t queries, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ur(0.3, 4.0), ud(0.0, 1.5);
  const double ps[] = {2.0, 3.0, 4.0, 10.0};
  CheckResult res;
  for (std::size_t i = 0; i < queries; ++i) {
    const double p = ps[i % 4];
    auto dirs = i % 3 == 2 ? wardrop::DirectionSystem::cartesian() : wardrop::DirectionSystem::hexagonal();
    const std::size_t n = dirs.size();
    std::vector<double> delta(n);
    std::vector<wardrop::Expression> a(n), c(n);
    for (std::size_t k = 0; k < n; ++k) {
      delta[k] = ud(rng);
      a[k] = 0.5 + ud(rng);
      c[k] = 0.5 + ud(rng);
    }
    const wardrop::CongestionModel model(dirs, p, delta, a, c);
    const Vec2 x{0.5, 0.5};
    const double r = ur(rng);
    const Vec2 target = random_in_disc(rng, p >= 10 ? 2.5 : 4.0);
    const Vec2 q = wardrop::prox_newton(model.at(x), target, r);
    const Vec2 ref = prox_bruteforce(coeffs(model, x), target, r);
    const double v = norm(q - ref);
    ++res.samples;
    res.worst = std::max(res.worst, v);
    if (v > 1e-6) ++res.failures;
  }
  return res;
}

/// L2 error of one step_u solve against cos(pi x) cos(pi y) (p = 2, delta = 0).
inline double manufactured_error(std::size_t n) {
  using namespace wardrop;
  const double pi = std::acos(-1.0);
  const auto mesh = build_structured_mesh(n, Rect{});
  const auto model = CongestionModel::uniform(DirectionSystem::cartesian(), 2.0, 0.0);
  SourceData src;
  src.plus_scale = 1.0;
  src.f_plus = Expression(1.0);  // marks the source as nonzero; the load below is what step_u uses
  src.load = assemble_load(mesh, [&](const Vec2& x) {
    return 2 * pi * pi * std::cos(pi * x.x) * std::cos(pi * x.y);
  });
  detail::remove_mean(src.load);
  Alg2Options opt;
  opt.cg_tol = 1e-12;
  Alg2Solver solver(mesh, model, src, opt);
  auto s = solver.initial_state();
  solver.step_u(s);
  return l2_error(mesh, s.u, [&](const Vec2& x) { return std::cos(pi * x.x) * std::cos(pi * x.y); });
}

/// Max violation of the mirror relations sigma1(x) = -sigma1(x'), sigma2(x) = sigma2(x'), x' = (1 - x1, x2).
inline double mirror_violation(const wardrop::Mesh& mesh, const wardrop::P1VectorField& s) {
  const wardrop::PointLocator loc(mesh);
  double worst = 0.0;
  for (std::size_t a = 0; a < mesh.num_vertices(); ++a) {
    const Vec2 x = mesh.vertices[a];
    const auto hit = loc.locate({mesh.domain.xmin + mesh.domain.xmax - x.x, x.y});
    if (!hit) return std::numeric_limits<double>::infinity();
    const Vec2 m = wardrop::eval_p1(mesh, s, hit->triangle, hit->bary);
    worst = std::max({worst, std::abs(s.values[a].x + m.x), std::abs(s.values[a].y - m.y)});
  }
  return worst;
}

}  // namespace oracle
