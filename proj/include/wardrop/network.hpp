#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <ostream>
#include <queue>
#include <stdexcept>
#include <utility>
#include <vector>

#include "wardrop/core_model.hpp"
#include "wardrop/errors.hpp"
#include "wardrop/expression.hpp"
#include "wardrop/fem.hpp"
#include "wardrop/geometry.hpp"
#include "wardrop/mesh.hpp"

namespace wardrop {

/// Oriented arc of the eps-grid; direction indexes the cartesian system
/// (0: +x, 1: +y, 2: -x, 3: -y).
struct Arc {
  std::size_t tail = 0;
  std::size_t head = 0;
  std::size_t direction = 0;
};

/// Cartesian eps-grid network with per-arc congestion g^eps(m) = eps (a (m/eps)^{q-1} + delta).
struct GridNetwork {
  double eps = 0.0;
  Rect domain;
  std::vector<Obstacle> obstacles;
  std::size_t nx = 0, ny = 0;  ///< grid nodes per row / column before obstacle removal
  std::vector<Vec2> nodes;
  std::vector<std::vector<std::size_t>> out_arcs;
  std::vector<Arc> arcs;
  double q = 2.0;
  std::vector<double> a;      ///< per arc
  std::vector<double> delta;  ///< per arc

  std::size_t num_nodes() const { return nodes.size(); }
  std::size_t num_arcs() const { return arcs.size(); }

  /// eps g(m / eps): the travel time of an arc carrying mass m.
  double travel_time(std::size_t e, double m) const {
    if (!(m >= 0.0)) throw std::domain_error("arc mass must be nonnegative");
    return eps * (a[e] * detail::positive_pow(m / eps, q - 1.0) + delta[e]);
  }

  /// G^eps(m) = int_0^m g^eps = eps^2 G(m / eps).
  double primitive(std::size_t e, double m) const {
    if (!(m >= 0.0)) throw std::domain_error("arc mass must be nonnegative");
    const double mu = m / eps;
    return eps * eps * (a[e] * detail::positive_pow(mu, q) / q + delta[e] * mu);
  }

  double objective(const std::vector<double>& m) const {
    double s = 0.0;
    for (std::size_t e = 0; e < arcs.size(); ++e) s += primitive(e, m[e]);
    return s;
  }

  std::vector<double> travel_times(const std::vector<double>& m) const {
    std::vector<double> g(arcs.size());
    for (std::size_t e = 0; e < arcs.size(); ++e) g[e] = travel_time(e, m[e]);
    return g;
  }

  /// Sets per-arc coefficients from a cartesian model with c_k = 1 (a_k sampled at the arc tail).
  void apply_model(const CongestionModel& model) {
    if (model.directions().kind() != DirectionKind::cartesian) {
      throw std::invalid_argument("the discrete network supports the cartesian system only");
    }
    for (std::size_t k = 0; k < 4; ++k) {
      if (!(model.c_expr(k) == Expression(1.0))) {
        throw std::invalid_argument("the discrete network requires unit volume coefficients c_k = 1");
      }
    }
    q = model.q();
    for (std::size_t e = 0; e < arcs.size(); ++e) {
      a[e] = model.a_expr(arcs[e].direction)(nodes[arcs[e].tail]);
      delta[e] = model.delta(arcs[e].direction);
    }
  }
};

/// Grid of spacing eps over the rectangle; nodes inside obstacles and arcs
/// crossing obstacles are removed. Coefficients default to a = delta = 1, q = 2.
inline GridNetwork build_grid_network(double eps, const Rect& domain, const std::vector<Obstacle>& obstacles = {}) {
  if (!(eps > 0.0)) throw std::invalid_argument("eps must be positive");
  if (eps > domain.width() || eps > domain.height()) throw std::invalid_argument("eps larger than the domain");
  const double cx = domain.width() / eps, cy = domain.height() / eps;
  if (std::abs(cx - std::round(cx)) > 1e-9 * cx || std::abs(cy - std::round(cy)) > 1e-9 * cy) {
    throw std::invalid_argument("eps must divide the domain side lengths");
  }
  GridNetwork net;
  net.eps = eps;
  net.domain = domain;
  net.obstacles = obstacles;
  net.nx = static_cast<std::size_t>(std::llround(cx)) + 1;
  net.ny = static_cast<std::size_t>(std::llround(cy)) + 1;
  std::vector<long> id(net.nx * net.ny, -1);
  for (std::size_t j = 0; j < net.ny; ++j) {
    for (std::size_t i = 0; i < net.nx; ++i) {
      const Vec2 p{i + 1 == net.nx ? domain.xmax : domain.xmin + eps * static_cast<double>(i),
                   j + 1 == net.ny ? domain.ymax : domain.ymin + eps * static_cast<double>(j)};
      if (inside_any(obstacles, p)) continue;
      id[j * net.nx + i] = static_cast<long>(net.nodes.size());
      net.nodes.push_back(p);
    }
  }
  net.out_arcs.assign(net.nodes.size(), {});
  static constexpr int di[4] = {1, 0, -1, 0};
  static constexpr int dj[4] = {0, 1, 0, -1};
  for (std::size_t j = 0; j < net.ny; ++j) {
    for (std::size_t i = 0; i < net.nx; ++i) {
      const long from = id[j * net.nx + i];
      if (from < 0) continue;
      for (std::size_t k = 0; k < 4; ++k) {
        const long ii = static_cast<long>(i) + di[k], jj = static_cast<long>(j) + dj[k];
        if (ii < 0 || jj < 0 || ii >= static_cast<long>(net.nx) || jj >= static_cast<long>(net.ny)) continue;
        const long to = id[static_cast<std::size_t>(jj) * net.nx + static_cast<std::size_t>(ii)];
        if (to < 0) continue;
        const Vec2 pa = net.nodes[static_cast<std::size_t>(from)], pb = net.nodes[static_cast<std::size_t>(to)];
        bool blocked = false;
        for (const auto& o : obstacles) blocked = blocked || o.intersects_segment(pa, pb);
        if (blocked) continue;
        net.out_arcs[static_cast<std::size_t>(from)].push_back(net.arcs.size());
        net.arcs.push_back({static_cast<std::size_t>(from), static_cast<std::size_t>(to), k});
      }
    }
  }
  net.a.assign(net.arcs.size(), 1.0);
  net.delta.assign(net.arcs.size(), 1.0);
  return net;
}

/// Node masses of the source (minus) and sink (plus) measures, each summing to 1.
struct Marginals {
  std::vector<double> minus;
  std::vector<double> plus;

  /// Node supply f_-(x) - f_+(x): the required net outflow.
  std::vector<double> supply() const {
    std::vector<double> b(minus.size());
    for (std::size_t i = 0; i < b.size(); ++i) b[i] = minus[i] - plus[i];
    return b;
  }
};

/// Density at each node times the cell area, normalized to unit mass.
inline Marginals discretize_marginals(const GridNetwork& net, const Expression& f_plus, const Expression& f_minus) {
  auto sample = [&](const Expression& f) {
    std::vector<double> m(net.num_nodes());
    double total = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) {
      m[i] = std::max(0.0, f(net.nodes[i])) * net.eps * net.eps;
      total += m[i];
    }
    if (!(total > 0.0)) throw std::invalid_argument("sampled density is identically zero");
    for (double& v : m) v /= total;
    return m;
  };
  return {sample(f_minus), sample(f_plus)};
}

/// Uncapacitated min-cost flow with node supplies b (sum zero) by successive
/// shortest paths (Dijkstra with potentials) between a super source and sink.
/// Returns the arc flows; throws NumericError if some supply cannot reach a demand.
inline std::vector<double> min_cost_flow(const GridNetwork& net, const std::vector<double>& cost,
                                         const std::vector<double>& b) {
  const std::size_t n = net.num_nodes();
  if (cost.size() != net.num_arcs() || b.size() != n) throw std::invalid_argument("min_cost_flow: size mismatch");
  for (double c : cost) {
    if (!(c >= 0.0)) throw std::invalid_argument("min_cost_flow: costs must be nonnegative");
  }
  const std::size_t S = n, T = n + 1, N = n + 2;
  constexpr double inf = std::numeric_limits<double>::infinity();
  struct Edge {
    std::size_t to;
    std::size_t rev;
    double cap;
    double cost;
  };
  std::vector<std::vector<Edge>> g(N);
  std::vector<std::pair<std::size_t, std::size_t>> arc_edge(net.num_arcs());
  auto add = [&](std::size_t u, std::size_t v, double cap, double c) {
    g[u].push_back({v, g[v].size(), cap, c});
    g[v].push_back({u, g[u].size() - 1, 0.0, -c});
    return std::make_pair(u, g[u].size() - 1);
  };
  for (std::size_t e = 0; e < net.num_arcs(); ++e) arc_edge[e] = add(net.arcs[e].tail, net.arcs[e].head, inf, cost[e]);
  double total = 0.0;
  for (std::size_t v = 0; v < n; ++v) {
    if (b[v] > 0.0) {
      add(S, v, b[v], 0.0);
      total += b[v];
    } else if (b[v] < 0.0) {
      add(v, T, -b[v], 0.0);
    }
  }
  const double cap_eps = 1e-14 * std::max(total, 1e-300);
  auto unrouted = [&] {
    double r = 0.0;
    for (const Edge& ed : g[S]) r += ed.cap > cap_eps ? ed.cap : 0.0;
    return r;
  };
  std::vector<double> pi(N, 0.0), dist(N);
  std::vector<std::size_t> prev_node(N), prev_edge(N);
  std::vector<bool> done(N);
  double remaining = unrouted();
  while (remaining > 0.0) {
    std::fill(dist.begin(), dist.end(), inf);
    std::fill(done.begin(), done.end(), false);
    dist[S] = 0.0;
    using Item = std::pair<double, std::size_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    heap.push({0.0, S});
    while (!heap.empty()) {
      const auto [d, u] = heap.top();
      heap.pop();
      if (done[u]) continue;
      done[u] = true;
      if (u == T) break;
      for (std::size_t i = 0; i < g[u].size(); ++i) {
        const Edge& ed = g[u][i];
        if (ed.cap <= cap_eps || done[ed.to]) continue;
        const double reduced = std::max(0.0, ed.cost + pi[u] - pi[ed.to]);
        if (d + reduced < dist[ed.to]) {
          dist[ed.to] = d + reduced;
          prev_node[ed.to] = u;
          prev_edge[ed.to] = i;
          heap.push({dist[ed.to], ed.to});
        }
      }
    }
    if (!done[T]) {
      if (remaining <= 1e-12 * total) break;  // rounding mismatch between supply and demand totals
      throw NumericError("min_cost_flow: supply cannot reach demand (disconnected network)");
    }
    for (std::size_t v = 0; v < N; ++v) {
      if (done[v]) pi[v] += dist[v] - dist[T];
    }
    double push = remaining;
    for (std::size_t v = T; v != S; v = prev_node[v]) push = std::min(push, g[prev_node[v]][prev_edge[v]].cap);
    for (std::size_t v = T; v != S; v = prev_node[v]) {
      Edge& ed = g[prev_node[v]][prev_edge[v]];
      ed.cap -= push;
      g[v][ed.rev].cap += push;
    }
    remaining = unrouted();
  }
  std::vector<double> flow(net.num_arcs());
  for (std::size_t e = 0; e < net.num_arcs(); ++e) {
    const auto [u, i] = arc_edge[e];
    const Edge& ed = g[u][i];
    flow[e] = g[ed.to][ed.rev].cap;  // reverse residual capacity = flow carried
  }
  return flow;
}

/// Net outflow minus required supply at every node.
inline std::vector<double> conservation_residual(const GridNetwork& net, const std::vector<double>& m,
                                                 const std::vector<double>& b) {
  std::vector<double> r(net.num_nodes(), 0.0);
  for (std::size_t e = 0; e < net.num_arcs(); ++e) {
    r[net.arcs[e].tail] += m[e];
    r[net.arcs[e].head] -= m[e];
  }
  for (std::size_t v = 0; v < r.size(); ++v) r[v] -= b[v];
  return r;
}

struct FrankWolfeOptions {
  double tol = 1e-4;  ///< stop when gap <= tol * objective
  std::size_t max_iterations = 20000;
  bool conjugate = true;  ///< conjugate directions (plain Frank-Wolfe when false)
};

struct FlowSolution {
  std::vector<double> m;
  double objective = 0.0;
  double gap = 0.0;  ///< sum g(m) (m - s) at the last linearization
  std::size_t iterations = 0;
  bool converged = false;
  std::vector<double> objective_history;
  std::vector<double> gap_history;
};

/// Frank-Wolfe on sum G^eps(m) over feasible flows: min-cost-flow linearization,
/// exact line search (bisection on the derivative of the 1-D restriction).
///
/// With `conjugate`, the target is a convex combination of the new min-cost
/// flow and the previous target chosen so the search direction is conjugate to
/// the previous one under the (diagonal) Hessian; targets stay feasible flows.
/// The stopping gap always uses the plain linearization vertex, so it remains a
/// valid optimality certificate.
inline FlowSolution frank_wolfe(const GridNetwork& net, const Marginals& marg, const FrankWolfeOptions& opt = {}) {
  const auto b = marg.supply();
  FlowSolution sol;
  sol.m = min_cost_flow(net, net.travel_times(std::vector<double>(net.num_arcs(), 0.0)), b);
  const std::size_t na = net.num_arcs();
  std::vector<double> d(na), target(na), prev_target;
  auto hessian = [&](std::size_t e) {
    // d/dm g^eps = a (q-1) (m/eps)^{q-2}
    return net.a[e] * (net.q - 1.0) * std::pow(sol.m[e] / net.eps, net.q - 2.0);
  };
  for (std::size_t it = 0; it < opt.max_iterations; ++it) {
    const auto cost = net.travel_times(sol.m);
    const auto s = min_cost_flow(net, cost, b);
    double gap = 0.0;
    for (std::size_t e = 0; e < na; ++e) gap += cost[e] * (sol.m[e] - s[e]);
    sol.objective = net.objective(sol.m);
    sol.gap = gap;
    sol.objective_history.push_back(sol.objective);
    sol.gap_history.push_back(gap);
    sol.iterations = it;
    if (gap <= opt.tol * sol.objective) {
      sol.converged = true;
      return sol;
    }
    target = s;
    if (opt.conjugate && !prev_target.empty()) {
      double num = 0.0, den = 0.0;
      bool finite = true;
      for (std::size_t e = 0; e < na; ++e) {
        const double h = hessian(e);
        if (!std::isfinite(h)) {
          finite = false;
          break;
        }
        const double dprev = prev_target[e] - sol.m[e];
        num += dprev * h * (s[e] - sol.m[e]);
        den += dprev * h * (s[e] - prev_target[e]);
      }
      if (finite && den != 0.0) {
        const double alpha = std::clamp(num / den, 0.0, 1.0 - 1e-7);
        for (std::size_t e = 0; e < na; ++e) target[e] = alpha * prev_target[e] + (1.0 - alpha) * s[e];
      }
    }
    for (std::size_t e = 0; e < na; ++e) d[e] = target[e] - sol.m[e];
    auto slope = [&](double gamma) {
      double v = 0.0;
      for (std::size_t e = 0; e < na; ++e) {
        if (d[e] == 0.0) continue;
        v += net.travel_time(e, std::max(0.0, sol.m[e] + gamma * d[e])) * d[e];
      }
      return v;
    };
    double gamma = 1.0;
    if (slope(1.0) > 0.0) {
      double lo = 0.0, hi = 1.0;
      for (int k = 0; k < 60; ++k) {
        const double mid = 0.5 * (lo + hi);
        (slope(mid) > 0.0 ? hi : lo) = mid;
      }
      gamma = lo;
    }
    for (std::size_t e = 0; e < na; ++e) sol.m[e] = std::max(0.0, sol.m[e] + gamma * d[e]);
    prev_target = target;
  }
  sol.iterations = opt.max_iterations;
  sol.objective = net.objective(sol.m);
  return sol;
}

struct WardropReport {
  double total_cost = 0.0;     ///< sum g(m) m
  double shortest_cost = 0.0;  ///< optimal transport cost under the frozen travel times g(m)
  double relative_gap = 0.0;
  bool ok = false;
};

/// Arc-based equilibrium certificate: users can save at most relative_gap of
/// the total travel cost by switching to shortest routes.
inline WardropReport wardrop_check(const GridNetwork& net, const Marginals& marg, const std::vector<double>& m,
                                   double tolerance) {
  WardropReport r;
  const auto cost = net.travel_times(m);
  const auto s = min_cost_flow(net, cost, marg.supply());
  for (std::size_t e = 0; e < net.num_arcs(); ++e) {
    r.total_cost += cost[e] * m[e];
    r.shortest_cost += cost[e] * s[e];
  }
  r.relative_gap = r.total_cost > 0.0 ? (r.total_cost - r.shortest_cost) / r.total_cost : 0.0;
  r.ok = r.relative_gap <= tolerance;
  return r;
}

/// sigma_eps(x) = sum over arcs leaving x of m v / eps.
inline std::vector<Vec2> node_flux(const GridNetwork& net, const std::vector<double>& m) {
  static const Vec2 v[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
  std::vector<Vec2> s(net.num_nodes());
  for (std::size_t e = 0; e < net.num_arcs(); ++e) s[net.arcs[e].tail] += (m[e] / net.eps) * v[net.arcs[e].direction];
  return s;
}

/// Trapezoid-weighted L2 distance between sigma_eps and the P1 field sigma_h at the grid nodes.
inline double compare_to_continuum(const GridNetwork& net, const std::vector<double>& m, const Mesh& mesh,
                                   const P1VectorField& sigma_h) {
  if (!(net.domain == mesh.domain) || !(net.obstacles == mesh.obstacles)) {
    throw std::invalid_argument("discrete and continuum problems use different domains");
  }
  const auto flux = node_flux(net, m);
  const PointLocator locator(mesh);
  const double tol = 1e-9 * std::max(net.domain.width(), net.domain.height());
  double s = 0.0;
  for (std::size_t i = 0; i < net.num_nodes(); ++i) {
    const Vec2 x = net.nodes[i];
    const auto hit = locator.locate(x);
    if (!hit) continue;  // node in a mesh hole (obstacle cut by the centroid rule)
    double w = net.eps * net.eps;
    if (std::abs(x.x - net.domain.xmin) < tol || std::abs(x.x - net.domain.xmax) < tol) w *= 0.5;
    if (std::abs(x.y - net.domain.ymin) < tol || std::abs(x.y - net.domain.ymax) < tol) w *= 0.5;
    s += w * norm2(flux[i] - eval_p1(mesh, sigma_h, hit->triangle, hit->bary));
  }
  return std::sqrt(s);
}

/// Plain-text dump: `node x y` and `arc x y dx dy mass`.
inline void write_network(std::ostream& os, const GridNetwork& net, const std::vector<double>& m) {
  os.precision(17);
  for (const auto& p : net.nodes) os << "node " << p.x << ' ' << p.y << '\n';
  for (std::size_t e = 0; e < net.num_arcs(); ++e) {
    const Vec2 a = net.nodes[net.arcs[e].tail], h = net.nodes[net.arcs[e].head];
    os << "arc " << a.x << ' ' << a.y << ' ' << h.x - a.x << ' ' << h.y - a.y << ' ' << (m.empty() ? 0.0 : m[e])
       << '\n';
  }
}

}  // namespace wardrop
