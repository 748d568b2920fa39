#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "wardrop/core_model.hpp"
#include "wardrop/errors.hpp"
#include "wardrop/fem.hpp"
#include "wardrop/mesh.hpp"
#include "wardrop/prox.hpp"
#include "wardrop/sparse.hpp"

namespace wardrop {

enum class ProxSolver { automatic, cartesian, newton };

struct Alg2Options {
  double r = 1.0;
  std::size_t max_iterations = 200;
  /// Early exit once every threshold that is set is met. None set: run all iterations.
  std::optional<double> div_tol;
  std::optional<double> bnd_tol;
  std::optional<double> dual_tol;
  double cg_tol = 1e-10;
  ProxSolver solver = ProxSolver::automatic;
  std::ostream* log = nullptr;  ///< per-iteration `k DIV BND DUAL` lines
};

/// Iterate (u, q, sigma); grad_u caches the P1 projection of grad u.
struct Alg2State {
  P2ScalarField u;
  P1VectorField q;
  P1VectorField sigma;
  P1VectorField grad_u;
  double r = 1.0;
  std::size_t k = 0;
};

struct Metrics {
  double div = 0.0;
  double div_vector = 0.0;  ///< Euclidean norm of the weak residual vector (diagnostic only)
  double bnd = 0.0;
  double dual = 0.0;
  double objective = 0.0;  ///< -int G(x, sigma), lumped quadrature
  double min_gap = 0.0;    ///< smallest nodal Fenchel gap (should be >= 0)
  std::size_t flagged_nodes = 0;  ///< nodes where G was only bounded from below
};

struct IterationRecord {
  std::size_t k = 0;
  Metrics metrics;
  double seconds = 0.0;  ///< wall time of this iteration
};

struct ConvergenceReport {
  std::vector<IterationRecord> records;
  Metrics final_metrics;
  std::string termination;  ///< "max_iterations", "thresholds", "zero_source" or "error: ..."
  bool ok = true;
  double total_seconds = 0.0;
  std::size_t cg_iterations = 0;
};

/// sigma^{k+1} = sigma^k + r (grad u^{k+1} - q^{k+1})
inline void step_sigma(Alg2State& s) {
  for (std::size_t a = 0; a < s.sigma.values.size(); ++a) {
    s.sigma.values[a] += s.r * (s.grad_u.values[a] - s.q.values[a]);
  }
}

/// Discretized problem: operators assembled once, reused by every iteration.
class Alg2Solver {
 public:
  Alg2Solver(const Mesh& mesh, const CongestionModel& model, SourceData source, Alg2Options opt = {})
      : mesh_(&mesh),
        model_(&model),
        source_(std::move(source)),
        opt_(opt),
        stiffness_(assemble_stiffness(mesh)),
        p2_mass_(assemble_p2_mass(mesh)),
        p1_mass_(assemble_p1_vector_mass(mesh)),
        coupling_(assemble_gradient_coupling(mesh)),
        projector_(p1_mass_, coupling_) {
    if (!(opt_.r > 0.0)) throw std::invalid_argument("penalty r must be positive");
    if (source_.load.size() != mesh.p2_dofs()) throw std::invalid_argument("load does not match mesh");
    nodes_.reserve(mesh.num_vertices());
    for (const auto& x : mesh.vertices) nodes_.push_back(model.at(x));
    if (opt_.solver == ProxSolver::cartesian && model.directions().kind() != DirectionKind::cartesian) {
      throw std::invalid_argument("cartesian prox needs the cartesian direction system");
    }
    if (solver_is_newton() && model.p() < 2.0) {
      throw std::invalid_argument("Newton prox requires p >= 2");
    }
  }

  Alg2Solver(const Alg2Solver&) = delete;  // the projector points into this object
  Alg2Solver& operator=(const Alg2Solver&) = delete;

  const Mesh& mesh() const { return *mesh_; }
  const CongestionModel& model() const { return *model_; }
  const SourceData& source() const { return source_; }
  const Alg2Options& options() const { return opt_; }
  const SparseMatrix& stiffness() const { return stiffness_; }
  const P1VectorMass& p1_mass() const { return p1_mass_; }
  const GradientCoupling& coupling() const { return coupling_; }
  std::size_t cg_iterations() const { return cg_iterations_; }

  Alg2State initial_state() const {
    Alg2State s;
    s.u.values.assign(mesh_->p2_dofs(), 0.0);
    s.q.values.assign(mesh_->num_vertices(), {});
    s.sigma.values.assign(mesh_->num_vertices(), {});
    s.grad_u.values.assign(mesh_->num_vertices(), {});
    s.r = opt_.r;
    return s;
  }

  /// Step 1: r K u = load + B(r q - sigma), zero-mean u; then grad_u = Lambda u.
  void step_u(Alg2State& s) {
    P1VectorField w;
    w.values.resize(s.q.values.size());
    for (std::size_t a = 0; a < w.values.size(); ++a) w.values[a] = s.r * s.q.values[a] - s.sigma.values[a];
    auto rhs = apply_divergence_tests(coupling_, w);
    for (std::size_t i = 0; i < rhs.size(); ++i) rhs[i] = (rhs[i] + source_.load[i]) / s.r;
    // B(w) has zero sum analytically; strip its rounding so the Neumann problem is compatible.
    detail::remove_mean(rhs);
    CgOptions cg;
    cg.tol = opt_.cg_tol;
    cg.project_constants = true;
    const auto rep = cg_solve(stiffness_, rhs, s.u.values, cg);  // warm start from the previous u
    cg_iterations_ += rep.iterations;
    if (rep.breakdown) {
      throw NumericError("step_u: CG stopped at relative residual " + std::to_string(rep.relative_residual) +
                         " after " + std::to_string(rep.iterations) + " iterations");
    }
    s.grad_u = projector_.project(s.u);
  }

  /// Step 2: nodal prox of grad u + sigma / r.
  void step_q(Alg2State& s) const {
    for (std::size_t a = 0; a < nodes_.size(); ++a) {
      const Vec2 target = s.grad_u.values[a] + s.sigma.values[a] / s.r;
      try {
        s.q.values[a] = solver_is_newton() ? prox_newton(nodes_[a], target, s.r)
                                           : prox_cartesian(nodes_[a], target, s.r);
      } catch (const NumericError& e) {
        throw NumericError(std::string(e.what()) + " at node " + std::to_string(a));
      }
    }
  }

  /// DIV: (R^T M2^{-1} R)^{1/2} with R_i = int sigma . grad phi_i - <f, phi_i>.
  double div_error(const P1VectorField& sigma) const { return div_errors(sigma).first; }

  /// (mass-weighted DIV, Euclidean norm of the residual vector)
  std::pair<double, double> div_errors(const P1VectorField& sigma) const {
    auto res = apply_divergence_tests(coupling_, sigma);
    for (std::size_t i = 0; i < res.size(); ++i) res[i] -= source_.load[i];
    std::vector<double> w(res.size(), 0.0);
    CgOptions cg;
    cg.tol = 1e-12;
    cg_solve(p2_mass_, res, w, cg);
    return {std::sqrt(std::max(0.0, detail::dotv(res, w))), std::sqrt(detail::dotv(res, res))};
  }

  /// BND: (int_{boundary} (sigma . nu)^2)^{1/2}, two-point Gauss per boundary edge.
  double bnd_error(const P1VectorField& sigma) const {
    const double g = 0.5 / std::sqrt(3.0);
    double s = 0.0;
    for (const auto& seg : mesh_->boundary_segments) {
      const auto [nu, len] = mesh_->segment_normal(seg);
      const double f0 = dot(sigma.values[seg[0]], nu), f1 = dot(sigma.values[seg[1]], nu);
      for (double t : {0.5 - g, 0.5 + g}) {
        const double fv = (1.0 - t) * f0 + t * f1;
        s += 0.5 * len * fv * fv;
      }
    }
    return std::sqrt(s);
  }

  Metrics metrics(const Alg2State& s) const {
    Metrics m;
    std::tie(m.div, m.div_vector) = div_errors(s.sigma);
    m.bnd = bnd_error(s.sigma);
    m.min_gap = std::numeric_limits<double>::infinity();
    double primal = 0.0;
    for (std::size_t a = 0; a < nodes_.size(); ++a) {
      const auto& pm = nodes_[a];
      const Vec2 sig = s.sigma.values[a], z = s.grad_u.values[a];
      double g;
      try {
        g = pm.primal_density(sig);
      } catch (const ConjugateError& e) {
        g = e.lower_bound();
        ++m.flagged_nodes;
      }
      const double gap = g + pm.dual_density(z) - dot(z, sig);
      m.dual = std::max(m.dual, std::abs(gap));
      m.min_gap = std::min(m.min_gap, gap);
      primal += p1_mass_.lumped[a] * g;
    }
    if (nodes_.empty()) m.min_gap = 0.0;
    m.objective = -primal;
    return m;
  }

  /// Iterates from zero until max_iterations or the configured thresholds.
  std::pair<Alg2State, ConvergenceReport> run() {
    using clock = std::chrono::steady_clock;
    const auto start = clock::now();
    Alg2State s = initial_state();
    ConvergenceReport rep;
    if (source_.is_zero()) {
      rep.termination = "zero_source";
      return {std::move(s), std::move(rep)};
    }
    rep.termination = "max_iterations";
    try {
      for (std::size_t it = 0; it < opt_.max_iterations; ++it) {
        const auto t0 = clock::now();
        step_u(s);
        step_q(s);
        step_sigma(s);
        ++s.k;
        IterationRecord rec;
        rec.k = s.k;
        rec.metrics = metrics(s);
        rec.seconds = std::chrono::duration<double>(clock::now() - t0).count();
        rep.records.push_back(rec);
        rep.final_metrics = rec.metrics;
        if (opt_.log) {
          char line[128];
          std::snprintf(line, sizeof line, "%zu %.3e %.3e %.3e\n", rec.k, rec.metrics.div, rec.metrics.bnd,
                        rec.metrics.dual);
          *opt_.log << line << std::flush;
        }
        if (thresholds_met(rec.metrics)) {
          rep.termination = "thresholds";
          break;
        }
      }
    } catch (const std::exception& e) {
      rep.ok = false;
      rep.termination = std::string("error: ") + e.what();
    }
    rep.cg_iterations = cg_iterations_;
    rep.total_seconds = std::chrono::duration<double>(clock::now() - start).count();
    return {std::move(s), std::move(rep)};
  }

 private:
  bool solver_is_newton() const {
    switch (opt_.solver) {
      case ProxSolver::cartesian: return false;
      case ProxSolver::newton: return true;
      case ProxSolver::automatic: break;
    }
    return model_->directions().kind() != DirectionKind::cartesian;
  }

  bool thresholds_met(const Metrics& m) const {
    if (!opt_.div_tol && !opt_.bnd_tol && !opt_.dual_tol) return false;
    return (!opt_.div_tol || m.div <= *opt_.div_tol) && (!opt_.bnd_tol || m.bnd <= *opt_.bnd_tol) &&
           (!opt_.dual_tol || m.dual <= *opt_.dual_tol);
  }

  const Mesh* mesh_;
  const CongestionModel* model_;
  SourceData source_;
  Alg2Options opt_;
  SparseMatrix stiffness_;
  SparseMatrix p2_mass_;
  P1VectorMass p1_mass_;
  GradientCoupling coupling_;
  GradientProjector projector_;
  std::vector<PointModel> nodes_;
  std::size_t cg_iterations_ = 0;
};

}  // namespace wardrop
