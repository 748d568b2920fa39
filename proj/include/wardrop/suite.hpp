#pragma once

#include <algorithm>
#include <chrono>
#include <functional>
#include <ostream>
#include <vector>

#include <json.hpp>

#include "wardrop/alg2.hpp"
#include "wardrop/config.hpp"
#include "wardrop/io.hpp"
#include "wardrop/network.hpp"

namespace wardrop {

/// One discrete solve and its distance to the continuum flux.
struct DiscreteRow {
  double eps = 0.0;
  std::size_t nodes = 0;
  std::size_t arcs = 0;
  std::size_t iterations = 0;
  bool converged = false;
  double objective = 0.0;
  double wardrop_gap = 0.0;
  double discrepancy = 0.0;
  double seconds = 0.0;
};

struct ContinuumRun {
  Mesh mesh;
  Alg2State state;
  ConvergenceReport report;
};

inline ContinuumRun run_continuum(const RunConfig& config, std::ostream* log = nullptr) {
  ContinuumRun out{config.build_mesh(), {}, {}};
  const auto model = config.model();
  auto opt = config.alg2_options();
  opt.log = log;
  Alg2Solver solver(out.mesh, model, make_source(out.mesh, config.f_plus, config.f_minus), opt);
  std::tie(out.state, out.report) = solver.run();
  return out;
}

struct SuiteResult {
  ContinuumRun continuum;
  std::vector<DiscreteRow> rows;  ///< coarsest spacing first
  std::vector<GridNetwork> networks;
  std::vector<std::vector<double>> flows;
};

/// Continuum solve, then one Frank-Wolfe solve per eps compared against it.
inline SuiteResult run_suite(const RunConfig& config, std::ostream* log = nullptr) {
  using clock = std::chrono::steady_clock;
  SuiteResult res{run_continuum(config, log), {}, {}, {}};
  if (!res.continuum.report.ok) throw NumericError("continuum solve failed: " + res.continuum.report.termination);
  if (!config.discrete) return res;
  auto eps = config.discrete->eps;
  std::sort(eps.begin(), eps.end(), std::greater<>());
  const auto model = config.model();
  for (double e : eps) {
    const auto t0 = clock::now();
    auto net = build_grid_network(e, config.domain, config.obstacles);
    net.apply_model(model);
    const auto marg = discretize_marginals(net, config.f_plus, config.f_minus);
    FrankWolfeOptions fw;
    fw.tol = config.discrete->tol;
    fw.max_iterations = config.discrete->max_iterations;
    auto sol = frank_wolfe(net, marg, fw);
    DiscreteRow row;
    row.eps = e;
    row.nodes = net.num_nodes();
    row.arcs = net.num_arcs();
    row.iterations = sol.iterations;
    row.converged = sol.converged;
    row.objective = sol.objective;
    row.wardrop_gap = wardrop_check(net, marg, sol.m, fw.tol).relative_gap;
    row.discrepancy = compare_to_continuum(net, sol.m, res.continuum.mesh, res.continuum.state.sigma);
    row.seconds = std::chrono::duration<double>(clock::now() - t0).count();
    if (log) {
      *log << "eps " << e << " iterations " << row.iterations << " gap " << row.wardrop_gap << " discrepancy "
           << row.discrepancy << '\n';
    }
    res.rows.push_back(row);
    res.networks.push_back(std::move(net));
    res.flows.push_back(std::move(sol.m));
  }
  return res;
}

inline nlohmann::json suite_json(const SuiteResult& res, const RunConfig& config) {
  auto j = report_json(res.continuum.report, config, res.continuum.mesh);
  j["discrete"] = nlohmann::json::array();
  for (const auto& r : res.rows) {
    j["discrete"].push_back({{"eps", r.eps},
                             {"nodes", r.nodes},
                             {"arcs", r.arcs},
                             {"iterations", r.iterations},
                             {"converged", r.converged},
                             {"objective", r.objective},
                             {"wardrop_gap", r.wardrop_gap},
                             {"discrepancy", r.discrepancy},
                             {"seconds", r.seconds}});
  }
  return j;
}

}  // namespace wardrop
