// Batch front end: wardrop solve|validate|suite <config> [--out DIR] [--quiet] [--seed S]
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "wardrop/wardrop.hpp"

namespace fs = std::filesystem;
using namespace wardrop;

namespace {

struct Common {
  std::string config;
  std::string out = ".";
  bool quiet = false;
  unsigned long seed = 0;
};

std::string target(const Common& o, const std::string& name) { return (fs::path(o.out) / name).string(); }

void write_mesh_dump(const Common& o, const RunConfig& c, const Mesh& mesh) {
  if (c.output.mesh.empty()) return;
  std::ofstream f(target(o, c.output.mesh));
  if (!f) throw std::runtime_error("cannot write mesh dump");
  write_mesh(f, mesh);
}

int cmd_validate(const Common& o) {
  const auto c = load_config(o.config);
  const auto mesh = c.build_mesh();
  if (!o.quiet) {
    std::printf("valid: %s, %s, p = %g, n = %zu (%zu vertices), %zu obstacle(s), r = %g, max_iterations = %zu\n",
                c.scenario.empty() ? "inline sources" : c.scenario.c_str(), c.directions.c_str(), c.p, c.n,
                mesh.num_vertices(), c.obstacles.size(), c.r, c.max_iterations);
  }
  return 0;
}

int cmd_solve(const Common& o) {
  const auto c = load_config(o.config);
  fs::create_directories(o.out);
  auto run = run_continuum(c, o.quiet ? nullptr : &std::cout);
  if (!c.output.fields.empty()) export_fields(run.state, run.mesh, target(o, c.output.fields));
  if (!c.output.report.empty()) {
    auto j = report_json(run.report, c, run.mesh);
    j["seed"] = o.seed;
    export_report(j, target(o, c.output.report));
  }
  write_mesh_dump(o, c, run.mesh);
  if (!run.report.ok) {
    std::fprintf(stderr, "solve failed: %s\n", run.report.termination.c_str());
    return 2;
  }
  if (!o.quiet) {
    const auto& m = run.report.final_metrics;
    std::printf("%s after %zu iterations: DIV %.4e BND %.4e DUAL %.4e (%.1f s)\n", run.report.termination.c_str(),
                run.report.records.size(), m.div, m.bnd, m.dual, run.report.total_seconds);
  }
  return 0;
}

int cmd_suite(const Common& o) {
  const auto c = load_config(o.config);
  fs::create_directories(o.out);
  const auto res = run_suite(c, o.quiet ? nullptr : &std::cout);
  if (!c.output.fields.empty()) export_fields(res.continuum.state, res.continuum.mesh, target(o, c.output.fields));
  if (!c.output.report.empty()) {
    auto j = suite_json(res, c);
    j["seed"] = o.seed;
    export_report(j, target(o, c.output.report));
  }
  write_mesh_dump(o, c, res.continuum.mesh);
  if (!c.output.network.empty()) {
    for (std::size_t i = 0; i < res.networks.size(); ++i) {
      std::ofstream f(target(o, c.output.network + "." + std::to_string(i)));
      if (!f) throw std::runtime_error("cannot write network dump");
      write_network(f, res.networks[i], res.flows[i]);
    }
  }
  if (!o.quiet) {
    std::printf("%12s %10s %8s %12s %12s\n", "eps", "iterations", "conv", "wardrop_gap", "discrepancy");
    for (const auto& r : res.rows) {
      std::printf("%12.6g %10zu %8s %12.3e %12.5e\n", r.eps, r.iterations, r.converged ? "yes" : "no", r.wardrop_gap,
                  r.discrepancy);
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wardrop equilibria in congested transport: augmented Lagrangian FEM solver"};
  app.require_subcommand(1);
  Common o;
  app.add_option("--out", o.out, "output directory")->capture_default_str();
  app.add_flag("--quiet", o.quiet, "no console output besides errors");
  app.add_option("--seed", o.seed, "seed for randomized checks (the solver is deterministic)");
  app.fallthrough();
  auto* solve = app.add_subcommand("solve", "run the augmented Lagrangian solver");
  auto* validate = app.add_subcommand("validate", "parse and validate a configuration");
  auto* suite = app.add_subcommand("suite", "continuum solve plus discrete validation per eps");
  for (auto* s : {solve, validate, suite}) s->add_option("config", o.config, "configuration file")->required();
  CLI11_PARSE(app, argc, argv);
  try {
    if (solve->parsed()) return cmd_solve(o);
    if (validate->parsed()) return cmd_validate(o);
    return cmd_suite(o);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
}
