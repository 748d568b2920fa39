#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "wardrop/alg2.hpp"
#include "wardrop/config.hpp"
#include "wardrop/mesh.hpp"

namespace wardrop {

/// One row per mesh vertex.
struct FieldRow {
  Vec2 x;
  double u = 0.0;
  Vec2 sigma;
  Vec2 q;
};

inline std::vector<FieldRow> field_rows(const Alg2State& s, const Mesh& mesh) {
  std::vector<FieldRow> rows(mesh.num_vertices());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    rows[i] = {mesh.vertices[i], s.u.values.empty() ? 0.0 : s.u.values[i],
               s.sigma.values.empty() ? Vec2{} : s.sigma.values[i], s.q.values.empty() ? Vec2{} : s.q.values[i]};
  }
  return rows;
}

/// Comma-separated `x1,x2,u,sigma1,sigma2,q1,q2`, 9 significant digits.
inline void write_fields(std::ostream& os, const Alg2State& s, const Mesh& mesh) {
  os << "x1,x2,u,sigma1,sigma2,q1,q2\n";
  char line[256];
  for (const auto& r : field_rows(s, mesh)) {
    std::snprintf(line, sizeof line, "%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n", r.x.x, r.x.y, r.u, r.sigma.x, r.sigma.y,
                  r.q.x, r.q.y);
    os << line;
  }
}

inline void export_fields(const Alg2State& s, const Mesh& mesh, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write field file '" + path + "'");
  write_fields(out, s, mesh);
  if (!out) throw std::runtime_error("error writing field file '" + path + "'");
}

inline std::vector<FieldRow> read_fields(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open field file '" + path + "'");
  std::string line;
  std::getline(in, line);
  if (line != "x1,x2,u,sigma1,sigma2,q1,q2") throw std::runtime_error("unexpected field file header");
  std::vector<FieldRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    FieldRow r;
    char extra;
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf,%lf,%lf,%lf%c", &r.x.x, &r.x.y, &r.u, &r.sigma.x, &r.sigma.y,
                    &r.q.x, &r.q.y, &extra) != 7) {
      throw std::runtime_error("malformed field row: " + line);
    }
    rows.push_back(r);
  }
  return rows;
}

inline nlohmann::json metrics_json(const Metrics& m) {
  return {{"div", m.div},       {"div_vector", m.div_vector}, {"bnd", m.bnd},
          {"dual", m.dual},     {"objective", m.objective},   {"min_gap", m.min_gap},
          {"flagged_nodes", m.flagged_nodes}};
}

/// Report document: config echo, mesh size, per-iteration arrays, final metrics, timing.
inline nlohmann::json report_json(const ConvergenceReport& rep, const RunConfig& config, const Mesh& mesh) {
  using nlohmann::json;
  json it = {{"k", json::array()},         {"div", json::array()},       {"div_vector", json::array()},
             {"bnd", json::array()},       {"dual", json::array()},      {"objective", json::array()},
             {"seconds", json::array()}};
  for (const auto& r : rep.records) {
    it["k"].push_back(r.k);
    it["div"].push_back(r.metrics.div);
    it["div_vector"].push_back(r.metrics.div_vector);
    it["bnd"].push_back(r.metrics.bnd);
    it["dual"].push_back(r.metrics.dual);
    it["objective"].push_back(r.metrics.objective);
    it["seconds"].push_back(r.seconds);
  }
  return {{"config", config_json(config)},
          {"mesh", {{"n", config.n},
                    {"vertices", mesh.num_vertices()},
                    {"triangles", mesh.num_triangles()},
                    {"p2_dofs", mesh.p2_dofs()}}},
          {"iterations", it},
          {"final", metrics_json(rep.final_metrics)},
          {"termination", rep.termination},
          {"ok", rep.ok},
          {"timing", {{"total_seconds", rep.total_seconds}, {"cg_iterations", rep.cg_iterations}}}};
}

inline void export_report(const nlohmann::json& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write report file '" + path + "'");
  out << report.dump(2) << '\n';
  if (!out) throw std::runtime_error("error writing report file '" + path + "'");
}

inline void export_report(const ConvergenceReport& rep, const RunConfig& config, const Mesh& mesh,
                          const std::string& path) {
  export_report(report_json(rep, config, mesh), path);
}

}  // namespace wardrop
