#pragma once

#include <cmath>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "wardrop/alg2.hpp"
#include "wardrop/core_model.hpp"
#include "wardrop/errors.hpp"
#include "wardrop/expression.hpp"
#include "wardrop/geometry.hpp"
#include "wardrop/mesh.hpp"
#include "wardrop/scenarios.hpp"

namespace wardrop {

/// Optional discrete validation: one Frank-Wolfe solve per grid spacing.
struct DiscreteConfig {
  std::vector<double> eps;
  double tol = 1e-4;
  std::size_t max_iterations = 20000;
  friend bool operator==(const DiscreteConfig&, const DiscreteConfig&) = default;
};

/// Output file names, relative to the --out directory. Empty disables a file.
struct OutputConfig {
  std::string fields = "fields.csv";
  std::string report = "report.json";
  std::string mesh;
  std::string network;
  friend bool operator==(const OutputConfig&, const OutputConfig&) = default;
};

struct RunConfig {
  std::string scenario;  ///< empty when the sources are given inline
  Expression f_plus;
  Expression f_minus;

  std::string directions = "cartesian";  ///< cartesian | hexagonal | custom
  std::vector<Vec2> custom_directions;
  double p = 2.0;
  std::vector<double> delta;  ///< one entry per direction
  std::vector<Expression> a;
  std::vector<Expression> c;

  std::size_t n = 64;
  Rect domain;
  DiagonalPattern diagonals = DiagonalPattern::alternating;
  std::vector<Obstacle> obstacles;

  double r = 1.0;
  std::size_t max_iterations = 200;
  std::optional<double> div_tol, bnd_tol, dual_tol;
  double cg_tol = 1e-10;
  ProxSolver prox = ProxSolver::automatic;

  OutputConfig output;
  std::optional<DiscreteConfig> discrete;

  DirectionSystem direction_system() const {
    if (directions == "cartesian") return DirectionSystem::cartesian();
    if (directions == "hexagonal") return DirectionSystem::hexagonal();
    return DirectionSystem::custom(custom_directions);
  }

  CongestionModel model() const { return CongestionModel(direction_system(), p, delta, a, c); }

  Alg2Options alg2_options() const {
    Alg2Options o;
    o.r = r;
    o.max_iterations = max_iterations;
    o.div_tol = div_tol;
    o.bnd_tol = bnd_tol;
    o.dual_tol = dual_tol;
    o.cg_tol = cg_tol;
    o.solver = prox;
    return o;
  }

  Mesh build_mesh() const { return build_structured_mesh(n, domain, obstacles, diagonals); }

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

namespace detail {

using nlohmann::json;

inline std::string join_path(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

inline void only_keys(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError((path.empty() ? "config" : path) + ": expected an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items()) {
    if (!ok.count(key)) throw ConfigError("unknown key '" + join_path(path, key) + "'");
  }
}

inline double get_number(const json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError(path + ": expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ConfigError(path + ": not finite");
  return v;
}

inline std::size_t get_count(const json& j, const std::string& path) {
  if (!j.is_number_integer() || j.get<long long>() < 0) throw ConfigError(path + ": expected a nonnegative integer");
  return j.get<std::size_t>();
}

inline std::string get_string(const json& j, const std::string& path) {
  if (!j.is_string()) throw ConfigError(path + ": expected a string");
  return j.get<std::string>();
}

inline Vec2 get_point(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 2) throw ConfigError(path + ": expected [x, y]");
  return {get_number(j[0], path + "[0]"), get_number(j[1], path + "[1]")};
}

inline Rect get_rect(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 4) throw ConfigError(path + ": expected [xmin, xmax, ymin, ymax]");
  Rect r{get_number(j[0], path), get_number(j[1], path), get_number(j[2], path), get_number(j[3], path)};
  if (!(r.xmin < r.xmax && r.ymin < r.ymax)) throw ConfigError(path + ": empty rectangle");
  return r;
}

/// number | weight name | {"constant": c, "bumps": [{"amplitude", "width", "center"}]}
inline Expression get_expression(const json& j, const std::string& path) {
  if (j.is_number()) return Expression(get_number(j, path));
  if (j.is_string()) {
    try {
      return weight(j.get<std::string>());
    } catch (const ConfigError& e) {
      throw ConfigError(path + ": " + e.what());
    }
  }
  only_keys(j, path, {"constant", "bumps"});
  Expression e;
  if (j.contains("constant")) e.constant = get_number(j["constant"], path + ".constant");
  if (j.contains("bumps")) {
    if (!j["bumps"].is_array()) throw ConfigError(path + ".bumps: expected an array");
    for (std::size_t i = 0; i < j["bumps"].size(); ++i) {
      const auto& b = j["bumps"][i];
      const std::string bp = path + ".bumps[" + std::to_string(i) + "]";
      only_keys(b, bp, {"amplitude", "width", "center"});
      GaussianBump g;
      if (b.contains("amplitude")) g.amplitude = get_number(b["amplitude"], bp + ".amplitude");
      if (!b.contains("width") || !b.contains("center")) throw ConfigError(bp + ": needs width and center");
      g.width = get_number(b["width"], bp + ".width");
      if (!(g.width > 0.0)) throw ConfigError(bp + ".width must be positive");
      g.center = get_point(b["center"], bp + ".center");
      e.bumps.push_back(g);
    }
  }
  return e;
}

inline json expression_json(const Expression& e) {
  if (e.bumps.empty()) return e.constant;
  json bumps = json::array();
  for (const auto& b : e.bumps) {
    bumps.push_back({{"amplitude", b.amplitude}, {"width", b.width}, {"center", {b.center.x, b.center.y}}});
  }
  return {{"constant", e.constant}, {"bumps", bumps}};
}

inline Obstacle get_obstacle(const json& j, const std::string& path) {
  only_keys(j, path, {"rect", "disc"});
  if (j.size() != 1) throw ConfigError(path + ": give exactly one of rect, disc");
  if (j.contains("rect")) return Obstacle{get_rect(j["rect"], path + ".rect")};
  const auto& d = j["disc"];
  only_keys(d, path + ".disc", {"center", "radius"});
  if (!d.contains("center") || !d.contains("radius")) throw ConfigError(path + ".disc: needs center and radius");
  return Obstacle{Disc{get_point(d["center"], path + ".disc.center"), get_number(d["radius"], path + ".disc.radius")}};
}

inline std::vector<Obstacle> get_obstacles(const json& j, const std::string& path) {
  if (!j.is_array()) throw ConfigError(path + ": expected an array");
  std::vector<Obstacle> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(get_obstacle(j[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

inline json obstacle_json(const Obstacle& o) {
  if (const auto* r = std::get_if<Rect>(&o.shape)) return {{"rect", {r->xmin, r->xmax, r->ymin, r->ymax}}};
  const auto& d = std::get<Disc>(o.shape);
  return {{"disc", {{"center", {d.center.x, d.center.y}}, {"radius", d.radius}}}};
}

template <class T, class F>
std::vector<T> per_direction(const json& j, const std::string& path, std::size_t n, T fallback, F read) {
  if (j.is_null()) return std::vector<T>(n, fallback);
  if (j.is_array()) {
    if (j.size() != n) {
      throw ConfigError(path + ": expected " + std::to_string(n) + " entries (one per direction)");
    }
    std::vector<T> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(read(j[i], path + "[" + std::to_string(i) + "]"));
    return out;
  }
  return std::vector<T>(n, read(j, path));
}

}  // namespace detail

/// Checks the invariants a parsed configuration must satisfy.
inline void validate_config(const RunConfig& c) {
  if (!(c.p > 1.0) || !std::isfinite(c.p)) throw ConfigError("model.p: p must exceed 1");
  if (c.n < 4) throw ConfigError("mesh.n: n must be at least 4");
  if (!(c.r > 0.0)) throw ConfigError("solver.r: r must be positive");
  if (c.max_iterations < 1) throw ConfigError("solver.max_iterations: must be at least 1");
  if (!(c.cg_tol > 0.0)) throw ConfigError("solver.cg_tol: must be positive");
  if (c.directions != "cartesian" && c.directions != "hexagonal" && c.directions != "custom") {
    throw ConfigError("model.directions: unknown direction system '" + c.directions + "'");
  }
  const bool cartesian = c.directions == "cartesian";
  if (!cartesian && c.p < 2.0) {
    throw ConfigError("model.p: p < 2 needs the cartesian system (the Newton prox requires p >= 2)");
  }
  if (c.prox == ProxSolver::newton && c.p < 2.0) throw ConfigError("solver.prox: newton requires p >= 2");
  if (c.prox == ProxSolver::cartesian && !cartesian) {
    throw ConfigError("solver.prox: cartesian prox needs the cartesian direction system");
  }
  if (c.f_plus.is_zero() != c.f_minus.is_zero()) {
    throw ConfigError("sources: f_plus and f_minus must both be zero or both be nonzero");
  }
  for (const auto& o : c.obstacles) {
    if (!o.strictly_inside(c.domain)) throw ConfigError("obstacles: every obstacle must lie strictly inside the domain");
  }
  try {
    (void)c.model();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("model: ") + e.what());
  }
  if (c.discrete) {
    if (!cartesian) throw ConfigError("discrete: the network needs the cartesian direction system");
    for (const auto& ck : c.c) {
      if (!(ck == Expression(1.0))) throw ConfigError("discrete: the network needs c_k = 1");
    }
    for (double e : c.discrete->eps) {
      if (!(e > 0.0)) throw ConfigError("discrete.eps: spacings must be positive");
    }
    if (!(c.discrete->tol > 0.0)) throw ConfigError("discrete.tol: must be positive");
  }
}

/// Parses and validates a configuration document (JSON object).
inline RunConfig parse_config(const nlohmann::json& j) {
  using namespace detail;
  only_keys(j, "", {"scenario", "sources", "model", "p", "mesh", "obstacles", "solver", "output", "discrete"});
  RunConfig c;

  if (j.contains("scenario") == j.contains("sources")) throw ConfigError("give exactly one of 'scenario' or 'sources'");
  if (j.contains("scenario")) {
    c.scenario = get_string(j["scenario"], "scenario");
    const auto s = scenario(c.scenario);
    c.f_plus = s.f_plus;
    c.f_minus = s.f_minus;
  } else {
    const auto& s = j["sources"];
    only_keys(s, "sources", {"f_plus", "f_minus"});
    if (!s.contains("f_plus") || !s.contains("f_minus")) throw ConfigError("sources: needs f_plus and f_minus");
    c.f_plus = get_expression(s["f_plus"], "sources.f_plus");
    c.f_minus = get_expression(s["f_minus"], "sources.f_minus");
  }

  json model = j.value("model", json::object());
  if (model.is_string()) model = json{{"directions", model}};
  only_keys(model, "model", {"directions", "p", "delta", "a", "c"});
  if (model.contains("directions")) {
    const auto& d = model["directions"];
    if (d.is_array()) {
      c.directions = "custom";
      for (std::size_t i = 0; i < d.size(); ++i) {
        c.custom_directions.push_back(get_point(d[i], "model.directions[" + std::to_string(i) + "]"));
      }
    } else {
      c.directions = get_string(d, "model.directions");
      if (c.directions != "cartesian" && c.directions != "hexagonal") {
        throw ConfigError("model.directions: unknown direction system '" + c.directions + "'");
      }
    }
  }
  if (model.contains("p") && j.contains("p")) throw ConfigError("p given both at top level and in model");
  if (model.contains("p")) c.p = get_number(model["p"], "model.p");
  else if (j.contains("p")) c.p = get_number(j["p"], "p");
  else throw ConfigError("model.p: missing");
  std::size_t ndir = 0;
  try {
    ndir = c.direction_system().size();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("model.directions: ") + e.what());
  }
  auto null_or = [&](const char* k) { return model.contains(k) ? model[k] : json(); };
  c.delta = per_direction<double>(null_or("delta"), "model.delta", ndir, 1.0, get_number);
  c.a = per_direction<Expression>(null_or("a"), "model.a", ndir, Expression(1.0), get_expression);
  c.c = per_direction<Expression>(null_or("c"), "model.c", ndir, Expression(1.0), get_expression);

  if (j.contains("mesh")) {
    const auto& m = j["mesh"];
    only_keys(m, "mesh", {"n", "domain", "diagonals"});
    if (m.contains("n")) c.n = get_count(m["n"], "mesh.n");
    if (m.contains("domain")) c.domain = get_rect(m["domain"], "mesh.domain");
    if (m.contains("diagonals")) {
      const auto d = get_string(m["diagonals"], "mesh.diagonals");
      if (d == "alternating") c.diagonals = DiagonalPattern::alternating;
      else if (d == "parallel") c.diagonals = DiagonalPattern::parallel;
      else throw ConfigError("mesh.diagonals: expected alternating or parallel");
    }
  }
  if (j.contains("obstacles")) c.obstacles = get_obstacles(j["obstacles"], "obstacles");

  if (j.contains("solver")) {
    const auto& s = j["solver"];
    only_keys(s, "solver", {"r", "max_iterations", "div_tol", "bnd_tol", "dual_tol", "cg_tol", "prox"});
    if (s.contains("r")) c.r = get_number(s["r"], "solver.r");
    if (s.contains("max_iterations")) c.max_iterations = get_count(s["max_iterations"], "solver.max_iterations");
    if (s.contains("div_tol")) c.div_tol = get_number(s["div_tol"], "solver.div_tol");
    if (s.contains("bnd_tol")) c.bnd_tol = get_number(s["bnd_tol"], "solver.bnd_tol");
    if (s.contains("dual_tol")) c.dual_tol = get_number(s["dual_tol"], "solver.dual_tol");
    if (s.contains("cg_tol")) c.cg_tol = get_number(s["cg_tol"], "solver.cg_tol");
    if (s.contains("prox")) {
      const auto p = get_string(s["prox"], "solver.prox");
      if (p == "auto") c.prox = ProxSolver::automatic;
      else if (p == "cartesian") c.prox = ProxSolver::cartesian;
      else if (p == "newton") c.prox = ProxSolver::newton;
      else throw ConfigError("solver.prox: expected auto, cartesian or newton");
    }
  }

  if (j.contains("output")) {
    const auto& o = j["output"];
    only_keys(o, "output", {"fields", "report", "mesh", "network"});
    if (o.contains("fields")) c.output.fields = get_string(o["fields"], "output.fields");
    if (o.contains("report")) c.output.report = get_string(o["report"], "output.report");
    if (o.contains("mesh")) c.output.mesh = get_string(o["mesh"], "output.mesh");
    if (o.contains("network")) c.output.network = get_string(o["network"], "output.network");
  }

  if (j.contains("discrete")) {
    const auto& d = j["discrete"];
    only_keys(d, "discrete", {"eps", "tol", "max_iterations", "obstacles"});
    DiscreteConfig dc;
    if (d.contains("eps")) {
      if (!d["eps"].is_array()) throw ConfigError("discrete.eps: expected an array");
      for (std::size_t i = 0; i < d["eps"].size(); ++i) {
        dc.eps.push_back(get_number(d["eps"][i], "discrete.eps[" + std::to_string(i) + "]"));
      }
    }
    if (d.contains("tol")) dc.tol = get_number(d["tol"], "discrete.tol");
    if (d.contains("max_iterations")) dc.max_iterations = get_count(d["max_iterations"], "discrete.max_iterations");
    // The network always inherits the continuum obstacles; a differing list is an error.
    if (d.contains("obstacles") && !(get_obstacles(d["obstacles"], "discrete.obstacles") == c.obstacles)) {
      throw ConfigError("discrete.obstacles: must match the continuum obstacles");
    }
    c.discrete = dc;
  }

  validate_config(c);
  return c;
}

inline RunConfig parse_config(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("parse error: ") + e.what());
  }
  return parse_config(j);
}

inline RunConfig parse_config(const char* text) { return parse_config(std::string(text)); }

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

/// Canonical document: every field explicit, so parse_config(config_json(c)) == c.
inline nlohmann::json config_json(const RunConfig& c) {
  using namespace detail;
  json j;
  if (!c.scenario.empty()) {
    j["scenario"] = c.scenario;
  } else {
    j["sources"] = {{"f_plus", expression_json(c.f_plus)}, {"f_minus", expression_json(c.f_minus)}};
  }
  json model;
  if (c.directions == "custom") {
    json d = json::array();
    for (const auto& v : c.custom_directions) d.push_back({v.x, v.y});
    model["directions"] = d;
  } else {
    model["directions"] = c.directions;
  }
  model["p"] = c.p;
  model["delta"] = c.delta;
  model["a"] = json::array();
  model["c"] = json::array();
  for (const auto& e : c.a) model["a"].push_back(expression_json(e));
  for (const auto& e : c.c) model["c"].push_back(expression_json(e));
  j["model"] = model;
  j["mesh"] = {{"n", c.n},
               {"domain", {c.domain.xmin, c.domain.xmax, c.domain.ymin, c.domain.ymax}},
               {"diagonals", c.diagonals == DiagonalPattern::alternating ? "alternating" : "parallel"}};
  j["obstacles"] = json::array();
  for (const auto& o : c.obstacles) j["obstacles"].push_back(obstacle_json(o));
  json s = {{"r", c.r}, {"max_iterations", c.max_iterations}, {"cg_tol", c.cg_tol}};
  s["prox"] = c.prox == ProxSolver::automatic ? "auto" : c.prox == ProxSolver::cartesian ? "cartesian" : "newton";
  if (c.div_tol) s["div_tol"] = *c.div_tol;
  if (c.bnd_tol) s["bnd_tol"] = *c.bnd_tol;
  if (c.dual_tol) s["dual_tol"] = *c.dual_tol;
  j["solver"] = s;
  j["output"] = {{"fields", c.output.fields}, {"report", c.output.report}, {"mesh", c.output.mesh},
                 {"network", c.output.network}};
  if (c.discrete) {
    j["discrete"] = {{"eps", c.discrete->eps}, {"tol", c.discrete->tol}, {"max_iterations", c.discrete->max_iterations}};
  }
  return j;
}

inline void write_config(const std::string& path, const RunConfig& c) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write config file '" + path + "'");
  out << config_json(c).dump(2) << '\n';
}

}  // namespace wardrop
