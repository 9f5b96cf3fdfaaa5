#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "ch/error.hpp"
#include "ch/harness.hpp"
#include "ch/integrator.hpp"
#include "ch/model.hpp"

namespace ch {

/// Initial condition as described in a config file.
struct InitialConditionConfig {
  std::string preset = "paper";  // paper | product_sine | constant | file
  double amplitude = 0.2;
  int kx = 2;
  int ky = 1;
  double offset = 0.2;
  std::string file;  // CSV dof_index,value on the run's space
};

struct OutputConfig {
  std::string directory;  // empty: decided by the caller
  std::vector<double> snapshot_times;
  int sample_grid = 64;
  bool save_trajectory = true;
  bool plot_script = false;
};

struct RunConfig {
  RawModel model;
  int level = 0;
  std::optional<double> tau;  // explicit step, otherwise tau_factor * h
  double tau_factor = 0.16;
  double T = 0.16;
  InitialConditionConfig initial;
  NewtonSettings solver;
  OutputConfig output;

  double step_size() const { return tau ? *tau : tau_factor * mesh_width(level); }
  TimeGrid grid() const { return TimeGrid::uniform(T, step_count(T, step_size(), tau ? "tau" : "T")); }
};

namespace detail {

inline int line_of(const YAML::Node& n) { return n.Mark().line >= 0 ? n.Mark().line + 1 : 0; }

template <class T>
T read_as(const YAML::Node& n, const std::string& key) {
  try {
    return n.as<T>();
  } catch (const YAML::Exception&) {
    throw Error(Errc::ValidationError, "bad value for '" + key + "' at line " + std::to_string(line_of(n)), key);
  }
}

template <class T>
void read_opt(const YAML::Node& parent, const char* name, T& out) {
  if (const YAML::Node n = parent[name]) out = read_as<T>(n, name);
}

inline YAML::Node block(const YAML::Node& root, const char* name) {
  const YAML::Node n = root[name];
  if (n && !n.IsMap()) throw Error(Errc::ValidationError, std::string("'") + name + "' must be a mapping", name);
  return n;
}

inline void parse_model(const YAML::Node& m, RawModel& raw) {
  if (!m) throw Error(Errc::ValidationError, "missing model block", "model");
  if (const YAML::Node p = m["preset"]) {
    const auto name = read_as<std::string>(p, "preset");
    if (name != "paper") throw Error(Errc::ValidationError, "unknown model preset '" + name + "'", "preset");
    raw = reference_model();
  }
  if (const YAML::Node g = m["gamma"]) raw.gamma = read_as<double>(g, "gamma");
  else if (!m["preset"]) throw Error(Errc::ValidationError, "missing required key 'model.gamma'", "gamma");

  if (const YAML::Node p = m["potential"]) {
    if (const YAML::Node c = p["coefficients"]) {
      const auto v = read_as<std::vector<double>>(c, "potential");
      if (v.empty() || v.size() > 5)
        throw Error(Errc::ValidationError, "potential needs 1 to 5 coefficients", "potential");
      raw.f_coeffs = {};
      for (std::size_t i = 0; i < v.size(); ++i) raw.f_coeffs[i] = v[i];
    } else if (const YAML::Node dw = p["double_well"]) {
      raw.f_coeffs = factored_quartic(read_as<double>(dw["scale"], "potential.double_well.scale"),
                                      read_as<double>(dw["root"], "potential.double_well.root"));
    } else {
      throw Error(Errc::ValidationError, "potential needs 'coefficients' or 'double_well'", "potential");
    }
  } else if (!m["preset"]) {
    throw Error(Errc::ValidationError, "missing required key 'model.potential'", "potential");
  }

  if (const YAML::Node b = m["mobility"]) {
    if (const YAML::Node c = b["coefficients"]) raw.mobility_coeffs = read_as<std::vector<double>>(c, "mobility");
    read_opt(b, "floor", raw.mobility_floor);
  } else if (!m["preset"]) {
    throw Error(Errc::ValidationError, "missing required key 'model.mobility'", "mobility");
  }
  read_opt(m, "admissible_range", raw.admissible_range);
}

}  // namespace detail

/// Builds a config from an already loaded YAML document. Model constraints
/// are checked through validate().
inline RunConfig parse_config_node(const YAML::Node& root) {
  if (!root.IsMap()) throw Error(Errc::ParseError, "config root must be a mapping");
  RunConfig cfg;
  detail::parse_model(detail::block(root, "model"), cfg.model);

  if (const YAML::Node d = detail::block(root, "discretization")) {
    detail::read_opt(d, "level", cfg.level);
    if (const YAML::Node t = d["tau"]) cfg.tau = detail::read_as<double>(t, "tau");
    detail::read_opt(d, "tau_factor", cfg.tau_factor);
    detail::read_opt(d, "T", cfg.T);
  }
  if (cfg.level < 0 || cfg.level > kMaxMeshLevel)
    throw Error(Errc::ValidationError, "level out of range", "level");
  if (!(cfg.tau_factor > 0.0)) throw Error(Errc::ValidationError, "tau_factor must be positive", "tau_factor");
  (void)cfg.grid();

  if (const YAML::Node ic = detail::block(root, "initial_condition")) {
    auto& c = cfg.initial;
    detail::read_opt(ic, "preset", c.preset);
    detail::read_opt(ic, "amplitude", c.amplitude);
    detail::read_opt(ic, "kx", c.kx);
    detail::read_opt(ic, "ky", c.ky);
    detail::read_opt(ic, "offset", c.offset);
    detail::read_opt(ic, "file", c.file);
    if (c.preset == "paper") {
      c.amplitude = 0.2, c.kx = 2, c.ky = 1, c.offset = 0.2;
    } else if (c.preset == "constant") {
      c.amplitude = 0.0;
    } else if (c.preset == "file") {
      if (c.file.empty()) throw Error(Errc::ValidationError, "preset 'file' needs 'file'", "file");
    } else if (c.preset != "product_sine") {
      throw Error(Errc::ValidationError, "unknown initial condition preset '" + c.preset + "'", "preset");
    }
  }

  if (const YAML::Node s = detail::block(root, "solver")) {
    detail::read_opt(s, "newton_tol", cfg.solver.tol);
    detail::read_opt(s, "max_iter", cfg.solver.max_iter);
    detail::read_opt(s, "refactor_after", cfg.solver.refactor_after);
    detail::read_opt(s, "linear_tol", cfg.solver.linear_tol);
  }
  if (!(cfg.solver.tol > 0.0)) throw Error(Errc::ValidationError, "newton_tol must be positive", "newton_tol");
  if (cfg.solver.max_iter < 1) throw Error(Errc::ValidationError, "max_iter must be at least 1", "max_iter");

  if (const YAML::Node o = detail::block(root, "output")) {
    auto& out = cfg.output;
    detail::read_opt(o, "directory", out.directory);
    detail::read_opt(o, "snapshot_times", out.snapshot_times);
    detail::read_opt(o, "sample_grid", out.sample_grid);
    detail::read_opt(o, "save_trajectory", out.save_trajectory);
    detail::read_opt(o, "plot_script", out.plot_script);
    if (out.sample_grid < 1) throw Error(Errc::ValidationError, "sample_grid must be positive", "sample_grid");
    const TimeGrid g = cfg.grid();
    for (double t : out.snapshot_times) {
      const double r = t / g.tau;
      if (t < 0.0 || r > g.n_steps + 1e-9 || std::abs(r - std::round(r)) > 1e-9 * std::max(1.0, r))
        throw Error(Errc::ValidationError, "snapshot time is not a node of the time grid", "snapshot_times");
    }
  }

  (void)validate(cfg.model);
  return cfg;
}

inline RunConfig parse_config_string(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw Error(Errc::ParseError, "line " + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
  return parse_config_node(root);
}

inline RunConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open config '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_string(ss.str());
}

/// Echo of a config in the same schema parse_config_node accepts.
inline YAML::Node to_yaml(const RunConfig& cfg) {
  YAML::Node root;
  YAML::Node m;
  m["gamma"] = cfg.model.gamma;
  m["potential"]["coefficients"] = std::vector<double>(cfg.model.f_coeffs.begin(), cfg.model.f_coeffs.end());
  m["mobility"]["coefficients"] = cfg.model.mobility_coeffs;
  m["mobility"]["floor"] = cfg.model.mobility_floor;
  m["admissible_range"] = cfg.model.admissible_range;
  root["model"] = m;
  YAML::Node d;
  d["level"] = cfg.level;
  if (cfg.tau) d["tau"] = *cfg.tau;
  d["tau_factor"] = cfg.tau_factor;
  d["T"] = cfg.T;
  root["discretization"] = d;
  YAML::Node ic;
  ic["preset"] = cfg.initial.preset;
  ic["amplitude"] = cfg.initial.amplitude;
  ic["kx"] = cfg.initial.kx;
  ic["ky"] = cfg.initial.ky;
  ic["offset"] = cfg.initial.offset;
  if (!cfg.initial.file.empty()) ic["file"] = cfg.initial.file;
  root["initial_condition"] = ic;
  YAML::Node s;
  s["newton_tol"] = cfg.solver.tol;
  s["max_iter"] = cfg.solver.max_iter;
  s["refactor_after"] = cfg.solver.refactor_after;
  s["linear_tol"] = cfg.solver.linear_tol;
  root["solver"] = s;
  return root;
}

}  // namespace ch
