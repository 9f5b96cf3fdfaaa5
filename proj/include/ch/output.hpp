#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

#include "ch/config.hpp"
#include "ch/error.hpp"
#include "ch/fespace.hpp"
#include "ch/functionals.hpp"
#include "ch/harness.hpp"
#include "ch/integrator.hpp"

namespace ch {

namespace fs = std::filesystem;

namespace detail {

/// Shortest text that round-trips through strtod.
inline std::string num(double v) { return fmt::format("{:.17g}", v); }

inline std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw Error(Errc::Io, "cannot create '" + path.parent_path().string() + "': " + ec.message());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "cannot write '" + path.string() + "'");
  return out;
}

inline void finish(std::ofstream& out, const fs::path& path) {
  out.flush();
  if (!out) throw Error(Errc::Io, "write failed for '" + path.string() + "'");
}

inline std::vector<std::vector<std::string>> read_csv(const fs::path& path, const std::string& header) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line) || line != header)
    throw Error(Errc::ParseError, "'" + path.string() + "': expected header '" + header + "'");
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(std::move(cells));
  }
  return rows;
}

inline double to_double(const std::string& s, const fs::path& where) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw Error(Errc::ParseError, "'" + where.string() + "': bad number '" + s + "'");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Coefficient files

inline void write_coefficients(const fs::path& path, const Vector& c) {
  auto out = detail::open_out(path);
  out << "dof_index,value\n";
  for (Eigen::Index i = 0; i < c.size(); ++i) out << i << ',' << detail::num(c[i]) << '\n';
  detail::finish(out, path);
}

inline Vector read_coefficients(const fs::path& path) {
  const auto rows = detail::read_csv(path, "dof_index,value");
  Vector c(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != 2 || rows[i][0] != std::to_string(i))
      throw Error(Errc::ParseError, "'" + path.string() + "': rows must list dof indices in order");
    c[static_cast<Eigen::Index>(i)] = detail::to_double(rows[i][1], path);
  }
  return c;
}

// ---------------------------------------------------------------------------
// Config to run

inline InitialCondition make_initial_condition(const InitialConditionConfig& ic, const fs::path& base_dir = {}) {
  if (ic.preset == "file") {
    InitialCondition out;
    fs::path p = ic.file;
    if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
    out.coefficients = read_coefficients(p);
    return out;
  }
  return product_sine_initial_condition(ic.amplitude, ic.kx, ic.ky, ic.offset);
}

inline RunSpec make_run_spec(const RunConfig& cfg, const fs::path& base_dir = {}) {
  RunSpec spec;
  spec.level = cfg.level;
  spec.grid = cfg.grid();
  spec.model = cfg.model;
  spec.initial = make_initial_condition(cfg.initial, base_dir);
  spec.newton = cfg.solver;
  return spec;
}

// ---------------------------------------------------------------------------
// Trajectory directory
//
//   header.yaml          config echo and grid metadata
//   manifest.csv         kind,index,t0,t1,file
//   fields/phi_NNNNN.csv phi at node NNNNN (dof_index,value)
//   fields/mu_NNNNN.csv  mu on interval NNNNN, i.e. (t^N, t^{N+1})
//   diagnostics.csv      t,mass,energy,cum_dissipation,newton_iters,linear_residual

inline void write_diagnostics(const fs::path& path, const std::vector<DiagnosticsRecord>& recs) {
  auto out = detail::open_out(path);
  out << "t,mass,energy,cum_dissipation,newton_iters,linear_residual\n";
  for (const auto& r : recs)
    out << detail::num(r.t) << ',' << detail::num(r.mass) << ',' << detail::num(r.energy) << ','
        << detail::num(r.cumulative_dissipation) << ',' << r.newton_iters << ',' << detail::num(r.linear_residual)
        << '\n';
  detail::finish(out, path);
}

inline void write_energy_trace(const fs::path& path, const std::vector<DiagnosticsRecord>& recs) {
  auto out = detail::open_out(path);
  out << "t,energy,mass,cum_dissipation\n";
  for (const auto& r : recs)
    out << detail::num(r.t) << ',' << detail::num(r.energy) << ',' << detail::num(r.mass) << ','
        << detail::num(r.cumulative_dissipation) << '\n';
  detail::finish(out, path);
}

inline void write_trajectory(const fs::path& dir, const Trajectory& traj, const RunConfig& cfg) {
  YAML::Node header = to_yaml(cfg);
  header["grid"]["level"] = traj.space->mesh().level;
  header["grid"]["dof_count"] = traj.space->dof_count();
  header["grid"]["tau"] = traj.grid.tau;
  header["grid"]["n_steps"] = traj.grid.n_steps;
  header["grid"]["T"] = traj.grid.final_time();
  header["grid"]["saved_nodes"] = static_cast<int>(traj.phi.size());
  header["grid"]["saved_intervals"] = static_cast<int>(traj.mu.size());
  header["failure"] = traj.failure;
  {
    YAML::Emitter em;
    em.SetDoublePrecision(17);
    em << header;
    const fs::path p = dir / "header.yaml";
    auto out = detail::open_out(p);
    out << em.c_str() << '\n';
    detail::finish(out, p);
  }

  const fs::path mp = dir / "manifest.csv";
  auto manifest = detail::open_out(mp);
  manifest << "kind,index,t0,t1,file\n";
  for (std::size_t n = 0; n < traj.phi.size(); ++n) {
    const std::string name = fmt::format("fields/phi_{:05d}.csv", n);
    const double t = traj.grid.node(static_cast<int>(n));
    write_coefficients(dir / name, traj.phi[n]);
    manifest << "phi," << n << ',' << detail::num(t) << ',' << detail::num(t) << ',' << name << '\n';
  }
  for (std::size_t n = 0; n < traj.mu.size(); ++n) {
    const std::string name = fmt::format("fields/mu_{:05d}.csv", n);
    write_coefficients(dir / name, traj.mu[n]);
    manifest << "mu," << n << ',' << detail::num(traj.grid.node(static_cast<int>(n))) << ','
             << detail::num(traj.grid.node(static_cast<int>(n) + 1)) << ',' << name << '\n';
  }
  detail::finish(manifest, mp);
  write_diagnostics(dir / "diagnostics.csv", traj.diagnostics);
}

struct StoredTrajectory {
  RunConfig config;
  Trajectory trajectory;
};

/// Loads a directory written by write_trajectory. Diagnostics are not read
/// back; recompute them with recompute_diagnostics.
inline StoredTrajectory read_trajectory(const fs::path& dir) {
  const fs::path hp = dir / "header.yaml";
  if (!fs::exists(hp)) throw Error(Errc::Io, "no header.yaml in '" + dir.string() + "'");
  YAML::Node header;
  try {
    header = YAML::LoadFile(hp.string());
  } catch (const YAML::ParserException& e) {
    throw Error(Errc::ParseError, "header.yaml line " + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
  StoredTrajectory st;
  st.config = parse_config_node(header);
  const YAML::Node g = header["grid"];
  if (!g) throw Error(Errc::ParseError, "header.yaml has no grid block");
  Trajectory& t = st.trajectory;
  t.space = build_space(detail::read_as<int>(g["level"], "grid.level"));
  t.grid.tau = detail::read_as<double>(g["tau"], "grid.tau");
  t.grid.n_steps = detail::read_as<int>(g["n_steps"], "grid.n_steps");
  if (const YAML::Node f = header["failure"]) t.failure = f.as<std::string>();

  const auto rows = detail::read_csv(dir / "manifest.csv", "kind,index,t0,t1,file");
  for (const auto& r : rows) {
    if (r.size() != 5) throw Error(Errc::ParseError, "manifest.csv: expected 5 columns");
    Vector c = read_coefficients(dir / r[4]);
    if (c.size() != t.space->dof_count()) throw Error(Errc::ParseError, "'" + r[4] + "': wrong dof count");
    const std::size_t idx = std::stoul(r[1]);
    auto& list = r[0] == "phi" ? t.phi : r[0] == "mu" ? t.mu : throw Error(Errc::ParseError, "manifest kind '" + r[0] + "'");
    if (idx != list.size()) throw Error(Errc::ParseError, "manifest.csv: indices out of order");
    list.push_back(std::move(c));
  }
  if (t.phi.empty() || t.phi.size() != t.mu.size() + 1)
    throw Error(Errc::ParseError, "manifest.csv: need one more phi node than mu intervals");
  return st;
}

/// Mass and energy at every stored node and the running dissipation integral.
inline std::vector<DiagnosticsRecord> recompute_diagnostics(const Trajectory& traj, const ModelParams& model) {
  std::vector<DiagnosticsRecord> out;
  double cumulative = 0.0;
  for (std::size_t n = 0; n < traj.phi.size(); ++n) {
    const FeField phi = traj.phi_at(static_cast<int>(n));
    if (n > 0)
      cumulative += interval_dissipation(traj.phi_at(static_cast<int>(n) - 1), phi,
                                         traj.mu_on(static_cast<int>(n) - 1), traj.grid.tau, model);
    DiagnosticsRecord r;
    r.t = traj.grid.node(static_cast<int>(n));
    r.mass = mass(phi);
    r.energy = energy(phi, model);
    r.cumulative_dissipation = cumulative;
    out.push_back(r);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Snapshots and plots

/// phi sampled on the m x m grid x_i = i/m, y_j = j/m (x fastest).
inline void emit_snapshot(const fs::path& path, const Trajectory& traj, double t, int m) {
  const double r = t / traj.grid.tau;
  const int n = static_cast<int>(std::lround(r));
  if (m < 1 || n < 0 || n >= static_cast<int>(traj.phi.size()) || std::abs(r - n) > 1e-9 * std::max(1.0, r))
    throw Error(Errc::ValidationError, "snapshot time is not a stored node", "snapshot_times");
  std::vector<Point> pts;
  pts.reserve(static_cast<std::size_t>(m) * m);
  for (int j = 0; j < m; ++j)
    for (int i = 0; i < m; ++i) pts.push_back(Point{static_cast<double>(i) / m, static_cast<double>(j) / m});
  const auto v = eval(traj.phi_at(n), pts);
  auto out = detail::open_out(path);
  out << "x,y,phi\n";
  for (std::size_t k = 0; k < pts.size(); ++k)
    out << detail::num(pts[k].x) << ',' << detail::num(pts[k].y) << ',' << detail::num(v[k]) << '\n';
  detail::finish(out, path);
}

inline std::string snapshot_name(const Trajectory& traj, double t) {
  return fmt::format("snapshots/phi_{:05d}.csv", std::lround(t / traj.grid.tau));
}

inline void write_plot_script(const fs::path& path) {
  auto out = detail::open_out(path);
  out << R"(import glob, os, sys
import numpy as np
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

d = os.path.dirname(os.path.abspath(__file__))
files = sorted(glob.glob(os.path.join(d, "snapshots", "phi_*.csv")))
fig, axes = plt.subplots(1, len(files) + 1, figsize=(4 * (len(files) + 1), 4))
axes = np.atleast_1d(axes)
for ax, f in zip(axes, files):
    x, y, p = np.loadtxt(f, delimiter=",", skiprows=1, unpack=True)
    m = int(round(np.sqrt(len(p))))
    ax.imshow(p.reshape(m, m), origin="lower", extent=(0, 1, 0, 1), vmin=-1, vmax=1, cmap="coolwarm")
    ax.set_title(os.path.basename(f))
t, e, mass, diss = np.loadtxt(os.path.join(d, "energy_trace.csv"), delimiter=",", skiprows=1, unpack=True)
axes[-1].plot(t, e)
axes[-1].set_xlabel("t")
axes[-1].set_ylabel("energy")
fig.tight_layout()
fig.savefig(os.path.join(d, "figure.png"), dpi=120)
)";
  detail::finish(out, path);
}

/// Writes everything `run` produces for one config.
inline void write_run_outputs(const fs::path& dir, const Trajectory& traj, const RunConfig& cfg) {
  if (cfg.output.save_trajectory) write_trajectory(dir, traj, cfg);
  else write_diagnostics(dir / "diagnostics.csv", traj.diagnostics);
  write_energy_trace(dir / "energy_trace.csv", traj.diagnostics);
  for (double t : cfg.output.snapshot_times) {
    if (std::lround(t / traj.grid.tau) >= static_cast<long>(traj.phi.size())) continue;  // past a failure
    emit_snapshot(dir / snapshot_name(traj, t), traj, t, cfg.output.sample_grid);
  }
  if (cfg.output.plot_script) write_plot_script(dir / "plot.py");
}

// ---------------------------------------------------------------------------
// Reports

inline std::string format_convergence_csv(const ConvergenceReport& rep) {
  std::string s = "k,h,tau,e,eoc\n";
  for (const auto& r : rep.rows)
    s += fmt::format("{},{},{},{},{}\n", r.k, detail::num(r.h), detail::num(r.tau), detail::num(r.e),
                     std::isnan(r.eoc) ? std::string() : detail::num(r.eoc));
  return s;
}

inline std::string format_stability_csv(const StabilityReport& rep) {
  std::string s = "eps,t,relative_energy\n";
  for (const auto& r : rep.rows)
    for (std::size_t n = 0; n < rep.times.size(); ++n)
      s += fmt::format("{},{},{}\n", detail::num(r.eps), detail::num(rep.times[n]), detail::num(r.relative_energy[n]));
  return s;
}

inline std::string format_projection_csv(const std::vector<ProjectionRow>& rows) {
  auto opt = [](double v) { return std::isnan(v) ? std::string() : detail::num(v); };
  std::string s = "level,h,l2_error,eoc_l2,h1_error,eoc_h1,mu_error,eoc_mu\n";
  for (const auto& r : rows)
    s += fmt::format("{},{},{},{},{},{},{},{}\n", r.level, detail::num(r.h), detail::num(r.l2_error), opt(r.eoc_l2),
                     detail::num(r.h1_error), opt(r.eoc_h1), detail::num(r.mu_error), opt(r.eoc_mu));
  return s;
}

inline void write_text(const fs::path& path, const std::string& text) {
  auto out = detail::open_out(path);
  out << text;
  detail::finish(out, path);
}

}  // namespace ch
