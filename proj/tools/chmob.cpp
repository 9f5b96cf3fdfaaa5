// Command line driver: run, converge, project-study, diagnose, stability-probe.

#include <cmath>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "ch/ch.hpp"
#include "ch/config.hpp"
#include "ch/output.hpp"

namespace fs = std::filesystem;

namespace {

std::string opt(double v, const char* f = "{:.4f}") { return std::isnan(v) ? "-" : fmt::format(fmt::runtime(f), v); }

void emit(const std::string& text, const std::string& out) {
  if (out.empty()) std::cout << text;
  else ch::write_text(out, text);
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> v;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t pos = 0;
    const double x = std::stod(item, &pos);
    if (pos != item.size()) throw ch::Error(ch::Errc::ParseError, "bad number '" + item + "' in --eps");
    v.push_back(x);
  }
  return v;
}

int cmd_run(const std::string& cfg_path, const std::string& out_dir) {
  const ch::RunConfig cfg = ch::parse_config(cfg_path);
  const fs::path dir = out_dir.empty() ? fs::path(cfg.output.directory) : fs::path(out_dir);
  if (dir.empty()) throw ch::Error(ch::Errc::ValidationError, "no output directory (-o or output.directory)", "directory");
  const ch::RunSpec spec = ch::make_run_spec(cfg, fs::path(cfg_path).parent_path());
  fmt::print(stderr, "level {} ({} dofs), tau {:g}, {} steps\n", spec.level, 4 << (2 * (3 + spec.level)),
             spec.grid.tau, spec.grid.n_steps);
  const ch::Trajectory traj = ch::run(spec);
  ch::write_run_outputs(dir, traj, cfg);
  const auto& d = traj.diagnostics;
  fmt::print("steps {} / {}\nmass drift {:.3e}\nenergy {:.10g} -> {:.10g}\nidentity defect {:.3e}\n",
             traj.mu.size(), spec.grid.n_steps, d.back().mass - d.front().mass, d.front().energy, d.back().energy,
             d.back().energy + d.back().cumulative_dissipation - d.front().energy);
  if (!traj.complete()) {
    fmt::print(stderr, "error: {}\n", traj.failure);
    return 1;
  }
  return 0;
}

struct ConvergeArgs {
  std::string mode = "full";
  int k_min = 0, k_max = 2;
  double T = 0.16;
  double tau_factor = 0.16;
  int tau_star_exp = 9;
  int level = 1;
  std::string config, out;
};

int cmd_converge(const ConvergeArgs& a) {
  ch::StudySettings s;
  if (!a.config.empty()) {
    const ch::RunConfig cfg = ch::parse_config(a.config);
    s.model = cfg.model;
    s.initial = ch::make_initial_condition(cfg.initial, fs::path(a.config).parent_path());
    s.newton = cfg.solver;
  }
  s.T = a.T;
  s.tau_factor = a.tau_factor;
  s.tau_star_exp = a.tau_star_exp;
  s.time_level = a.level;
  s.log = [](const std::string& m) { fmt::print(stderr, "{}\n", m); };
  const ch::StudyMode mode = a.mode == "semi" ? ch::StudyMode::Semi
                             : a.mode == "time" ? ch::StudyMode::Time
                                                : ch::StudyMode::Full;
  const ch::ConvergenceReport rep = ch::convergence_study(s, a.k_min, a.k_max, mode);

  fmt::print("mode {}  T = {:g}\n", ch::to_string(mode), rep.T);
  fmt::print("{:>3} {:>10} {:>10} {:>12} {:>6}   {:>12} {:>6}\n", "k", "h", "tau", "e", "eoc", "published", "eoc");
  for (const auto& r : rep.rows) {
    std::string pub = "", peoc = "";
    if (r.k < 5 && mode != ch::StudyMode::Time) {
      const auto& p = ch::published_table()[r.k];
      const bool semi = mode == ch::StudyMode::Semi;
      pub = fmt::format("{:.4e}", semi ? p.e_h : p.e_htau);
      peoc = opt(semi ? p.eoc_h : p.eoc_htau, "{:.2f}");
    }
    fmt::print("{:>3} {:>10.4e} {:>10.4e} {:>12.4e} {:>6}   {:>12} {:>6}\n", r.k, r.h, r.tau, r.e, opt(r.eoc, "{:.2f}"),
               pub, peoc);
  }
  if (!a.out.empty()) ch::write_text(a.out, ch::format_convergence_csv(rep));
  return 0;
}

int cmd_project(const std::string& cfg_path, int lmin, int lmax, const std::string& out) {
  const ch::RunConfig cfg = ch::parse_config(cfg_path);
  const auto rows = ch::projection_study(ch::validate(cfg.model), lmin, lmax);
  emit(ch::format_projection_csv(rows), out);
  return 0;
}

int cmd_diagnose(const std::string& dir, const std::string& out) {
  const ch::StoredTrajectory st = ch::read_trajectory(dir);
  const auto recs = ch::recompute_diagnostics(st.trajectory, ch::validate(st.config.model));
  std::string text = "t,mass,energy,cum_dissipation\n";
  for (const auto& r : recs)
    text += fmt::format("{:.17g},{:.17g},{:.17g},{:.17g}\n", r.t, r.mass, r.energy, r.cumulative_dissipation);
  emit(text, out);
  if (!st.trajectory.failure.empty()) {
    fmt::print(stderr, "trajectory is partial: {}\n", st.trajectory.failure);
    return 1;
  }
  return 0;
}

int cmd_stability(const std::string& cfg_path, const std::string& eps, const std::string& out) {
  const ch::RunConfig cfg = ch::parse_config(cfg_path);
  const ch::RunSpec spec = ch::make_run_spec(cfg, fs::path(cfg_path).parent_path());
  const ch::StabilityReport rep = ch::stability_probe(spec, parse_list(eps));
  fmt::print("{:>10} {:>14} {:>14} {:>14} {:>6}\n", "eps", "E_alpha(0)", "E_alpha(T)", "amplification", "eoc");
  for (const auto& r : rep.rows)
    fmt::print("{:>10.3e} {:>14.6e} {:>14.6e} {:>14.6g} {:>6}\n", r.eps, r.relative_energy.front(),
               r.relative_energy.back(), r.amplification, opt(r.eoc, "{:.3f}"));
  if (!out.empty()) ch::write_text(out, ch::format_stability_csv(rep));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cahn-Hilliard solver with concentration dependent mobility"};
  app.require_subcommand(1);

  std::string cfg, out, in, eps = "1e-2,1e-3,1e-4";
  auto* run = app.add_subcommand("run", "integrate one configuration and write its trajectory");
  run->add_option("-c,--config", cfg, "YAML config")->required()->check(CLI::ExistingFile);
  run->add_option("-o,--out", out, "output directory");

  ConvergeArgs ca;
  auto* conv = app.add_subcommand("converge", "convergence study over mesh levels");
  conv->add_option("--mode", ca.mode, "full, semi or time")->check(CLI::IsMember({"full", "semi", "time"}));
  conv->add_option("--k-min", ca.k_min)->capture_default_str();
  conv->add_option("--k-max", ca.k_max)->capture_default_str();
  conv->add_option("--T", ca.T, "final time")->capture_default_str();
  conv->add_option("--tau-factor", ca.tau_factor)->capture_default_str();
  conv->add_option("--tau-star-exp", ca.tau_star_exp, "semi mode: tau = tau_factor * 2^-exp")->capture_default_str();
  conv->add_option("--level", ca.level, "time mode: fixed mesh level")->capture_default_str();
  conv->add_option("-c,--config", ca.config, "model and initial condition")->check(CLI::ExistingFile);
  conv->add_option("--out", ca.out, "report CSV (k,h,tau,e,eoc)");

  int lmin = 0, lmax = 3;
  auto* proj = app.add_subcommand("project-study", "orders of the spatial projections");
  proj->add_option("-c,--config", cfg, "YAML config (model block)")->required()->check(CLI::ExistingFile);
  proj->add_option("--level-min", lmin)->capture_default_str();
  proj->add_option("--level-max", lmax)->capture_default_str();
  proj->add_option("--out", out, "CSV file instead of stdout");

  auto* diag = app.add_subcommand("diagnose", "recompute mass, energy and dissipation of a stored trajectory");
  diag->add_option("-i,--input", in, "trajectory directory")->required()->check(CLI::ExistingDirectory);
  diag->add_option("--out", out, "CSV file instead of stdout");

  auto* stab = app.add_subcommand("stability-probe", "relative energy under initial perturbations");
  stab->add_option("-c,--config", cfg, "YAML config")->required()->check(CLI::ExistingFile);
  stab->add_option("--eps", eps, "comma separated amplitudes")->capture_default_str();
  stab->add_option("--out", out, "series CSV (eps,t,relative_energy)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(cfg, out);
    if (*conv) return cmd_converge(ca);
    if (*proj) return cmd_project(cfg, lmin, lmax, out);
    if (*diag) return cmd_diagnose(in, out);
    if (*stab) return cmd_stability(cfg, eps, out);
  } catch (const ch::Error& e) {
    fmt::print(stderr, "error: {}{}\n", e.what(), e.key().empty() ? "" : " [" + e.key() + "]");
    return 1;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  }
  return 0;
}
