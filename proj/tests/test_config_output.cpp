#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "ch/ch.hpp"
#include "ch/config.hpp"
#include "ch/output.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;

namespace {

const char* kReference = R"(model:
  preset: paper
discretization:
  level: 0
  T: 0.04
initial_condition:
  preset: paper
output:
  snapshot_times: [0, 0.04]
  sample_grid: 16
)";

fs::path scratch(const std::string& name) {
  const fs::path p = fs::path(::testing::TempDir()) / ("chmob_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

template <class Fn>
ch::Error error_of(Fn fn) {
  try {
    fn();
  } catch (const ch::Error& e) {
    return e;
  }
  ADD_FAILURE() << "no exception";
  return ch::Error(ch::Errc::Io, "none");
}

}  // namespace

TEST(Config, ReferencePreset) {
  const auto cfg = ch::parse_config_string(kReference);
  const auto m = ch::validate(cfg.model);
  EXPECT_DOUBLE_EQ(m.gamma(), 0.003);
  EXPECT_NEAR(m.alpha(), 0.003 + 1.17612, 1e-10);
  EXPECT_EQ(cfg.level, 0);
  EXPECT_DOUBLE_EQ(cfg.step_size(), 0.02);
  EXPECT_EQ(cfg.grid().n_steps, 2);
  EXPECT_EQ(cfg.initial.preset, "paper");
}

TEST(Config, ExplicitModel) {
  const auto cfg = ch::parse_config_string(R"(model:
  gamma: 0.01
  potential: {double_well: {scale: 0.3, root: 0.99}}
  mobility: {coefficients: [1, 0, -2, 0, 1], floor: 0.001}
)");
  const auto ref = ch::validate(ch::reference_model());
  const auto m = ch::validate(cfg.model);
  EXPECT_DOUBLE_EQ(m.gamma(), 0.01);
  for (double x : {-1.2, 0.0, 0.4}) {
    EXPECT_NEAR(m.f(x), ref.f(x), 1e-14);
    EXPECT_NEAR(m.b(x), ref.b(x), 1e-14);
  }
}

TEST(Config, MissingGammaNamesKey) {
  const auto e = error_of([] {
    (void)ch::parse_config_string("model:\n  potential: {coefficients: [1, 0, 1]}\n  mobility: {coefficients: [1]}\n");
  });
  EXPECT_EQ(e.code(), ch::Errc::ValidationError);
  EXPECT_EQ(e.key(), "gamma");
}

TEST(Config, InvalidModelRejected) {
  const auto e = error_of([] { (void)ch::parse_config_string("model:\n  preset: paper\n  gamma: -1\n"); });
  EXPECT_EQ(e.code(), ch::Errc::NonPositiveGamma);
}

TEST(Config, StepMustDivideFinalTime) {
  const auto e = error_of([] {
    (void)ch::parse_config_string("model: {preset: paper}\ndiscretization: {T: 0.1, tau: 0.03}\n");
  });
  EXPECT_EQ(e.code(), ch::Errc::ValidationError);
  EXPECT_EQ(e.key(), "tau");
}

TEST(Config, MalformedYamlReportsLine) {
  const auto e = error_of([] { (void)ch::parse_config_string("model:\n  preset: paper\n  gamma: [0.1\n"); });
  EXPECT_EQ(e.code(), ch::Errc::ParseError);
  EXPECT_NE(std::string(e.what()).find("line"), std::string::npos);
}

TEST(Config, BadValueType) {
  const auto e = error_of([] { (void)ch::parse_config_string("model: {preset: paper}\ndiscretization: {level: two}\n"); });
  EXPECT_EQ(e.code(), ch::Errc::ValidationError);
  EXPECT_EQ(e.key(), "level");
}

TEST(Config, SnapshotOffGrid) {
  const auto e = error_of([] {
    (void)ch::parse_config_string("model: {preset: paper}\ndiscretization: {T: 0.04}\noutput: {snapshot_times: [0.01]}\n");
  });
  EXPECT_EQ(e.key(), "snapshot_times");
}

TEST(Config, MissingFile) {
  EXPECT_EQ(error_of([] { (void)ch::parse_config("/nonexistent/cfg.yaml"); }).code(), ch::Errc::Io);
}

TEST(Config, YamlEchoRoundTrip) {
  auto cfg = ch::parse_config_string(kReference);
  cfg.tau = 0.01;
  YAML::Emitter em;
  em.SetDoublePrecision(17);
  em << ch::to_yaml(cfg);
  const auto back = ch::parse_config_string(em.c_str());
  EXPECT_EQ(back.model.gamma, cfg.model.gamma);
  EXPECT_EQ(back.model.f_coeffs, cfg.model.f_coeffs);
  EXPECT_EQ(back.model.mobility_coeffs, cfg.model.mobility_coeffs);
  EXPECT_EQ(back.model.mobility_floor, cfg.model.mobility_floor);
  EXPECT_EQ(back.tau, cfg.tau);
  EXPECT_EQ(back.T, cfg.T);
  EXPECT_EQ(back.grid(), cfg.grid());
}

TEST(Output, RunOutputsAndSnapshot) {
  const auto cfg = ch::parse_config_string(kReference);
  const auto traj = ch::run(ch::make_run_spec(cfg));
  ASSERT_TRUE(traj.complete());
  const fs::path dir = scratch("run");
  ch::write_run_outputs(dir, traj, cfg);
  for (const char* f : {"header.yaml", "manifest.csv", "diagnostics.csv", "energy_trace.csv", "fields/phi_00002.csv",
                        "fields/mu_00001.csv", "snapshots/phi_00000.csv", "snapshots/phi_00002.csv"})
    EXPECT_TRUE(fs::exists(dir / f)) << f;

  const auto rows = ch::detail::read_csv(dir / "snapshots/phi_00000.csv", "x,y,phi");
  ASSERT_EQ(rows.size(), 16u * 16u);
  const auto ic = ch::reference_initial_condition();
  double worst = 0.0;
  for (const auto& r : rows) {
    const double x = std::stod(r[0]), y = std::stod(r[1]);
    worst = std::max(worst, std::abs(std::stod(r[2]) - ic.value(x, y)));
  }
  EXPECT_LE(worst, 5e-3);  // P2 interpolation error at h = 1/8
  EXPECT_EQ(std::stod(rows[1][0]), 1.0 / 16);
  EXPECT_EQ(std::stod(rows[1][1]), 0.0);

  const auto trace = ch::detail::read_csv(dir / "energy_trace.csv", "t,energy,mass,cum_dissipation");
  ASSERT_EQ(trace.size(), 3u);
  for (std::size_t n = 1; n < trace.size(); ++n) EXPECT_LE(std::stod(trace[n][1]), std::stod(trace[n - 1][1]));
}

TEST(Output, TrajectoryRoundTripIsExact) {
  const auto cfg = ch::parse_config_string(kReference);
  const auto traj = ch::run(ch::make_run_spec(cfg));
  const fs::path dir = scratch("roundtrip");
  ch::write_trajectory(dir, traj, cfg);
  const auto st = ch::read_trajectory(dir);
  ASSERT_EQ(st.trajectory.phi.size(), traj.phi.size());
  ASSERT_EQ(st.trajectory.mu.size(), traj.mu.size());
  for (std::size_t n = 0; n < traj.phi.size(); ++n) EXPECT_TRUE(st.trajectory.phi[n] == traj.phi[n]);
  for (std::size_t n = 0; n < traj.mu.size(); ++n) EXPECT_TRUE(st.trajectory.mu[n] == traj.mu[n]);
  EXPECT_EQ(st.trajectory.grid, traj.grid);
  EXPECT_EQ(st.config.model.f_coeffs, cfg.model.f_coeffs);

  const auto recs = ch::recompute_diagnostics(st.trajectory, ch::validate(st.config.model));
  ASSERT_EQ(recs.size(), traj.diagnostics.size());
  for (std::size_t n = 0; n < recs.size(); ++n) {
    EXPECT_EQ(recs[n].mass, traj.diagnostics[n].mass);
    EXPECT_EQ(recs[n].energy, traj.diagnostics[n].energy);
    EXPECT_NEAR(recs[n].cumulative_dissipation, traj.diagnostics[n].cumulative_dissipation, 1e-13);
  }
}

TEST(Output, OutputsAreDeterministic) {
  const auto cfg = ch::parse_config_string(kReference);
  const fs::path a = scratch("det_a"), b = scratch("det_b");
  ch::write_run_outputs(a, ch::run(ch::make_run_spec(cfg)), cfg);
  ch::write_run_outputs(b, ch::run(ch::make_run_spec(cfg)), cfg);
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), a);
    EXPECT_EQ(slurp(e.path()), slurp(b / rel)) << rel;
  }
}

TEST(Output, CoefficientFileInitialCondition) {
  const auto s = ch::build_space(0);
  const auto c = ch::test::random_field(s, -0.5, 0.5);
  const fs::path dir = scratch("coeffs");
  ch::write_coefficients(dir / "ic.csv", c.coeffs);
  std::ofstream(dir / "cfg.yaml") << "model: {preset: paper}\ndiscretization: {T: 0.02}\n"
                                     "initial_condition: {preset: file, file: ic.csv}\n";
  const auto cfg = ch::parse_config(dir / "cfg.yaml");
  const auto spec = ch::make_run_spec(cfg, dir);
  ASSERT_TRUE(spec.initial.coefficients);
  EXPECT_TRUE(*spec.initial.coefficients == c.coeffs);
  const auto traj = ch::run(spec);
  EXPECT_TRUE(traj.phi.front() == c.coeffs);
  EXPECT_NEAR(traj.diagnostics.back().mass, ch::mass(c), 1e-12);
}

TEST(Output, PartialTrajectoryStillWritten) {
  auto cfg = ch::parse_config_string(kReference);
  cfg.solver.max_iter = 1;
  const auto traj = ch::run(ch::make_run_spec(cfg));
  ASSERT_FALSE(traj.complete());
  const fs::path dir = scratch("partial");
  ch::write_run_outputs(dir, traj, cfg);
  const auto st = ch::read_trajectory(dir);
  EXPECT_FALSE(st.trajectory.failure.empty());
  EXPECT_EQ(st.trajectory.phi.size(), traj.phi.size());
}
