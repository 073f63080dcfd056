#include <catch2/catch.hpp>

#include <cmath>

#include "eitnoise/engine.hpp"
#include "eitnoise/oracle.hpp"

using namespace eitnoise;

namespace {

// Oracle tests run in units of Gamma = 1 (rad/s); the dynamics are
// scale-free so the step and burn-in invariants keep their meaning.
Model base_model() {
  Model m;
  m.atom.gamma_exc = 1.0;
  m.atom.gamma_ground = 0.02;
  m.laser1 = {1, 0.1, 0.0, 0.08};
  m.laser2 = {2, 0.112, 0.0, 0.08};
  m.grid.frequencies = {0.5, 1.0};
  return m;
}

TrajectoryConfig base_cfg() {
  TrajectoryConfig cfg;
  cfg.dt = 0.05;
  cfg.burn_in = 60.0;
  cfg.total_time = 64.0;
  cfg.n_trajectories = 8;
  cfg.seed = 12345;
  cfg.welch.segment_length = 256;
  return cfg;
}

}  // namespace

TEST_CASE("wiener phases accumulate the calibrated variance") {
  // Var[phi(T)] = 2 b T; sampled over 10^4 trajectories the relative scatter
  // of the variance estimate is about sqrt(2/n) = 1.4%.
  Model m = base_model();
  m.laser1.rabi = m.laser2.rabi = 0.0;
  m.laser1.linewidth_b = 0.10;
  m.laser2.linewidth_b = 0.02;
  VelocityGrid grid{{0.0}, {1.0}};
  TrajectoryConfig cfg = base_cfg();
  cfg.burn_in = 0.0;
  cfg.total_time = 10.0;
  const size_t steps = size_t(cfg.total_time / cfg.dt);
  double var1 = 0.0, var2 = 0.0, mean1 = 0.0;
  const int n = 10000;
  for (int t = 0; t < n; ++t) {
    const TrajectoryResult tr = simulate_trajectory(m, grid, cfg, uint64_t(t));
    var1 += tr.phi1_final * tr.phi1_final;
    var2 += tr.phi2_final * tr.phi2_final;
    mean1 += tr.phi1_final;
  }
  var1 /= n;
  var2 /= n;
  mean1 /= n;
  const double T = double(steps) * cfg.dt;
  REQUIRE(var1 == Approx(2.0 * 0.10 * T).epsilon(0.05));
  REQUIRE(var2 == Approx(2.0 * 0.02 * T).epsilon(0.05));
  REQUIRE(std::abs(mean1) < 3.0 * std::sqrt(2.0 * 0.10 * T / n));
}

TEST_CASE("zero linewidths give constant intensities and vanishing spectra") {
  Model m = base_model();
  m.laser1.linewidth_b = m.laser2.linewidth_b = 0.0;
  m.laser1.rabi = 0.3;
  m.laser2.rabi = 0.3;
  TrajectoryConfig cfg = base_cfg();
  cfg.burn_in = 1500.0;  // drive the deterministic transient below 1e-13
  cfg.n_trajectories = 2;
  VelocityGrid grid{{0.0}, {1.0}};
  const TrajectoryResult tr = simulate_trajectory(m, grid, cfg, 0);
  double lo = tr.I1[0], hi = tr.I1[0];
  for (double v : tr.I1) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  REQUIRE(hi - lo < 1e-12);

  const OracleResult r = oracle_correlation(m, cfg);
  for (size_t q = 0; q < r.frequencies.size(); ++q) {
    REQUIRE(std::abs(r.S11[q]) < 1e-20);
    REQUIRE(std::abs(r.S22[q]) < 1e-20);
    REQUIRE(std::abs(r.S12[q]) < 1e-20);
  }
}

TEST_CASE("empty-cell mode has zero spectra and no correlation") {
  Model m = base_model();
  TrajectoryConfig cfg = base_cfg();
  cfg.kappa = 0.0;  // no medium: intensities carry no noise at all
  cfg.n_trajectories = 4;
  const OracleResult r = oracle_correlation(m, cfg);
  for (size_t q = 0; q < r.frequencies.size(); ++q) {
    REQUIRE(std::abs(r.S11[q]) < 1e-30);
    REQUIRE(std::abs(r.S12[q]) < 1e-30);
    REQUIRE(std::isnan(r.C[q]));  // missing value, never +-inf
  }
}

TEST_CASE("identical seeds reproduce bit-identical output") {
  const Model m = base_model();
  TrajectoryConfig cfg = base_cfg();
  cfg.n_trajectories = 4;
  const OracleResult a = oracle_correlation(m, cfg);
  const OracleResult b = oracle_correlation(m, cfg);
  REQUIRE(a.C == b.C);
  REQUIRE(a.S12 == b.S12);
  cfg.seed = 999;
  const OracleResult c = oracle_correlation(m, cfg);
  REQUIRE(a.C != c.C);
}

TEST_CASE("standard error shrinks like one over sqrt(n)") {
  const Model m = base_model();
  TrajectoryConfig cfg = base_cfg();
  cfg.total_time = 160.0;  // more segments per trajectory
  cfg.n_trajectories = 25;
  const OracleResult r25 = oracle_correlation(m, cfg);
  cfg.n_trajectories = 100;
  const OracleResult r100 = oracle_correlation(m, cfg);
  const double ratio = r100.C_se[0] / r25.C_se[0];
  REQUIRE(ratio > 0.35);
  REQUIRE(ratio < 0.65);
}

TEST_CASE("doubling the burn-in moves C by less than a standard error") {
  const Model m = base_model();
  TrajectoryConfig cfg = base_cfg();
  cfg.total_time = 160.0;
  cfg.n_trajectories = 24;
  const OracleResult a = oracle_correlation(m, cfg);
  cfg.burn_in *= 2.0;
  const OracleResult b = oracle_correlation(m, cfg);
  for (size_t q = 0; q < a.C.size(); ++q) {
    const double se = std::sqrt(a.C_se[q] * a.C_se[q] + b.C_se[q] * b.C_se[q]);
    REQUIRE(std::abs(a.C[q] - b.C[q]) < se);
  }
}

TEST_CASE("oracle agrees with the deterministic path at weak drive") {
  // Coarse cross-check (the acceptance suite runs the tight version): the
  // two paths share no covariance code, so agreement here pins the sign
  // structure of the spectral assembly.
  const Model m = base_model();
  TrajectoryConfig cfg = base_cfg();
  cfg.total_time = 320.0;
  cfg.welch.segment_length = 512;
  cfg.n_trajectories = 32;
  const OracleResult mc = oracle_correlation(m, cfg);

  Model det = m;
  det.grid.frequencies = mc.frequencies;
  const SpectrumResult ref = compute_spectrum(det);
  for (size_t q = 0; q < mc.frequencies.size(); ++q) {
    REQUIRE(mc.C[q] == Approx(ref.C[q]).margin(std::max(4.0 * mc.C_se[q], 0.08)));
    REQUIRE(mc.C[q] > 0.0);  // correlated regime
  }
}

TEST_CASE("trajectory validator rejects unsound sampling settings") {
  const Model m = base_model();
  TrajectoryConfig cfg = base_cfg();
  cfg.dt = 1.0;  // dt * Gamma = 1 > 0.05
  REQUIRE_THROWS_AS(validate_trajectory_config(cfg, m), config_error);
  cfg = base_cfg();
  cfg.burn_in = 1.0;  // shorter than 10 / (gamma + b1 + b2)
  REQUIRE_THROWS_AS(validate_trajectory_config(cfg, m), config_error);
  cfg = base_cfg();
  cfg.welch.segment_length = 300;  // not a power of two
  REQUIRE_THROWS_AS(validate_trajectory_config(cfg, m), config_error);
  cfg = base_cfg();
  cfg.total_time = 15.0;  // fewer than 4 segments
  REQUIRE_THROWS_AS(validate_trajectory_config(cfg, m), config_error);
  cfg = base_cfg();
  Model m0 = m;
  m0.atom.gamma_ground = 0.0;
  REQUIRE_THROWS_AS(validate_trajectory_config(cfg, m0), config_error);
}

TEST_CASE("analysis frequencies above Nyquist are rejected") {
  Model m = base_model();
  m.grid.frequencies = {0.5, 100.0};  // Nyquist is pi/dt ~ 62.8
  TrajectoryConfig cfg = base_cfg();
  REQUIRE_THROWS_AS(oracle_correlation(m, cfg), config_error);
}
