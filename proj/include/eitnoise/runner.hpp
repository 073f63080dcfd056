#pragma once

// CLI operations: single spectrum runs, parameter sweeps and oracle
// cross-validation runs, each emitting CSV data plus a manifest.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "eitnoise/io.hpp"
#include "eitnoise/version.hpp"

namespace eitnoise {

namespace fs = std::filesystem;

struct RunOptions {
  fs::path out_dir = "out";
  unsigned workers = 0;
  std::optional<uint64_t> seed;  // overrides the config's oracle seed
  bool checkpoint = false;
  bool skip_bias_check = false;
  std::function<void(const std::string&)> progress;
};

struct RunOutput {
  std::vector<fs::path> files;
  fs::path manifest;
  bool bias_gate_passed = true;
};

namespace detail {

inline EngineOptions engine_options(const RunOptions& opt, const fs::path& ckpt_file) {
  EngineOptions eo;
  eo.workers = opt.workers;
  eo.progress = opt.progress;
  if (opt.checkpoint) eo.checkpoint_path = ckpt_file.string();
  return eo;
}

inline double probe_frequency(const json& config, const Model& m) {
  double probe = m.grid.frequencies.front();
  if (config.contains("analysis") && config["analysis"].contains("probe_mhz"))
    probe = mhz_to_rad(config["analysis"]["probe_mhz"].get<double>());
  return probe;
}

inline size_t nearest_index(const std::vector<double>& grid, double value) {
  size_t best = 0;
  double dist = std::abs(grid[0] - value);
  for (size_t i = 1; i < grid.size(); ++i)
    if (std::abs(grid[i] - value) < dist) {
      dist = std::abs(grid[i] - value);
      best = i;
    }
  return best;
}

}  // namespace detail

/// Applies one sweep-axis value (rad/s) to a model.  The rabi axis scales
/// both lasers, preserving the configured Rabi ratio; the detuning and
/// linewidth axes set both lasers to the same value.
inline Model apply_axis(Model m, const std::string& axis, double value) {
  if (axis == "rabi") {
    const double ratio = m.laser1.rabi > 0.0 ? m.laser2.rabi / m.laser1.rabi : 1.0;
    m.laser1.rabi = value;
    m.laser2.rabi = value * ratio;
  } else if (axis == "detuning") {
    m.laser1.detuning = value;
    m.laser2.detuning = value;
  } else if (axis == "linewidth_b") {
    m.laser1.linewidth_b = value;
    m.laser2.linewidth_b = value;
  } else if (axis == "gamma_ground") {
    m.atom.gamma_ground = value;
  } else if (axis == "sigma_kv") {
    m.doppler.sigma_kv = value;
  } else {
    throw config_error("unknown sweep axis '" + axis +
                       "' (expected rabi, detuning, linewidth_b, gamma_ground or sigma_kv)");
  }
  return m;
}

/// spectrum <config>: one Doppler-averaged spectrum, CSV plus manifest.
inline RunOutput run_spectrum(const std::string& config_path, const RunOptions& opt = {}) {
  const json config = load_json_file(config_path);
  const Model m = model_from_json(config);
  fs::create_directories(opt.out_dir);

  const SpectrumResult r =
      compute_spectrum(m, detail::engine_options(opt, opt.out_dir / "spectrum.ckpt"));

  RunOutput out;
  const fs::path csv = opt.out_dir / "spectrum.csv";
  write_spectrum_csv(csv.string(), r);
  out.files.push_back(csv);

  RunManifest manifest(kEngineVersion, config);
  manifest.add_output(csv);
  out.manifest = opt.out_dir / "manifest.json";
  manifest.write(out.manifest);
  return out;
}

/// sweep <config> --axis <name> --values v1,v2,...: one spectrum per value
/// plus a summary CSV of C at the probe frequency.
inline RunOutput run_sweep(const std::string& config_path, const std::string& axis,
                           const std::vector<double>& values_mhz, const RunOptions& opt = {}) {
  const json config = load_json_file(config_path);
  const Model base = model_from_json(config);
  if (values_mhz.empty()) throw config_error("sweep: empty value list");
  fs::create_directories(opt.out_dir);

  const double probe = detail::probe_frequency(config, base);
  RunOutput out;
  RunManifest manifest(kEngineVersion, config);
  manifest.set("sweep", json{{"axis", axis}, {"values_mhz", values_mhz}});

  std::ofstream summary_tmp;
  const fs::path summary_path = opt.out_dir / "summary.csv";
  summary_tmp.open(summary_path);
  if (!summary_tmp) throw config_error("cannot write '" + summary_path.string() + "'");
  summary_tmp << "value_mhz,probe_mhz,C\n";

  for (double v : values_mhz) {
    const Model m = validate(apply_axis(base, axis, mhz_to_rad(v)));
    char tag[64];
    std::snprintf(tag, sizeof(tag), "%s_%g", axis.c_str(), v);
    const fs::path dir = opt.out_dir / tag;
    fs::create_directories(dir);
    const SpectrumResult r =
        doppler_average_spectra(m, make_grid(m.doppler, m), m.grid.frequencies,
                                detail::engine_options(opt, dir / "spectrum.ckpt"));
    const fs::path csv = dir / "spectrum.csv";
    write_spectrum_csv(csv.string(), r);
    out.files.push_back(csv);
    manifest.add_output(csv, (fs::path(tag) / "spectrum.csv").string());

    const size_t pi = detail::nearest_index(r.frequencies, probe);
    summary_tmp << detail::format_value(v) << ',' << detail::format_value(rad_to_mhz(r.frequencies[pi]))
                << ',' << detail::format_value(r.C[pi]) << '\n';
    if (opt.progress) opt.progress("sweep: " + std::string(tag) + " done");
  }
  summary_tmp.close();
  out.files.push_back(summary_path);
  manifest.add_output(summary_path);
  out.manifest = opt.out_dir / "manifest.json";
  manifest.write(out.manifest);
  return out;
}

/// oracle <config>: Monte Carlo estimate, matching deterministic run on the
/// same Welch bins, z-score comparison table and step-halving bias gate.
inline RunOutput run_oracle(const std::string& config_path, const RunOptions& opt = {}) {
  const json config = load_json_file(config_path);
  const Model m = model_from_json(config);
  TrajectoryConfig cfg = oracle_from_json(config);
  if (opt.seed) cfg.seed = *opt.seed;
  fs::create_directories(opt.out_dir);

  OracleOptions oo;
  oo.workers = opt.workers;
  oo.progress = opt.progress;
  const OracleResult oracle = oracle_correlation(m, cfg, oo);

  // Deterministic spectra on the bins the oracle actually used.
  Model det = m;
  det.grid.frequencies = oracle.frequencies;
  const SpectrumResult ref =
      compute_spectrum(det, detail::engine_options(opt, opt.out_dir / "oracle_det.ckpt"));

  RunOutput out;
  const fs::path oracle_csv = opt.out_dir / "oracle_spectrum.csv";
  write_oracle_csv(oracle_csv.string(), oracle);
  out.files.push_back(oracle_csv);
  const fs::path det_csv = opt.out_dir / "deterministic_spectrum.csv";
  write_spectrum_csv(det_csv.string(), ref);
  out.files.push_back(det_csv);

  const fs::path cmp_csv = opt.out_dir / "comparison.csv";
  {
    std::ofstream cmp(cmp_csv);
    if (!cmp) throw config_error("cannot write '" + cmp_csv.string() + "'");
    cmp << "omega_mhz,C_deterministic,C_oracle,C_se,z\n";
    for (size_t i = 0; i < oracle.frequencies.size(); ++i) {
      const double z = oracle.C_se[i] > 0.0 ? (ref.C[i] - oracle.C[i]) / oracle.C_se[i]
                                            : std::numeric_limits<double>::quiet_NaN();
      cmp << detail::format_value(rad_to_mhz(oracle.frequencies[i])) << ','
          << detail::format_value(ref.C[i]) << ',' << detail::format_value(oracle.C[i]) << ','
          << detail::format_value(oracle.C_se[i]) << ',' << detail::format_value(z) << '\n';
    }
  }
  out.files.push_back(cmp_csv);

  RunManifest manifest(kEngineVersion, config);
  manifest.set("seed", cfg.seed);
  manifest.set("rng", oracle.rng_name);
  manifest.add_output(oracle_csv);
  manifest.add_output(det_csv);
  manifest.add_output(cmp_csv);

  // Step-halving bias gate: re-estimate at dt/2 on an independent (smaller)
  // trajectory batch.  Discretization bias is systematic across bins, so the
  // gate compares the mean shift over bins against one combined standard
  // error (no 1/sqrt(bins) gain claimed: bins within a trajectory are
  // correlated).
  if (!opt.skip_bias_check) {
    TrajectoryConfig half = cfg;
    half.dt = 0.5 * cfg.dt;
    half.welch.segment_length = 2 * cfg.welch.segment_length;  // same bins
    half.n_trajectories = std::max(8, cfg.n_trajectories / 4);
    uint64_t derived = cfg.seed ^ 0xb5297a4d3f84d5b5ull;
    half.seed = rng::splitmix64(derived);
    const OracleResult probe = oracle_correlation(m, half, oo);
    double shift_sum = 0.0, var_sum = 0.0;
    size_t used = 0;
    for (size_t i = 0; i < oracle.C.size(); ++i) {
      if (std::isnan(oracle.C[i]) || std::isnan(probe.C[i])) continue;
      shift_sum += oracle.C[i] - probe.C[i];
      var_sum += oracle.C_se[i] * oracle.C_se[i] + probe.C_se[i] * probe.C_se[i];
      ++used;
    }
    double shift_per_se = 0.0;
    if (used > 0 && var_sum > 0.0)
      shift_per_se = std::abs(shift_sum / double(used)) / std::sqrt(var_sum / double(used));
    const bool passed = shift_per_se < 1.0;
    manifest.set("bias_gate", json{{"passed", passed},
                                   {"mean_shift_per_se", shift_per_se},
                                   {"dt_halved_s", half.dt},
                                   {"n_trajectories", half.n_trajectories},
                                   {"seed", half.seed}});
    out.bias_gate_passed = passed;
  }

  out.manifest = opt.out_dir / "manifest.json";
  manifest.write(out.manifest);
  return out;
}

}  // namespace eitnoise
