// eitnoise: intensity-noise correlation spectra of two phase-diffusing
// lasers driving a 3- or 4-level Lambda medium.
//
// Subcommands:
//   spectrum <config.json>                        one Doppler-averaged spectrum
//   sweep    <config.json> --axis A --values ...  one spectrum per value + summary
//   oracle   <config.json>                        Monte Carlo run + z-score report

#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "eitnoise/runner.hpp"

namespace {

std::vector<double> parse_values(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    try {
      out.push_back(std::stod(tok));
    } catch (const std::exception&) {
      throw eitnoise::config_error("sweep: cannot parse value '" + tok + "'");
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Intensity-noise auto/cross spectra and correlation coefficient for two "
               "independent phase-diffusing lasers in a Lambda medium"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "out";
  unsigned workers = 0;
  bool quiet = false;
  bool checkpoint = false;
  app.add_option("--out", out_dir, "Output directory (default: out)");
  app.add_option("--workers", workers, "Worker thread cap (0 = all cores)");
  app.add_flag("--quiet", quiet, "Suppress progress output");
  app.add_flag("--checkpoint", checkpoint, "Checkpoint covariance rows for restartable runs");

  auto* spectrum = app.add_subcommand("spectrum", "Compute one spectrum");
  spectrum->fallthrough();
  spectrum->add_option("config", config_path, "JSON configuration")->required();

  std::string axis;
  std::string values_csv;
  auto* sweep = app.add_subcommand("sweep", "Sweep one parameter axis");
  sweep->fallthrough();
  sweep->add_option("config", config_path, "JSON configuration")->required();
  sweep->add_option("--axis", axis, "rabi | detuning | linewidth_b | gamma_ground | sigma_kv")
      ->required();
  sweep->add_option("--values", values_csv, "Comma-separated axis values in MHz")->required();

  uint64_t seed = 0;
  bool seed_set = false;
  bool skip_bias = false;
  auto* oracle = app.add_subcommand("oracle", "Monte Carlo cross-validation run");
  oracle->fallthrough();
  oracle->add_option("config", config_path, "JSON configuration")->required();
  oracle->add_option("--seed", seed, "Override the config RNG seed")->each([&](const std::string&) {
    seed_set = true;
  });
  oracle->add_flag("--skip-bias-check", skip_bias, "Skip the step-halving bias gate");

  CLI11_PARSE(app, argc, argv);

  eitnoise::RunOptions opt;
  opt.out_dir = out_dir;
  opt.workers = workers;
  opt.checkpoint = checkpoint;
  opt.skip_bias_check = skip_bias;
  if (seed_set) opt.seed = seed;
  if (!quiet) opt.progress = [](const std::string& msg) { std::fprintf(stderr, "[eitnoise] %s\n", msg.c_str()); };

  try {
    eitnoise::RunOutput out;
    if (spectrum->parsed()) {
      out = eitnoise::run_spectrum(config_path, opt);
    } else if (sweep->parsed()) {
      out = eitnoise::run_sweep(config_path, axis, parse_values(values_csv), opt);
    } else {
      out = eitnoise::run_oracle(config_path, opt);
      if (!out.bias_gate_passed) {
        std::fprintf(stderr, "eitnoise: step-halving bias gate failed; halve dt or pass "
                             "--skip-bias-check to keep the run\n");
        return 3;
      }
    }
    if (!quiet) {
      for (const auto& f : out.files) std::fprintf(stderr, "[eitnoise] wrote %s\n", f.c_str());
      std::fprintf(stderr, "[eitnoise] wrote %s\n", out.manifest.c_str());
    }
    return 0;
  } catch (const eitnoise::config_error& e) {
    std::fprintf(stderr, "eitnoise: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "eitnoise: %s\n", e.what());
    return 1;
  }
}
