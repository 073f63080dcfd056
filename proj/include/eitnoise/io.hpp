#pragma once

// Configuration (JSON, ordinary frequencies in MHz), data serialization
// (CSV) and run manifests.  This is the only layer that converts between
// MHz and the internal rad/s convention.

#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "eitnoise/engine.hpp"
#include "eitnoise/model.hpp"
#include "eitnoise/oracle.hpp"
#include "eitnoise/spectra.hpp"

namespace eitnoise {

using nlohmann::json;

// ---------------------------------------------------------------------------
// JSON <-> model

namespace detail {

inline double require_number(const json& j, const std::string& path, const char* key) {
  if (!j.contains(key) || !j[key].is_number())
    throw config_error("config: missing or non-numeric field '" + path + "." + key + "'");
  return j[key].get<double>();
}

inline double optional_number(const json& j, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number()) throw config_error(std::string("config: field '") + key + "' must be numeric");
  return j[key].get<double>();
}

inline LaserField parse_laser(const json& j, int label, const std::string& path) {
  LaserField l;
  l.label = label;
  l.rabi = mhz_to_rad(require_number(j, path, "rabi_mhz"));
  l.detuning = mhz_to_rad(require_number(j, path, "detuning_mhz"));
  l.linewidth_b = mhz_to_rad(require_number(j, path, "linewidth_b_mhz"));
  return l;
}

}  // namespace detail

/// Parses the full engine configuration.  Schema (all frequencies ordinary
/// MHz):
///   { "atom":    { "n_levels", "gamma_mhz", "gamma_ground_mhz",
///                  "excited_splitting_mhz"?, "dipole_weights"?,
///                  "branching"?, "transit_equilibrium"? },
///     "laser1":  { "rabi_mhz", "detuning_mhz", "linewidth_b_mhz" },
///     "laser2":  { ... },
///     "doppler": { "enabled", "sigma_kv_mhz"?, "n_classes"?, "rule"?,
///                  "cross_class"? },
///     "analysis": { "freqs_mhz": [...], "probe_mhz"? } }
inline Model model_from_json(const json& root) {
  if (!root.is_object()) throw config_error("config: top level must be a JSON object");
  for (const char* key : {"atom", "laser1", "laser2", "analysis"})
    if (!root.contains(key)) throw config_error(std::string("config: missing section '") + key + "'");

  Model m;
  const json& ja = root["atom"];
  m.atom.n_levels = int(detail::require_number(ja, "atom", "n_levels"));
  m.atom.gamma_exc = mhz_to_rad(detail::require_number(ja, "atom", "gamma_mhz"));
  m.atom.gamma_ground = mhz_to_rad(detail::require_number(ja, "atom", "gamma_ground_mhz"));
  // 4-level default: the tabulated 85Rb F'=2 - F'=3 interval, lower level second.
  m.atom.excited_splitting = mhz_to_rad(
      detail::optional_number(ja, "excited_splitting_mhz", m.atom.n_levels == 4 ? -63.4 : 0.0));
  if (ja.contains("dipole_weights")) {
    const auto& w = ja["dipole_weights"];
    if (!w.is_array() || (w.size() != 2 && w.size() != 4))
      throw config_error("config: atom.dipole_weights must list 2 or 4 transitions");
    for (size_t i = 0; i < w.size(); ++i) m.atom.dipole_weights[i] = w[i].get<double>();
    if (w.size() == 2) m.atom.dipole_weights[2] = m.atom.dipole_weights[3] = 1.0;
  }
  if (ja.contains("branching")) {
    const auto& b = ja["branching"];
    if (!b.is_array() || b.empty() || !b[0].is_array())
      throw config_error("config: atom.branching must be an array of [to_g1, to_g2] rows");
    for (size_t e = 0; e < b.size() && e < 2; ++e)
      for (size_t g = 0; g < 2; ++g) m.atom.branching[e][g] = b[e][g].get<double>();
    if (b.size() == 1) m.atom.branching[1] = m.atom.branching[0];
  }
  if (ja.contains("transit_equilibrium")) {
    const auto& t = ja["transit_equilibrium"];
    if (!t.is_array() || t.size() != 2)
      throw config_error("config: atom.transit_equilibrium must list two ground populations");
    m.atom.transit_equilibrium = {t[0].get<double>(), t[1].get<double>()};
  }

  m.laser1 = detail::parse_laser(root["laser1"], 1, "laser1");
  m.laser2 = detail::parse_laser(root["laser2"], 2, "laser2");

  const json& jan = root["analysis"];
  if (!jan.contains("freqs_mhz") || !jan["freqs_mhz"].is_array())
    throw config_error("config: missing field 'analysis.freqs_mhz'");
  for (const auto& f : jan["freqs_mhz"]) m.grid.frequencies.push_back(mhz_to_rad(f.get<double>()));

  if (root.contains("doppler")) {
    const json& jd = root["doppler"];
    m.doppler.enabled = jd.value("enabled", false);
    m.doppler.sigma_kv = mhz_to_rad(detail::optional_number(jd, "sigma_kv_mhz", 220.0));
    m.doppler.n_classes = int(detail::optional_number(jd, "n_classes", m.doppler.enabled ? 21 : 1));
    m.doppler.cross_class = jd.value("cross_class", true);
    const std::string rule = jd.value("rule", "auto");
    if (rule == "auto" || rule == "auto_clustered")
      m.doppler.rule = DopplerSpec::Rule::auto_clustered;
    else if (rule == "gauss_hermite")
      m.doppler.rule = DopplerSpec::Rule::gauss_hermite;
    else if (rule == "trapezoid")
      m.doppler.rule = DopplerSpec::Rule::trapezoid;
    else
      throw config_error("config: unknown doppler.rule '" + rule + "'");
  }
  return validate(m);
}

inline json model_to_json(const Model& m) {
  json root;
  root["atom"] = {
      {"n_levels", m.atom.n_levels},
      {"gamma_mhz", rad_to_mhz(m.atom.gamma_exc)},
      {"gamma_ground_mhz", rad_to_mhz(m.atom.gamma_ground)},
      {"excited_splitting_mhz", rad_to_mhz(m.atom.excited_splitting)},
      {"dipole_weights", m.atom.dipole_weights},
      {"branching", {m.atom.branching[0], m.atom.branching[1]}},
      {"transit_equilibrium", m.atom.transit_equilibrium},
  };
  auto laser = [](const LaserField& l) {
    return json{{"rabi_mhz", rad_to_mhz(l.rabi)},
                {"detuning_mhz", rad_to_mhz(l.detuning)},
                {"linewidth_b_mhz", rad_to_mhz(l.linewidth_b)}};
  };
  root["laser1"] = laser(m.laser1);
  root["laser2"] = laser(m.laser2);
  std::vector<double> freqs;
  for (double w : m.grid.frequencies) freqs.push_back(rad_to_mhz(w));
  root["analysis"] = {{"freqs_mhz", freqs}};
  root["doppler"] = {
      {"enabled", m.doppler.enabled},
      {"sigma_kv_mhz", rad_to_mhz(m.doppler.sigma_kv)},
      {"n_classes", m.doppler.n_classes},
      {"rule", m.doppler.rule == DopplerSpec::Rule::auto_clustered
                   ? "auto"
                   : (m.doppler.rule == DopplerSpec::Rule::gauss_hermite ? "gauss_hermite"
                                                                         : "trapezoid")},
      {"cross_class", m.doppler.cross_class},
  };
  return root;
}

/// Optional oracle block:
///   "oracle": { "dt_s", "total_time_s", "burn_in_s", "n_trajectories",
///               "seed", "kappa"?, "welch": { "segment_length", "overlap"?,
///               "window"? } }
inline TrajectoryConfig oracle_from_json(const json& root) {
  if (!root.contains("oracle"))
    throw config_error("config: missing 'oracle' block required for oracle runs");
  const json& jo = root["oracle"];
  TrajectoryConfig cfg;
  cfg.dt = detail::require_number(jo, "oracle", "dt_s");
  cfg.total_time = detail::require_number(jo, "oracle", "total_time_s");
  cfg.burn_in = detail::require_number(jo, "oracle", "burn_in_s");
  cfg.n_trajectories = int(detail::require_number(jo, "oracle", "n_trajectories"));
  cfg.seed = uint64_t(detail::require_number(jo, "oracle", "seed"));
  cfg.kappa = detail::optional_number(jo, "kappa", 1e-3);
  if (jo.contains("welch")) {
    const json& jw = jo["welch"];
    cfg.welch.segment_length = int(detail::require_number(jw, "oracle.welch", "segment_length"));
    cfg.welch.overlap = detail::optional_number(jw, "overlap", 0.5);
    cfg.welch.window = jw.value("window", "hann");
  }
  return cfg;
}

inline json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open config file '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw config_error("config '" + path + "': " + e.what());
  }
}

// ---------------------------------------------------------------------------
// CSV

namespace detail {

inline std::string format_value(double v) {
  if (std::isnan(v)) return "";  // missing-value policy for C
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.15g", v);
  return buf;
}

}  // namespace detail

/// Writes the canonical spectrum CSV: omega_mhz,S11,S22,S12,Ss,Sd,C.
/// Extra columns (oracle standard errors) are appended when provided.
inline void write_spectrum_csv(const std::string& path, const SpectrumResult& r) {
  std::ofstream out(path);
  if (!out) throw config_error("cannot write '" + path + "'");
  out << "omega_mhz,S11,S22,S12,Ss,Sd,C\n";
  for (size_t i = 0; i < r.frequencies.size(); ++i) {
    out << detail::format_value(rad_to_mhz(r.frequencies[i])) << ','
        << detail::format_value(r.S11[i]) << ',' << detail::format_value(r.S22[i]) << ','
        << detail::format_value(r.S12[i]) << ',' << detail::format_value(r.Ss[i]) << ','
        << detail::format_value(r.Sd[i]) << ',' << detail::format_value(r.C[i]) << '\n';
  }
}

inline void write_oracle_csv(const std::string& path, const OracleResult& r) {
  std::ofstream out(path);
  if (!out) throw config_error("cannot write '" + path + "'");
  out << "omega_mhz,S11,S22,S12,Ss,Sd,C,S11_se,S22_se,S12_se,C_se\n";
  for (size_t i = 0; i < r.frequencies.size(); ++i) {
    out << detail::format_value(rad_to_mhz(r.frequencies[i])) << ','
        << detail::format_value(r.S11[i]) << ',' << detail::format_value(r.S22[i]) << ','
        << detail::format_value(r.S12[i]) << ',' << detail::format_value(r.Ss[i]) << ','
        << detail::format_value(r.Sd[i]) << ',' << detail::format_value(r.C[i]) << ','
        << detail::format_value(r.S11_se[i]) << ',' << detail::format_value(r.S22_se[i]) << ','
        << detail::format_value(r.S12_se[i]) << ',' << detail::format_value(r.C_se[i]) << '\n';
  }
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;  // NaN for empty fields
};

inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot read '" + path + "'");
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw config_error("empty CSV '" + path + "'");
  std::stringstream hs(line);
  std::string cell;
  while (std::getline(hs, cell, ',')) t.header.push_back(cell);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ls(line);
    std::string field;
    size_t count = 0;
    while (count < t.header.size()) {
      if (!std::getline(ls, field, ',')) field.clear();
      row.push_back(field.empty() ? std::numeric_limits<double>::quiet_NaN()
                                  : std::stod(field));
      ++count;
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

// ---------------------------------------------------------------------------
// Run manifest

inline uint64_t file_checksum(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw config_error("cannot checksum '" + path + "'");
  uint64_t h = 1469598103934665603ull;
  char buf[4096];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    h = detail::fnv1a64(buf, size_t(in.gcount()), h);
    if (!in) break;
  }
  return h;
}

inline std::string timestamp_utc() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Every run emits one manifest referencing each data file exactly once.
class RunManifest {
 public:
  RunManifest(std::string engine_version, json config_echo)
      : doc_{{"engine_version", std::move(engine_version)},
             {"created_utc", timestamp_utc()},
             {"config", std::move(config_echo)},
             {"outputs", json::array()}} {}

  void add_output(const std::filesystem::path& file, const std::string& display = "") {
    char hex[20];
    std::snprintf(hex, sizeof(hex), "%016llx",
                  (unsigned long long)file_checksum(file.string()));
    doc_["outputs"].push_back(
        {{"path", display.empty() ? file.filename().string() : display}, {"fnv1a64", hex}});
  }

  void set(const std::string& key, const json& value) { doc_[key] = value; }

  void write(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw config_error("cannot write manifest '" + path.string() + "'");
    out << doc_.dump(2) << '\n';
  }

  const json& doc() const { return doc_; }

 private:
  json doc_;
};

}  // namespace eitnoise
