#pragma once

// Domain types and validation for the two-laser intensity-noise engine.
//
// Internal unit convention: every rate, detuning, Rabi frequency and analysis
// frequency is an angular frequency in rad/s.  Configuration files and the CLI
// speak ordinary frequency in MHz; the converters below are the only place the
// 2*pi factor lives.

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace eitnoise {

inline constexpr double kPi = 3.14159265358979323846;

/// Ordinary frequency in MHz -> angular frequency in rad/s.
inline double mhz_to_rad(double f_mhz) { return 2.0 * kPi * 1e6 * f_mhz; }

/// Angular frequency in rad/s -> ordinary frequency in MHz.
inline double rad_to_mhz(double w) { return w / (2.0 * kPi * 1e6); }

/// Invalid user input (configuration, CLI arguments).
class config_error : public std::runtime_error {
 public:
  explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Numerical failure with parameter context attached.
class solver_error : public std::runtime_error {
 public:
  explicit solver_error(const std::string& msg) : std::runtime_error(msg) {}
};

/// One driving laser: Rabi scale, optical detuning and phase-diffusion rate.
/// `linewidth_b` is the diffusion coefficient b of the Wiener phase; the
/// Lorentzian spectral width (FWHM) of the field is 2b.
struct LaserField {
  int label = 1;             // 1 or 2
  double rabi = 0.0;         // Omega, rad/s
  double detuning = 0.0;     // Delta = omega_laser - omega_atom (zero-velocity class), rad/s
  double linewidth_b = 0.0;  // b, rad/s
};

/// Level structure and relaxation rates.
///
/// Levels are indexed 0 = excited |0>, 1,2 = ground |1>,|2>, 3 = second
/// excited |0'> (4-level only).  Laser 1 couples |1> to the excited states,
/// laser 2 couples |2>.  `dipole_weights` multiply the Rabi frequency per
/// transition in the order {1-0, 2-0, 1-0', 2-0'}; `branching[e][g]` is the
/// fraction of the excited decay rate feeding ground state g.
struct AtomConfig {
  int n_levels = 3;                  // 3 or 4
  double gamma_exc = 0.0;            // Gamma, total excited-state decay rate, rad/s
  double gamma_ground = 0.0;         // gamma, transit / ground-coherence relaxation, rad/s
  double excited_splitting = 0.0;    // omega_0' - omega_0, rad/s (4-level only)
  std::array<double, 4> dipole_weights{1.0, 1.0, 1.0, 1.0};
  std::array<std::array<double, 2>, 2> branching{{{0.5, 0.5}, {0.5, 0.5}}};
  std::array<double, 2> transit_equilibrium{0.5, 0.5};  // ground mixture fed at rate gamma
};

/// Analysis frequencies (angular, rad/s), non-empty and strictly increasing.
struct AnalysisGrid {
  std::vector<double> frequencies;
};

/// Doppler averaging request.
///
/// `auto_clustered` (the default) grades the velocity nodes toward the
/// classes resonant with the lasers, which is what keeps moderate class
/// counts accurate: the atomic response varies on the scale of the
/// power-broadened linewidth, far narrower than a room-temperature Doppler
/// distribution.  `gauss_hermite` and `trapezoid` are the fixed textbook
/// rules.
struct DopplerSpec {
  enum class Rule { auto_clustered, gauss_hermite, trapezoid };
  bool enabled = false;
  double sigma_kv = 0.0;  // std deviation of the 1D kv distribution, rad/s
  int n_classes = 1;      // M, odd and >= 3 when enabled
  Rule rule = Rule::auto_clustered;
  bool cross_class = true;  // keep (j != k) covariance blocks; diagnostics knob
};

struct Model {
  LaserField laser1{1};
  LaserField laser2{2};
  AtomConfig atom;
  AnalysisGrid grid;
  DopplerSpec doppler;
};

namespace detail {

inline void check_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw config_error(std::string(what) + ": non-finite value");
}

inline void validate_laser(const LaserField& l) {
  const std::string tag = "laser" + std::to_string(l.label);
  if (l.label != 1 && l.label != 2) throw config_error("laser label must be 1 or 2");
  check_finite(l.rabi, "rabi");
  check_finite(l.detuning, "detuning");
  check_finite(l.linewidth_b, "linewidth_b");
  if (l.rabi < 0.0) throw config_error(tag + ": negative Rabi frequency");
  if (l.linewidth_b < 0.0) throw config_error(tag + ": negative phase-diffusion rate b");
}

}  // namespace detail

/// Checks every type invariant and returns the model unchanged.
/// Throws config_error with a field-specific message otherwise.
inline Model validate(const Model& m) {
  detail::validate_laser(m.laser1);
  detail::validate_laser(m.laser2);
  if (m.laser1.label == m.laser2.label) throw config_error("laser labels must differ");

  const AtomConfig& a = m.atom;
  if (a.n_levels != 3 && a.n_levels != 4)
    throw config_error("n_levels must be 3 or 4");
  detail::check_finite(a.gamma_exc, "gamma_exc");
  detail::check_finite(a.gamma_ground, "gamma_ground");
  detail::check_finite(a.excited_splitting, "excited_splitting");
  if (a.gamma_exc <= 0.0) throw config_error("non-positive decay rate Gamma");
  if (a.gamma_ground < 0.0) throw config_error("negative ground relaxation gamma");
  if (a.n_levels == 3 && a.excited_splitting != 0.0)
    throw config_error("excited_splitting must be 0 for a 3-level atom");
  for (double w : a.dipole_weights) {
    detail::check_finite(w, "dipole_weights");
    if (w < 0.0) throw config_error("negative dipole weight");
  }
  const int n_exc = a.n_levels == 4 ? 2 : 1;
  for (int e = 0; e < n_exc; ++e) {
    double sum = 0.0;
    for (double f : a.branching[e]) {
      if (!(f >= 0.0)) throw config_error("branching fractions must be non-negative");
      sum += f;
    }
    if (std::abs(sum - 1.0) > 1e-12)
      throw config_error("branching fractions of each excited level must sum to 1");
  }
  {
    double sum = 0.0;
    for (double f : a.transit_equilibrium) {
      if (!(f >= 0.0)) throw config_error("transit equilibrium populations must be non-negative");
      sum += f;
    }
    if (std::abs(sum - 1.0) > 1e-12)
      throw config_error("transit equilibrium populations must sum to 1");
  }

  if (m.grid.frequencies.empty()) throw config_error("empty analysis frequency grid");
  double prev = -1.0;
  for (double w : m.grid.frequencies) {
    detail::check_finite(w, "analysis frequency");
    if (w < 0.0) throw config_error("negative analysis frequency");
    if (w <= prev) throw config_error("analysis frequencies must be strictly increasing");
    prev = w;
  }

  const DopplerSpec& d = m.doppler;
  detail::check_finite(d.sigma_kv, "sigma_kv");
  if (d.sigma_kv < 0.0) throw config_error("negative Doppler width sigma_kv");
  if (d.enabled) {
    if (d.n_classes < 3) throw config_error("Doppler averaging needs at least 3 velocity classes");
    if (d.n_classes % 2 == 0)
      throw config_error("velocity class count must be odd (zero-velocity node required)");
  }
  return m;
}

}  // namespace eitnoise
