#pragma once

// Brute-force stochastic simulator.  Laser phases are sampled as explicit
// Wiener paths, the rotating-frame Bloch state of every velocity class is
// advanced with the phases frozen within each Euler step, detected
// intensities are synthesized from the dipole projections, and spectra are
// estimated by Welch periodogram averaging.
//
// This path deliberately shares no covariance machinery with the
// deterministic solver: no averaged generator A1, no Lyapunov or resolvent
// solves.  Agreement between the two pins every sign and prefactor of the
// spectral assembly.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <mutex>
#include <numeric>
#include <string>
#include <vector>

#include "eitnoise/doppler.hpp"
#include "eitnoise/engine.hpp"
#include "eitnoise/fft.hpp"
#include "eitnoise/liouville.hpp"
#include "eitnoise/spectra.hpp"

namespace eitnoise {

inline constexpr const char* kOracleRngName = "xoshiro256++ (splitmix64-derived per-trajectory streams)";

struct WelchConfig {
  int segment_length = 8192;  // power of two
  double overlap = 0.5;       // fraction of segment_length
  std::string window = "hann";
};

struct TrajectoryConfig {
  double dt = 0.0;          // s
  double total_time = 0.0;  // s, span recorded after burn-in
  double burn_in = 0.0;     // s
  int n_trajectories = 0;
  uint64_t seed = 0;
  double kappa = 1e-3;  // medium coupling in the linearized detection
  WelchConfig welch;
};

namespace rng {

// splitmix64; used to derive independent per-trajectory stream states.
inline uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// xoshiro256++ core.
class Stream {
 public:
  Stream(uint64_t seed, uint64_t stream_index) {
    uint64_t sm = seed ^ (0x9e3779b97f4a7c15ull * (stream_index + 1));
    for (auto& s : s_) s = splitmix64(sm);
  }

  uint64_t next_u64() {
    const uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  double uniform() {  // (0, 1]
    return double((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  double normal() {  // Box-Muller, cached spare
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * kPi * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

 private:
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  uint64_t s_[4];
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace rng

/// Rejects step sizes, burn-in and Welch settings that violate the sampling
/// invariants for the given model.
inline void validate_trajectory_config(const TrajectoryConfig& cfg, const Model& m) {
  if (!(cfg.dt > 0.0) || !std::isfinite(cfg.dt)) throw config_error("oracle: dt must be positive");
  // Detunings and the excited splitting drive the coupling-rotation
  // commutator error of the split step, so they bound dt alongside the rates.
  const double s = m.atom.n_levels == 4 ? m.atom.excited_splitting : 0.0;
  const double fastest =
      std::max({m.atom.gamma_exc, m.laser1.rabi, m.laser2.rabi, m.laser1.linewidth_b,
                m.laser2.linewidth_b, std::abs(m.laser1.detuning), std::abs(m.laser2.detuning),
                std::abs(m.laser1.detuning - s), std::abs(m.laser2.detuning - s)});
  if (cfg.dt * fastest > 0.05)
    throw config_error(
        "oracle: dt too large, dt * max(Gamma, Omega, b, |Delta|, |Delta - splitting|) "
        "must be <= 0.05");
  const double slowest =
      m.atom.gamma_ground + m.laser1.linewidth_b + m.laser2.linewidth_b;
  if (slowest > 0.0 && cfg.burn_in < 10.0 / slowest)
    throw config_error("oracle: burn_in must cover at least 10 / (gamma + b1 + b2)");
  if (cfg.total_time <= 0.0) throw config_error("oracle: total_time must be positive");
  if (cfg.n_trajectories < 1) throw config_error("oracle: need at least one trajectory");
  const int L = cfg.welch.segment_length;
  if (L < 2 || (L & (L - 1)) != 0)
    throw config_error("oracle: welch.segment_length must be a power of two");
  if (!(cfg.welch.overlap >= 0.0) || cfg.welch.overlap >= 1.0)
    throw config_error("oracle: welch.overlap must lie in [0, 1)");
  if (cfg.welch.window != "hann" && cfg.welch.window != "rectangular")
    throw config_error("oracle: unknown window '" + cfg.welch.window + "'");
  const size_t samples = size_t(cfg.total_time / cfg.dt);
  const size_t hop = std::max<size_t>(1, size_t(L * (1.0 - cfg.welch.overlap)));
  const size_t segments = samples >= size_t(L) ? 1 + (samples - L) / hop : 0;
  if (segments < 4)
    throw config_error("oracle: fewer than 4 Welch segments; extend total_time or shrink "
                       "segment_length");
  if (m.atom.gamma_ground <= 0.0)
    throw config_error("oracle: gamma_ground must be positive (stationary regime required)");
}

struct TrajectoryResult {
  std::vector<double> I1, I2;  // detected intensities after burn-in, spacing dt
  double phi1_final = 0.0;     // accumulated Wiener phases (diagnostics / calibration)
  double phi2_final = 0.0;
};

/// One stochastic trajectory.  All velocity classes share the same phase
/// realization; detected intensities are I_q = 1 - 2 kappa Im(p_q projection)
/// with the same dipole projection as the deterministic path.
inline TrajectoryResult simulate_trajectory(const Model& model, const VelocityGrid& grid,
                                            const TrajectoryConfig& cfg,
                                            uint64_t trajectory_index) {
  const StateIndex idx(model.atom.n_levels);
  const int dim = idx.dim();
  const size_t Mv = grid.size();

  // Split A into diagonal (rotation + damping, integrated exactly per step)
  // and off-diagonal couplings (first order).  The exact diagonal keeps fast
  // rotating elements (Doppler wings, excited splitting) stable at step sizes
  // set by the couplings alone.
  std::vector<CMatrix> Aoff(Mv);
  std::vector<CVector> ediag(Mv);
  CVector y0;
  for (size_t j = 0; j < Mv; ++j) {
    auto [Aj, y] = build_bloch_matrix(model.atom, model.laser1, model.laser2, grid.nodes[j]);
    ediag[j] = (Aj.diagonal() * cfg.dt).array().exp();
    Aj.diagonal().setZero();
    Aoff[j] = std::move(Aj);
    if (j == 0) y0 = std::move(y);
  }
  auto [n1, n2] = phase_weight_matrices(model.atom);

  // Initial state: transit equilibrium populations.
  CVector init = CVector::Zero(dim);
  init[idx.population(1)] = model.atom.transit_equilibrium[0];
  init[idx.population(2)] = model.atom.transit_equilibrium[1];
  std::vector<CVector> u(Mv, init);

  const Eigen::VectorXd d1 = dipole_projection(model.atom, 1);
  const Eigen::VectorXd d2 = dipole_projection(model.atom, 2);

  rng::Stream rng(cfg.seed, trajectory_index);
  const double dt = cfg.dt;
  const double step1 = std::sqrt(2.0 * model.laser1.linewidth_b * dt);
  const double step2 = std::sqrt(2.0 * model.laser2.linewidth_b * dt);
  const size_t burn_steps = size_t(cfg.burn_in / dt);
  const size_t record_steps = size_t(cfg.total_time / dt);
  const size_t total_steps = burn_steps + record_steps;

  TrajectoryResult out;
  out.I1.resize(record_steps);
  out.I2.resize(record_steps);

  double phi1 = 0.0, phi2 = 0.0;
  CVector v(dim), du(dim);
  const Complex I(0.0, 1.0);
  for (size_t step = 0; step < total_steps; ++step) {
    const Complex e1 = std::exp(I * phi1);
    const Complex e2 = std::exp(I * phi2);
    // Phase factors per element from its (n1, n2) signature.
    Complex dphase[16];
    for (int a = 0; a < dim; ++a) {
      Complex f(1.0, 0.0);
      if (n1[a] == 1) f *= e1;
      else if (n1[a] == -1) f *= std::conj(e1);
      if (n2[a] == 1) f *= e2;
      else if (n2[a] == -1) f *= std::conj(e2);
      dphase[a] = f;
    }

    if (step >= burn_steps) {
      // p_q(t) = sum_j w_j d_q . x_j with x = Dphi u; both coherences of one
      // field share the same signature, so the factor is the scalar e_q*.
      Complex p1(0.0, 0.0), p2(0.0, 0.0);
      for (size_t j = 0; j < Mv; ++j) {
        Complex a1(0.0, 0.0), a2(0.0, 0.0);
        for (int a = 0; a < dim; ++a) {
          if (d1[a] != 0.0) a1 += d1[a] * u[j][a];
          if (d2[a] != 0.0) a2 += d2[a] * u[j][a];
        }
        p1 += grid.weights[j] * a1;
        p2 += grid.weights[j] * a2;
      }
      p1 *= std::conj(e1);
      p2 *= std::conj(e2);
      const size_t i = step - burn_steps;
      out.I1[i] = 1.0 - 2.0 * cfg.kappa * p1.imag();
      out.I2[i] = 1.0 - 2.0 * cfg.kappa * p2.imag();
    }

    // One step with frozen phases, in the phase-absorbed frame:
    // u <- Dphi^-1 [ E (v + dt (A_off v + y0)) ],  v = Dphi u,
    // where E integrates the diagonal of A exactly over dt.
    for (size_t j = 0; j < Mv; ++j) {
      for (int a = 0; a < dim; ++a) v[a] = dphase[a] * u[j][a];
      du.noalias() = Aoff[j] * v;
      du += y0;
      v += dt * du;
      for (int a = 0; a < dim; ++a) u[j][a] = std::conj(dphase[a]) * ediag[j][a] * v[a];
    }

    phi1 += step1 * rng.normal();
    phi2 += step2 * rng.normal();

    if ((step & 63u) == 0) {
      for (size_t j = 0; j < Mv; ++j)
        if (!(u[j].cwiseAbs().maxCoeff() <= 10.0))
          throw solver_error("oracle: trajectory unstable at step " + std::to_string(step) +
                             " (|rho| > 10), kv = " + std::to_string(grid.nodes[j]) +
                             ", dt = " + std::to_string(dt));
    }
  }
  out.phi1_final = phi1;
  out.phi2_final = phi2;
  return out;
}

struct WelchSpectra {
  std::vector<double> frequencies;  // rad/s, bins 0 .. L/2
  std::vector<double> S11, S22, S12;
  std::vector<double> se11, se22, se12;  // segment-scatter standard errors
  size_t n_segments = 0;
};

/// Welch cross-spectrum estimate of two synchronous series.  Segments are
/// mean-subtracted, windowed and overlapped; S12 is the real part of the
/// averaged cross-periodogram (the symmetrized cross-spectrum).
inline WelchSpectra welch_cross_spectrum(const std::vector<double>& I1,
                                         const std::vector<double>& I2, double dt,
                                         const WelchConfig& cfg) {
  if (I1.size() != I2.size()) throw std::invalid_argument("welch: length mismatch");
  const size_t L = size_t(cfg.segment_length);
  if (L < 2 || (L & (L - 1)) != 0)
    throw config_error("welch: segment_length must be a power of two");
  const size_t hop = std::max<size_t>(1, size_t(L * (1.0 - cfg.overlap)));
  const size_t n_seg = I1.size() >= L ? 1 + (I1.size() - L) / hop : 0;
  if (n_seg < 4)
    throw config_error("welch: fewer than 4 segments (variance unquantifiable)");

  std::vector<double> window(L, 1.0);
  if (cfg.window == "hann")
    for (size_t i = 0; i < L; ++i) window[i] = 0.5 * (1.0 - std::cos(2.0 * kPi * i / L));
  else if (cfg.window != "rectangular")
    throw config_error("welch: unknown window '" + cfg.window + "'");
  const double wnorm = std::inner_product(window.begin(), window.end(), window.begin(), 0.0);
  const double scale = dt / wnorm;  // two-sided PSD normalization

  const size_t nb = L / 2 + 1;
  WelchSpectra out;
  out.n_segments = n_seg;
  out.frequencies.resize(nb);
  for (size_t m = 0; m < nb; ++m) out.frequencies[m] = 2.0 * kPi * double(m) / (double(L) * dt);
  out.S11.assign(nb, 0.0);
  out.S22.assign(nb, 0.0);
  out.S12.assign(nb, 0.0);
  std::vector<double> sq11(nb, 0.0), sq22(nb, 0.0), sq12(nb, 0.0);

  std::vector<std::complex<double>> x1(L), x2(L);
  for (size_t s = 0; s < n_seg; ++s) {
    const size_t off = s * hop;
    double mean1 = 0.0, mean2 = 0.0;
    for (size_t i = 0; i < L; ++i) {
      mean1 += I1[off + i];
      mean2 += I2[off + i];
    }
    mean1 /= double(L);
    mean2 /= double(L);
    for (size_t i = 0; i < L; ++i) {
      x1[i] = (I1[off + i] - mean1) * window[i];
      x2[i] = (I2[off + i] - mean2) * window[i];
    }
    fft_forward(x1);
    fft_forward(x2);
    for (size_t m = 0; m < nb; ++m) {
      const double p11 = scale * std::norm(x1[m]);
      const double p22 = scale * std::norm(x2[m]);
      const double p12 = scale * (x1[m] * std::conj(x2[m])).real();
      out.S11[m] += p11;
      out.S22[m] += p22;
      out.S12[m] += p12;
      sq11[m] += p11 * p11;
      sq22[m] += p22 * p22;
      sq12[m] += p12 * p12;
    }
  }
  out.se11.resize(nb);
  out.se22.resize(nb);
  out.se12.resize(nb);
  const double n = double(n_seg);
  for (size_t m = 0; m < nb; ++m) {
    out.S11[m] /= n;
    out.S22[m] /= n;
    out.S12[m] /= n;
    auto se = [&](double sumsq, double mean) {
      const double var = std::max(0.0, sumsq / n - mean * mean);
      return std::sqrt(var / std::max(1.0, n - 1.0));
    };
    out.se11[m] = se(sq11[m], out.S11[m]);
    out.se22[m] = se(sq22[m], out.S22[m]);
    out.se12[m] = se(sq12[m], out.S12[m]);
  }
  return out;
}

/// Monte Carlo estimate with per-frequency standard errors on (a subset of)
/// the analysis grid.  Frequencies are snapped to the nearest Welch bin; the
/// bin frequencies actually used are reported back.
struct OracleResult {
  std::vector<double> frequencies;  // rad/s, Welch bin centers
  std::vector<double> S11, S22, S12, Ss, Sd, C;
  std::vector<double> S11_se, S22_se, S12_se, C_se;
  uint64_t seed = 0;
  std::string rng_name = kOracleRngName;
  int n_trajectories = 0;
  size_t segments_per_trajectory = 0;
};

struct OracleOptions {
  unsigned workers = 0;
  std::function<void(const std::string&)> progress;
};

inline OracleResult oracle_correlation(const Model& model, const TrajectoryConfig& cfg,
                                       const OracleOptions& opt = {}) {
  const Model m = validate(model);
  validate_trajectory_config(cfg, m);
  const VelocityGrid grid = make_grid(m.doppler, m);

  // Snap requested analysis frequencies to Welch bins.
  const size_t L = size_t(cfg.welch.segment_length);
  const double dw = 2.0 * kPi / (double(L) * cfg.dt);
  std::vector<size_t> bins;
  for (double w : m.grid.frequencies) {
    const size_t bin = size_t(std::llround(w / dw));
    if (bin > L / 2)
      throw config_error("oracle: analysis frequency above Nyquist for the chosen dt");
    bins.push_back(bin);
  }

  const size_t nb = bins.size();
  const int n_traj = cfg.n_trajectories;
  std::vector<std::vector<double>> t11(n_traj), t22(n_traj), t12(n_traj), tc(n_traj);
  std::string failure;
  std::mutex failure_mutex;
  std::atomic<int> done{0};
  detail::parallel_for(size_t(n_traj), opt.workers, [&](size_t ti) {
    try {
      const TrajectoryResult tr = simulate_trajectory(m, grid, cfg, ti);
      const WelchSpectra ws = welch_cross_spectrum(tr.I1, tr.I2, cfg.dt, cfg.welch);
      t11[ti].resize(nb);
      t22[ti].resize(nb);
      t12[ti].resize(nb);
      tc[ti].resize(nb);
      for (size_t q = 0; q < nb; ++q) {
        const size_t b = bins[q];
        t11[ti][q] = ws.S11[b];
        t22[ti][q] = ws.S22[b];
        t12[ti][q] = ws.S12[b];
        const double prod = ws.S11[b] * ws.S22[b];
        tc[ti][q] = prod > 0.0 ? ws.S12[b] / std::sqrt(prod)
                               : std::numeric_limits<double>::quiet_NaN();
      }
      const int k = ++done;
      if (opt.progress && (k % 32 == 0 || k == n_traj))
        opt.progress("oracle: trajectory " + std::to_string(k) + "/" + std::to_string(n_traj));
    } catch (const std::exception& e) {
      std::lock_guard<std::mutex> lock(failure_mutex);
      if (failure.empty()) failure = "trajectory " + std::to_string(ti) + ": " + e.what();
    }
  });
  if (!failure.empty()) throw solver_error(failure);

  OracleResult out;
  out.seed = cfg.seed;
  out.n_trajectories = n_traj;
  out.frequencies.resize(nb);
  for (size_t q = 0; q < nb; ++q) out.frequencies[q] = bins[q] * dw;
  {
    const size_t hop = std::max<size_t>(1, size_t(L * (1.0 - cfg.welch.overlap)));
    const size_t samples = size_t(cfg.total_time / cfg.dt);
    out.segments_per_trajectory = samples >= L ? 1 + (samples - L) / hop : 0;
  }
  out.S11.assign(nb, 0.0);
  out.S22.assign(nb, 0.0);
  out.S12.assign(nb, 0.0);
  out.S11_se.assign(nb, 0.0);
  out.S22_se.assign(nb, 0.0);
  out.S12_se.assign(nb, 0.0);
  out.C.assign(nb, 0.0);
  out.C_se.assign(nb, 0.0);

  auto reduce = [&](const std::vector<std::vector<double>>& per_traj, std::vector<double>& mean,
                    std::vector<double>& se) {
    for (size_t q = 0; q < nb; ++q) {
      double s = 0.0;
      for (int t = 0; t < n_traj; ++t) s += per_traj[t][q];
      mean[q] = s / n_traj;
      double sq = 0.0;
      for (int t = 0; t < n_traj; ++t) {
        const double d = per_traj[t][q] - mean[q];
        sq += d * d;
      }
      se[q] = n_traj > 1 ? std::sqrt(sq / (double(n_traj) * double(n_traj - 1))) : 0.0;
    }
  };
  reduce(t11, out.S11, out.S11_se);
  reduce(t22, out.S22, out.S22_se);
  reduce(t12, out.S12, out.S12_se);

  // Point estimate of C from the pooled spectra, spread from the independent
  // per-trajectory estimates.
  std::vector<double> cmean(nb), cse(nb);
  reduce(tc, cmean, cse);
  for (size_t q = 0; q < nb; ++q) {
    // Estimated spectra carry the (arbitrary) kappa^2 scale, so the only
    // meaningful missing-value guard is an exactly empty denominator.
    const double prod = out.S11[q] * out.S22[q];
    out.C[q] = prod > 0.0 ? out.S12[q] / std::sqrt(prod)
                          : std::numeric_limits<double>::quiet_NaN();
    out.C_se[q] = cse[q];
  }
  auto [ss, sd] = sum_diff(out.S11, out.S22, out.S12);
  out.Ss = std::move(ss);
  out.Sd = std::move(sd);
  return out;
}

}  // namespace eitnoise
