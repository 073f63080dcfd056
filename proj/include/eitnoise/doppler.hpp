#pragma once

// Velocity-class grids for Doppler averaging.  Nodes are kv shifts (rad/s)
// distributed under the one-dimensional Gaussian of standard deviation
// sigma_kv; weights sum to one.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include "eitnoise/model.hpp"

namespace eitnoise {

struct VelocityGrid {
  std::vector<double> nodes;    // kv, rad/s, symmetric about 0, ascending
  std::vector<double> weights;  // non-negative, sum to 1
  size_t size() const { return nodes.size(); }
};

namespace detail {

/// Gauss-Hermite nodes/weights for weight exp(-t^2) via the Golub-Welsch
/// tridiagonal eigenproblem.  Weights are returned normalized to sum 1.
inline void gauss_hermite(int m, std::vector<double>& t, std::vector<double>& w) {
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(m, m);
  for (int i = 0; i + 1 < m; ++i) J(i, i + 1) = J(i + 1, i) = std::sqrt(0.5 * (i + 1));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  t.resize(m);
  w.resize(m);
  double total = 0.0;
  for (int i = 0; i < m; ++i) {
    t[i] = es.eigenvalues()[i];
    const double v0 = es.eigenvectors()(0, i);
    w[i] = v0 * v0;
    total += w[i];
  }
  for (double& x : w) x /= total;
}

}  // namespace detail

/// Builds a graded grid whose node density peaks at the given feature
/// centers (the velocity classes resonant with the lasers) and keeps a
/// uniform floor across the thermal wings.  Weights are non-uniform
/// trapezoid coefficients times the Gaussian, normalized to one.
inline VelocityGrid make_clustered_grid(int m, double sigma, std::vector<double> centers,
                                        double feature_width) {
  if (centers.empty()) centers.push_back(0.0);
  const double a = 1.5 * feature_width;  // density bump half-width
  double lo = -4.5 * sigma, hi = 4.5 * sigma;
  for (double c : centers) {
    lo = std::min(lo, c - 3.0 * feature_width);
    hi = std::max(hi, c + 3.0 * feature_width);
  }
  // Roughly a quarter of the node budget goes to the wings.
  const double floor_density = centers.size() * kPi * a / (3.0 * (hi - lo));
  auto density = [&](double x) {
    double d = floor_density;
    for (double c : centers) {
      const double u = (x - c) / a;
      d += 1.0 / (1.0 + u * u);
    }
    return d;
  };
  // Quantiles of the density via a fine probe mesh.
  const int probes = 4001;
  const double h = (hi - lo) / (probes - 1);
  std::vector<double> cdf(probes, 0.0);
  double prev = density(lo);
  for (int i = 1; i < probes; ++i) {
    const double cur = density(lo + i * h);
    cdf[i] = cdf[i - 1] + 0.5 * (prev + cur) * h;
    prev = cur;
  }
  VelocityGrid g;
  g.nodes.resize(m);
  for (int i = 0; i < m; ++i) {
    const double target = cdf.back() * (i + 0.5) / m;
    const auto it = std::lower_bound(cdf.begin(), cdf.end(), target);
    const int j = std::max<int>(1, int(it - cdf.begin()));
    const double t = (target - cdf[j - 1]) / std::max(cdf[j] - cdf[j - 1], 1e-300);
    g.nodes[i] = lo + (j - 1 + t) * h;
  }
  g.weights.resize(m);
  double total = 0.0;
  for (int i = 0; i < m; ++i) {
    const double left = i > 0 ? g.nodes[i] - g.nodes[i - 1] : g.nodes[1] - g.nodes[0];
    const double right = i + 1 < m ? g.nodes[i + 1] - g.nodes[i] : left;
    const double u = sigma > 0.0 ? g.nodes[i] / sigma : 0.0;
    g.weights[i] = 0.5 * (left + right) * std::exp(-0.5 * u * u);
    total += g.weights[i];
  }
  for (double& w : g.weights) w /= total;
  return g;
}

/// Builds the velocity grid.  Disabled specs collapse to the single class
/// kv = 0 with unit weight.  The auto_clustered rule needs the model context
/// (laser detunings and Rabi scales); use the two-argument overload for it.
inline VelocityGrid make_grid(const DopplerSpec& spec) {
  VelocityGrid g;
  if (!spec.enabled) {
    g.nodes = {0.0};
    g.weights = {1.0};
    return g;
  }
  if (spec.n_classes < 3) throw config_error("make_grid: need at least 3 velocity classes");
  if (spec.n_classes % 2 == 0) throw config_error("make_grid: class count must be odd");
  const int m = spec.n_classes;

  if (spec.rule == DopplerSpec::Rule::auto_clustered) {
    // Without model context the clustered rule centers on kv = 0 with the
    // natural-linewidth scale left to the caller; reject to avoid silently
    // mis-centered grids.
    throw config_error("make_grid: auto_clustered rule requires the model context");
  }

  if (spec.rule == DopplerSpec::Rule::gauss_hermite) {
    std::vector<double> t, w;
    detail::gauss_hermite(m, t, w);
    g.nodes.resize(m);
    g.weights.resize(m);
    const double scale = std::sqrt(2.0) * spec.sigma_kv;
    for (int i = 0; i < m; ++i) {
      g.nodes[i] = scale * t[i];
      g.weights[i] = w[i];
    }
    // Enforce the exact symmetry of the rule (eigen-solver rounding breaks
    // the zero node at the 1e-16 level).
    for (int i = 0, j = m - 1; i < j; ++i, --j) {
      const double node = 0.5 * (g.nodes[j] - g.nodes[i]);
      const double weight = 0.5 * (g.weights[i] + g.weights[j]);
      g.nodes[i] = -node;
      g.nodes[j] = node;
      g.weights[i] = g.weights[j] = weight;
    }
    g.nodes[m / 2] = 0.0;
  } else {
    // Uniform trapezoid over +-4 sigma with Gaussian weights.
    g.nodes.resize(m);
    g.weights.resize(m);
    const double span = 4.0 * spec.sigma_kv;
    const double h = m > 1 ? 2.0 * span / (m - 1) : 0.0;
    double total = 0.0;
    for (int i = 0; i < m; ++i) {
      g.nodes[i] = -span + h * i;
      const double u = spec.sigma_kv > 0.0 ? g.nodes[i] / spec.sigma_kv : 0.0;
      double w = std::exp(-0.5 * u * u);
      if (i == 0 || i == m - 1) w *= 0.5;
      g.weights[i] = w;
      total += w;
    }
    for (double& w : g.weights) w /= total;
    g.nodes[m / 2] = 0.0;
  }
  return g;
}

/// Model-aware grid construction.  For the auto_clustered rule the feature
/// centers are the velocity classes where either laser crosses either
/// excited level, and the grading width tracks the power-broadened response:
/// Gamma + 2 sqrt(sum (w Omega)^2) + b1 + b2 + max analysis frequency.
inline VelocityGrid make_grid(const DopplerSpec& spec, const Model& m) {
  if (!spec.enabled || spec.rule != DopplerSpec::Rule::auto_clustered) return make_grid(spec);
  if (spec.n_classes < 3) throw config_error("make_grid: need at least 3 velocity classes");
  if (spec.n_classes % 2 == 0) throw config_error("make_grid: class count must be odd");

  std::vector<double> centers{m.laser1.detuning, m.laser2.detuning};
  if (m.atom.n_levels == 4) {
    centers.push_back(m.laser1.detuning - m.atom.excited_splitting);
    centers.push_back(m.laser2.detuning - m.atom.excited_splitting);
  }
  std::sort(centers.begin(), centers.end());
  centers.erase(std::unique(centers.begin(), centers.end(),
                            [&](double a, double b) {
                              return std::abs(a - b) < 0.1 * m.atom.gamma_exc;
                            }),
                centers.end());

  const double w1 = std::max(m.atom.dipole_weights[0],
                             m.atom.n_levels == 4 ? m.atom.dipole_weights[2] : 0.0);
  const double w2 = std::max(m.atom.dipole_weights[1],
                             m.atom.n_levels == 4 ? m.atom.dipole_weights[3] : 0.0);
  const double drive = std::hypot(w1 * m.laser1.rabi, w2 * m.laser2.rabi);
  double omega_max = 0.0;
  for (double w : m.grid.frequencies) omega_max = std::max(omega_max, w);
  const double width = m.atom.gamma_exc + 2.0 * drive + m.laser1.linewidth_b +
                       m.laser2.linewidth_b + omega_max;
  return make_clustered_grid(spec.n_classes, spec.sigma_kv, std::move(centers), width);
}

}  // namespace eitnoise
