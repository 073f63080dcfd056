#pragma once

// Two-time spectra from equal-time covariances via the regression theorem.
//
// The lag dependence of c2(tau) = <x(t+tau) x(t)+> - <x><x>+ follows the mean
// generator: d c2/d tau = -A1 c2, so its one-sided Laplace transform is
// Ghat(s) = [s + A1]^{-1} c2 and the two-sided Fourier transform at analysis
// frequency w is Ghat(-iw) + Ghat(-iw)+.
//
// Detected intensity fluctuations are, to first order in the medium coupling,
// dI_q ~ -Im p_q with p_q the dipole-weighted sum of the slow coherences
// radiating into field q.  Writing m_q for the projection onto
// p_q - p_q^* (the direct coherence indices minus their conjugate partners),
// every spectrum reduces to a quadratic form in the spectral matrix
// F(w) = W(w) + W(w)+ of the Doppler-weighted resolvent sum W:
//
//   S_qq'(w) = (1/4) Re[ m_q^T F(w) m_q' ],
//
// which carries the sign structure of the working formula: conjugate-pair
// products enter with +, non-conjugate products with -.  All spectra are in
// normalized units (the field/medium prefactor is set to one).

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <vector>

#include "eitnoise/stationary.hpp"

namespace eitnoise {

/// Below this product of auto-spectra the correlation coefficient is emitted
/// as a missing value (NaN) instead of a division result.
inline constexpr double kCorrelationFloor = 1e-30;

/// Sampled spectra over the analysis grid.  C uses NaN as missing-value
/// marker where S11*S22 is numerically zero.
struct SpectrumResult {
  std::vector<double> frequencies;  // rad/s
  std::vector<double> S11, S22, S12, Ss, Sd, C;
  Model model;  // input echo
};

/// Laplace-domain correlation Ghat(-iw) = [-iw + A1(v_j)]^{-1} c2(v_j, v_k).
inline CMatrix laplace_correlation(const GeneratorSet& gen_j, const CMatrix& c2_jk,
                                   double omega) {
  const int dim = gen_j.idx.dim();
  if (c2_jk.rows() != dim || c2_jk.cols() != dim)
    throw std::invalid_argument("laplace_correlation: dimension mismatch");
  CMatrix shifted = gen_j.A1;
  shifted.diagonal().array() -= Complex(0.0, omega);
  Eigen::PartialPivLU<CMatrix> lu(shifted);
  CMatrix ghat = lu.solve(c2_jk);
  ghat += lu.solve(c2_jk - shifted * ghat);
  const double cnorm = c2_jk.norm();
  const double resid = (shifted * ghat - c2_jk).norm();
  if (!ghat.allFinite() || (cnorm > 0.0 && !(resid <= 1e-10 * cnorm)))
    throw solver_error("laplace_correlation: resolvent solve failed (degenerate b = gamma = 0 "
                       "limit?); relative residual " +
                       std::to_string(resid / std::max(cnorm, 1e-300)) + " at omega = " +
                       std::to_string(omega) + "; " + detail::describe(gen_j));
  return ghat;
}

/// Dipole projection d_q: weights of the slow coherences radiating into
/// field q (q = 1 or 2).  One term for 3 levels, two for 4 levels.
inline Eigen::VectorXd dipole_projection(const AtomConfig& atom, int q) {
  if (q != 1 && q != 2) throw std::invalid_argument("dipole_projection: q must be 1 or 2");
  StateIndex idx(atom.n_levels);
  Eigen::VectorXd d = Eigen::VectorXd::Zero(idx.dim());
  d[idx.element(q, 0)] = atom.dipole_weights[q - 1];
  if (atom.n_levels == 4) d[idx.element(q, 3)] = atom.dipole_weights[q + 1];
  return d;
}

/// Signed projection m_q = d_q - bar(d_q): d_q on the direct coherence
/// indices, -d_q on their conjugate partners.  Applying m_q to x yields
/// p_q - p_q^* = 2i Im p_q.
inline Eigen::VectorXd im_projection(const AtomConfig& atom, int q) {
  StateIndex idx(atom.n_levels);
  const Eigen::VectorXd d = dipole_projection(atom, q);
  Eigen::VectorXd m = d;
  for (int a = 0; a < idx.dim(); ++a)
    if (d[a] != 0.0) m[idx.conjugate(a)] -= d[a];
  return m;
}

/// Complex quadratic forms K(q,q') = (1/4) m_q^T (W + W+) m_q' of a weighted
/// resolvent sum W.  Re K are the symmetrized spectra; the imaginary part of
/// the diagonal must vanish to rounding.
inline Eigen::Matrix2cd cross_spectrum_terms(const CMatrix& W, const AtomConfig& atom) {
  const Eigen::VectorXd m[2] = {im_projection(atom, 1), im_projection(atom, 2)};
  const CVector wm[2] = {W * m[0].cast<Complex>(), W * m[1].cast<Complex>()};
  auto quad = [&](int q, int qp) {  // m_q^T W m_qp, no conjugation (m real)
    Complex s(0.0, 0.0);
    for (int i = 0; i < m[q].size(); ++i) s += m[q][i] * wm[qp][i];
    return s;
  };
  Eigen::Matrix2cd K;
  for (int q = 0; q < 2; ++q)
    for (int qp = 0; qp < 2; ++qp)
      K(q, qp) = 0.25 * (quad(q, qp) + std::conj(quad(qp, q)));
  return K;
}

/// Single-pair contribution: assembles S11, S22, S12 (real parts) from the
/// Laplace term of one ordered velocity-class pair, weighted w_j * w_k.
struct CrossSpectrumContribution {
  double S11, S22, S12;
};

inline CrossSpectrumContribution assemble_cross_spectrum(const CMatrix& laplace_term,
                                                         const AtomConfig& atom,
                                                         double pair_weight) {
  const Eigen::Matrix2cd K = cross_spectrum_terms(laplace_term, atom);
  return {pair_weight * K(0, 0).real(), pair_weight * K(1, 1).real(),
          pair_weight * K(0, 1).real()};
}

/// Normalized correlation coefficient C = S12 / sqrt(S11 S22), pointwise.
/// Emits NaN where the denominator is numerically zero; rejects auto-spectra
/// below -1e-12 as an internal-consistency failure.
inline std::vector<double> correlation_coefficient(const std::vector<double>& S11,
                                                   const std::vector<double>& S22,
                                                   const std::vector<double>& S12) {
  if (S11.size() != S22.size() || S11.size() != S12.size())
    throw std::invalid_argument("correlation_coefficient: length mismatch");
  std::vector<double> C(S11.size());
  for (size_t i = 0; i < S11.size(); ++i) {
    if (S11[i] < -1e-12 || S22[i] < -1e-12)
      throw solver_error("correlation_coefficient: negative auto-spectrum at sample " +
                         std::to_string(i) + " (S11 = " + std::to_string(S11[i]) +
                         ", S22 = " + std::to_string(S22[i]) + ")");
    const double prod = S11[i] * S22[i];
    C[i] = prod > kCorrelationFloor ? S12[i] / std::sqrt(prod)
                                    : std::numeric_limits<double>::quiet_NaN();
  }
  return C;
}

/// Sum/difference spectra: Ss = S11 + S22 + 2 S12, Sd = S11 + S22 - 2 S12.
inline std::pair<std::vector<double>, std::vector<double>> sum_diff(
    const std::vector<double>& S11, const std::vector<double>& S22,
    const std::vector<double>& S12) {
  if (S11.size() != S22.size() || S11.size() != S12.size())
    throw std::invalid_argument("sum_diff: length mismatch");
  std::vector<double> Ss(S11.size()), Sd(S11.size());
  for (size_t i = 0; i < S11.size(); ++i) {
    Ss[i] = S11[i] + S22[i] + 2.0 * S12[i];
    Sd[i] = S11[i] + S22[i] - 2.0 * S12[i];
  }
  return {Ss, Sd};
}

}  // namespace eitnoise
