#pragma once

// Construction of the rotating-frame Bloch generator for one velocity class.
//
// The slow state vector x (see indexing.hpp) obeys, for frozen laser phases,
//
//     dx/dt = A x + y0,
//
// where A carries the Hamiltonian couplings, optical detunings shifted by
// -kv for both (co-propagating, equal-wavenumber) lasers, spontaneous decay
// and the uniform transit relaxation gamma; y0 feeds the ground states at
// rate gamma.  Averaging the phase diffusion (Ito) yields the mean-flow
// generator
//
//     d<x>/dt = -A1 <x> + y0,     A1 = b1 N1^2 + b2 N2^2 - A,
//
// with N1, N2 the diagonal phase-weight matrices of indexing.hpp.

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <utility>

#include "eitnoise/indexing.hpp"
#include "eitnoise/model.hpp"

namespace eitnoise {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using IVector = Eigen::VectorXi;

/// Bloch matrix, phase weights, averaged generator and source for one
/// velocity class.  b1/b2 are carried along for the covariance solver.
struct GeneratorSet {
  StateIndex idx{3};
  CMatrix A;   // rotating-frame Bloch matrix: dx = (A x + y0) dt at b = 0
  IVector n1;  // diagonal of N1
  IVector n2;  // diagonal of N2
  CMatrix A1;  // b1 N1^2 + b2 N2^2 - A
  CVector y0;
  double kv = 0.0;
  double b1 = 0.0;
  double b2 = 0.0;
};

/// Largest violation of the physical-state structure of x: populations real
/// and non-negative, conjugate-partner symmetry, unit trace.  Physical
/// states stay below ~1e-10 under the tested dynamics.
inline double physical_state_error(const CVector& x, const StateIndex& idx) {
  double err = 0.0;
  Complex trace(0.0, 0.0);
  for (int k = 0; k < idx.levels(); ++k) {
    const Complex p = x[idx.population(k)];
    err = std::max(err, std::abs(p.imag()));
    err = std::max(err, std::max(0.0, -p.real()));
    trace += p;
  }
  err = std::max(err, std::abs(trace - Complex(1.0, 0.0)));
  for (int a = 0; a < idx.dim(); ++a)
    err = std::max(err, std::abs(x[a] - std::conj(x[idx.conjugate(a)])));
  return err;
}

/// Diagonals of the phase-weight matrices N1, N2 (entries in {-1, 0, +1}).
inline std::pair<IVector, IVector> phase_weight_matrices(const AtomConfig& atom) {
  StateIndex idx(atom.n_levels);
  IVector n1(idx.dim()), n2(idx.dim());
  for (int a = 0; a < idx.dim(); ++a) {
    n1[a] = idx.phase1(a);
    n2[a] = idx.phase2(a);
  }
  return {n1, n2};
}

/// Rotating-frame Bloch matrix A and transit source y0 for velocity shift kv.
inline std::pair<CMatrix, CVector> build_bloch_matrix(const AtomConfig& atom,
                                                      const LaserField& l1,
                                                      const LaserField& l2,
                                                      double kv) {
  if (!std::isfinite(kv)) throw config_error("build_bloch_matrix: non-finite kv");
  const StateIndex idx(atom.n_levels);
  const int n = atom.n_levels;
  const int dim = idx.dim();

  // Rotating-frame Hamiltonian (rad/s), real symmetric.  Diagonal relative to
  // ground |1>; the frame removes both carriers so only detunings remain, and
  // kv drops out of the two-photon element.
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(n, n);
  H(0, 0) = -(l1.detuning - kv);
  H(2, 2) = l2.detuning - l1.detuning;
  if (n == 4) H(3, 3) = -(l1.detuning - kv) + atom.excited_splitting;
  auto couple = [&H](int g, int e, double rabi) {
    H(g, e) -= rabi;
    H(e, g) -= rabi;
  };
  couple(1, 0, atom.dipole_weights[0] * l1.rabi);
  couple(2, 0, atom.dipole_weights[1] * l2.rabi);
  if (n == 4) {
    couple(1, 3, atom.dipole_weights[2] * l1.rabi);
    couple(2, 3, atom.dipole_weights[3] * l2.rabi);
  }

  struct Channel {
    int e, g;
    double rate;
  };
  std::vector<Channel> channels;
  const int n_exc = n == 4 ? 2 : 1;
  for (int ei = 0; ei < n_exc; ++ei) {
    const int e = ei == 0 ? 0 : 3;
    for (int g = 1; g <= 2; ++g) {
      const double rate = atom.branching[ei][g - 1] * atom.gamma_exc;
      if (rate > 0.0) channels.push_back({e, g, rate});
    }
  }

  // Column b of A is the image of the basis element E_{rc} under the
  // Liouvillian: -i[H, E] + sum_ch (L E L+ - 1/2 {L+L, E}) - gamma E.
  const Complex I(0.0, 1.0);
  CMatrix A = CMatrix::Zero(dim, dim);
  Eigen::MatrixXcd img(n, n);
  for (int b = 0; b < dim; ++b) {
    const int r = idx.row(b), c = idx.col(b);
    img.setZero();
    for (int p = 0; p < n; ++p) {
      img(p, c) -= I * H(p, r);
      img(r, p) += I * H(c, p);
    }
    for (const Channel& ch : channels) {
      if (r == ch.e && c == ch.e) img(ch.g, ch.g) += ch.rate;
      img(r, c) -= 0.5 * ch.rate * ((r == ch.e ? 1.0 : 0.0) + (c == ch.e ? 1.0 : 0.0));
    }
    img(r, c) -= atom.gamma_ground;
    for (int a = 0; a < dim; ++a) A(a, b) = img(idx.row(a), idx.col(a));
  }

  CVector y0 = CVector::Zero(dim);
  y0[idx.population(1)] = atom.gamma_ground * atom.transit_equilibrium[0];
  y0[idx.population(2)] = atom.gamma_ground * atom.transit_equilibrium[1];
  return {std::move(A), std::move(y0)};
}

/// Averaged generator A1 = b1 N1^2 + b2 N2^2 - A.
inline CMatrix build_a1(const CMatrix& A, const IVector& n1, const IVector& n2,
                        const LaserField& l1, const LaserField& l2) {
  if (A.rows() != A.cols() || n1.size() != A.rows() || n2.size() != A.rows())
    throw std::invalid_argument("build_a1: dimension mismatch");
  CMatrix A1 = -A;
  for (int a = 0; a < A.rows(); ++a)
    A1(a, a) += l1.linewidth_b * double(n1[a] * n1[a]) + l2.linewidth_b * double(n2[a] * n2[a]);
  return A1;
}

/// Everything the stationary and spectral stages need for one velocity class.
inline GeneratorSet make_generator(const Model& m, double kv) {
  GeneratorSet g;
  g.idx = StateIndex(m.atom.n_levels);
  auto [n1, n2] = phase_weight_matrices(m.atom);
  auto [A, y0] = build_bloch_matrix(m.atom, m.laser1, m.laser2, kv);
  g.n1 = std::move(n1);
  g.n2 = std::move(n2);
  g.A1 = build_a1(A, g.n1, g.n2, m.laser1, m.laser2);
  g.A = std::move(A);
  g.y0 = std::move(y0);
  g.kv = kv;
  g.b1 = m.laser1.linewidth_b;
  g.b2 = m.laser2.linewidth_b;
  return g;
}

}  // namespace eitnoise
