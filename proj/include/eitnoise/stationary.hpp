#pragma once

// Steady state and equal-time second-order statistics.
//
// The mean flow d<x> = (-A1 <x> + y0) dt has the stationary solution
// xbar = A1^{-1} y0.  The second moment G(j,k) = <x(v_j) x(v_k)+> of two
// velocity classes driven by the same Wiener phases satisfies, in steady
// state,
//
//   A1(v_j) G + G A1(v_k)+ - 2 b1 N1 G N1 - 2 b2 N2 G N2
//       = y0 xbar_k+ + xbar_j y0+,
//
// and the equal-time covariance is c2 = G - xbar_j xbar_k+.  The equation is
// solved exactly by column-major vectorization into an (n^2 x n^2)-sized
// dense complex system (81x81 for 3 levels, 256x256 for 4 levels).

#include <Eigen/Dense>
#include <sstream>

#include "eitnoise/liouville.hpp"

namespace eitnoise {

struct CovarianceBlock {
  CMatrix c2;  // <x_j x_k+> - <x_j><x_k>+
  double kv_j = 0.0;
  double kv_k = 0.0;
};

namespace detail {

inline std::string describe(const GeneratorSet& g) {
  std::ostringstream os;
  os << "kv=" << g.kv << " rad/s, b1=" << g.b1 << ", b2=" << g.b2 << ", dim=" << g.idx.dim();
  return os.str();
}

}  // namespace detail

/// Stationary mean state xbar = A1^{-1} y0.
///
/// Guarantees a relative residual below 1e-10 and a physical population block
/// (real, non-negative, trace one within 1e-10); otherwise throws
/// solver_error with the offending parameters.
inline CVector steady_state(const GeneratorSet& gen) {
  const double y0norm = gen.y0.norm();
  if (y0norm == 0.0)
    throw solver_error("steady_state: zero source vector (gamma = 0 has no unique steady state); " +
                       detail::describe(gen));
  Eigen::PartialPivLU<CMatrix> lu(gen.A1);
  if (lu.rcond() < 1e-14)
    throw solver_error("steady_state: A1 ill-conditioned (estimate > 1e14); " +
                       detail::describe(gen));
  CVector x = lu.solve(gen.y0);
  x += lu.solve(gen.y0 - gen.A1 * x);  // one refinement pass
  const double resid = (gen.A1 * x - gen.y0).norm() / y0norm;
  if (!(resid <= 1e-10))
    throw solver_error("steady_state: residual " + std::to_string(resid) + " above 1e-10; " +
                       detail::describe(gen));
  double trace = 0.0;
  for (int k = 0; k < gen.idx.levels(); ++k) {
    const Complex p = x[gen.idx.population(k)];
    if (std::abs(p.imag()) > 1e-10 || p.real() < -1e-10)
      throw solver_error("steady_state: unphysical population block; " + detail::describe(gen));
    trace += p.real();
  }
  if (std::abs(trace - 1.0) > 1e-10)
    throw solver_error("steady_state: populations do not sum to 1; " + detail::describe(gen));
  return x;
}

/// Equal-time covariance c2 between the state vectors of velocity classes j
/// and k (j == k allowed).  Both generators must share b1, b2 and dimension.
inline CovarianceBlock equal_time_covariance(const GeneratorSet& gen_j,
                                             const GeneratorSet& gen_k,
                                             const CVector& xbar_j,
                                             const CVector& xbar_k) {
  const int dim = gen_j.idx.dim();
  if (gen_k.idx.dim() != dim || xbar_j.size() != dim || xbar_k.size() != dim)
    throw std::invalid_argument("equal_time_covariance: dimension mismatch");
  const double b1 = gen_j.b1, b2 = gen_j.b2;

  if (b1 == 0.0 && b2 == 0.0) {
    if (gen_j.y0.norm() == 0.0 || gen_k.y0.norm() == 0.0)
      throw solver_error(
          "equal_time_covariance: degenerate limit b1 = b2 = gamma = 0, vectorized operator "
          "singular; j: " + detail::describe(gen_j) + "; k: " + detail::describe(gen_k));
    // No noise source: G = xbar_j xbar_k+ solves the steady equation
    // identically and the covariance is exactly zero.
    CovarianceBlock out;
    out.c2 = CMatrix::Zero(dim, dim);
    out.kv_j = gen_j.kv;
    out.kv_k = gen_k.kv;
    return out;
  }

  // L vec(G) = vec(RHS) with L = I (x) A1_j + conj(A1_k) (x) I
  //            - 2 b1 N1 (x) N1 - 2 b2 N2 (x) N2   (column-major vec).
  const int dim2 = dim * dim;
  CMatrix L = CMatrix::Zero(dim2, dim2);
  for (int c = 0; c < dim; ++c)
    L.block(c * dim, c * dim, dim, dim) += gen_j.A1;
  for (int c = 0; c < dim; ++c)
    for (int r = 0; r < dim; ++r)
      if (gen_k.A1(c, r) != Complex(0.0, 0.0))  // conj(A1_k)(c,r) weights block (c,r)
        L.block(c * dim, r * dim, dim, dim) +=
            std::conj(gen_k.A1(c, r)) * CMatrix::Identity(dim, dim);
  for (int c = 0; c < dim; ++c)
    for (int r = 0; r < dim; ++r) {
      const double w = -2.0 * (b1 * double(gen_j.n1[r] * gen_k.n1[c]) +
                               b2 * double(gen_j.n2[r] * gen_k.n2[c]));
      if (w != 0.0) L(c * dim + r, c * dim + r) += w;
    }

  const CMatrix rhs_mat =
      gen_j.y0 * xbar_k.adjoint() + xbar_j * gen_k.y0.adjoint();
  Eigen::Map<const CVector> rhs(rhs_mat.data(), dim2);

  Eigen::PartialPivLU<CMatrix> lu(L);
  CVector g = lu.solve(rhs);
  g += lu.solve(rhs - L * g);
  const double rhs_norm = rhs.norm();
  const double resid = (L * g - rhs).norm();
  const bool bad = !g.allFinite() || lu.rcond() < 1e-14 ||
                   (rhs_norm > 0.0 && !(resid <= 1e-10 * rhs_norm)) ||
                   (rhs_norm == 0.0 && !(g.norm() <= 1e-10));
  if (bad)
    throw solver_error(
        "equal_time_covariance: singular or ill-conditioned vectorized operator "
        "(degenerate limit b1 = b2 = gamma = 0?); relative residual " +
        std::to_string(resid / std::max(rhs_norm, 1e-300)) + "; j: " + detail::describe(gen_j) +
        "; k: " + detail::describe(gen_k));

  CovarianceBlock out;
  out.c2 = Eigen::Map<const CMatrix>(g.data(), dim, dim) - xbar_j * xbar_k.adjoint();
  out.kv_j = gen_j.kv;
  out.kv_k = gen_k.kv;
  return out;
}

}  // namespace eitnoise
