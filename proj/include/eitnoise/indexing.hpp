#pragma once

// Frozen layout of the vectorized density matrix.  Every module maps state
// components through this table; nothing else may define its own ordering.
//
// Levels: 0 = excited |0>, 1 = ground |1>, 2 = ground |2>, 3 = excited |0'>.
// The state vector x of an n-level atom has n^2 entries:
//
//   indices [0, n)      populations sigma_kk in level order,
//   indices [n, n^2)    coherences sigma_rc (r != c), ordered pairs (r, c)
//                       in lexicographic order.
//
// 3-level map:  0 s00 | 1 s11 | 2 s22 | 3 s01 | 4 s02 | 5 s10 | 6 s12
//               7 s20 | 8 s21
// 4-level map:  0 s00 | 1 s11 | 2 s22 | 3 s33 | 4 s01 | 5 s02 | 6 s03
//               7 s10 | 8 s12 | 9 s13 | 10 s20 | 11 s21 | 12 s23 | 13 s30
//               14 s31 | 15 s32
//
// sigma_rc are the slowly varying elements: sigma_rc = rho_rc *
// exp(i (v_r - v_c)) with level frame phases v_0 = v_0' = 0,
// v_1 = -(w1 t + phi1), v_2 = -(w2 t + phi2).  The per-element counts of the
// laser phases (phase1, phase2) below are the diagonals of the phase-weight
// matrices N1, N2: optical coherences driven by laser j carry +-1 in N_j and
// 0 in the other, the ground coherence carries opposite-signed entries in N1
// and N2, populations and the excited-excited coherence carry 0.  Conjugate
// partners carry opposite signs throughout.

#include <stdexcept>

#include "eitnoise/model.hpp"

namespace eitnoise {

class StateIndex {
 public:
  explicit StateIndex(int n_levels) : n_(n_levels) {
    if (n_levels != 3 && n_levels != 4)
      throw std::invalid_argument("StateIndex: n_levels must be 3 or 4");
    int pos = n_;
    for (int r = 0; r < n_; ++r)
      for (int c = 0; c < n_; ++c) {
        if (r == c) {
          index_of_[r][c] = r;
        } else {
          index_of_[r][c] = pos;
          row_[pos] = r;
          col_[pos] = c;
          ++pos;
        }
      }
    for (int k = 0; k < n_; ++k) {
      row_[k] = k;
      col_[k] = k;
    }
  }

  int levels() const { return n_; }
  int dim() const { return n_ * n_; }

  /// Index of the population sigma_kk.
  int population(int level) const { return check(level), level; }

  /// Index of the element sigma_rc (r and c may be equal).
  int element(int r, int c) const { return check(r), check(c), index_of_[r][c]; }

  int row(int idx) const { return range(idx), row_[idx]; }
  int col(int idx) const { return range(idx), col_[idx]; }

  /// Index of the conjugate partner: sigma_cr for sigma_rc.
  int conjugate(int idx) const { return element(col(idx), row(idx)); }

  /// Net count of exp(i phi1) factors carried by element idx (diagonal of N1).
  int phase1(int idx) const { return level_phase1(row(idx)) - level_phase1(col(idx)); }

  /// Net count of exp(i phi2) factors carried by element idx (diagonal of N2).
  int phase2(int idx) const { return level_phase2(row(idx)) - level_phase2(col(idx)); }

 private:
  static int level_phase1(int level) { return level == 1 ? -1 : 0; }
  static int level_phase2(int level) { return level == 2 ? -1 : 0; }

  void check(int level) const {
    if (level < 0 || level >= n_) throw std::out_of_range("StateIndex: level out of range");
  }
  void range(int idx) const {
    if (idx < 0 || idx >= dim()) throw std::out_of_range("StateIndex: index out of range");
  }

  int n_;
  int index_of_[4][4] = {};
  int row_[16] = {};
  int col_[16] = {};
};

}  // namespace eitnoise
