#pragma once

// Orchestration of the full spectrum computation:
//
//   1. per velocity class j: generator, steady state;
//   2. per ordered class pair (j,k): equal-time covariance, aggregated into
//      weighted rows  c2row(j) = sum_k w_k c2(j,k);
//   3. per analysis frequency: resolvent solves against the projection
//      vectors, accumulation of the weighted quadratic forms.
//
// The pair loop is the primary parallel axis.  Reductions run in fixed index
// order, so results are bit-stable for any worker count.  Rows can be
// checkpointed to disk and are skipped on restart when the model hash
// matches.

#include <atomic>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "eitnoise/doppler.hpp"
#include "eitnoise/spectra.hpp"

namespace eitnoise {

struct EngineOptions {
  unsigned workers = 0;  // 0 = hardware concurrency
  std::string checkpoint_path;
  std::function<void(const std::string&)> progress;
};

namespace detail {

inline unsigned resolve_workers(unsigned requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? hw : 1;
}

/// Static-partition parallel loop; each index is processed exactly once and
/// results must be written to caller-owned slots.
template <typename Fn>
inline void parallel_for(size_t count, unsigned workers, Fn&& fn) {
  workers = resolve_workers(workers);
  if (workers <= 1 || count <= 1) {
    for (size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<size_t> next{0};
  auto body = [&] {
    for (size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) fn(i);
  };
  std::vector<std::thread> pool;
  const unsigned n = std::min<size_t>(workers, count);
  pool.reserve(n);
  for (unsigned t = 0; t < n; ++t) pool.emplace_back(body);
  for (auto& th : pool) th.join();
}

inline uint64_t fnv1a64(const void* data, size_t size, uint64_t h = 1469598103934665603ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

inline uint64_t model_hash(const Model& m, const VelocityGrid& grid) {
  std::vector<double> buf{double(m.atom.n_levels), m.atom.gamma_exc,     m.atom.gamma_ground,
                          m.atom.excited_splitting, m.laser1.rabi,        m.laser1.detuning,
                          m.laser1.linewidth_b,     m.laser2.rabi,        m.laser2.detuning,
                          m.laser2.linewidth_b,     m.doppler.cross_class ? 1.0 : 0.0};
  for (double w : m.atom.dipole_weights) buf.push_back(w);
  for (const auto& row : m.atom.branching)
    for (double f : row) buf.push_back(f);
  for (double f : m.atom.transit_equilibrium) buf.push_back(f);
  buf.insert(buf.end(), grid.nodes.begin(), grid.nodes.end());
  buf.insert(buf.end(), grid.weights.begin(), grid.weights.end());
  return fnv1a64(buf.data(), buf.size() * sizeof(double));
}

/// Fixed-record checkpoint of the aggregated covariance rows.
class RowCheckpoint {
 public:
  RowCheckpoint(const std::string& path, uint64_t hash, size_t rows, int dim)
      : path_(path), hash_(hash), rows_(rows), dim_(dim) {
    if (path_.empty()) return;
    std::ifstream in(path_, std::ios::binary);
    if (in) {
      Header h{};
      in.read(reinterpret_cast<char*>(&h), sizeof(h));
      if (in && h.magic == kMagic && h.hash == hash_ && h.rows == rows_ && h.dim == uint32_t(dim_))
        valid_ = true;
    }
    if (!valid_) {
      std::ofstream out(path_, std::ios::binary | std::ios::trunc);
      Header h{kMagic, hash_, uint32_t(rows_), uint32_t(dim_)};
      out.write(reinterpret_cast<const char*>(&h), sizeof(h));
      const std::vector<char> zero(record_size(), 0);
      for (size_t j = 0; j < rows_; ++j) out.write(zero.data(), zero.size());
      valid_ = out.good();
    }
  }

  bool load(size_t j, CMatrix& row) const {
    if (path_.empty() || !valid_) return false;
    std::ifstream in(path_, std::ios::binary);
    if (!in) return false;
    in.seekg(offset(j));
    char flag = 0;
    in.read(&flag, 1);
    if (!in || flag != 1) return false;
    row.resize(dim_, dim_);
    in.read(reinterpret_cast<char*>(row.data()), dim_ * dim_ * sizeof(Complex));
    return in.good();
  }

  void store(size_t j, const CMatrix& row) const {
    if (path_.empty() || !valid_) return;
    std::fstream out(path_, std::ios::binary | std::ios::in | std::ios::out);
    if (!out) return;
    out.seekp(offset(j) + 1);
    out.write(reinterpret_cast<const char*>(row.data()), dim_ * dim_ * sizeof(Complex));
    out.seekp(offset(j));
    const char flag = 1;
    out.write(&flag, 1);
  }

 private:
  struct Header {
    uint64_t magic;
    uint64_t hash;
    uint32_t rows;
    uint32_t dim;
  };
  static constexpr uint64_t kMagic = 0x454954434b505431ull;  // "EITCKPT1"

  size_t record_size() const { return 1 + size_t(dim_) * dim_ * sizeof(Complex); }
  std::streamoff offset(size_t j) const {
    return std::streamoff(sizeof(Header) + j * record_size());
  }

  std::string path_;
  uint64_t hash_;
  size_t rows_;
  int dim_;
  bool valid_ = false;
};

}  // namespace detail

/// Full Doppler-averaged spectrum over the model's analysis grid.
inline SpectrumResult doppler_average_spectra(const Model& model, const VelocityGrid& grid,
                                              const std::vector<double>& freqs,
                                              const EngineOptions& opt = {}) {
  const size_t M = grid.size();
  const StateIndex idx(model.atom.n_levels);
  const int dim = idx.dim();
  auto note = [&](const std::string& msg) {
    if (opt.progress) opt.progress(msg);
  };

  std::vector<GeneratorSet> gens(M);
  std::vector<CVector> xbars(M);
  for (size_t j = 0; j < M; ++j) {
    gens[j] = make_generator(model, grid.nodes[j]);
    try {
      xbars[j] = steady_state(gens[j]);
    } catch (const solver_error& e) {
      throw solver_error("velocity class " + std::to_string(j) + ": " + e.what());
    }
  }
  note("steady states ready (" + std::to_string(M) + " classes)");

  detail::RowCheckpoint ckpt(opt.checkpoint_path, detail::model_hash(model, grid), M, dim);

  // Aggregated covariance rows c2row(j) = sum_k w_k c2(j,k).
  std::vector<CMatrix> rows(M);
  for (size_t j = 0; j < M; ++j) {
    if (ckpt.load(j, rows[j])) {
      note("covariance row " + std::to_string(j + 1) + "/" + std::to_string(M) +
           " restored from checkpoint");
      continue;
    }
    std::vector<CMatrix> blocks(M);
    std::string failure;
    std::mutex failure_mutex;
    detail::parallel_for(M, opt.workers, [&](size_t k) {
      if (!model.doppler.cross_class && k != j) {
        blocks[k] = CMatrix::Zero(dim, dim);
        return;
      }
      try {
        blocks[k] = equal_time_covariance(gens[j], gens[k], xbars[j], xbars[k]).c2;
      } catch (const solver_error& e) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (failure.empty())
          failure = "pair (" + std::to_string(j) + "," + std::to_string(k) + "): " + e.what();
      }
    });
    if (!failure.empty()) throw solver_error(failure);
    rows[j] = CMatrix::Zero(dim, dim);
    for (size_t k = 0; k < M; ++k) rows[j] += grid.weights[k] * blocks[k];
    ckpt.store(j, rows[j]);
    note("covariance row " + std::to_string(j + 1) + "/" + std::to_string(M) + " done");
  }

  SpectrumResult res;
  res.frequencies = freqs;
  res.model = model;
  const size_t nf = freqs.size();
  res.S11.resize(nf);
  res.S22.resize(nf);
  res.S12.resize(nf);

  const Eigen::VectorXd m1 = im_projection(model.atom, 1);
  const Eigen::VectorXd m2 = im_projection(model.atom, 2);
  std::vector<CVector> row_m1(M), row_m2(M);
  for (size_t j = 0; j < M; ++j) {
    row_m1[j] = rows[j] * m1.cast<Complex>();
    row_m2[j] = rows[j] * m2.cast<Complex>();
  }
  std::string failure;
  std::mutex failure_mutex;
  detail::parallel_for(nf, opt.workers, [&](size_t fi) {
    try {
      // W(w) m_q = sum_j w_j [-iw + A1(v_j)]^{-1} c2row(j) m_q
      CVector wm1 = CVector::Zero(dim), wm2 = CVector::Zero(dim);
      for (size_t j = 0; j < M; ++j) {
        CMatrix shifted = gens[j].A1;
        shifted.diagonal().array() -= Complex(0.0, freqs[fi]);
        Eigen::PartialPivLU<CMatrix> lu(shifted);
        wm1 += grid.weights[j] * lu.solve(row_m1[j]);
        wm2 += grid.weights[j] * lu.solve(row_m2[j]);
      }
      auto quad = [&](const Eigen::VectorXd& a, const CVector& wb) {
        Complex s(0.0, 0.0);
        for (int i = 0; i < a.size(); ++i) s += a[i] * wb[i];
        return s;
      };
      const Complex k11 = quad(m1, wm1), k22 = quad(m2, wm2);
      const Complex k12 = quad(m1, wm2), k21 = quad(m2, wm1);
      res.S11[fi] = 0.25 * (k11 + std::conj(k11)).real();
      res.S22[fi] = 0.25 * (k22 + std::conj(k22)).real();
      res.S12[fi] = 0.25 * (k12 + std::conj(k21)).real();
    } catch (const std::exception& e) {
      std::lock_guard<std::mutex> lock(failure_mutex);
      if (failure.empty())
        failure = "frequency sample " + std::to_string(fi) + ": " + e.what();
    }
  });
  if (!failure.empty()) throw solver_error(failure);
  note("frequency sweep done (" + std::to_string(nf) + " samples)");

  auto [ss, sd] = sum_diff(res.S11, res.S22, res.S12);
  res.Ss = std::move(ss);
  res.Sd = std::move(sd);
  res.C = correlation_coefficient(res.S11, res.S22, res.S12);
  return res;
}

/// Convenience entry point: grid from the model's Doppler spec, frequencies
/// from its analysis grid.
inline SpectrumResult compute_spectrum(const Model& model, const EngineOptions& opt = {}) {
  const Model m = validate(model);
  return doppler_average_spectra(m, make_grid(m.doppler, m), m.grid.frequencies, opt);
}

}  // namespace eitnoise
