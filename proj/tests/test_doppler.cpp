#include <catch2/catch.hpp>

#include <cmath>
#include <filesystem>
#include <random>

#include "eitnoise/doppler.hpp"
#include "eitnoise/engine.hpp"

using namespace eitnoise;

namespace {

Model base_model() {  // units of Gamma = 1
  Model m;
  m.atom.gamma_exc = 1.0;
  m.atom.gamma_ground = 0.02;
  m.laser1 = {1, 0.5, 0.0, 0.08};
  m.laser2 = {2, 0.56, 0.0, 0.08};
  for (int i = 1; i <= 8; ++i) m.grid.frequencies.push_back(0.1 * i);
  return m;
}

double quad_sum(const VelocityGrid& g, double (*f)(double)) {
  double s = 0.0;
  for (size_t i = 0; i < g.size(); ++i) s += g.weights[i] * f(g.nodes[i]);
  return s;
}

}  // namespace

TEST_CASE("disabled Doppler spec collapses to the single resting class") {
  DopplerSpec spec;
  spec.enabled = false;
  const VelocityGrid g = make_grid(spec);
  REQUIRE(g.size() == 1);
  REQUIRE(g.nodes[0] == 0.0);
  REQUIRE(g.weights[0] == 1.0);
}

TEST_CASE("three-node Gauss-Hermite grid is symmetric with an exact zero node") {
  DopplerSpec spec;
  spec.enabled = true;
  spec.rule = DopplerSpec::Rule::gauss_hermite;
  spec.sigma_kv = mhz_to_rad(220.0);
  spec.n_classes = 3;
  const VelocityGrid g = make_grid(spec);
  REQUIRE(g.size() == 3);
  REQUIRE(g.nodes[1] == 0.0);
  REQUIRE(g.nodes[0] == Approx(-g.nodes[2]));
  REQUIRE(g.weights[0] == Approx(g.weights[2]));
}

TEST_CASE("weights are normalized for a range of class counts") {
  for (int M : {11, 21, 41}) {
    for (auto rule : {DopplerSpec::Rule::gauss_hermite, DopplerSpec::Rule::trapezoid}) {
      DopplerSpec spec;
      spec.enabled = true;
      spec.sigma_kv = mhz_to_rad(220.0);
      spec.n_classes = M;
      spec.rule = rule;
      const VelocityGrid g = make_grid(spec);
      double sum = 0.0;
      for (double w : g.weights) sum += w;
      REQUIRE(sum == Approx(1.0).margin(1e-12));
      for (double w : g.weights) REQUIRE(w >= 0.0);
    }
  }
}

TEST_CASE("even class counts are rejected") {
  DopplerSpec spec;
  spec.enabled = true;
  spec.sigma_kv = 1.0;
  spec.n_classes = 20;
  REQUIRE_THROWS_AS(make_grid(spec), config_error);
}

TEST_CASE("Gauss-Hermite integrates Gaussian moments exactly") {
  DopplerSpec spec;
  spec.enabled = true;
  spec.rule = DopplerSpec::Rule::gauss_hermite;
  spec.sigma_kv = 2.0;
  spec.n_classes = 11;
  const VelocityGrid g = make_grid(spec);
  REQUIRE(quad_sum(g, [](double) { return 1.0; }) == Approx(1.0).margin(1e-12));
  REQUIRE(quad_sum(g, [](double x) { return x; }) == Approx(0.0).margin(1e-12));
  REQUIRE(quad_sum(g, [](double x) { return x * x; }) == Approx(4.0).epsilon(1e-12));
  REQUIRE(quad_sum(g, [](double x) { return x * x * x * x; }) == Approx(48.0).epsilon(1e-12));
}

TEST_CASE("both rules agree on a smooth broad integrand") {
  DopplerSpec spec;
  spec.enabled = true;
  spec.sigma_kv = 1.0;
  spec.n_classes = 41;
  spec.rule = DopplerSpec::Rule::gauss_hermite;
  const VelocityGrid gh = make_grid(spec);
  spec.rule = DopplerSpec::Rule::trapezoid;
  spec.n_classes = 201;
  const VelocityGrid tr = make_grid(spec);
  auto lorentz = [](double x) { return 1.0 / (1.0 + x * x); };
  REQUIRE(quad_sum(gh, lorentz) == Approx(quad_sum(tr, lorentz)).epsilon(1e-4));
}

TEST_CASE("clustered rule concentrates nodes at the resonant classes") {
  Model m = base_model();
  m.laser1.detuning = m.laser2.detuning = 5.0;  // units of Gamma
  m.doppler.enabled = true;
  m.doppler.sigma_kv = 37.0;
  m.doppler.n_classes = 31;
  const VelocityGrid g = make_grid(m.doppler, m);
  REQUIRE(g.size() == 31);
  double sum = 0.0;
  for (double w : g.weights) {
    REQUIRE(w >= 0.0);
    sum += w;
  }
  REQUIRE(sum == Approx(1.0).margin(1e-12));
  // A node lands close to the resonant class and spacing is finest there.
  double nearest = 1e9, spacing_center = 1e9, spacing_wing = 0.0;
  for (size_t i = 0; i < g.size(); ++i) {
    nearest = std::min(nearest, std::abs(g.nodes[i] - 5.0));
    if (i > 0) {
      const double h = g.nodes[i] - g.nodes[i - 1];
      REQUIRE(h > 0.0);
      if (std::abs(0.5 * (g.nodes[i] + g.nodes[i - 1]) - 5.0) < 3.0)
        spacing_center = std::min(spacing_center, h);
      spacing_wing = std::max(spacing_wing, h);
    }
  }
  REQUIRE(nearest < 2.0);
  REQUIRE(spacing_center < 0.25 * spacing_wing);
}

TEST_CASE("clustered rule tracks a dense trapezoid reference") {
  Model m = base_model();
  m.grid.frequencies = {0.05, 0.1, 0.2, 0.4};
  m.doppler.enabled = true;
  m.doppler.sigma_kv = 10.0;  // units of Gamma
  m.doppler.n_classes = 201;
  m.doppler.rule = DopplerSpec::Rule::trapezoid;
  const SpectrumResult ref = compute_spectrum(m);
  m.doppler.rule = DopplerSpec::Rule::auto_clustered;
  m.doppler.n_classes = 31;
  const SpectrumResult fast = compute_spectrum(m);
  for (size_t i = 0; i < ref.C.size(); ++i)
    REQUIRE(fast.C[i] == Approx(ref.C[i]).margin(0.02));
}

TEST_CASE("single-class grid reproduces the atom at rest identically") {
  const Model m = base_model();
  const SpectrumResult rest = compute_spectrum(m);
  VelocityGrid g;
  g.nodes = {0.0};
  g.weights = {1.0};
  const SpectrumResult one = doppler_average_spectra(m, g, m.grid.frequencies);
  for (size_t i = 0; i < rest.frequencies.size(); ++i) {
    REQUIRE(one.S11[i] == rest.S11[i]);
    REQUIRE(one.S12[i] == rest.S12[i]);
  }
}

TEST_CASE("vanishing Doppler width converges to the atom at rest") {
  Model m = base_model();
  const SpectrumResult rest = compute_spectrum(m);
  m.doppler.enabled = true;
  m.doppler.sigma_kv = 1e-6;  // units of Gamma
  m.doppler.n_classes = 5;
  const SpectrumResult dop = compute_spectrum(m);
  for (size_t i = 0; i < rest.frequencies.size(); ++i) {
    REQUIRE(dop.C[i] == Approx(rest.C[i]).margin(1e-6));
    const double scale = std::abs(rest.S11[i]);
    REQUIRE(dop.S11[i] == Approx(rest.S11[i]).margin(1e-6 * scale));
  }
}

TEST_CASE("ordered pair contributions are adjoint partners so spectra are real") {
  Model m = base_model();
  const GeneratorSet gj = make_generator(m, 3.0);
  const GeneratorSet gk = make_generator(m, -1.0);
  const CVector xj = steady_state(gj), xk = steady_state(gk);
  const CMatrix cjk = equal_time_covariance(gj, gk, xj, xk).c2;
  const CMatrix ckj = equal_time_covariance(gk, gj, xk, xj).c2;
  const double omega = 0.4;
  const CMatrix tjk = laplace_correlation(gj, cjk, omega);
  const CMatrix tkj = laplace_correlation(gk, ckj, omega);
  // The two-sided transform of the (j,k) covariance is T_jk + T_kj^dagger;
  // summing ordered pairs with symmetric weights therefore yields a Hermitian
  // spectral matrix and real spectra.
  const Eigen::Matrix2cd K = cross_spectrum_terms(tjk + tkj, m.atom);
  REQUIRE(std::abs(K(0, 0).imag()) <= 1e-10 * std::abs(K(0, 0).real()));
  REQUIRE(std::abs(K(1, 1).imag()) <= 1e-10 * std::abs(K(1, 1).real()));
}

TEST_CASE("engine fast path matches the per-pair reference assembly") {
  Model m = base_model();
  m.doppler.enabled = true;
  m.doppler.sigma_kv = 2.0;
  m.doppler.n_classes = 5;
  const VelocityGrid g = make_grid(m.doppler, m);
  const SpectrumResult fast = doppler_average_spectra(m, g, m.grid.frequencies);

  // Reference: explicit double loop over ordered pairs through the public
  // matrix-valued operations.
  std::vector<GeneratorSet> gens;
  std::vector<CVector> xbars;
  for (double kv : g.nodes) {
    gens.push_back(make_generator(m, kv));
    xbars.push_back(steady_state(gens.back()));
  }
  for (size_t fi = 0; fi < m.grid.frequencies.size(); ++fi) {
    const double omega = m.grid.frequencies[fi];
    CMatrix W = CMatrix::Zero(gens[0].idx.dim(), gens[0].idx.dim());
    for (size_t j = 0; j < g.size(); ++j)
      for (size_t k = 0; k < g.size(); ++k) {
        const CMatrix c2 = equal_time_covariance(gens[j], gens[k], xbars[j], xbars[k]).c2;
        W += g.weights[j] * g.weights[k] * laplace_correlation(gens[j], c2, omega);
      }
    const Eigen::Matrix2cd K = cross_spectrum_terms(W, m.atom);
    const double scale = std::abs(K(0, 0).real()) + std::abs(K(1, 1).real());
    REQUIRE(fast.S11[fi] == Approx(K(0, 0).real()).margin(1e-12 * scale));
    REQUIRE(fast.S22[fi] == Approx(K(1, 1).real()).margin(1e-12 * scale));
    REQUIRE(fast.S12[fi] == Approx(K(0, 1).real()).margin(1e-12 * scale));
  }
}

TEST_CASE("disabling cross-class covariance changes the Doppler average") {
  Model m = base_model();
  m.doppler.enabled = true;
  m.doppler.sigma_kv = 2.0;
  m.doppler.n_classes = 5;
  const SpectrumResult with_cross = compute_spectrum(m);
  m.doppler.cross_class = false;
  const SpectrumResult without = compute_spectrum(m);
  double diff = 0.0;
  for (size_t i = 0; i < with_cross.C.size(); ++i)
    diff = std::max(diff, std::abs(with_cross.C[i] - without.C[i]));
  REQUIRE(diff > 1e-6);  // the shared-phase cross terms carry real physics
}

TEST_CASE("checkpointed rows restore bit-identical spectra") {
  Model m = base_model();
  m.doppler.enabled = true;
  m.doppler.sigma_kv = 2.0;
  m.doppler.n_classes = 5;
  const auto tmp = std::filesystem::temp_directory_path() / "eitnoise_ckpt_test.bin";
  std::filesystem::remove(tmp);
  EngineOptions opt;
  opt.checkpoint_path = tmp.string();
  const SpectrumResult first = compute_spectrum(m, opt);
  const SpectrumResult resumed = compute_spectrum(m, opt);  // all rows from file
  for (size_t i = 0; i < first.C.size(); ++i) {
    REQUIRE(resumed.S11[i] == first.S11[i]);
    REQUIRE(resumed.S12[i] == first.S12[i]);
  }
  std::filesystem::remove(tmp);
}
