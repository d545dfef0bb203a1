#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "csample/errors.hpp"
#include "csample/experiments.hpp"
#include "csample/gmm.hpp"

using namespace csample;

namespace {

GaussianMixture one_d(const std::vector<std::array<double, 3>>& t) {
  Vector w;
  std::vector<Vector> m;
  std::vector<SpdMatrix> c;
  for (const auto& [tau, mu, var] : t) {
    w.push_back(tau);
    m.push_back({mu});
    c.push_back(SpdMatrix::diagonal({var}));
  }
  return GaussianMixture(CovStructure::diagonal, w, m, c);
}

// The seven-component fit reported for the 1-D benchmark.
GaussianMixture reference_fit() {
  return one_d({{0.111, -5.78, 0.123},
                {0.177, -2.49, 0.223},
                {0.045, -1.49, 0.001},
                {0.065, 0.12, 0.061},
                {0.146, 2.05, 0.032},
                {0.225, 2.78, 0.148},
                {0.231, 6.12, 0.164}});
}

Ensemble draw(const GaussianMixture& g, std::size_t n, std::uint64_t seed) {
  RngStream rng(seed, 0);
  Ensemble e;
  for (std::size_t i = 0; i < n; ++i) e.members.push_back(gmm_sample(g, rng));
  return e;
}

} // namespace

TEST_CASE("standard normal peak") {
  const GaussianMixture g = one_d({{1.0, 0.0, 1.0}});
  CHECK(gmm_logpdf(g, Vector{0.0}) == doctest::Approx(-0.9189385332046727).epsilon(1e-15));
}

TEST_CASE("symmetric mixture is symmetric") {
  const GaussianMixture g = one_d({{0.5, -1.7, 0.4}, {0.5, 1.7, 0.4}});
  for (double x : {0.0, 0.3, 1.1, 4.0}) {
    CHECK(gmm_logpdf(g, Vector{x}) == doctest::Approx(gmm_logpdf(g, Vector{-x})).epsilon(1e-14));
  }
}

TEST_CASE("log-sum-exp agrees with direct summation on the reported fit") {
  const GaussianMixture g = reference_fit();
  const double x = -2.49;
  double direct = 0.0;
  for (std::size_t i = 0; i < g.n_components(); ++i) {
    const double var = g.covariances()[i](0, 0);
    const double d = x - g.means()[i][0];
    direct += g.weights()[i] / std::sqrt(2.0 * std::numbers::pi * var) * std::exp(-0.5 * d * d / var);
  }
  CHECK(std::abs(gmm_logpdf(g, Vector{x}) - std::log(direct)) <= 1e-12);
}

TEST_CASE("log-sum-exp survives underflow") {
  const Vector v{-1000.0, -1000.0};
  CHECK(log_sum_exp(v) == doctest::Approx(-1000.0 + std::log(2.0)).epsilon(1e-15));
}

TEST_CASE("mixture constructor validation") {
  CHECK_THROWS_AS(one_d({{0.5, 0.0, 1.0}}), Error);
  CHECK_THROWS_AS(GaussianMixture(CovStructure::diagonal, {1.0}, {{0.0, 0.0}},
                                  {SpdMatrix::identity(1)}),
                  DimensionMismatch);
}

TEST_CASE("sampling frequencies follow the weights") {
  const GaussianMixture g = one_d({{0.2, -50.0, 1.0}, {0.5, 0.0, 1.0}, {0.3, 50.0, 1.0}});
  const std::size_t n = 100000;
  const Ensemble e = draw(g, n, 4);
  std::array<double, 3> count{};
  for (const auto& m : e.members) count[m[0] < -25.0 ? 0 : (m[0] > 25.0 ? 2 : 1)] += 1.0;
  for (std::size_t i = 0; i < 3; ++i) {
    const double p = g.weights()[i];
    CHECK(std::abs(count[i] - n * p) <= 3.0 * std::sqrt(n * p * (1.0 - p)));
  }
}

TEST_CASE("sampling is deterministic under a fixed stream") {
  const GaussianMixture g = reference_fit();
  CHECK(draw(g, 50, 9).members == draw(g, 50, 9).members);
}

TEST_CASE("single-component n_c=1 sampling reduces to sample_mvn") {
  const GaussianMixture g = one_d({{1.0, 3.0, 4.0}});
  RngStream a(8, 0), b(8, 0);
  const Vector x = gmm_sample(g, a);
  (void)b.uniform(); // the component draw
  const Vector y = sample_mvn(b, Vector{3.0}, SpdMatrix::diagonal({4.0}));
  CHECK(x == y);
}

TEST_CASE("free parameter counts") {
  for (std::size_t k = 1; k <= 10; ++k) {
    CHECK(free_parameter_count(k, 1, CovStructure::diagonal) == 3 * k - 1);
    CHECK(free_parameter_count(k, 1, CovStructure::full) == 3 * k - 1);
  }
  CHECK(free_parameter_count(2, 3, CovStructure::full) == 1 + 6 + 12);
  CHECK(free_parameter_count(2, 3, CovStructure::tied) == 1 + 6 + 6);
  CHECK(aic(-10.0, 1, 1, CovStructure::diagonal) == 24.0);
}

TEST_CASE("single-component EM is the closed form") {
  const GaussianMixture g = GaussianMixture(
      CovStructure::full, {1.0}, {{1.0, -1.0}},
      {SpdMatrix::full(DenseMatrix(2, 2, {2.0, 0.6, 0.6, 1.0}))});
  const Ensemble e = draw(g, 400, 21);
  EmOptions opt;
  opt.covariance_floor = 0.0;
  RngStream rng(1, 0);
  const EmResult r = em_fit(e, 1, CovStructure::full, rng, opt);
  Vector m(2, 0.0);
  for (const auto& x : e.members)
    for (std::size_t j = 0; j < 2; ++j) m[j] += x[j] / 400.0;
  double c[2][2] = {};
  for (const auto& x : e.members)
    for (std::size_t a = 0; a < 2; ++a)
      for (std::size_t b = 0; b < 2; ++b) c[a][b] += (x[a] - m[a]) * (x[b] - m[b]) / 400.0;
  for (std::size_t j = 0; j < 2; ++j) CHECK(r.mixture.means()[0][j] == doctest::Approx(m[j]).epsilon(1e-12));
  for (std::size_t a = 0; a < 2; ++a)
    for (std::size_t b = 0; b < 2; ++b)
      CHECK(r.mixture.covariances()[0](a, b) == doctest::Approx(c[a][b]).epsilon(1e-12));
}

TEST_CASE("EM log-likelihood never decreases") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Ensemble e = draw(oned_generator(), 300, 100 + seed);
    RngStream rng(seed, 0);
    for (std::size_t k : {2u, 4u}) {
      const EmResult r = em_fit(e, k, CovStructure::diagonal, rng);
      for (std::size_t i = 1; i < r.trace.size(); ++i) CHECK(r.trace[i] >= r.trace[i - 1] - 1e-10);
    }
  }
}

TEST_CASE("EM does not depend on member order") {
  Ensemble e = draw(oned_generator(), 200, 5);
  RngStream r1(3, 0), r2(3, 0);
  const EmResult a = em_fit(e, 3, CovStructure::diagonal, r1);
  std::reverse(e.members.begin(), e.members.end());
  const EmResult b = em_fit(e, 3, CovStructure::diagonal, r2);
  CHECK(a.log_likelihood == b.log_likelihood);
  CHECK(a.mixture.means() == b.mixture.means());
}

TEST_CASE("EM needs two points per component") {
  const Ensemble e = draw(oned_generator(), 5, 1);
  RngStream rng(0, 0);
  CHECK_THROWS_AS(em_fit(e, 3, CovStructure::diagonal, rng), DegenerateComponent);
}

TEST_CASE("AIC picks one component for unimodal data") {
  const Ensemble e = draw(one_d({{1.0, 2.0, 1.5}}), 500, 77);
  const ModelSelection s = select_model_aic(e, 1, 4, CovStructure::diagonal, RngStream(5, 0));
  CHECK(s.best.mixture.n_components() == 1);
  REQUIRE(s.candidates.size() == 4);
  // Direct recomputation of the scores.
  for (const auto& c : s.candidates) {
    if (!c.ok) continue;
    CHECK(c.aic == doctest::Approx(2.0 * (3.0 * c.n_components - 1.0) - 2.0 * c.log_likelihood));
  }
}

TEST_CASE("AIC on the 1-D generator lands near seven components") {
  const Ensemble e = draw(oned_generator(), 1000, 2024);
  const ModelSelection s = select_model_aic(e, 1, 10, CovStructure::diagonal, RngStream(2024, 0));
  const auto k = static_cast<int>(s.best.mixture.n_components());
  CHECK(std::abs(k - 7) <= 2);
}

TEST_CASE("the 1-D generator matches the published parameters") {
  const GaussianMixture g = oned_generator();
  REQUIRE(g.n_components() == 8);
  const double expected[8][3] = {{0.09, -6.0, 0.20}, {0.19, -2.5, 0.28}, {0.09, 0.0, 0.08},
                                 {0.28, 2.5, 0.24},  {0.15, 6.0, 0.28},  {0.15, 6.5, 0.08},
                                 {0.03, 7.5, 0.12},  {0.02, 8.0, 0.04}};
  for (std::size_t i = 0; i < 8; ++i) {
    CHECK(g.weights()[i] == doctest::Approx(expected[i][0]).epsilon(1e-12));
    CHECK(g.means()[i][0] == expected[i][1]);
    CHECK(g.covariances()[i](0, 0) == expected[i][2]);
  }
}

TEST_CASE("overall moments follow the law of total variance") {
  const GaussianMixture g = one_d({{0.25, -2.0, 1.0}, {0.75, 2.0, 0.5}});
  CHECK(g.overall_mean()[0] == doctest::Approx(1.0));
  // 0.25 * (1 + 9) + 0.75 * (0.5 + 1)
  CHECK(g.overall_covariance()(0, 0) == doctest::Approx(3.625));
}
