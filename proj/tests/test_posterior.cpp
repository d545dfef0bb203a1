#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "csample/errors.hpp"
#include "csample/experiments.hpp"
#include "csample/forward.hpp"
#include "csample/gmm.hpp"
#include "csample/posterior.hpp"

using namespace csample;

namespace {

GaussianMixture reference_fit() {
  const double t[7][3] = {{0.111, -5.78, 0.123}, {0.177, -2.49, 0.223}, {0.045, -1.49, 0.001},
                          {0.065, 0.12, 0.061},  {0.146, 2.05, 0.032},  {0.225, 2.78, 0.148},
                          {0.231, 6.12, 0.164}};
  Vector w;
  std::vector<Vector> m;
  std::vector<SpdMatrix> c;
  for (const auto& r : t) {
    w.push_back(r[0]);
    m.push_back({r[1]});
    c.push_back(SpdMatrix::diagonal({r[2]}));
  }
  return GaussianMixture(CovStructure::diagonal, w, m, c);
}

PosteriorModel oned_model() {
  return PosteriorModel(reference_fit(), {-1.0}, SpdMatrix::diagonal({2.2}), make_identity(1));
}

// J written out term by term, no log-sum-exp.
double direct_j(const GaussianMixture& g, double x, double y, double r) {
  double s = 0.0;
  for (std::size_t i = 0; i < g.n_components(); ++i) {
    const double v = g.covariances()[i](0, 0);
    const double d = x - g.means()[i][0];
    s += g.weights()[i] / std::sqrt(v) * std::exp(-0.5 * d * d / v);
  }
  return 0.5 * (x - y) * (x - y) / r - std::log(s);
}

} // namespace

TEST_CASE("likelihood peak for the 1-D benchmark") {
  const PosteriorModel m = oned_model();
  CHECK(m.log_likelihood(Vector{-1.0}) ==
        doctest::Approx(-0.5 * std::log(2.0 * std::numbers::pi * 2.2)).epsilon(1e-14));
  CHECK(m.log_likelihood(Vector{-1.0}) == doctest::Approx(-1.31317).epsilon(1e-5));
  CHECK(m.log_likelihood(Vector{-1.0}) > m.log_likelihood(Vector{-0.5}));
  CHECK(m.log_likelihood(Vector{-1.0}) > m.log_likelihood(Vector{-1.7}));
}

TEST_CASE("misfit of (3,4) against zero data") {
  const GaussianMixture g(CovStructure::diagonal, {1.0}, {{0.0, 0.0}}, {SpdMatrix::identity(2)});
  const PosteriorModel m(g, {0.0, 0.0}, SpdMatrix::identity(2), make_identity(2));
  CHECK(m.misfit(Vector{3.0, 4.0}) == 12.5);
  CHECK(m.log_likelihood(Vector{3.0, 4.0}) - m.log_likelihood(Vector{0.0, 0.0}) == -12.5);
}

TEST_CASE("single component at x = y = mu gives half log det Sigma") {
  const SpdMatrix sigma = SpdMatrix::diagonal({2.0, 3.0});
  const GaussianMixture g(CovStructure::diagonal, {1.0}, {{1.0, 2.0}}, {sigma});
  const PosteriorModel m(g, {1.0, 2.0}, SpdMatrix::identity(2), make_identity(2));
  CHECK(m.neg_log_posterior(Vector{1.0, 2.0}) == doctest::Approx(0.5 * std::log(6.0)).epsilon(1e-14));
  const Vector grad = m.grad_neg_log_posterior(Vector{1.0, 2.0});
  CHECK(grad[0] == 0.0);
  CHECK(grad[1] == 0.0);
}

TEST_CASE("J matches direct summation on the 1-D benchmark") {
  const PosteriorModel m = oned_model();
  for (double x : {0.0, -2.49, 3.3, -7.0}) {
    CHECK(std::abs(m.neg_log_posterior(Vector{x}) - direct_j(reference_fit(), x, -1.0, 2.2)) <= 1e-10);
  }
}

TEST_CASE("J is coercive") {
  const PosteriorModel m = oned_model();
  const double far = 1e6 * 6.12;
  CHECK(m.neg_log_posterior(Vector{far}) > m.neg_log_posterior(Vector{-5.78}) + 1e6);
}

TEST_CASE("gradient matches central differences on the 1-D benchmark") {
  const PosteriorModel m = oned_model();
  for (double x : {-3.0, 0.0, 2.5}) {
    const double h = 1e-5;
    const double fd = (m.neg_log_posterior(Vector{x + h}) - m.neg_log_posterior(Vector{x - h})) / (2 * h);
    const double g = m.grad_neg_log_posterior(Vector{x})[0];
    CHECK(std::abs(fd - g) <= 1e-5 * std::max(1.0, std::abs(g)));
  }
}

TEST_CASE("symmetric prior has zero prior gradient at the midpoint") {
  const GaussianMixture g(CovStructure::diagonal, {0.5, 0.5}, {{-2.0}, {2.0}},
                          {SpdMatrix::diagonal({0.7}), SpdMatrix::diagonal({0.7})});
  const PosteriorModel m(g, {0.0}, SpdMatrix::diagonal({1.0}), make_identity(1));
  CHECK(std::abs(m.grad_neg_log_posterior(Vector{0.0})[0]) <= 1e-15);
  const Vector w = m.responsibilities(Vector{0.0});
  CHECK(w[0] == doctest::Approx(0.5));
}

TEST_CASE("log posterior sign convention and monotonicity") {
  const PosteriorModel m = oned_model();
  CHECK(m.unnormalized_log_posterior(Vector{1.3}) == -m.neg_log_posterior(Vector{1.3}));
  const GaussianMixture g(CovStructure::diagonal, {1.0}, {{0.0}}, {SpdMatrix::diagonal({1.0})});
  const PosteriorModel m1(g, {0.0}, SpdMatrix::diagonal({1.0}), make_identity(1));
  CHECK(m1.unnormalized_log_posterior(Vector{0.1}) > m1.unnormalized_log_posterior(Vector{0.9}));
}

TEST_CASE("value_and_gradient agrees with the separate calls") {
  const PosteriorModel m = oned_model();
  const auto [v, g] = m.value_and_gradient(Vector{0.7});
  CHECK(v == m.neg_log_posterior(Vector{0.7}));
  CHECK(g == m.grad_neg_log_posterior(Vector{0.7}));
}

TEST_CASE("exp(-J) integrates to a finite positive mass") {
  const PosteriorModel m = oned_model();
  const std::size_t n = 30000;
  const double lo = -15.0, hi = 15.0, h = (hi - lo) / n;
  double s = 0.0;
  for (std::size_t i = 0; i <= n; ++i) {
    const double w = (i == 0 || i == n) ? 0.5 : 1.0;
    s += w * std::exp(-m.neg_log_posterior(Vector{lo + i * h}));
  }
  s *= h;
  CHECK(std::isfinite(s));
  CHECK(s > 0.0);
}

TEST_CASE("dimension checks") {
  CHECK_THROWS_AS(PosteriorModel(reference_fit(), {-1.0, 2.0}, SpdMatrix::diagonal({2.2}), make_identity(1)),
                  DimensionMismatch);
  const PosteriorModel m = oned_model();
  CHECK_THROWS_AS(m.neg_log_posterior(Vector{1.0, 2.0}), DimensionMismatch);
}
