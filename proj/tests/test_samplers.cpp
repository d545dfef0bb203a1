#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "csample/errors.hpp"
#include "csample/forward.hpp"
#include "csample/posterior.hpp"
#include "csample/samplers.hpp"

using namespace csample;

namespace {

PosteriorModel standard_normal_target() {
  // Prior N(0, 1) with an uninformative observation: J = x^2/2 + const.
  const GaussianMixture g(CovStructure::diagonal, {1.0}, {{0.0}}, {SpdMatrix::diagonal({1.0})});
  return PosteriorModel(g, {0.0}, SpdMatrix::diagonal({1e300}), make_identity(1));
}

ValueGradient quadratic() {
  return [](std::span<const double> x) { return std::make_pair(0.5 * x[0] * x[0], Vector{x[0]}); };
}

struct Conjugate {
  PosteriorModel model;
  Vector mean;
  Vector sd;
};

// Linear 2-D problem with an analytic Gaussian posterior.
Conjugate conjugate_problem() {
  const DenseMatrix h(2, 2, {1.0, 0.5, 0.0, 1.0});
  const Vector mu{0.5, -1.0};
  const Vector sigma{2.0, 1.0};
  const Vector r{0.5, 0.8};
  const Vector y{1.0, 0.3};
  // P = H^T R^-1 H + Sigma^-1, b = H^T R^-1 y + Sigma^-1 mu.
  double p[2][2] = {};
  double b[2] = {mu[0] / sigma[0], mu[1] / sigma[1]};
  for (std::size_t a = 0; a < 2; ++a) {
    for (std::size_t c = 0; c < 2; ++c)
      for (std::size_t k = 0; k < 2; ++k) p[a][c] += h(k, a) * h(k, c) / r[k];
    for (std::size_t k = 0; k < 2; ++k) b[a] += h(k, a) * y[k] / r[k];
  }
  p[0][0] += 1.0 / sigma[0];
  p[1][1] += 1.0 / sigma[1];
  const double det = p[0][0] * p[1][1] - p[0][1] * p[1][0];
  const double inv[2][2] = {{p[1][1] / det, -p[0][1] / det}, {-p[1][0] / det, p[0][0] / det}};
  const Vector mean{inv[0][0] * b[0] + inv[0][1] * b[1], inv[1][0] * b[0] + inv[1][1] * b[1]};
  const Vector sd{std::sqrt(inv[0][0]), std::sqrt(inv[1][1])};
  GaussianMixture g(CovStructure::diagonal, {1.0}, {mu}, {SpdMatrix::diagonal(sigma)});
  return {PosteriorModel(g, y, SpdMatrix::diagonal(r), make_linear(h)), mean, sd};
}

} // namespace

TEST_CASE("MH acceptance probability") {
  CHECK(mh_acceptance_probability(0.0) == 1.0);
  CHECK(mh_acceptance_probability(3.0) == 1.0);
  CHECK(mh_acceptance_probability(std::log(0.5)) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(mh_acceptance_probability(-std::numeric_limits<double>::infinity()) == 0.0);
}

TEST_CASE("MH step with a zero proposal is always accepted") {
  const PosteriorModel m = standard_normal_target();
  const GaussianProposal q(SpdMatrix::diagonal({1e-300}));
  MhState s{{0.3}, -m.neg_log_posterior(Vector{0.3})};
  RngStream rng(1, 0);
  for (int i = 0; i < 100; ++i) CHECK(mh_step(m, s, q, rng));
}

TEST_CASE("MH replay is deterministic") {
  const PosteriorModel m = standard_normal_target();
  ChainConfig c;
  c.n_samples = 50;
  c.x0 = {0.0};
  c.rng = RngStream(4, 2);
  const Mechanism mech = GaussianProposal(SpdMatrix::diagonal({1.0}));
  const ChainResult a = run_chain(m, c, mech);
  const ChainResult b = run_chain(m, c, mech);
  CHECK(a.samples.members == b.samples.members);
  CHECK(a.proposals_accepted == b.proposals_accepted);
}

TEST_CASE("one leapfrog step on J = x^2/2") {
  const CholeskyFactor unit = cholesky(SpdMatrix::identity(1));
  for (double h : {0.1, 0.25, 0.7}) {
    PhasePoint z{{1.0}, {0.0}, 0.5, {1.0}};
    leapfrog(z, unit, h, 1, quadratic());
    CHECK(z.x[0] == doctest::Approx(1.0 - h * h / 2.0).epsilon(1e-15));
    CHECK(z.p[0] == doctest::Approx(-h + h * h * h / 4.0).epsilon(1e-15));
  }
}

TEST_CASE("leapfrog is reversible") {
  const CholeskyFactor mass = cholesky(SpdMatrix::diagonal({2.0}));
  PhasePoint z{{0.8}, {-0.4}, 0.32, {0.8}};
  leapfrog(z, mass, 0.1, 25, quadratic());
  z.p[0] = -z.p[0];
  leapfrog(z, mass, 0.1, 25, quadratic());
  CHECK(std::abs(z.x[0] - 0.8) <= 1e-10);
  CHECK(std::abs(z.p[0] - 0.4) <= 1e-10);
}

TEST_CASE("HMC acceptance tends to one as the step shrinks") {
  const PosteriorModel m = standard_normal_target();
  ChainConfig c;
  c.n_samples = 200;
  c.x0 = {0.5};
  c.rng = RngStream(3, 0);
  const ChainResult r = run_chain(m, c, HmcParams(SpdMatrix::identity(1), 1e-4, 10));
  CHECK(r.acceptance_rate == 1.0);
  CHECK(r.divergences == 0);
}

TEST_CASE("zero samples still runs burn-in") {
  const PosteriorModel m = standard_normal_target();
  ChainConfig c;
  c.burn_in = 17;
  c.n_samples = 0;
  c.x0 = {0.0};
  const ChainResult r = run_chain(m, c, GaussianProposal(SpdMatrix::diagonal({1.0})));
  CHECK(r.samples.size() == 0);
  CHECK(r.proposals_made == 17);
}

TEST_CASE("conjugate oracle: chain mean matches the analytic posterior mean") {
  const Conjugate p = conjugate_problem();
  for (int kind = 0; kind < 2; ++kind) {
    ChainConfig c;
    c.burn_in = 200;
    c.stride = 2;
    c.n_samples = 5000;
    c.x0 = {0.0, 0.0};
    c.rng = RngStream(2024, static_cast<std::uint64_t>(kind));
    const Mechanism mech = kind == 0
                               ? Mechanism(GaussianProposal(SpdMatrix::diagonal({0.4, 0.4})))
                               : Mechanism(HmcParams(SpdMatrix::diagonal({3.0, 3.0}), 0.1, 10));
    const ChainResult r = run_chain(p.model, c, mech);
    for (std::size_t j = 0; j < 2; ++j) {
      Vector series;
      double mean = 0.0;
      for (const auto& x : r.samples.members) {
        series.push_back(x[j]);
        mean += x[j];
      }
      mean /= static_cast<double>(series.size());
      const double ess = effective_sample_size(series);
      CHECK(std::abs(mean - p.mean[j]) <= 3.0 * p.sd[j] / std::sqrt(ess));
    }
  }
}

TEST_CASE("ESS of white noise is close to n") {
  RngStream rng(17, 0);
  const Vector s = sample_standard_normal(rng, 4000);
  CHECK(std::abs(effective_sample_size(s) - 4000.0) <= 0.2 * 4000.0);
  const std::vector<double> ac = autocorrelation(s, 5);
  CHECK(ac[0] == doctest::Approx(1.0));
}

TEST_CASE("constant chain is flagged degenerate") {
  ChainResult r;
  r.samples.members.assign(20, Vector{1.5});
  r.proposals_made = 20;
  r.proposals_accepted = 20;
  r.acceptance_rate = 1.0;
  const ChainDiagnostics d = chain_diagnostics(r);
  CHECK(d.degenerate);
  CHECK(d.acceptance_rate == 1.0);
  ChainResult tiny;
  tiny.samples.members.assign(1, Vector{0.0});
  CHECK_THROWS_AS(chain_diagnostics(tiny), InsufficientSamples);
}
