#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

#include "csample/cost_model.hpp"
#include "csample/errors.hpp"
#include "csample/forward.hpp"
#include "csample/scheduler.hpp"

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

const std::vector<std::array<double, 3>> kReferenceFit = {
    {0.111, -5.78, 0.123}, {0.177, -2.49, 0.223}, {0.045, -1.49, 0.001}, {0.065, 0.12, 0.061},
    {0.146, 2.05, 0.032},  {0.225, 2.78, 0.148},  {0.231, 6.12, 0.164}};

PosteriorModel oned_model() {
  return PosteriorModel(one_d(kReferenceFit), {-1.0}, SpdMatrix::diagonal({2.2}), make_identity(1));
}

CostModelInput base_input() {
  CostModelInput in;
  in.n_c = 7;
  in.n_ens = 1000;
  in.n_var = 10;
  in.burn_in = 0;
  in.stride = 5;
  return in;
}

} // namespace

TEST_CASE("largest remainder apportionment") {
  CHECK(largest_remainder({1, 1, 1, 1}, 100) == std::vector<std::size_t>{25, 25, 25, 25});
  CHECK(largest_remainder({0.9, 0.1}, 10) == std::vector<std::size_t>{9, 1});
  // Ties go to the lower index.
  CHECK(largest_remainder({1, 1, 1}, 4) == std::vector<std::size_t>{2, 1, 1});
}

TEST_CASE("budgets for equal weights and equal likelihoods") {
  const PosteriorModel m(one_d({{0.25, 1.0, 1.0}, {0.25, 1.0, 1.0}, {0.25, 1.0, 1.0}, {0.25, 1.0, 1.0}}),
                         {0.0}, SpdMatrix::diagonal({1.0}), make_identity(1));
  const BudgetAllocation b = allocate_budgets(m, 100);
  CHECK(b.budgets == std::vector<std::size_t>{25, 25, 25, 25});
  CHECK(b.feasible);
}

TEST_CASE("budgets proportional to the weights") {
  const PosteriorModel m(one_d({{0.9, 1.0, 1.0}, {0.1, 1.0, 1.0}}), {0.0},
                         SpdMatrix::diagonal({1.0}), make_identity(1));
  CHECK(allocate_budgets(m, 10).budgets == std::vector<std::size_t>{9, 1});
}

TEST_CASE("budgets on the 1-D benchmark match a direct recomputation") {
  const PosteriorModel m = oned_model();
  const std::size_t n = 1000;
  Vector share;
  for (const auto& [tau, mu, var] : kReferenceFit) {
    (void)var;
    share.push_back(tau * std::exp(-0.5 * (mu + 1.0) * (mu + 1.0) / 2.2) /
                    std::sqrt(2.0 * std::numbers::pi * 2.2));
  }
  const double total = std::accumulate(share.begin(), share.end(), 0.0);
  std::vector<std::size_t> expect;
  std::vector<std::pair<double, std::size_t>> rem;
  std::size_t used = 0;
  for (std::size_t i = 0; i < share.size(); ++i) {
    const double q = n * share[i] / total;
    expect.push_back(static_cast<std::size_t>(std::floor(q)));
    used += expect.back();
    rem.push_back({q - std::floor(q), i});
  }
  std::stable_sort(rem.begin(), rem.end(), [](auto a, auto b) { return a.first > b.first; });
  for (std::size_t k = 0; k < n - used; ++k) ++expect[rem[k].second];
  for (auto& e : expect) e = std::max<std::size_t>(e, 1);
  const BudgetAllocation b = allocate_budgets(m, n);
  CHECK(std::accumulate(b.budgets.begin(), b.budgets.end(), std::size_t{0}) == n);
  // The min-one repair only moves a handful of samples; the big chains agree.
  for (std::size_t i = 0; i < expect.size(); ++i) {
    const long diff = static_cast<long>(b.budgets[i]) - static_cast<long>(expect[i]);
    CHECK(std::abs(diff) <= 3);
  }
  const Vector imp = component_importance(m);
  for (std::size_t i = 0; i < share.size(); ++i) CHECK(imp[i] == doctest::Approx(share[i] / total));
}

TEST_CASE("too few samples is infeasible") {
  const BudgetAllocation b = allocate_budgets(oned_model(), 3);
  CHECK_FALSE(b.feasible);
  CHECK(std::accumulate(b.budgets.begin(), b.budgets.end(), std::size_t{0}) == 3);
}

TEST_CASE("round-robin and LPT worker assignment") {
  SchedulerPlan plan = make_plan(oned_model(), 1000, 3, SamplerTuning{}, ChainSettings{}, 1);
  for (std::size_t i = 0; i < plan.chains.size(); ++i) CHECK(plan.chains[i].worker == i % 3);
  assign_workers(plan, 3, true);
  std::vector<double> load(3, 0.0);
  for (const auto& c : plan.chains) load[c.worker] += static_cast<double>(c.budget);
  const double biggest = static_cast<double>(
      std::max_element(plan.chains.begin(), plan.chains.end(),
                       [](const auto& a, const auto& b) { return a.budget < b.budget; })
          ->budget);
  // List scheduling bound: average load plus the largest job.
  CHECK(*std::max_element(load.begin(), load.end()) <= 1000.0 / 3.0 + biggest);
}

TEST_CASE("pooled ensemble does not depend on the worker count") {
  SamplerTuning t;
  const PosteriorModel m = oned_model();
  std::vector<Ensemble> out;
  for (std::size_t p : {1u, 3u, 7u}) {
    const SchedulerPlan plan = make_plan(m, 300, p, t, ChainSettings{}, 2024);
    out.push_back(run_mc_mcmc(m, plan).ensemble);
  }
  CHECK(out[0].members == out[1].members);
  CHECK(out[0].members == out[2].members);
  CHECK(out[0].weights == out[2].weights);
}

TEST_CASE("importance weights sum to one") {
  const PosteriorModel m = oned_model();
  const McResult r = run_mc_mcmc(m, make_plan(m, 200, 2, SamplerTuning{}, ChainSettings{}, 5));
  CHECK(std::accumulate(r.ensemble.weights.begin(), r.ensemble.weights.end(), 0.0) ==
        doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.ensemble.size() == 200);
  CHECK(r.acceptance_rate == doctest::Approx(static_cast<double>(r.proposals_accepted) /
                                             static_cast<double>(r.proposals_made)));
}

TEST_CASE("cost model closed forms") {
  CostModelInput in = base_input();
  in.p = 4;
  CostReport r = predict_cost(in);
  CHECK(r.speedup == 4.0);
  CHECK(r.efficiency == 1.0);
  in.p = 16;
  r = predict_cost(in);
  CHECK(r.speedup == 7.0);
  CHECK(r.efficiency == 7.0 / 16.0);
  in.p = 1;
  r = predict_cost(in);
  CHECK(r.speedup == 1.0);
  CHECK(r.overhead == 0.0);
}

TEST_CASE("serial cost of the diagonal Gaussian regime") {
  CostModelInput in = base_input();
  in.burn_in = 100;
  in.n_ens = 1000;
  in.n_var = 10;
  in.stride = 5;
  in.p = 1;
  CHECK(predict_cost(in).serial_cost == 51000.0);
  in.gmm = GmmRegime::full;
  CHECK(predict_cost(in).step_cost == 100.0);
  in.proposal = ProposalRegime::hmc;
  in.leapfrog_steps = 20;
  CHECK(predict_cost(in).step_cost == 2000.0);
}

TEST_CASE("communication terms") {
  CostModelInput in = base_input();
  in.p = 8;
  in.t_s = 1.0;
  in.t_w = 0.5;
  const CostReport r = predict_cost(in);
  // Broadcast (t_s + t_w (2N+1) n_c) log2 p with N = 10, n_c = 7.
  CHECK(r.broadcast_cost == doctest::Approx((1.0 + 0.5 * 21.0 * 7.0) * 3.0));
  CHECK(r.speedup_with_comm < r.speedup);
  CHECK(r.isoefficiency > 0.0);
}

TEST_CASE("regime names round-trip") {
  for (auto g : {GmmRegime::diagonal, GmmRegime::tied, GmmRegime::full})
    CHECK(gmm_regime_from_string(to_string(g)) == g);
  for (auto p : {ProposalRegime::diagonal, ProposalRegime::full, ProposalRegime::hmc})
    CHECK(proposal_regime_from_string(to_string(p)) == p);
  CHECK_THROWS_AS(gmm_regime_from_string("banded"), ConfigError);
}

TEST_CASE("benchmark csv header") {
  std::ostringstream os;
  write_benchmark_csv(os, {BenchmarkRow{}});
  CHECK(os.str().rfind("p,wall_s,speedup,efficiency,pred_speedup,pred_efficiency\n", 0) == 0);
}
