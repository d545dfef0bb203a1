#include "csample/scheduler.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <thread>

#include "csample/errors.hpp"

namespace csample {

namespace {

constexpr std::uint64_t kSerialStream = 1ull << 32;

Vector precision_diagonal(const SpdMatrix& cov) {
  const std::size_t n = cov.order();
  Vector out(n);
  if (cov.is_diagonal()) {
    const Vector d = cov.diag();
    for (std::size_t i = 0; i < n; ++i) out[i] = 1.0 / d[i];
    return out;
  }
  const CholeskyFactor f = cholesky(cov);
  Vector e(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    e[i] = 1.0;
    out[i] = f.solve(e)[i];
    e[i] = 0.0;
  }
  return out;
}

// Gaussian: scale * cov. HMC: mass = diag(cov^{-1}), so one unit of
// trajectory length is one prior standard deviation.
Mechanism mechanism_for(const SpdMatrix& cov, double gaussian_scale, double trajectory,
                        const SamplerTuning& tuning) {
  if (tuning.kind == MechanismKind::hmc) {
    if (tuning.hmc_steps < 1) throw ConfigError("hmc_steps must be at least 1");
    if (!(trajectory > 0.0)) throw ConfigError("HMC trajectory length must be positive");
    return HmcParams(SpdMatrix::diagonal(precision_diagonal(cov)),
                     trajectory / static_cast<double>(tuning.hmc_steps), tuning.hmc_steps);
  }
  if (!(gaussian_scale > 0.0)) throw ConfigError("proposal scale must be positive");
  if (cov.is_diagonal()) {
    Vector d = cov.diag();
    for (double& v : d) v *= gaussian_scale;
    return GaussianProposal(SpdMatrix::diagonal(std::move(d)));
  }
  DenseMatrix dense = cov.dense();
  for (std::size_t i = 0; i < dense.rows(); ++i)
    for (std::size_t j = 0; j < dense.cols(); ++j) dense(i, j) *= gaussian_scale;
  return GaussianProposal(SpdMatrix::full(dense, CovStructure::full));
}

double worker_load(const ChainPlan& c, const ChainSettings& s) {
  return static_cast<double>(s.burn_in) + static_cast<double>(s.stride * c.budget);
}

} // namespace

const char* to_string(MechanismKind k) { return k == MechanismKind::hmc ? "hmc" : "gaussian"; }

MechanismKind mechanism_from_string(const std::string& name) {
  if (name == "gaussian") return MechanismKind::gaussian;
  if (name == "hmc") return MechanismKind::hmc;
  throw ConfigError("unknown mechanism '" + name + "' (expected gaussian or hmc)");
}

Mechanism local_mechanism(const PosteriorModel& model, std::size_t component,
                          const SamplerTuning& tuning) {
  const GaussianMixture& g = model.prior();
  if (component >= g.n_components()) throw Error("local_mechanism: component index out of range");
  return mechanism_for(g.covariances()[component],
                       tuning.local_proposal_scale / static_cast<double>(model.dim()),
                       tuning.hmc_trajectory, tuning);
}

Mechanism serial_mechanism(const PosteriorModel& model, const SamplerTuning& tuning) {
  return mechanism_for(model.prior().overall_covariance(), tuning.serial_proposal_scale,
                       tuning.serial_hmc_trajectory, tuning);
}

std::vector<std::size_t> largest_remainder(const Vector& shares, std::size_t total) {
  if (shares.empty()) throw Error("largest_remainder: no shares");
  const double sum = std::accumulate(shares.begin(), shares.end(), 0.0);
  if (!(sum > 0.0) || !std::isfinite(sum)) throw NumericalError("largest_remainder: shares sum to zero");
  const std::size_t n = shares.size();
  std::vector<std::size_t> out(n);
  Vector frac(n);
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (shares[i] < 0.0) throw Error("largest_remainder: negative share");
    const double q = static_cast<double>(total) * shares[i] / sum;
    out[i] = static_cast<std::size_t>(std::floor(q));
    frac[i] = q - std::floor(q);
    assigned += out[i];
  }
  // Floating-point floors can overshoot by one in pathological cases.
  while (assigned > total) {
    auto it = std::max_element(out.begin(), out.end());
    --*it;
    --assigned;
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
  for (std::size_t k = 0; assigned < total; k = (k + 1) % n) {
    ++out[order[k]];
    ++assigned;
  }
  return out;
}

Vector component_importance(const PosteriorModel& model) {
  const GaussianMixture& g = model.prior();
  Vector logs(g.n_components());
  for (std::size_t i = 0; i < logs.size(); ++i) {
    logs[i] = std::log(g.weights()[i]) + model.log_likelihood(g.means()[i]);
  }
  const double lse = log_sum_exp(logs);
  if (!std::isfinite(lse)) throw NumericalError("component importance: all likelihoods vanish");
  for (double& v : logs) v = std::exp(v - lse);
  return logs;
}

BudgetAllocation allocate_budgets(const PosteriorModel& model, std::size_t n_ens) {
  if (n_ens < 1) throw ConfigError("allocate_budgets: N_ens must be at least 1");
  const Vector shares = component_importance(model);
  const std::size_t nc = shares.size();
  BudgetAllocation out;
  out.budgets = largest_remainder(shares, n_ens);
  if (n_ens < nc) {
    out.feasible = false;
    return out;
  }
  // Minimum-one repair: pin starved components to one sample and re-apportion
  // the rest among the others, until no zero remains.
  std::vector<bool> pinned(nc, false);
  while (std::find(out.budgets.begin(), out.budgets.end(), std::size_t{0}) != out.budgets.end()) {
    for (std::size_t i = 0; i < nc; ++i)
      if (out.budgets[i] == 0) pinned[i] = true;
    const auto n_pinned = static_cast<std::size_t>(std::count(pinned.begin(), pinned.end(), true));
    Vector free_shares;
    std::vector<std::size_t> free_index;
    for (std::size_t i = 0; i < nc; ++i) {
      if (!pinned[i]) {
        free_shares.push_back(shares[i]);
        free_index.push_back(i);
      }
    }
    for (std::size_t i = 0; i < nc; ++i)
      if (pinned[i]) out.budgets[i] = 1;
    if (free_index.empty()) break;
    double free_sum = std::accumulate(free_shares.begin(), free_shares.end(), 0.0);
    if (!(free_sum > 0.0)) std::fill(free_shares.begin(), free_shares.end(), 1.0);
    const auto rest = largest_remainder(free_shares, n_ens - n_pinned);
    for (std::size_t k = 0; k < free_index.size(); ++k) out.budgets[free_index[k]] = rest[k];
  }
  return out;
}

void assign_workers(SchedulerPlan& plan, std::size_t workers, bool balance) {
  if (workers < 1) throw ConfigError("worker count must be at least 1");
  plan.workers = workers;
  plan.balanced = balance;
  std::vector<std::size_t> active;
  for (std::size_t c = 0; c < plan.chains.size(); ++c)
    if (plan.chains[c].budget > 0) active.push_back(c);
  if (!balance) {
    for (std::size_t k = 0; k < active.size(); ++k) plan.chains[active[k]].worker = k % workers;
    return;
  }
  std::stable_sort(active.begin(), active.end(), [&](std::size_t a, std::size_t b) {
    return plan.chains[a].budget > plan.chains[b].budget;
  });
  Vector load(workers, 0.0);
  for (std::size_t c : active) {
    const auto w = static_cast<std::size_t>(std::min_element(load.begin(), load.end()) - load.begin());
    plan.chains[c].worker = w;
    load[w] += worker_load(plan.chains[c], plan.settings);
  }
}

SchedulerPlan make_plan(const PosteriorModel& model, std::size_t n_ens, std::size_t workers,
                        const SamplerTuning& tuning, const ChainSettings& settings,
                        std::uint64_t seed, bool balance) {
  if (settings.stride < 1) throw ConfigError("stride must be at least 1");
  const BudgetAllocation alloc = allocate_budgets(model, n_ens);
  SchedulerPlan plan;
  plan.seed = seed;
  plan.settings = settings;
  plan.n_ens = n_ens;
  plan.budget_feasible = alloc.feasible;
  const GaussianMixture& g = model.prior();
  for (std::size_t i = 0; i < g.n_components(); ++i) {
    plan.chains.push_back(ChainPlan{i, alloc.budgets[i], g.means()[i],
                                    local_mechanism(model, i, tuning), i, 0});
  }
  assign_workers(plan, workers, balance);
  return plan;
}

McResult run_mc_mcmc(const PosteriorModel& model, const SchedulerPlan& plan, bool importance_weights) {
  if (plan.workers < 1) throw ConfigError("worker count must be at least 1");
  if (plan.chains.size() != model.prior().n_components()) {
    throw DimensionMismatch("run_mc_mcmc plan chains", model.prior().n_components(), plan.chains.size());
  }
  const std::size_t nc = plan.chains.size();
  McResult out;
  out.workers = plan.workers;
  out.chains.resize(nc);
  for (std::size_t c = 0; c < nc; ++c) {
    const ChainPlan& cp = plan.chains[c];
    if (cp.worker >= plan.workers) throw ConfigError("chain assigned to a non-existent worker");
    out.chains[c].component = cp.component;
    out.chains[c].budget = cp.budget;
    out.chains[c].worker = cp.worker;
    out.chains[c].skipped = cp.budget == 0;
  }

  auto work = [&](std::size_t w) {
    for (std::size_t c = 0; c < nc; ++c) {
      const ChainPlan& cp = plan.chains[c];
      if (cp.budget == 0 || cp.worker != w) continue;
      ChainRecord& rec = out.chains[c];
      try {
        ChainConfig cfg;
        cfg.burn_in = plan.settings.burn_in;
        cfg.stride = plan.settings.stride;
        cfg.n_samples = cp.budget;
        cfg.x0 = cp.x0;
        cfg.rng = RngStream(plan.seed, cp.stream_id);
        rec.result = run_chain(model, std::move(cfg), cp.mechanism);
      } catch (const std::exception& e) {
        rec.failed = true;
        rec.error = e.what();
      }
    }
  };

  const auto start = std::chrono::steady_clock::now();
  if (plan.workers == 1) {
    work(0);
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(plan.workers);
    for (std::size_t w = 0; w < plan.workers; ++w) pool.emplace_back(work, w);
  }
  out.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  // Ordered gather.
  const Vector importance = component_importance(model);
  double active_mass = 0.0;
  std::size_t total = 0;
  for (const ChainRecord& rec : out.chains) {
    out.proposals_made += rec.result.proposals_made;
    out.proposals_accepted += rec.result.proposals_accepted;
    if (rec.skipped || rec.failed || rec.result.samples.size() == 0) continue;
    active_mass += importance[rec.component];
    total += rec.result.samples.size();
  }
  if (total == 0) throw NumericalError("run_mc_mcmc: every chain failed or was skipped");
  out.acceptance_rate = out.proposals_made == 0
                            ? 0.0
                            : static_cast<double>(out.proposals_accepted) /
                                  static_cast<double>(out.proposals_made);
  out.ensemble.members.reserve(total);
  out.ensemble.weights.reserve(total);
  for (std::size_t c = 0; c < nc; ++c) {
    const ChainRecord& rec = out.chains[c];
    if (rec.skipped || rec.failed) continue;
    const std::size_t n = rec.result.samples.size();
    const double w = importance_weights ? importance[rec.component] / active_mass / static_cast<double>(n)
                                        : 1.0 / static_cast<double>(total);
    for (const Vector& x : rec.result.samples.members) {
      out.ensemble.members.push_back(x);
      out.ensemble.weights.push_back(w);
      out.sample_chain.push_back(c);
    }
  }
  return out;
}

ChainResult run_serial_chain(const PosteriorModel& model, std::size_t n_ens,
                             const SamplerTuning& tuning, const ChainSettings& settings,
                             std::uint64_t seed) {
  ChainConfig cfg;
  cfg.burn_in = settings.burn_in;
  cfg.stride = settings.stride;
  cfg.n_samples = n_ens;
  cfg.x0 = model.prior().overall_mean();
  cfg.rng = RngStream(seed, kSerialStream);
  return run_chain(model, std::move(cfg), serial_mechanism(model, tuning));
}

CostModelInput cost_input_for(const PosteriorModel& model, const SchedulerPlan& plan,
                              const SamplerTuning& tuning, std::size_t p, double t_s, double t_w) {
  CostModelInput in;
  in.p = p;
  in.n_c = static_cast<std::size_t>(std::count_if(plan.chains.begin(), plan.chains.end(),
                                                  [](const ChainPlan& c) { return c.budget > 0; }));
  in.n_ens = plan.n_ens;
  in.n_var = model.dim();
  in.burn_in = plan.settings.burn_in;
  in.stride = plan.settings.stride;
  in.leapfrog_steps = static_cast<std::size_t>(std::max(1, tuning.hmc_steps));
  in.t_s = t_s;
  in.t_w = t_w;
  switch (model.prior().structure()) {
  case CovStructure::diagonal:
  case CovStructure::spherical: in.gmm = GmmRegime::diagonal; break;
  case CovStructure::tied: in.gmm = GmmRegime::tied; break;
  case CovStructure::full: in.gmm = GmmRegime::full; break;
  }
  // Local proposals are diagonal by construction.
  in.proposal = tuning.kind == MechanismKind::hmc ? ProposalRegime::hmc : ProposalRegime::diagonal;
  return in;
}

std::vector<BenchmarkRow> benchmark_speedup(const PosteriorModel& model, SchedulerPlan plan,
                                            const SamplerTuning& tuning,
                                            const BenchmarkOptions& options) {
  if (options.p_values.empty()) throw ConfigError("benchmark: p_values must not be empty");
  if (options.repetitions < 1) throw ConfigError("benchmark: repetitions must be at least 1");
  for (std::size_t p : options.p_values)
    if (p < 1) throw ConfigError("benchmark: p must be at least 1");
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());

  auto time_at = [&](std::size_t p) {
    assign_workers(plan, p, options.balance);
    double best = std::numeric_limits<double>::infinity();
    for (int r = 0; r < options.repetitions; ++r) best = std::min(best, run_mc_mcmc(model, plan).wall_time);
    return best;
  };

  const double wall1 = time_at(1);
  std::vector<BenchmarkRow> rows;
  for (std::size_t p : options.p_values) {
    BenchmarkRow row;
    row.p = p;
    row.wall_s = p == 1 ? wall1 : time_at(p);
    row.speedup = p == 1 ? 1.0 : wall1 / row.wall_s;
    row.efficiency = row.speedup / static_cast<double>(p);
    const CostReport pred = predict_cost(cost_input_for(model, plan, tuning, p, options.t_s, options.t_w));
    row.pred_speedup = pred.speedup;
    row.pred_efficiency = pred.efficiency;
    row.oversubscribed = p > hw;
    rows.push_back(row);
  }
  return rows;
}

void write_benchmark_csv(std::ostream& out, const std::vector<BenchmarkRow>& rows) {
  out << "p,wall_s,speedup,efficiency,pred_speedup,pred_efficiency\n";
  out << std::setprecision(10);
  for (const BenchmarkRow& r : rows) {
    out << r.p << ',' << r.wall_s << ',' << r.speedup << ',' << r.efficiency << ','
        << r.pred_speedup << ',' << r.pred_efficiency << '\n';
  }
}

} // namespace csample
