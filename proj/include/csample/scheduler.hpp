#pragma once

#include <cstddef>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "csample/cost_model.hpp"
#include "csample/gmm.hpp"
#include "csample/posterior.hpp"
#include "csample/samplers.hpp"

namespace csample {

enum class MechanismKind { gaussian, hmc };

const char* to_string(MechanismKind k);
MechanismKind mechanism_from_string(const std::string& name);

// How proposal kernels are derived from the prior.
struct SamplerTuning {
  MechanismKind kind = MechanismKind::gaussian;
  // Per-chain Gaussian proposal covariance: local_proposal_scale / N_var * Sigma_i.
  double local_proposal_scale = 0.5;
  // Single-chain Gaussian proposal covariance: serial_proposal_scale * overall prior covariance.
  double serial_proposal_scale = 0.1;
  // HMC mass is diag(Sigma^{-1}) (Sigma_i per chain, the overall prior
  // covariance for a single chain) and h = trajectory / hmc_steps, so a
  // trajectory spans about `trajectory` prior standard deviations.
  int hmc_steps = 20;
  double hmc_trajectory = 1.0;
  // The overall prior scale is much wider than any single mode, hence shorter.
  double serial_hmc_trajectory = 0.5;
};

struct ChainSettings {
  std::size_t burn_in = 100;
  std::size_t stride = 5;
};

// Mechanism for the chain attached to component i (tuned on Sigma_i only).
Mechanism local_mechanism(const PosteriorModel& model, std::size_t component,
                          const SamplerTuning& tuning);
// Mechanism for a single chain over the whole prior (tuned on its overall covariance).
Mechanism serial_mechanism(const PosteriorModel& model, const SamplerTuning& tuning);

struct BudgetAllocation {
  std::vector<std::size_t> budgets;
  // False when n_ens < n_c; zero budgets are then allowed.
  bool feasible = true;
};

// Hamilton (largest-remainder) apportionment of `total` by `shares`; ties go
// to the lower index.
std::vector<std::size_t> largest_remainder(const Vector& shares, std::size_t total);

// n_i proportional to tau_i * likelihood(mu_i), summing exactly to n_ens, with
// every n_i >= 1 whenever n_ens >= n_c.
BudgetAllocation allocate_budgets(const PosteriorModel& model, std::size_t n_ens);

// Normalised tau_i * likelihood(mu_i).
Vector component_importance(const PosteriorModel& model);

struct ChainPlan {
  std::size_t component = 0;
  std::size_t budget = 0;
  Vector x0;
  Mechanism mechanism;
  std::uint64_t stream_id = 0;
  std::size_t worker = 0;
};

struct SchedulerPlan {
  std::vector<ChainPlan> chains;
  std::size_t workers = 1;
  std::uint64_t seed = 0;
  ChainSettings settings;
  std::size_t n_ens = 0;
  bool budget_feasible = true;
  bool balanced = false;
};

SchedulerPlan make_plan(const PosteriorModel& model, std::size_t n_ens, std::size_t workers,
                        const SamplerTuning& tuning, const ChainSettings& settings,
                        std::uint64_t seed, bool balance = false);

// Round-robin over chains with non-zero budget, or longest-processing-time
// first when `balance` is set. Zero-budget chains get no worker.
void assign_workers(SchedulerPlan& plan, std::size_t workers, bool balance);

struct ChainRecord {
  std::size_t component = 0;
  std::size_t budget = 0;
  std::size_t worker = 0;
  bool skipped = false;
  bool failed = false;
  std::string error;
  ChainResult result;
};

struct McResult {
  // Pooled in chain order; weights are the importance weights (or uniform).
  Ensemble ensemble;
  std::vector<std::size_t> sample_chain;
  std::vector<ChainRecord> chains;
  std::uint64_t proposals_made = 0;
  std::uint64_t proposals_accepted = 0;
  double acceptance_rate = 0.0;
  double wall_time = 0.0;
  std::size_t workers = 1;
};

McResult run_mc_mcmc(const PosteriorModel& model, const SchedulerPlan& plan,
                     bool importance_weights = true);

// Traditional single chain of n_ens samples started at the prior mean.
ChainResult run_serial_chain(const PosteriorModel& model, std::size_t n_ens,
                             const SamplerTuning& tuning, const ChainSettings& settings,
                             std::uint64_t seed);

// Cost-model input matching a plan (n_c counts chains with non-zero budget).
CostModelInput cost_input_for(const PosteriorModel& model, const SchedulerPlan& plan,
                              const SamplerTuning& tuning, std::size_t p, double t_s, double t_w);

struct BenchmarkRow {
  std::size_t p = 1;
  double wall_s = 0.0;
  double speedup = 1.0;
  double efficiency = 1.0;
  double pred_speedup = 1.0;
  double pred_efficiency = 1.0;
  bool oversubscribed = false;
};

struct BenchmarkOptions {
  std::vector<std::size_t> p_values{1, 2, 4, 7, 8, 12};
  int repetitions = 3;
  double t_s = 0.0;
  double t_w = 0.0;
  bool balance = false;
};

// Runs the same plan (same seeds) at every p; wall time is the minimum over
// repetitions and S(p) = wall(1) / wall(p).
std::vector<BenchmarkRow> benchmark_speedup(const PosteriorModel& model, SchedulerPlan plan,
                                            const SamplerTuning& tuning,
                                            const BenchmarkOptions& options);

void write_benchmark_csv(std::ostream& out, const std::vector<BenchmarkRow>& rows);

} // namespace csample
