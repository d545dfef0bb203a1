#pragma once

#include <cstddef>
#include <string>

namespace csample {

// Covariance regime of the prior mixture. Spherical prices like diagonal.
enum class GmmRegime { diagonal, tied, full };
enum class ProposalRegime { diagonal, full, hmc };

GmmRegime gmm_regime_from_string(const std::string& name);
ProposalRegime proposal_regime_from_string(const std::string& name);
const char* to_string(GmmRegime r);
const char* to_string(ProposalRegime r);

struct CostModelInput {
  std::size_t p = 1;
  std::size_t n_c = 1;
  std::size_t n_ens = 1;
  std::size_t n_var = 1;
  std::size_t burn_in = 0;
  std::size_t stride = 1;
  std::size_t leapfrog_steps = 1;
  double t_s = 0.0;  // message startup time, seconds
  double t_w = 0.0;  // per-word transfer time, seconds
  GmmRegime gmm = GmmRegime::diagonal;
  ProposalRegime proposal = ProposalRegime::diagonal;
};

// Leading-term costs in abstract operation units (unit constants); the
// communication terms are in seconds and are only added in the *_with_comm
// fields, where one operation unit is taken as one second.
struct CostReport {
  double step_cost = 0.0;     // per-step cost factor c(N_var, regime)
  double serial_cost = 0.0;   // T_s
  double parallel_cost = 0.0; // T_p, idealised n_c / min(p, n_c) chains per worker
  double speedup = 0.0;       // S = T_s / T_p
  double efficiency = 0.0;    // E = S / p
  double total_parallel_cost = 0.0;  // p T_p
  double overhead = 0.0;             // T_o = p T_p - T_s

  // Same quantities with ceil(n_c / p) whole chains per worker.
  double parallel_cost_integral = 0.0;
  double speedup_integral = 0.0;
  double efficiency_integral = 0.0;

  double broadcast_cost = 0.0;
  double gather_cost = 0.0;
  double comm_cost = 0.0;
  double parallel_cost_with_comm = 0.0;
  double speedup_with_comm = 0.0;
  double efficiency_with_comm = 0.0;
  double total_parallel_cost_with_comm = 0.0;
  double overhead_with_comm = 0.0;

  // W(p) = E / (1 - E) * dominant T_o term, with E the communication-aware efficiency.
  double isoefficiency = 0.0;
};

CostReport predict_cost(const CostModelInput& in);

} // namespace csample
