#include "csample/cost_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "csample/errors.hpp"

namespace csample {

GmmRegime gmm_regime_from_string(const std::string& name) {
  if (name == "diagonal" || name == "spherical") return GmmRegime::diagonal;
  if (name == "tied") return GmmRegime::tied;
  if (name == "full") return GmmRegime::full;
  throw ConfigError("unknown GMM cost regime '" + name + "'");
}

ProposalRegime proposal_regime_from_string(const std::string& name) {
  if (name == "diagonal") return ProposalRegime::diagonal;
  if (name == "full") return ProposalRegime::full;
  if (name == "hmc") return ProposalRegime::hmc;
  throw ConfigError("unknown proposal cost regime '" + name + "'");
}

const char* to_string(GmmRegime r) {
  switch (r) {
  case GmmRegime::diagonal: return "diagonal";
  case GmmRegime::tied: return "tied";
  case GmmRegime::full: return "full";
  }
  return "full";
}

const char* to_string(ProposalRegime r) {
  switch (r) {
  case ProposalRegime::diagonal: return "diagonal";
  case ProposalRegime::full: return "full";
  case ProposalRegime::hmc: return "hmc";
  }
  return "full";
}

CostReport predict_cost(const CostModelInput& in) {
  if (in.p < 1 || in.n_c < 1 || in.n_ens < 1 || in.n_var < 1 || in.stride < 1 || in.leapfrog_steps < 1) {
    throw ConfigError("predict_cost: p, n_c, N_ens, N_var, m_s and m must be positive");
  }
  const double p = static_cast<double>(in.p);
  const double nc = static_cast<double>(in.n_c);
  const double ne = static_cast<double>(in.n_ens);
  const double nv = static_cast<double>(in.n_var);
  const double bs = static_cast<double>(in.burn_in);
  const double ms = static_cast<double>(in.stride);
  const double m = static_cast<double>(in.leapfrog_steps);

  CostReport r;
  if (in.proposal == ProposalRegime::hmc) {
    r.step_cost = m * nv * nv;
  } else if (in.gmm == GmmRegime::diagonal && in.proposal == ProposalRegime::diagonal) {
    r.step_cost = nv;
  } else {
    r.step_cost = nv * nv;
  }

  r.serial_cost = (bs + ms * ne) * r.step_cost;
  // (n_c / p') (b_s + m_s N_ens / n_c) c rewritten as (n_c b_s + m_s N_ens) c / p' so
  // that b_s = 0 gives S = min(p, n_c) without rounding.
  const double active = std::min(p, nc);
  const double parallel_work = nc * bs + ms * ne;
  r.parallel_cost = parallel_work * r.step_cost / active;
  r.speedup = active * ((bs + ms * ne) / parallel_work);
  r.efficiency = r.speedup / p;
  r.total_parallel_cost = p * r.parallel_cost;
  r.overhead = r.total_parallel_cost - r.serial_cost;

  const double chains_per_worker = std::ceil(nc / p);
  r.parallel_cost_integral = chains_per_worker * (bs + ms * ne / nc) * r.step_cost;
  r.speedup_integral = r.serial_cost / r.parallel_cost_integral;
  r.efficiency_integral = r.speedup_integral / p;

  const double logp = std::log2(p);
  double bcast_words = 0.0;
  double dominant = 0.0;
  switch (in.gmm) {
  case GmmRegime::diagonal:
    bcast_words = (2.0 * nv + 1.0) * nc;
    dominant = ne * nv;
    break;
  case GmmRegime::tied:
    bcast_words = (nv * nv / nc + nv + 1.0) * nc;
    dominant = (ne + nv) * nv;
    break;
  case GmmRegime::full:
    bcast_words = (nv * nv + nv + 1.0) * nc;
    dominant = (ne + nv * nc) * nv;
    break;
  }
  r.broadcast_cost = (in.t_s + in.t_w * bcast_words) * logp;
  r.gather_cost = (in.t_s + in.t_w * ne * nv) * logp;
  r.comm_cost = r.broadcast_cost + r.gather_cost;
  r.parallel_cost_with_comm = r.parallel_cost + r.comm_cost;
  r.speedup_with_comm = r.serial_cost / r.parallel_cost_with_comm;
  r.efficiency_with_comm = r.speedup_with_comm / p;
  r.total_parallel_cost_with_comm = p * r.parallel_cost_with_comm;
  r.overhead_with_comm = r.total_parallel_cost_with_comm - r.serial_cost;

  const double base = in.t_w * dominant * p * logp;
  const double e = r.efficiency_with_comm;
  if (base == 0.0) {
    r.isoefficiency = 0.0;
  } else if (e >= 1.0) {
    r.isoefficiency = std::numeric_limits<double>::infinity();
  } else {
    r.isoefficiency = e / (1.0 - e) * base;
  }
  return r;
}

} // namespace csample
