#include "csample/samplers.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <limits>

#include "csample/errors.hpp"

namespace csample {

namespace {

constexpr double kDivergenceThreshold = 1000.0;

double thread_cpu_seconds() {
  timespec ts{};
  clock_gettime(CLOCK_THREAD_CPUTIME_ID, &ts);
  return static_cast<double>(ts.tv_sec) + 1e-9 * static_cast<double>(ts.tv_nsec);
}

} // namespace

HmcParams::HmcParams(SpdMatrix mass, double step_size, int steps)
    : mass_(std::move(mass)), mass_factor_(cholesky(mass_)), step_(step_size), steps_(steps) {
  if (!(step_size > 0.0) || !std::isfinite(step_size)) throw Error("HMC: step size must be positive");
  if (steps < 1) throw Error("HMC: trajectory needs at least one step");
}

double mh_acceptance_probability(double log_ratio) {
  if (std::isnan(log_ratio)) return 0.0;
  return log_ratio >= 0.0 ? 1.0 : std::exp(log_ratio);
}

bool mh_step(const PosteriorModel& model, MhState& state, const GaussianProposal& proposal,
             RngStream& rng) {
  Vector candidate = sample_mvn(rng, state.x, proposal.factor());
  const double log_candidate = model.unnormalized_log_posterior(candidate);
  const double a = std::isfinite(log_candidate)
                       ? mh_acceptance_probability(log_candidate - state.log_density)
                       : 0.0;
  const double u = rng.uniform();
  if (a > u) {
    state.x = std::move(candidate);
    state.log_density = log_candidate;
    return true;
  }
  return false;
}

void leapfrog(PhasePoint& z, const CholeskyFactor& mass_factor, double h, int steps,
              const ValueGradient& potential) {
  const std::size_t n = z.x.size();
  for (std::size_t i = 0; i < n; ++i) z.p[i] -= 0.5 * h * z.grad[i];
  for (int s = 0; s < steps; ++s) {
    const Vector velocity = mass_factor.solve(z.p);
    for (std::size_t i = 0; i < n; ++i) z.x[i] += h * velocity[i];
    auto [u, g] = potential(z.x);
    z.potential = u;
    z.grad = std::move(g);
    const double scale = s + 1 == steps ? 0.5 * h : h;
    for (std::size_t i = 0; i < n; ++i) z.p[i] -= scale * z.grad[i];
  }
}

HmcOutcome hmc_step(const PosteriorModel& model, HmcState& state, const HmcParams& params,
                    RngStream& rng) {
  const CholeskyFactor& lm = params.mass_factor();
  PhasePoint z{state.x, lm.lower_multiply(sample_standard_normal(rng, state.x.size())),
               state.potential, state.grad};
  const double h0 = state.potential + 0.5 * lm.inverse_quadratic(z.p);
  leapfrog(z, lm, params.step_size(), params.steps(),
           [&model](std::span<const double> x) { return model.value_and_gradient(x); });
  const double h1 = z.potential + 0.5 * lm.inverse_quadratic(z.p);
  const double d_h = h1 - h0;
  const double u = rng.uniform();
  if (!std::isfinite(d_h) || std::abs(d_h) > kDivergenceThreshold) {
    return {false, true, d_h};
  }
  if (mh_acceptance_probability(-d_h) > u) {
    state.x = std::move(z.x);
    state.potential = z.potential;
    state.grad = std::move(z.grad);
    return {true, false, d_h};
  }
  return {false, false, d_h};
}

ChainResult run_chain(const PosteriorModel& model, ChainConfig cfg, const Mechanism& mechanism) {
  if (cfg.stride == 0) throw Error("run_chain: stride must be at least 1");
  if (cfg.x0.size() != model.dim()) throw DimensionMismatch("run_chain x0", model.dim(), cfg.x0.size());
  const auto wall_start = std::chrono::steady_clock::now();
  const double cpu_start = thread_cpu_seconds();

  ChainResult result;
  result.samples.members.reserve(cfg.n_samples);
  const std::size_t total = cfg.total_steps();

  auto record = [&](std::size_t step, const Vector& x) {
    if (step > cfg.burn_in && (step - cfg.burn_in) % cfg.stride == 0) {
      result.samples.members.push_back(x);
    }
  };

  if (const auto* proposal = std::get_if<GaussianProposal>(&mechanism)) {
    MhState state{cfg.x0, model.unnormalized_log_posterior(cfg.x0)};
    for (std::size_t step = 1; step <= total; ++step) {
      ++result.proposals_made;
      try {
        if (mh_step(model, state, *proposal, cfg.rng)) ++result.proposals_accepted;
      } catch (const Error&) {
        ++result.step_errors;
      }
      record(step, state.x);
    }
  } else {
    const auto& params = std::get<HmcParams>(mechanism);
    auto [u0, g0] = model.value_and_gradient(cfg.x0);
    HmcState state{cfg.x0, u0, std::move(g0)};
    for (std::size_t step = 1; step <= total; ++step) {
      ++result.proposals_made;
      try {
        const HmcOutcome o = hmc_step(model, state, params, cfg.rng);
        if (o.accepted) ++result.proposals_accepted;
        if (o.divergent) ++result.divergences;
      } catch (const Error&) {
        ++result.step_errors;
      }
      record(step, state.x);
    }
  }

  result.acceptance_rate = result.proposals_made == 0
                               ? 0.0
                               : static_cast<double>(result.proposals_accepted) /
                                     static_cast<double>(result.proposals_made);
  result.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
  result.cpu_time = thread_cpu_seconds() - cpu_start;
  return result;
}

std::vector<double> autocorrelation(std::span<const double> series, std::size_t max_lag) {
  const std::size_t n = series.size();
  if (n < 2) throw InsufficientSamples("autocorrelation needs at least two samples");
  double mean = 0.0;
  for (double v : series) mean += v;
  mean /= static_cast<double>(n);
  double c0 = 0.0;
  for (double v : series) c0 += (v - mean) * (v - mean);
  const std::size_t lags = std::min(max_lag, n - 1);
  std::vector<double> rho(lags + 1, std::numeric_limits<double>::quiet_NaN());
  if (c0 == 0.0) return rho;
  for (std::size_t k = 0; k <= lags; ++k) {
    double ck = 0.0;
    for (std::size_t i = 0; i + k < n; ++i) ck += (series[i] - mean) * (series[i + k] - mean);
    rho[k] = ck / c0;
  }
  return rho;
}

double effective_sample_size(std::span<const double> series, bool* degenerate) {
  const std::size_t n = series.size();
  if (n < 2) throw InsufficientSamples("ESS needs at least two samples");
  const std::vector<double> rho = autocorrelation(series, n - 1);
  if (std::isnan(rho[0])) {
    if (degenerate) *degenerate = true;
    return std::numeric_limits<double>::quiet_NaN();
  }
  if (degenerate) *degenerate = false;
  // Geyer: sum consecutive pairs while they stay positive.
  double tau = -1.0;
  for (std::size_t k = 0; 2 * k + 1 < rho.size(); ++k) {
    const double gamma = rho[2 * k] + rho[2 * k + 1];
    if (gamma <= 0.0) break;
    tau += 2.0 * gamma;
  }
  tau = std::max(tau, 1.0 / static_cast<double>(n));
  return static_cast<double>(n) / tau;
}

ChainDiagnostics chain_diagnostics(const ChainResult& result, std::size_t max_lag) {
  const auto& members = result.samples.members;
  if (members.size() < 2) throw InsufficientSamples("chain diagnostics need at least two samples");
  ChainDiagnostics d;
  d.acceptance_rate = result.acceptance_rate;
  const std::size_t dim = members.front().size();
  std::vector<double> series(members.size());
  std::size_t worst = 0;
  d.ess = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < dim; ++j) {
    for (std::size_t i = 0; i < members.size(); ++i) series[i] = members[i][j];
    bool degenerate = false;
    const double e = effective_sample_size(series, &degenerate);
    d.ess_per_coordinate.push_back(e);
    if (degenerate) {
      d.degenerate = true;
      continue;
    }
    if (e < d.ess) {
      d.ess = e;
      worst = j;
    }
  }
  if (d.degenerate && !std::isfinite(d.ess)) d.ess = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t i = 0; i < members.size(); ++i) series[i] = members[i][worst];
  d.autocorrelation = autocorrelation(series, max_lag);
  return d;
}

} // namespace csample
