#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "csample/gmm.hpp"
#include "csample/linalg.hpp"
#include "csample/posterior.hpp"
#include "csample/rng.hpp"

namespace csample {

// Symmetric random-walk proposal x' = x + N(0, cov).
class GaussianProposal {
public:
  explicit GaussianProposal(SpdMatrix cov) : cov_(std::move(cov)), factor_(cholesky(cov_)) {}
  const SpdMatrix& cov() const noexcept { return cov_; }
  const CholeskyFactor& factor() const noexcept { return factor_; }

private:
  SpdMatrix cov_;
  CholeskyFactor factor_;
};

class HmcParams {
public:
  HmcParams(SpdMatrix mass, double step_size, int steps);
  const SpdMatrix& mass() const noexcept { return mass_; }
  const CholeskyFactor& mass_factor() const noexcept { return mass_factor_; }
  double step_size() const noexcept { return step_; }
  int steps() const noexcept { return steps_; }

private:
  SpdMatrix mass_;
  CholeskyFactor mass_factor_;
  double step_;
  int steps_;
};

using Mechanism = std::variant<GaussianProposal, HmcParams>;

struct ChainConfig {
  std::size_t burn_in = 0;
  std::size_t stride = 1;
  std::size_t n_samples = 0;
  Vector x0;
  RngStream rng{0, 0};

  std::size_t total_steps() const noexcept { return burn_in + stride * n_samples; }
};

struct ChainResult {
  Ensemble samples;
  std::uint64_t proposals_made = 0;
  std::uint64_t proposals_accepted = 0;
  std::uint64_t divergences = 0;
  std::uint64_t step_errors = 0;
  double acceptance_rate = 0.0;
  double wall_time = 0.0;
  double cpu_time = 0.0;
};

// min(1, exp(log_ratio)).
double mh_acceptance_probability(double log_ratio);

struct MhState {
  Vector x;
  double log_density;
};

// One Metropolis-Hastings transition; on rejection `state` is left untouched.
bool mh_step(const PosteriorModel& model, MhState& state, const GaussianProposal& proposal,
             RngStream& rng);

using ValueGradient = std::function<std::pair<double, Vector>(std::span<const double>)>;

struct PhasePoint {
  Vector x;
  Vector p;
  double potential;
  Vector grad;
};

// `steps` leapfrog steps of size h for H = 0.5 p^T M^{-1} p + U(x).
void leapfrog(PhasePoint& z, const CholeskyFactor& mass_factor, double h, int steps,
              const ValueGradient& potential);

struct HmcState {
  Vector x;
  double potential;
  Vector grad;
};

struct HmcOutcome {
  bool accepted;
  bool divergent;
  double energy_error;
};

// Trajectories with |dH| > 1000 are rejected and reported divergent.
HmcOutcome hmc_step(const PosteriorModel& model, HmcState& state, const HmcParams& params,
                    RngStream& rng);

// burn_in + stride * n steps, keeping every stride-th post-burn-in state.
ChainResult run_chain(const PosteriorModel& model, ChainConfig cfg, const Mechanism& mechanism);

struct ChainDiagnostics {
  double acceptance_rate = 0.0;
  // Autocorrelation of the lowest-ESS coordinate, lags 0..max_lag.
  std::vector<double> autocorrelation;
  double ess = 0.0;
  std::vector<double> ess_per_coordinate;
  bool degenerate = false;
};

// Initial-positive-sequence ESS. Throws InsufficientSamples below two samples.
ChainDiagnostics chain_diagnostics(const ChainResult& result, std::size_t max_lag = 50);
// Scalar-series variant used by chain_diagnostics.
double effective_sample_size(std::span<const double> series, bool* degenerate = nullptr);
std::vector<double> autocorrelation(std::span<const double> series, std::size_t max_lag);

} // namespace csample
