#pragma once

#include <span>
#include <utility>

#include "csample/forward.hpp"
#include "csample/gmm.hpp"
#include "csample/linalg.hpp"

namespace csample {

// Gaussian likelihood N(y; H(x), R) times a Gaussian-mixture prior.
// Immutable after construction; all evaluations are reentrant.
class PosteriorModel {
public:
  PosteriorModel(GaussianMixture prior, Vector observation, SpdMatrix obs_cov, OperatorPtr op);

  const GaussianMixture& prior() const noexcept { return prior_; }
  const Vector& observation() const noexcept { return y_; }
  const SpdMatrix& obs_cov() const noexcept { return r_; }
  const ForwardOperator& op() const noexcept { return *op_; }
  OperatorPtr op_ptr() const noexcept { return op_; }
  std::size_t dim() const noexcept { return prior_.dim(); }

  // 0.5 * ||H(x) - y||^2_{R^{-1}}
  double misfit(std::span<const double> x) const;
  // Includes -(m/2) log 2 pi - 0.5 log|R|.
  double log_likelihood(std::span<const double> x) const;
  // J(x) = misfit - log sum_i tau_i |Sigma_i|^{-1/2} exp(-0.5 ||x - mu_i||^2_{Sigma_i^{-1}})
  double neg_log_posterior(std::span<const double> x) const;
  double unnormalized_log_posterior(std::span<const double> x) const { return -neg_log_posterior(x); }
  Vector grad_neg_log_posterior(std::span<const double> x) const;
  std::pair<double, Vector> value_and_gradient(std::span<const double> x) const;
  // Normalised prior-component responsibilities w_i(x).
  Vector responsibilities(std::span<const double> x) const;

private:
  Vector prior_log_terms(std::span<const double> x) const;
  Vector residual(std::span<const double> x) const;

  GaussianMixture prior_;
  Vector y_;
  SpdMatrix r_;
  CholeskyFactor r_factor_;
  OperatorPtr op_;
  double log_norm_;
};

} // namespace csample
