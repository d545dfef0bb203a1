#include "csample/posterior.hpp"

#include <cmath>

#include "csample/errors.hpp"

namespace csample {

namespace {
constexpr double kLog2Pi = 1.8378770664093454835606594728112;
} // namespace

PosteriorModel::PosteriorModel(GaussianMixture prior, Vector observation, SpdMatrix obs_cov,
                               OperatorPtr op)
    : prior_(std::move(prior)), y_(std::move(observation)), r_(std::move(obs_cov)),
      r_factor_(cholesky(r_)), op_(std::move(op)) {
  if (!op_) throw Error("PosteriorModel: null forward operator");
  if (op_->out_dim() != y_.size()) throw DimensionMismatch("PosteriorModel observation", op_->out_dim(), y_.size());
  if (r_.order() != y_.size()) throw DimensionMismatch("PosteriorModel obs_cov", y_.size(), r_.order());
  if (op_->in_dim() != prior_.dim()) throw DimensionMismatch("PosteriorModel operator", prior_.dim(), op_->in_dim());
  log_norm_ = -0.5 * static_cast<double>(y_.size()) * kLog2Pi - 0.5 * r_factor_.log_determinant();
}

Vector PosteriorModel::residual(std::span<const double> x) const {
  if (x.size() != dim()) throw DimensionMismatch("PosteriorModel", dim(), x.size());
  Vector r = op_->apply(x);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] -= y_[i];
  return r;
}

double PosteriorModel::misfit(std::span<const double> x) const {
  return 0.5 * r_factor_.inverse_quadratic(residual(x));
}

double PosteriorModel::log_likelihood(std::span<const double> x) const {
  return log_norm_ - misfit(x);
}

Vector PosteriorModel::prior_log_terms(std::span<const double> x) const {
  Vector t = prior_.half_mahalanobis(x);
  for (std::size_t i = 0; i < t.size(); ++i) {
    t[i] += std::log(prior_.weights()[i]) - 0.5 * prior_.log_det(i);
  }
  return t;
}

double PosteriorModel::neg_log_posterior(std::span<const double> x) const {
  return misfit(x) - log_sum_exp(prior_log_terms(x));
}

Vector PosteriorModel::responsibilities(std::span<const double> x) const {
  Vector t = prior_log_terms(x);
  const double l = log_sum_exp(t);
  for (auto& v : t) v = std::exp(v - l);
  return t;
}

std::pair<double, Vector> PosteriorModel::value_and_gradient(std::span<const double> x) const {
  const Vector r = residual(x);
  const Vector rinv_r = r_factor_.solve(r);
  const double misfit_value = 0.5 * dot(r, rinv_r);
  Vector grad = op_->adjoint_jacobian_apply(x, rinv_r);

  Vector t = prior_log_terms(x);
  const double l = log_sum_exp(t);
  Vector diff(dim());
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double w = std::exp(t[i] - l);
    if (w == 0.0) continue;
    const Vector& mu = prior_.means()[i];
    for (std::size_t j = 0; j < diff.size(); ++j) diff[j] = x[j] - mu[j];
    const Vector p = prior_.factor(i).solve(diff);
    for (std::size_t j = 0; j < grad.size(); ++j) grad[j] += w * p[j];
  }
  return {misfit_value - l, std::move(grad)};
}

Vector PosteriorModel::grad_neg_log_posterior(std::span<const double> x) const {
  return value_and_gradient(x).second;
}

} // namespace csample
