#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "csample/linalg.hpp"
#include "csample/rng.hpp"

namespace csample {

// Finite set of states, optionally importance weighted (empty weights means
// uniform).
struct Ensemble {
  std::vector<Vector> members;
  Vector weights;

  std::size_t size() const noexcept { return members.size(); }
  std::size_t dim() const noexcept { return members.empty() ? 0 : members.front().size(); }
  bool weighted() const noexcept { return !weights.empty(); }
  // Throws on ragged members or weights that do not sum to one.
  void validate() const;
};

class GaussianMixture {
public:
  GaussianMixture(CovStructure structure, Vector weights, std::vector<Vector> means,
                  std::vector<SpdMatrix> covariances);

  std::size_t n_components() const noexcept { return weights_.size(); }
  std::size_t dim() const noexcept { return means_.front().size(); }
  CovStructure structure() const noexcept { return structure_; }
  const Vector& weights() const noexcept { return weights_; }
  const std::vector<Vector>& means() const noexcept { return means_; }
  const std::vector<SpdMatrix>& covariances() const noexcept { return covariances_; }
  const CholeskyFactor& factor(std::size_t i) const { return factors_.at(i); }
  double log_det(std::size_t i) const { return log_dets_.at(i); }

  // -0.5 * ||x - mu_i||^2_{Sigma_i^{-1}} for every component.
  Vector half_mahalanobis(std::span<const double> x) const;
  // log(tau_i N(x; mu_i, Sigma_i)) including the (2 pi)^{-d/2} normaliser.
  Vector component_log_densities(std::span<const double> x) const;
  // Allocation-free variant; scratch must hold dim() values.
  void component_log_densities(std::span<const double> x, std::span<double> out,
                               std::span<double> scratch) const;

  Vector overall_mean() const;
  // Covariance of the mixture distribution (law of total variance).
  SpdMatrix overall_covariance() const;

private:
  CovStructure structure_;
  Vector log_consts_;
  Vector weights_;
  std::vector<Vector> means_;
  std::vector<SpdMatrix> covariances_;
  std::vector<CholeskyFactor> factors_;
  Vector log_dets_;
};

double log_sum_exp(std::span<const double> v);
// Deterministic pairwise summation; the result does not depend on threading.
double pairwise_sum(std::span<const double> v);

double gmm_logpdf(const GaussianMixture& g, std::span<const double> x);
Vector gmm_sample(const GaussianMixture& g, RngStream& rng);

struct EmOptions {
  int max_iterations = 500;
  double relative_tolerance = 1e-8;
  int restarts = 5;
  double covariance_floor = 1e-6;
  int max_repairs = 3;
};

struct EmResult {
  GaussianMixture mixture;
  double log_likelihood;
  // Data log-likelihood after every E-step of the winning restart.
  std::vector<double> trace;
  int iterations = 0;
  bool converged = false;
  int repairs = 0;
};

// Free parameters of an n_c-component mixture in dimension d.
std::size_t free_parameter_count(std::size_t n_components, std::size_t dim, CovStructure s);
double aic(double log_likelihood, std::size_t n_components, std::size_t dim, CovStructure s);

// k-means++ seeded EM with restarts; keeps the best log-likelihood. The data
// is put in canonical (lexicographic) order first so the fit does not depend
// on member ordering.
EmResult em_fit(const Ensemble& data, std::size_t n_components, CovStructure structure,
                RngStream& rng, const EmOptions& options = {});

struct AicCandidate {
  std::size_t n_components;
  bool ok;
  double log_likelihood;
  double aic;
};

struct ModelSelection {
  EmResult best;
  std::vector<AicCandidate> candidates;
};

// Each candidate fits on its own stream derived from (rng.seed(), rng.stream_id(), n_c),
// so results do not depend on the candidate range.
ModelSelection select_model_aic(const Ensemble& data, std::size_t min_components,
                                std::size_t max_components, CovStructure structure,
                                const RngStream& rng, const EmOptions& options = {});

} // namespace csample
