#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "csample/config.hpp"
#include "csample/gmm.hpp"
#include "csample/image.hpp"
#include "csample/posterior.hpp"
#include "csample/scheduler.hpp"
#include "csample/tikhonov.hpp"

namespace csample {

struct RunSummary {
  nlohmann::json acceptance = nlohmann::json::object();
  nlohmann::json relative_errors = nlohmann::json::object();
  // Extra derived numbers (total variation, budgets, ESS, ...).
  nlohmann::json metrics = nlohmann::json::object();
  // Wall-clock seconds per stage. Written to timings.json, not summary.json,
  // so that summary.json is reproducible byte for byte.
  nlohmann::json timings = nlohmann::json::object();
  std::optional<std::size_t> n_c_selected;
  std::optional<double> alpha_star;
  std::vector<std::string> manifest;
  std::vector<std::string> warnings;

  nlohmann::json to_json() const;
};

// ||x - x_true|| / ||x_true||; throws ZeroReference when ||x_true|| = 0.
double relative_error(std::span<const double> x, std::span<const double> x_true);

// The eight-component 1-D generator of the synthetic prior ensemble.
GaussianMixture oned_generator();

// Bin probabilities of exp(-J) normalised by the trapezoid rule over [lo, hi]
// (1-D models only).
Vector quadrature_bin_probabilities(const PosteriorModel& model, double lo, double hi,
                                    std::size_t bins, std::size_t per_bin);
// Weighted histogram of a 1-D ensemble over the same bins; mass outside
// [lo, hi] is returned in `outside`.
Vector ensemble_bin_probabilities(const Ensemble& e, double lo, double hi, std::size_t bins,
                                  double* outside = nullptr);
// 0.5 * (sum |p - q| + outside mass of p).
double total_variation(const Vector& p, const Vector& q, double p_outside = 0.0);

// Weighted per-coordinate mean and median.
Vector ensemble_mean(const Ensemble& e);
Vector ensemble_median(const Ensemble& e);

struct OnedSetup {
  Ensemble prior_data;
  ModelSelection selection;
  PosteriorModel model;
};

OnedSetup build_oned_setup(const ExperimentConfig& cfg);

struct OnedOutcome {
  RunSummary summary;
  OnedSetup setup;
  ChainResult serial_gaussian;
  ChainResult serial_hmc;
  McResult parallel_gaussian;
  McResult parallel_hmc;
};

OnedOutcome run_oned_benchmark(const ExperimentConfig& cfg);

struct DeblurSetup {
  ImageGrid truth;
  ImageGrid blurred;
  ImageGrid observed;
  double noise_std = 0.0;
  double prior_variance = 0.0;
  OperatorPtr op;
  Ensemble prior_data;
};

DeblurSetup build_deblur_setup(const ExperimentConfig& cfg);
TikhonovProblem deblur_tikhonov_problem(const ExperimentConfig& cfg, const DeblurSetup& setup);

struct DeblurOutcome {
  RunSummary summary;
  DeblurSetup setup;
  Vector tikhonov;
  std::vector<std::string> mechanisms;
  std::vector<Vector> posterior_means;
  std::vector<Vector> posterior_medians;
  std::vector<double> acceptance;
};

DeblurOutcome run_deblur_experiment(const ExperimentConfig& cfg);
RunSummary run_tikhonov_experiment(const ExperimentConfig& cfg);
RunSummary run_speedup_benchmark(const ExperimentConfig& cfg);
RunSummary run_em_fit(const ExperimentConfig& cfg);

// Dispatches on cfg.experiment.
RunSummary run_experiment(const ExperimentConfig& cfg);

} // namespace csample
