#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "csample/forward.hpp"
#include "csample/gmm.hpp"
#include "csample/linalg.hpp"
#include "csample/scheduler.hpp"
#include "csample/tikhonov.hpp"

namespace csample {

struct GmmConfig {
  CovStructure structure = CovStructure::diagonal;
  std::size_t min_components = 1;
  std::size_t max_components = 10;
  EmOptions em;
};

struct OnedConfig {
  std::size_t prior_samples = 1000;
  double observation = -1.0;
  double obs_variance = 2.2;
  std::size_t histogram_bins = 50;
  double histogram_min = -10.0;
  double histogram_max = 10.0;
  std::size_t quadrature_per_bin = 64;
};

// "std": the level times the mean intensity is a standard deviation;
// "variance": it is a variance.
enum class LevelMeaning { std_dev, variance };

struct DeblurConfig {
  // Empty means the built-in 32x32 disk phantom (same pixels as data/phantom32.pgm).
  std::string image;
  std::size_t blur_width = 5;
  double blur_sigma = 1.5;
  Boundary boundary = Boundary::reflect;
  bool saturate = false;
  double noise_level = 0.09;
  LevelMeaning noise_meaning = LevelMeaning::std_dev;
  double prior_level = 0.08;
  LevelMeaning prior_meaning = LevelMeaning::variance;
  std::size_t prior_pool = 50;
  std::size_t prior_subsample = 30;
  std::vector<std::string> mechanisms{"hmc", "gaussian"};
};

struct TikhonovConfig {
  double alpha_min = 1e-6;
  double alpha_max = 1e2;
  std::size_t alpha_count = 30;
  // "identity" or "laplacian" (5-point, plus identity shift for definiteness).
  std::string regularizer = "identity";
  TikhonovSolverOptions solver;
};

struct BenchConfig {
  std::vector<std::size_t> p_values{1, 2, 4, 7, 8, 12};
  int repetitions = 3;
  double t_s = 0.0;
  double t_w = 0.0;
  std::string mechanism = "gaussian";
};

struct EmFitConfig {
  // CSV of samples (weight column ignored); empty draws from the 1-D generator.
  std::string input;
  std::size_t samples = 1000;
};

struct ExperimentConfig {
  std::string experiment = "oned";
  std::uint64_t seed = 2024;
  std::size_t n_ens = 1000;
  ChainSettings chain;
  SamplerTuning sampler;
  bool importance_weights = true;
  std::size_t procs = 1;
  bool balance = false;
  std::string output_dir;
  GmmConfig gmm;
  OnedConfig oned;
  DeblurConfig deblur;
  TikhonovConfig tikhonov;
  BenchConfig bench;
  EmFitConfig em_fit;
  // Directory relative paths in the config resolve against (not serialised).
  std::filesystem::path base_dir;
};

// Built-in defaults for one experiment. The 1-D problems use a longer local
// HMC trajectory so chains cross between nearby posterior modes.
ExperimentConfig default_config(const std::string& experiment);

// Unknown keys anywhere raise ConfigError. Missing keys take the
// default_config values of the named experiment.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);
nlohmann::json config_to_json(const ExperimentConfig& cfg);

std::filesystem::path resolve_path(const ExperimentConfig& cfg, const std::string& p);

} // namespace csample
