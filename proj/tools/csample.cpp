#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "csample/config.hpp"
#include "csample/errors.hpp"
#include "csample/experiments.hpp"

namespace {

enum ExitCode { kOk = 0, kConfig = 2, kNumerical = 3, kIo = 4 };

int run(const std::string& command, const std::string& config_path, std::optional<std::uint64_t> seed,
        const std::string& out, std::optional<std::size_t> procs, bool balance) {
  csample::ExperimentConfig cfg;
  if (!config_path.empty()) {
    cfg = csample::load_config(config_path);
    if (cfg.experiment != command) {
      throw csample::ConfigError("config is for '" + cfg.experiment + "' but the command is '" + command + "'");
    }
  } else {
    cfg = csample::default_config(command);
  }
  if (seed) cfg.seed = *seed;
  if (!out.empty()) cfg.output_dir = out;
  if (cfg.output_dir.empty()) cfg.output_dir = "out/" + command;
  if (procs) {
    if (*procs < 1) throw csample::ConfigError("--procs must be at least 1");
    cfg.procs = *procs;
  }
  if (balance) cfg.balance = true;

  const csample::RunSummary s = csample::run_experiment(cfg);
  std::cout << s.to_json().dump(2) << "\n";
  for (const std::string& w : s.warnings) std::cerr << "warning: " << w << "\n";
  std::cerr << "outputs written to " << cfg.output_dir << "\n";
  return kOk;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Parallel cluster MCMC for Bayesian inverse problems with Gaussian-mixture priors"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<std::size_t> procs;
  bool balance = false;
  std::string command;

  const char* commands[][2] = {
      {"oned", "1-D seven-component benchmark: serial vs parallel Gaussian and HMC samplers"},
      {"deblur", "2-D image deblurring: MC-MCMC posterior vs L-curve Tikhonov"},
      {"tikhonov", "Tikhonov baseline with L-curve selection on the deblurring problem"},
      {"bench", "measured vs predicted speedup over a list of worker counts"},
      {"em-fit", "EM + AIC Gaussian-mixture fit of an ensemble"},
  };
  for (const auto& c : commands) {
    CLI::App* sub = app.add_subcommand(c[0], c[1]);
    sub->add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "override the config seed");
    sub->add_option("--out", out, "output directory");
    sub->add_option("--procs", procs, "worker threads");
    sub->add_flag("--balance", balance, "longest-processing-time chain assignment instead of round-robin");
    sub->callback([&command, name = std::string(c[0])] { command = name; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    return run(command, config_path, seed, out, procs, balance);
  } catch (const csample::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const csample::IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kIo;
  } catch (const csample::Error& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  }
}
