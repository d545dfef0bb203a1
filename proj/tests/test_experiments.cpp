#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <sys/wait.h>

#include <json.hpp>

#include "csample/config.hpp"
#include "csample/errors.hpp"
#include "csample/experiments.hpp"
#include "csample/image.hpp"
#include "csample/io.hpp"

using namespace csample;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("csample_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(CSAMPLE_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

} // namespace

TEST_CASE("relative error") {
  CHECK(relative_error(Vector{1.0, 2.0}, Vector{1.0, 2.0}) == 0.0);
  CHECK(relative_error(Vector{2.0, 4.0}, Vector{1.0, 2.0}) == 1.0);
  CHECK(relative_error(Vector{3.0, 0.0}, Vector{3.0, 4.0}) == doctest::Approx(0.8).epsilon(1e-15));
  CHECK_THROWS_AS(relative_error(Vector{1.0}, Vector{0.0}), ZeroReference);
  CHECK_THROWS_AS(relative_error(Vector{1.0}, Vector{1.0, 2.0}), DimensionMismatch);
}

TEST_CASE("total variation helper") {
  CHECK(total_variation({0.5, 0.5}, {0.5, 0.5}) == 0.0);
  CHECK(total_variation({1.0, 0.0}, {0.0, 1.0}) == 1.0);
  CHECK(total_variation({0.4, 0.4}, {0.5, 0.5}, 0.2) == doctest::Approx(0.2));
}

TEST_CASE("weighted ensemble mean and median") {
  Ensemble e;
  e.members = {{0.0}, {1.0}, {10.0}};
  e.weights = {0.25, 0.5, 0.25};
  CHECK(ensemble_mean(e)[0] == doctest::Approx(3.0));
  CHECK(ensemble_median(e)[0] == 1.0);
}

TEST_CASE("quadrature bins sum to one") {
  const PosteriorModel m(oned_generator(), {-1.0}, SpdMatrix::diagonal({2.2}), make_identity(1));
  const Vector p = quadrature_bin_probabilities(m, -10.0, 10.0, 50, 64);
  double s = 0.0;
  for (double v : p) s += v;
  CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("config rejects unknown keys and bad values") {
  CHECK_THROWS_AS(parse_config(json::parse(R"({"experiment":"oned","sede":1})")), ConfigError);
  CHECK_THROWS_AS(parse_config(json::parse(R"({"experiment":"oned","gmm":{"structur":"full"}})")),
                  ConfigError);
  CHECK_THROWS_AS(parse_config(json::parse(R"({"experiment":"oned","n_ens":"many"})")), ConfigError);
  CHECK_THROWS_AS(parse_config(json::parse(R"({"experiment":"nope"})")), ConfigError);
  CHECK_THROWS_AS(parse_config(json::parse(R"({"experiment":"oned","stride":0})")), ConfigError);
}

TEST_CASE("config round-trips through JSON") {
  const ExperimentConfig c = parse_config(
      json::parse(R"({"experiment":"deblur","seed":7,"sampler":{"hmc_steps":12},"deblur":{"blur_width":3}})"));
  CHECK(c.seed == 7);
  CHECK(c.sampler.hmc_steps == 12);
  CHECK(c.deblur.blur_width == 3);
  const ExperimentConfig d = parse_config(config_to_json(c));
  CHECK(config_to_json(d) == config_to_json(c));
}

TEST_CASE("experiment defaults") {
  CHECK(default_config("oned").sampler.hmc_trajectory == 5.0);
  CHECK(default_config("deblur").sampler.hmc_trajectory == 1.0);
  CHECK(parse_config(json::parse(R"({"experiment":"oned"})")).sampler.hmc_trajectory == 5.0);
}

TEST_CASE("samples CSV round-trip is exact") {
  const fs::path dir = scratch("csv");
  Ensemble e;
  e.members = {{0.1, -1.0 / 3.0}, {1e-300, 2.5}, {-7.0, 1e17}};
  e.weights = {0.2, 0.3, 0.5};
  write_samples_csv(dir / "s.csv", e);
  const Ensemble back = read_samples_csv(dir / "s.csv");
  CHECK(back.members == e.members);
  CHECK(back.weights == e.weights);
  CHECK_THROWS_AS(read_samples_csv(dir / "missing.csv"), IoError);
}

TEST_CASE("GMM JSON round-trip") {
  const GaussianMixture g = oned_generator();
  const GaussianMixture back = gmm_from_json(gmm_to_json(g));
  CHECK(back.weights() == g.weights());
  CHECK(back.means() == g.means());
  for (std::size_t i = 0; i < g.n_components(); ++i)
    CHECK(back.covariances()[i](0, 0) == g.covariances()[i](0, 0));
  json j = gmm_to_json(g);
  j["extra"] = 1;
  CHECK_THROWS_AS(gmm_from_json(j), ConfigError);
}

TEST_CASE("PGM round-trip at 8-bit precision") {
  const fs::path dir = scratch("pgm");
  const ImageGrid img = make_disk_phantom(8, 8, 3.0, 0.2, 0.8);
  write_pgm(dir / "p.pgm", img);
  const ImageGrid back = read_pgm(dir / "p.pgm");
  CHECK(back.rows == 8);
  for (std::size_t i = 0; i < 64; ++i) CHECK(std::abs(back.intensities[i] - img.intensities[i]) <= 0.5 / 255.0);
}

TEST_CASE("CLI exit codes") {
  const fs::path dir = scratch("cli");
  {
    std::ofstream(dir / "bad.json") << R"({"experiment":"oned","bogus":1})";
    std::ofstream(dir / "other.json") << R"({"experiment":"tikhonov"})";
    std::ofstream(dir / "broken.json") << "{ not json";
    std::ofstream(dir / "io.json") << R"({"experiment":"em-fit","em_fit":{"input":"nowhere.csv"}})";
  }
  CHECK(run_cli("") == 2);
  CHECK(run_cli("oned --config " + (dir / "bad.json").string()) == 2);
  CHECK(run_cli("oned --config " + (dir / "other.json").string()) == 2);
  CHECK(run_cli("oned --config " + (dir / "broken.json").string()) == 2);
  CHECK(run_cli("oned --config " + (dir / "absent.json").string()) == 2);
  CHECK(run_cli("em-fit --config " + (dir / "io.json").string() + " --out " + (dir / "o").string()) == 4);
}

TEST_CASE("summary JSON is reproducible and timings live elsewhere") {
  const fs::path dir = scratch("repro");
  ExperimentConfig c = default_config("em-fit");
  c.em_fit.samples = 200;
  c.gmm.max_components = 3;
  c.output_dir = (dir / "a").string();
  run_experiment(c);
  c.output_dir = (dir / "b").string();
  run_experiment(c);
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  CHECK(slurp(dir / "a" / "summary.json") == slurp(dir / "b" / "summary.json"));
  CHECK(fs::exists(dir / "a" / "timings.json"));
  CHECK(read_json(dir / "a" / "summary.json")["timings"]["file"] == "timings.json");
}
