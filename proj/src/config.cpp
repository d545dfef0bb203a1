#include "csample/config.hpp"

#include <fstream>
#include <set>

#include "csample/errors.hpp"

namespace csample {

using nlohmann::json;

namespace {

// Reads the keys of one JSON object and complains about any key nobody asked for.
class Section {
public:
  Section(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + ": expected a JSON object");
  }

  template <class T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    convert(*it, out, where_ + "." + key);
  }

  const json* child(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError(where_ + ": unknown key '" + it.key() + "'");
    }
  }

private:
  static void convert(const json& v, double& out, const std::string& w) {
    if (!v.is_number()) throw ConfigError(w + ": expected a number");
    out = v.get<double>();
  }
  static void convert(const json& v, bool& out, const std::string& w) {
    if (!v.is_boolean()) throw ConfigError(w + ": expected true or false");
    out = v.get<bool>();
  }
  static void convert(const json& v, int& out, const std::string& w) {
    if (!v.is_number_integer()) throw ConfigError(w + ": expected an integer");
    out = v.get<int>();
  }
  static void convert(const json& v, std::size_t& out, const std::string& w) {
    if (!v.is_number_unsigned()) throw ConfigError(w + ": expected a non-negative integer");
    out = v.get<std::size_t>();
  }
  static void convert(const json& v, std::string& out, const std::string& w) {
    if (!v.is_string()) throw ConfigError(w + ": expected a string");
    out = v.get<std::string>();
  }
  template <class T>
  static void convert(const json& v, std::vector<T>& out, const std::string& w) {
    if (!v.is_array()) throw ConfigError(w + ": expected an array");
    out.clear();
    for (std::size_t i = 0; i < v.size(); ++i) {
      T item{};
      convert(v[i], item, w + "[" + std::to_string(i) + "]");
      out.push_back(item);
    }
  }

  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

LevelMeaning meaning_from_string(const std::string& s) {
  if (s == "std") return LevelMeaning::std_dev;
  if (s == "variance") return LevelMeaning::variance;
  throw ConfigError("level interpretation must be 'std' or 'variance', got '" + s + "'");
}

const char* to_string(LevelMeaning m) { return m == LevelMeaning::std_dev ? "std" : "variance"; }

const char* to_string(Boundary b) { return b == Boundary::reflect ? "reflect" : "periodic"; }

void require(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError(msg);
}

void validate(const ExperimentConfig& c) {
  static const std::set<std::string> kinds{"oned", "deblur", "tikhonov", "bench", "em-fit"};
  require(kinds.count(c.experiment) == 1, "experiment must be one of oned, deblur, tikhonov, bench, em-fit");
  require(c.n_ens >= 1, "n_ens must be at least 1");
  require(c.chain.stride >= 1, "stride must be at least 1");
  require(c.procs >= 1, "procs must be at least 1");
  require(c.sampler.local_proposal_scale > 0.0, "sampler.local_proposal_scale must be positive");
  require(c.sampler.serial_proposal_scale > 0.0, "sampler.serial_proposal_scale must be positive");
  require(c.sampler.hmc_steps >= 1, "sampler.hmc_steps must be at least 1");
  require(c.sampler.hmc_trajectory > 0.0 && c.sampler.serial_hmc_trajectory > 0.0,
          "sampler HMC trajectory lengths must be positive");
  require(c.gmm.min_components >= 1 && c.gmm.min_components <= c.gmm.max_components,
          "gmm: need 1 <= min_components <= max_components");
  require(c.gmm.em.max_iterations >= 1 && c.gmm.em.restarts >= 1, "gmm: iterations and restarts must be positive");
  require(c.gmm.em.relative_tolerance >= 0.0 && c.gmm.em.covariance_floor >= 0.0,
          "gmm: tolerance and covariance floor must be non-negative");
  require(c.oned.obs_variance > 0.0, "oned.obs_variance must be positive");
  require(c.oned.histogram_bins >= 1 && c.oned.histogram_max > c.oned.histogram_min,
          "oned: invalid histogram range");
  require(c.oned.quadrature_per_bin >= 1, "oned.quadrature_per_bin must be positive");
  require(c.deblur.blur_width % 2 == 1, "deblur.blur_width must be odd");
  require(c.deblur.blur_sigma > 0.0, "deblur.blur_sigma must be positive");
  require(c.deblur.noise_level > 0.0 && c.deblur.prior_level > 0.0, "deblur levels must be positive");
  require(c.deblur.prior_subsample >= 2 && c.deblur.prior_subsample <= c.deblur.prior_pool,
          "deblur: need 2 <= prior_subsample <= prior_pool");
  for (const std::string& m : c.deblur.mechanisms) (void)mechanism_from_string(m);
  require(c.tikhonov.alpha_min > 0.0 && c.tikhonov.alpha_max >= c.tikhonov.alpha_min,
          "tikhonov: need 0 < alpha_min <= alpha_max");
  require(c.tikhonov.alpha_count >= 5, "tikhonov.alpha_count must be at least 5");
  require(c.tikhonov.regularizer == "identity" || c.tikhonov.regularizer == "laplacian",
          "tikhonov.regularizer must be identity or laplacian");
  require(!c.bench.p_values.empty(), "bench.p_values must not be empty");
  for (std::size_t p : c.bench.p_values) require(p >= 1, "bench.p_values entries must be >= 1");
  require(c.bench.repetitions >= 1, "bench.repetitions must be at least 1");
  require(c.bench.t_s >= 0.0 && c.bench.t_w >= 0.0, "bench: t_s and t_w must be non-negative");
  (void)mechanism_from_string(c.bench.mechanism);
  require(c.em_fit.samples >= 2, "em_fit.samples must be at least 2");
}

} // namespace

ExperimentConfig default_config(const std::string& experiment) {
  ExperimentConfig c;
  c.experiment = experiment;
  if (experiment == "oned" || experiment == "bench") c.sampler.hmc_trajectory = 5.0;
  return c;
}

ExperimentConfig parse_config(const json& j) {
  Section top(j, "config");
  std::string experiment = "oned";
  top.read("experiment", experiment);
  ExperimentConfig c = default_config(experiment);
  top.read("seed", c.seed);
  top.read("n_ens", c.n_ens);
  top.read("burn_in", c.chain.burn_in);
  top.read("stride", c.chain.stride);
  top.read("importance_weights", c.importance_weights);
  top.read("procs", c.procs);
  top.read("balance", c.balance);
  top.read("output_dir", c.output_dir);

  if (const json* s = top.child("sampler")) {
    Section sec(*s, "sampler");
    sec.read("local_proposal_scale", c.sampler.local_proposal_scale);
    sec.read("serial_proposal_scale", c.sampler.serial_proposal_scale);
    sec.read("hmc_steps", c.sampler.hmc_steps);
    sec.read("hmc_trajectory", c.sampler.hmc_trajectory);
    sec.read("serial_hmc_trajectory", c.sampler.serial_hmc_trajectory);
    sec.finish();
  }
  if (const json* s = top.child("gmm")) {
    Section sec(*s, "gmm");
    std::string structure = to_string(c.gmm.structure);
    sec.read("structure", structure);
    c.gmm.structure = cov_structure_from_string(structure);
    sec.read("min_components", c.gmm.min_components);
    sec.read("max_components", c.gmm.max_components);
    sec.read("max_iterations", c.gmm.em.max_iterations);
    sec.read("relative_tolerance", c.gmm.em.relative_tolerance);
    sec.read("restarts", c.gmm.em.restarts);
    sec.read("covariance_floor", c.gmm.em.covariance_floor);
    sec.read("max_repairs", c.gmm.em.max_repairs);
    sec.finish();
  }
  if (const json* s = top.child("oned")) {
    Section sec(*s, "oned");
    sec.read("prior_samples", c.oned.prior_samples);
    sec.read("observation", c.oned.observation);
    sec.read("obs_variance", c.oned.obs_variance);
    sec.read("histogram_bins", c.oned.histogram_bins);
    sec.read("histogram_min", c.oned.histogram_min);
    sec.read("histogram_max", c.oned.histogram_max);
    sec.read("quadrature_per_bin", c.oned.quadrature_per_bin);
    sec.finish();
  }
  if (const json* s = top.child("deblur")) {
    Section sec(*s, "deblur");
    sec.read("image", c.deblur.image);
    sec.read("blur_width", c.deblur.blur_width);
    sec.read("blur_sigma", c.deblur.blur_sigma);
    std::string boundary = to_string(c.deblur.boundary);
    sec.read("boundary", boundary);
    c.deblur.boundary = boundary_from_string(boundary);
    sec.read("saturate", c.deblur.saturate);
    sec.read("noise_level", c.deblur.noise_level);
    std::string nm = to_string(c.deblur.noise_meaning);
    sec.read("noise_interpretation", nm);
    c.deblur.noise_meaning = meaning_from_string(nm);
    sec.read("prior_level", c.deblur.prior_level);
    std::string pm = to_string(c.deblur.prior_meaning);
    sec.read("prior_interpretation", pm);
    c.deblur.prior_meaning = meaning_from_string(pm);
    sec.read("prior_pool", c.deblur.prior_pool);
    sec.read("prior_subsample", c.deblur.prior_subsample);
    sec.read("mechanisms", c.deblur.mechanisms);
    sec.finish();
  }
  if (const json* s = top.child("tikhonov")) {
    Section sec(*s, "tikhonov");
    sec.read("alpha_min", c.tikhonov.alpha_min);
    sec.read("alpha_max", c.tikhonov.alpha_max);
    sec.read("alpha_count", c.tikhonov.alpha_count);
    sec.read("regularizer", c.tikhonov.regularizer);
    sec.read("relative_tolerance", c.tikhonov.solver.relative_tolerance);
    sec.read("max_iterations", c.tikhonov.solver.max_iterations);
    sec.finish();
  }
  if (const json* s = top.child("bench")) {
    Section sec(*s, "bench");
    sec.read("p_values", c.bench.p_values);
    sec.read("repetitions", c.bench.repetitions);
    sec.read("t_s", c.bench.t_s);
    sec.read("t_w", c.bench.t_w);
    sec.read("mechanism", c.bench.mechanism);
    sec.finish();
  }
  if (const json* s = top.child("em_fit")) {
    Section sec(*s, "em_fit");
    sec.read("input", c.em_fit.input);
    sec.read("samples", c.em_fit.samples);
    sec.finish();
  }
  top.finish();
  validate(c);
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  ExperimentConfig c = parse_config(j);
  c.base_dir = path.parent_path();
  return c;
}

json config_to_json(const ExperimentConfig& c) {
  json j;
  j["experiment"] = c.experiment;
  j["seed"] = c.seed;
  j["n_ens"] = c.n_ens;
  j["burn_in"] = c.chain.burn_in;
  j["stride"] = c.chain.stride;
  j["importance_weights"] = c.importance_weights;
  j["procs"] = c.procs;
  j["balance"] = c.balance;
  j["output_dir"] = c.output_dir;
  j["sampler"] = {{"local_proposal_scale", c.sampler.local_proposal_scale},
                  {"serial_proposal_scale", c.sampler.serial_proposal_scale},
                  {"hmc_steps", c.sampler.hmc_steps},
                  {"hmc_trajectory", c.sampler.hmc_trajectory},
                  {"serial_hmc_trajectory", c.sampler.serial_hmc_trajectory}};
  j["gmm"] = {{"structure", to_string(c.gmm.structure)},
              {"min_components", c.gmm.min_components},
              {"max_components", c.gmm.max_components},
              {"max_iterations", c.gmm.em.max_iterations},
              {"relative_tolerance", c.gmm.em.relative_tolerance},
              {"restarts", c.gmm.em.restarts},
              {"covariance_floor", c.gmm.em.covariance_floor},
              {"max_repairs", c.gmm.em.max_repairs}};
  j["oned"] = {{"prior_samples", c.oned.prior_samples},
               {"observation", c.oned.observation},
               {"obs_variance", c.oned.obs_variance},
               {"histogram_bins", c.oned.histogram_bins},
               {"histogram_min", c.oned.histogram_min},
               {"histogram_max", c.oned.histogram_max},
               {"quadrature_per_bin", c.oned.quadrature_per_bin}};
  j["deblur"] = {{"image", c.deblur.image},
                 {"blur_width", c.deblur.blur_width},
                 {"blur_sigma", c.deblur.blur_sigma},
                 {"boundary", to_string(c.deblur.boundary)},
                 {"saturate", c.deblur.saturate},
                 {"noise_level", c.deblur.noise_level},
                 {"noise_interpretation", to_string(c.deblur.noise_meaning)},
                 {"prior_level", c.deblur.prior_level},
                 {"prior_interpretation", to_string(c.deblur.prior_meaning)},
                 {"prior_pool", c.deblur.prior_pool},
                 {"prior_subsample", c.deblur.prior_subsample},
                 {"mechanisms", c.deblur.mechanisms}};
  j["tikhonov"] = {{"alpha_min", c.tikhonov.alpha_min},
                   {"alpha_max", c.tikhonov.alpha_max},
                   {"alpha_count", c.tikhonov.alpha_count},
                   {"regularizer", c.tikhonov.regularizer},
                   {"relative_tolerance", c.tikhonov.solver.relative_tolerance},
                   {"max_iterations", c.tikhonov.solver.max_iterations}};
  j["bench"] = {{"p_values", c.bench.p_values},
                {"repetitions", c.bench.repetitions},
                {"t_s", c.bench.t_s},
                {"t_w", c.bench.t_w},
                {"mechanism", c.bench.mechanism}};
  j["em_fit"] = {{"input", c.em_fit.input}, {"samples", c.em_fit.samples}};
  return j;
}

std::filesystem::path resolve_path(const ExperimentConfig& cfg, const std::string& p) {
  std::filesystem::path path(p);
  if (path.is_absolute() || cfg.base_dir.empty()) return path;
  return cfg.base_dir / path;
}

} // namespace csample
