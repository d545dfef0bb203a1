#include "csample/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <sstream>
#include <thread>

#include "csample/errors.hpp"
#include "csample/io.hpp"

namespace csample {

using nlohmann::json;

namespace {

// Stage tags for derive_seed; each stage draws from its own key.
enum Stage : std::uint64_t {
  kPriorEnsemble = 1,
  kEm = 2,
  kParallelGaussian = 3,
  kSerialGaussian = 4,
  kNoise = 5,
  kPriorPool = 6,
  kSubsample = 7,
  kSerialHmc = 8,
  kParallelHmc = 9,
};

std::uint64_t stage_seed(const ExperimentConfig& cfg, Stage s) { return derive_seed(cfg.seed, s); }

Stage parallel_stage(MechanismKind k) {
  return k == MechanismKind::hmc ? kParallelHmc : kParallelGaussian;
}

class Stopwatch {
public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

// Writes artifacts into the output directory (if any) and records their names.
class Artifacts {
public:
  Artifacts(const ExperimentConfig& cfg, RunSummary& summary) : summary_(summary) {
    if (cfg.output_dir.empty()) return;
    dir_ = cfg.output_dir;
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw IoError("cannot create output directory " + dir_.string() + ": " + ec.message());
  }

  bool enabled() const { return !dir_.empty(); }

  void json_file(const std::string& name, const json& j) {
    if (!enabled()) return;
    write_json(dir_ / name, j);
    summary_.manifest.push_back(name);
  }
  void text(const std::string& name, const std::string& body) {
    if (!enabled()) return;
    write_text(dir_ / name, body);
    summary_.manifest.push_back(name);
  }
  void samples(const std::string& name, const Ensemble& e) {
    if (!enabled()) return;
    write_samples_csv(dir_ / name, e);
    summary_.manifest.push_back(name);
  }
  void image(const std::string& name, const ImageGrid& img) {
    if (!enabled()) return;
    write_pgm(dir_ / name, img);
    summary_.manifest.push_back(name);
  }

  // timings.json and summary.json, in that order.
  void finish(const ExperimentConfig& cfg) {
    if (!enabled()) return;
    json_file("config.json", config_to_json(cfg));
    json_file("timings.json", summary_.timings);
    summary_.manifest.push_back("summary.json");
    write_json(dir_ / "summary.json", summary_.to_json());
  }

private:
  RunSummary& summary_;
  std::filesystem::path dir_;
};

Ensemble as_ensemble(const ChainResult& r) {
  Ensemble e = r.samples;
  e.weights.clear();
  return e;
}

json chain_records_json(const McResult& r) {
  json out = json::array();
  for (const ChainRecord& c : r.chains) {
    out.push_back({{"component", c.component},
                   {"budget", c.budget},
                   {"worker", c.worker},
                   {"skipped", c.skipped},
                   {"failed", c.failed},
                   {"error", c.error},
                   {"proposals", c.result.proposals_made},
                   {"accepted", c.result.proposals_accepted},
                   {"acceptance", c.result.acceptance_rate},
                   {"divergences", c.result.divergences}});
  }
  return out;
}

void append_acceptance_rows(std::ostringstream& out, const std::string& method, const McResult& r) {
  for (std::size_t c = 0; c < r.chains.size(); ++c) {
    const ChainRecord& rec = r.chains[c];
    out << method << ',' << c << ',' << rec.component << ',' << rec.budget << ','
        << rec.result.proposals_made << ',' << rec.result.proposals_accepted << ','
        << format_double(rec.result.acceptance_rate) << '\n';
  }
  out << method << ",all,all," << r.ensemble.size() << ',' << r.proposals_made << ','
      << r.proposals_accepted << ',' << format_double(r.acceptance_rate) << '\n';
}

void append_acceptance_rows(std::ostringstream& out, const std::string& method, const ChainResult& r) {
  out << method << ",0,all," << r.samples.size() << ',' << r.proposals_made << ','
      << r.proposals_accepted << ',' << format_double(r.acceptance_rate) << '\n';
}

std::string aic_csv(const ModelSelection& sel) {
  std::ostringstream out;
  out << "n_components,ok,log_likelihood,aic\n";
  for (const AicCandidate& c : sel.candidates) {
    out << c.n_components << ',' << (c.ok ? 1 : 0) << ',' << format_double(c.log_likelihood) << ','
        << format_double(c.aic) << '\n';
  }
  return out.str();
}

std::size_t effective_max_components(const ExperimentConfig& cfg, std::size_t n_data) {
  const std::size_t cap = std::max<std::size_t>(1, n_data / 2);
  return std::max(cfg.gmm.min_components, std::min(cfg.gmm.max_components, cap));
}

ModelSelection fit_prior(const ExperimentConfig& cfg, const Ensemble& data) {
  const std::size_t max_c = effective_max_components(cfg, data.size());
  if (cfg.gmm.min_components > max_c) {
    throw InsufficientSamples("prior ensemble too small for " + std::to_string(cfg.gmm.min_components) +
                              " components");
  }
  return select_model_aic(data, cfg.gmm.min_components, max_c, cfg.gmm.structure,
                          RngStream(stage_seed(cfg, kEm), 0), cfg.gmm.em);
}

DenseMatrix grid_laplacian(std::size_t rows, std::size_t cols, double shift) {
  const std::size_t n = rows * cols;
  DenseMatrix a(n, n);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const std::size_t i = r * cols + c;
      auto link = [&](std::size_t j) {
        a(i, j) -= 1.0;
        a(i, i) += 1.0;
      };
      if (r > 0) link(i - cols);
      if (r + 1 < rows) link(i + cols);
      if (c > 0) link(i - 1);
      if (c + 1 < cols) link(i + 1);
      a(i, i) += shift;
    }
  }
  return a;
}

double level_to_variance(double level, double mean, LevelMeaning m) {
  const double v = level * mean;
  return m == LevelMeaning::std_dev ? v * v : v;
}

} // namespace

json RunSummary::to_json() const {
  json j;
  j["acceptance"] = acceptance;
  j["relative_errors"] = relative_errors;
  j["timings"] = {{"file", "timings.json"}};
  j["n_c_selected"] = n_c_selected ? json(*n_c_selected) : json(nullptr);
  j["alpha_star"] = alpha_star ? json(*alpha_star) : json(nullptr);
  j["manifest"] = manifest;
  j["metrics"] = metrics;
  j["warnings"] = warnings;
  return j;
}

double relative_error(std::span<const double> x, std::span<const double> x_true) {
  if (x.size() != x_true.size()) throw DimensionMismatch("relative_error", x_true.size(), x.size());
  const double ref = norm2(x_true);
  if (!(ref > 0.0)) throw ZeroReference();
  return norm2(subtract(x, x_true)) / ref;
}

GaussianMixture oned_generator() {
  const Vector w{0.09, 0.19, 0.09, 0.28, 0.15, 0.15, 0.03, 0.02};
  const Vector mu{-6.0, -2.5, 0.0, 2.5, 6.0, 6.5, 7.5, 8.0};
  const Vector var{0.20, 0.28, 0.08, 0.24, 0.28, 0.08, 0.12, 0.04};
  std::vector<Vector> means;
  std::vector<SpdMatrix> covs;
  for (std::size_t i = 0; i < w.size(); ++i) {
    means.push_back({mu[i]});
    covs.push_back(SpdMatrix::diagonal({var[i]}));
  }
  return GaussianMixture(CovStructure::diagonal, w, means, covs);
}

Vector quadrature_bin_probabilities(const PosteriorModel& model, double lo, double hi,
                                    std::size_t bins, std::size_t per_bin) {
  if (model.dim() != 1) throw DimensionMismatch("quadrature_bin_probabilities", 1, model.dim());
  if (bins == 0 || per_bin == 0 || !(hi > lo)) throw Error("quadrature: invalid grid");
  const std::size_t n = bins * per_bin;
  const double h = (hi - lo) / static_cast<double>(n);
  Vector log_f(n + 1);
  for (std::size_t k = 0; k <= n; ++k) {
    const double x = lo + h * static_cast<double>(k);
    log_f[k] = model.unnormalized_log_posterior(std::span<const double>(&x, 1));
  }
  const double shift = *std::max_element(log_f.begin(), log_f.end());
  Vector probs(bins, 0.0);
  for (std::size_t b = 0; b < bins; ++b) {
    double s = 0.0;
    for (std::size_t k = b * per_bin; k < (b + 1) * per_bin; ++k) {
      s += 0.5 * h * (std::exp(log_f[k] - shift) + std::exp(log_f[k + 1] - shift));
    }
    probs[b] = s;
  }
  const double z = pairwise_sum(probs);
  for (double& p : probs) p /= z;
  return probs;
}

Vector ensemble_bin_probabilities(const Ensemble& e, double lo, double hi, std::size_t bins,
                                  double* outside) {
  if (e.size() == 0) throw InsufficientSamples("histogram of an empty ensemble");
  if (e.dim() != 1) throw DimensionMismatch("ensemble_bin_probabilities", 1, e.dim());
  Vector p(bins, 0.0);
  double out = 0.0;
  const double uniform = 1.0 / static_cast<double>(e.size());
  const double width = (hi - lo) / static_cast<double>(bins);
  for (std::size_t i = 0; i < e.size(); ++i) {
    const double w = e.weighted() ? e.weights[i] : uniform;
    const double x = e.members[i][0];
    if (x < lo || x > hi) {
      out += w;
      continue;
    }
    const auto b = std::min(bins - 1, static_cast<std::size_t>((x - lo) / width));
    p[b] += w;
  }
  if (outside) *outside = out;
  return p;
}

double total_variation(const Vector& p, const Vector& q, double p_outside) {
  if (p.size() != q.size()) throw DimensionMismatch("total_variation", q.size(), p.size());
  double s = std::abs(p_outside);
  for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
  return 0.5 * s;
}

Vector ensemble_mean(const Ensemble& e) {
  if (e.size() == 0) throw InsufficientSamples("mean of an empty ensemble");
  const std::size_t d = e.dim();
  Vector m(d, 0.0);
  const double uniform = 1.0 / static_cast<double>(e.size());
  for (std::size_t i = 0; i < e.size(); ++i) {
    const double w = e.weighted() ? e.weights[i] : uniform;
    for (std::size_t j = 0; j < d; ++j) m[j] += w * e.members[i][j];
  }
  return m;
}

Vector ensemble_median(const Ensemble& e) {
  if (e.size() == 0) throw InsufficientSamples("median of an empty ensemble");
  const std::size_t d = e.dim();
  const std::size_t n = e.size();
  Vector med(d);
  std::vector<std::size_t> order(n);
  for (std::size_t j = 0; j < d; ++j) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return e.members[a][j] < e.members[b][j]; });
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += e.weighted() ? e.weights[i] : 1.0;
    double acc = 0.0;
    med[j] = e.members[order.back()][j];
    for (std::size_t k = 0; k < n; ++k) {
      acc += e.weighted() ? e.weights[order[k]] : 1.0;
      if (acc >= 0.5 * total) {
        med[j] = e.members[order[k]][j];
        break;
      }
    }
  }
  return med;
}

OnedSetup build_oned_setup(const ExperimentConfig& cfg) {
  const GaussianMixture truth = oned_generator();
  RngStream rng(stage_seed(cfg, kPriorEnsemble), 0);
  Ensemble data;
  data.members.reserve(cfg.oned.prior_samples);
  for (std::size_t i = 0; i < cfg.oned.prior_samples; ++i) data.members.push_back(gmm_sample(truth, rng));
  ModelSelection sel = fit_prior(cfg, data);
  PosteriorModel model(sel.best.mixture, {cfg.oned.observation},
                       SpdMatrix::diagonal({cfg.oned.obs_variance}), make_identity(1));
  return OnedSetup{std::move(data), std::move(sel), std::move(model)};
}

OnedOutcome run_oned_benchmark(const ExperimentConfig& cfg) {
  Stopwatch total;
  RunSummary summary;
  Artifacts art(cfg, summary);

  Stopwatch fit_clock;
  OnedSetup setup = build_oned_setup(cfg);
  summary.timings["em_fit"] = fit_clock.seconds();
  const PosteriorModel& model = setup.model;
  summary.n_c_selected = model.prior().n_components();
  art.samples("prior_ensemble.csv", setup.prior_data);
  art.json_file("gmm.json", gmm_to_json(model.prior()));
  art.text("aic.csv", aic_csv(setup.selection));

  SamplerTuning gauss = cfg.sampler;
  gauss.kind = MechanismKind::gaussian;
  SamplerTuning hmc = cfg.sampler;
  hmc.kind = MechanismKind::hmc;

  Stopwatch clock;
  ChainResult serial_gaussian =
      run_serial_chain(model, cfg.n_ens, gauss, cfg.chain, stage_seed(cfg, kSerialGaussian));
  summary.timings["serial_gaussian"] = clock.seconds();
  clock = Stopwatch();
  ChainResult serial_hmc = run_serial_chain(model, cfg.n_ens, hmc, cfg.chain, stage_seed(cfg, kSerialHmc));
  summary.timings["serial_hmc"] = clock.seconds();

  auto parallel = [&](const SamplerTuning& t) {
    const SchedulerPlan plan =
        make_plan(model, cfg.n_ens, cfg.procs, t, cfg.chain, stage_seed(cfg, parallel_stage(t.kind)), cfg.balance);
    if (!plan.budget_feasible) summary.warnings.push_back("N_ens < n_c: some chains have zero budget");
    return run_mc_mcmc(model, plan, cfg.importance_weights);
  };
  McResult parallel_gaussian = parallel(gauss);
  summary.timings["parallel_gaussian"] = parallel_gaussian.wall_time;
  McResult parallel_hmc = parallel(hmc);
  summary.timings["parallel_hmc"] = parallel_hmc.wall_time;

  summary.acceptance = {{"serial_gaussian", serial_gaussian.acceptance_rate},
                        {"parallel_gaussian", parallel_gaussian.acceptance_rate},
                        {"serial_hmc", serial_hmc.acceptance_rate},
                        {"parallel_hmc", parallel_hmc.acceptance_rate},
                        {"per_chain",
                         {{"parallel_gaussian", chain_records_json(parallel_gaussian)},
                          {"parallel_hmc", chain_records_json(parallel_hmc)}}}};

  // Reference posterior by quadrature and histogram comparison.
  const OnedConfig& o = cfg.oned;
  const Vector reference =
      quadrature_bin_probabilities(model, o.histogram_min, o.histogram_max, o.histogram_bins, o.quadrature_per_bin);
  const Ensemble sg = as_ensemble(serial_gaussian);
  const Ensemble sh = as_ensemble(serial_hmc);
  struct Method {
    const char* name;
    const Ensemble* e;
  };
  const Method methods[] = {{"serial_gaussian", &sg},
                            {"serial_hmc", &sh},
                            {"parallel_gaussian", &parallel_gaussian.ensemble},
                            {"parallel_hmc", &parallel_hmc.ensemble}};
  std::vector<Vector> hists;
  json tv = json::object();
  json means = json::object();
  for (const Method& m : methods) {
    double outside = 0.0;
    hists.push_back(ensemble_bin_probabilities(*m.e, o.histogram_min, o.histogram_max, o.histogram_bins, &outside));
    tv[m.name] = total_variation(hists.back(), reference, outside);
    means[m.name] = ensemble_mean(*m.e)[0];
  }

  const std::size_t n_fine = o.histogram_bins * o.quadrature_per_bin;
  const double h = (o.histogram_max - o.histogram_min) / static_cast<double>(n_fine);
  double ref_mean = 0.0;
  {
    const double width = (o.histogram_max - o.histogram_min) / static_cast<double>(o.histogram_bins);
    for (std::size_t b = 0; b < reference.size(); ++b)
      ref_mean += reference[b] * (o.histogram_min + (static_cast<double>(b) + 0.5) * width);
  }
  means["reference_binned"] = ref_mean;

  summary.metrics["total_variation"] = tv;
  summary.metrics["posterior_mean"] = means;
  summary.metrics["budgets"] = json::array();
  for (const ChainRecord& c : parallel_gaussian.chains) summary.metrics["budgets"].push_back(c.budget);
  summary.metrics["component_importance"] = component_importance(model);
  summary.metrics["divergences"] = {{"serial_hmc", serial_hmc.divergences},
                                    {"parallel_hmc", [&] {
                                       std::uint64_t d = 0;
                                       for (const ChainRecord& c : parallel_hmc.chains) d += c.result.divergences;
                                       return d;
                                     }()}};

  if (art.enabled()) {
    art.samples("samples_serial_gaussian.csv", sg);
    art.samples("samples_serial_hmc.csv", sh);
    art.samples("samples_parallel_gaussian.csv", parallel_gaussian.ensemble);
    art.samples("samples_parallel_hmc.csv", parallel_hmc.ensemble);

    std::ostringstream hist;
    hist << "bin_lo,bin_hi,reference,serial_gaussian,serial_hmc,parallel_gaussian,parallel_hmc\n";
    const double width = (o.histogram_max - o.histogram_min) / static_cast<double>(o.histogram_bins);
    for (std::size_t b = 0; b < o.histogram_bins; ++b) {
      hist << format_double(o.histogram_min + width * static_cast<double>(b)) << ','
           << format_double(o.histogram_min + width * static_cast<double>(b + 1)) << ','
           << format_double(reference[b]);
      for (const Vector& hh : hists) hist << ',' << format_double(hh[b]);
      hist << '\n';
    }
    art.text("histogram.csv", hist.str());

    // Normalised density on the quadrature grid.
    std::ostringstream dens;
    dens << "x,density\n";
    Vector logs(n_fine + 1);
    for (std::size_t k = 0; k <= n_fine; ++k) {
      const double x = o.histogram_min + h * static_cast<double>(k);
      logs[k] = model.unnormalized_log_posterior(std::span<const double>(&x, 1));
    }
    const double shift = *std::max_element(logs.begin(), logs.end());
    double z = 0.0;
    for (std::size_t k = 0; k < n_fine; ++k) z += 0.5 * h * (std::exp(logs[k] - shift) + std::exp(logs[k + 1] - shift));
    for (std::size_t k = 0; k <= n_fine; ++k) {
      dens << format_double(o.histogram_min + h * static_cast<double>(k)) << ','
           << format_double(std::exp(logs[k] - shift) / z) << '\n';
    }
    art.text("reference_density.csv", dens.str());

    std::ostringstream acc;
    acc << "method,chain,component,samples,proposals,accepted,acceptance\n";
    append_acceptance_rows(acc, "serial_gaussian", serial_gaussian);
    append_acceptance_rows(acc, "serial_hmc", serial_hmc);
    append_acceptance_rows(acc, "parallel_gaussian", parallel_gaussian);
    append_acceptance_rows(acc, "parallel_hmc", parallel_hmc);
    art.text("acceptance.csv", acc.str());
  }
  summary.timings["total"] = total.seconds();
  art.finish(cfg);
  return OnedOutcome{std::move(summary), std::move(setup), std::move(serial_gaussian), std::move(serial_hmc),
                     std::move(parallel_gaussian), std::move(parallel_hmc)};
}

DeblurSetup build_deblur_setup(const ExperimentConfig& cfg) {
  const DeblurConfig& d = cfg.deblur;
  DeblurSetup s;
  s.truth = d.image.empty() ? make_disk_phantom(32, 32, 10.0, 0.2, 0.8)
                            : read_pgm(resolve_path(cfg, d.image));
  const double mean = s.truth.mean();
  if (!(mean > 0.0)) throw ZeroReference();
  OperatorPtr blur = make_gaussian_blur(s.truth.rows, s.truth.cols, d.blur_width, d.blur_sigma, d.boundary);
  s.op = d.saturate ? make_saturated(blur) : blur;
  s.noise_std = std::sqrt(level_to_variance(d.noise_level, mean, d.noise_meaning));
  s.prior_variance = level_to_variance(d.prior_level, mean, d.prior_meaning);

  const Vector blurred = s.op->apply(s.truth.intensities);
  s.blurred = ImageGrid(s.truth.rows, s.truth.cols, blurred);
  RngStream noise(stage_seed(cfg, kNoise), 0);
  Vector y = blurred;
  for (double& v : y) v += s.noise_std * noise.standard_normal();
  s.observed = ImageGrid(s.truth.rows, s.truth.cols, std::move(y));

  RngStream pool_rng(stage_seed(cfg, kPriorPool), 0);
  const double prior_std = std::sqrt(s.prior_variance);
  std::vector<Vector> pool(d.prior_pool, blurred);
  for (Vector& m : pool)
    for (double& v : m) v += prior_std * pool_rng.standard_normal();
  // Uniform subsample without replacement (partial Fisher-Yates).
  RngStream pick(stage_seed(cfg, kSubsample), 0);
  std::vector<std::size_t> idx(pool.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t k = 0; k < d.prior_subsample; ++k) {
    const std::size_t j = k + pick.uniform_index(idx.size() - k);
    std::swap(idx[k], idx[j]);
  }
  for (std::size_t k = 0; k < d.prior_subsample; ++k) s.prior_data.members.push_back(pool[idx[k]]);
  return s;
}

TikhonovProblem deblur_tikhonov_problem(const ExperimentConfig& cfg, const DeblurSetup& s) {
  TikhonovProblem p;
  p.op = s.op;
  p.y = s.observed.intensities;
  const std::size_t n = s.truth.intensities.size();
  p.obs_cov = SpdMatrix::spherical(n, s.noise_std * s.noise_std);
  p.reg = cfg.tikhonov.regularizer == "laplacian"
              ? SpdMatrix::full(grid_laplacian(s.truth.rows, s.truth.cols, 1e-3), CovStructure::full)
              : SpdMatrix::identity(n);
  return p;
}

namespace {

struct LCurveRun {
  LCurveResult lcurve;
  double seconds = 0.0;
};

LCurveRun run_lcurve(const ExperimentConfig& cfg, const DeblurSetup& s) {
  Stopwatch clock;
  const TikhonovProblem prob = deblur_tikhonov_problem(cfg, s);
  LCurveRun r;
  r.lcurve = lcurve_select_alpha(prob, log_spaced(cfg.tikhonov.alpha_min, cfg.tikhonov.alpha_max, cfg.tikhonov.alpha_count),
                                 s.observed.intensities, cfg.tikhonov.solver, cfg.procs);
  r.seconds = clock.seconds();
  return r;
}

void record_lcurve(RunSummary& summary, Artifacts& art, const LCurveResult& lc) {
  summary.alpha_star = lc.alpha_star;
  if (lc.degenerate) summary.warnings.push_back("L-curve curvature is flat; alpha_star is the grid midpoint");
  bool all_converged = true;
  for (const LCurvePoint& p : lc.points) all_converged = all_converged && p.converged;
  if (!all_converged) summary.warnings.push_back("some Tikhonov solves hit max_iterations");
  summary.metrics["lcurve_degenerate"] = lc.degenerate;
  if (art.enabled()) {
    std::ostringstream out;
    out << "alpha,residual_norm,solution_norm,curvature\n";
    for (const LCurvePoint& p : lc.points) {
      out << format_double(p.alpha) << ',' << format_double(p.residual_norm) << ','
          << format_double(p.solution_norm) << ',' << format_double(p.curvature) << '\n';
    }
    art.text("lcurve.csv", out.str());
  }
}

} // namespace

DeblurOutcome run_deblur_experiment(const ExperimentConfig& cfg) {
  Stopwatch total;
  DeblurOutcome out;
  RunSummary& summary = out.summary;
  Artifacts art(cfg, summary);

  out.setup = build_deblur_setup(cfg);
  const DeblurSetup& s = out.setup;
  const Vector& truth = s.truth.intensities;
  art.image("truth.pgm", s.truth);
  art.image("blurred.pgm", s.blurred);
  art.image("observed.pgm", s.observed);
  art.samples("prior_ensemble.csv", s.prior_data);

  Stopwatch fit_clock;
  const ModelSelection sel = fit_prior(cfg, s.prior_data);
  summary.timings["em_fit"] = fit_clock.seconds();
  summary.n_c_selected = sel.best.mixture.n_components();
  art.text("aic.csv", aic_csv(sel));
  art.json_file("gmm.json", gmm_to_json(sel.best.mixture));

  const std::size_t n = truth.size();
  const PosteriorModel model(sel.best.mixture, s.observed.intensities,
                             SpdMatrix::spherical(n, s.noise_std * s.noise_std), s.op);

  summary.relative_errors["observed"] = relative_error(s.observed.intensities, truth);
  summary.relative_errors["prior_mean"] = relative_error(ensemble_mean(s.prior_data), truth);

  json per_chain = json::object();
  for (const std::string& name : cfg.deblur.mechanisms) {
    SamplerTuning t = cfg.sampler;
    t.kind = mechanism_from_string(name);
    const SchedulerPlan plan =
        make_plan(model, cfg.n_ens, cfg.procs, t, cfg.chain, stage_seed(cfg, parallel_stage(t.kind)), cfg.balance);
    if (!plan.budget_feasible) summary.warnings.push_back("N_ens < n_c: some chains have zero budget");
    const McResult r = run_mc_mcmc(model, plan, cfg.importance_weights);
    summary.timings["parallel_" + name] = r.wall_time;
    Vector mean = ensemble_mean(r.ensemble);
    Vector median = ensemble_median(r.ensemble);
    summary.acceptance[name] = r.acceptance_rate;
    per_chain[name] = chain_records_json(r);
    summary.relative_errors["posterior_mean_" + name] = relative_error(mean, truth);
    summary.relative_errors["posterior_median_" + name] = relative_error(median, truth);
    art.samples("samples_" + name + ".csv", r.ensemble);
    art.image("posterior_mean_" + name + ".pgm", ImageGrid(s.truth.rows, s.truth.cols, mean));
    art.image("posterior_median_" + name + ".pgm", ImageGrid(s.truth.rows, s.truth.cols, median));
    out.mechanisms.push_back(name);
    out.posterior_means.push_back(std::move(mean));
    out.posterior_medians.push_back(std::move(median));
    out.acceptance.push_back(r.acceptance_rate);
  }
  summary.acceptance["per_chain"] = per_chain;

  const LCurveRun lc = run_lcurve(cfg, s);
  summary.timings["tikhonov_lcurve"] = lc.seconds;
  record_lcurve(summary, art, lc.lcurve);
  out.tikhonov = lc.lcurve.solutions[lc.lcurve.best];
  const double tik_err = relative_error(out.tikhonov, truth);
  summary.relative_errors["tikhonov"] = tik_err;
  art.image("tikhonov.pgm", ImageGrid(s.truth.rows, s.truth.cols, out.tikhonov));

  for (std::size_t k = 0; k < out.mechanisms.size(); ++k) {
    const double e = summary.relative_errors["posterior_mean_" + out.mechanisms[k]].get<double>();
    summary.metrics["improvement_over_tikhonov_" + out.mechanisms[k]] = 1.0 - e / tik_err;
  }
  summary.metrics["noise_std"] = s.noise_std;
  summary.metrics["prior_variance"] = s.prior_variance;
  summary.metrics["mean_intensity"] = s.truth.mean();
  summary.timings["total"] = total.seconds();
  art.finish(cfg);
  return out;
}

RunSummary run_tikhonov_experiment(const ExperimentConfig& cfg) {
  Stopwatch total;
  RunSummary summary;
  Artifacts art(cfg, summary);
  const DeblurSetup s = build_deblur_setup(cfg);
  art.image("truth.pgm", s.truth);
  art.image("observed.pgm", s.observed);
  const LCurveRun lc = run_lcurve(cfg, s);
  summary.timings["tikhonov_lcurve"] = lc.seconds;
  record_lcurve(summary, art, lc.lcurve);
  const Vector& x = lc.lcurve.solutions[lc.lcurve.best];
  summary.relative_errors["observed"] = relative_error(s.observed.intensities, s.truth.intensities);
  summary.relative_errors["tikhonov"] = relative_error(x, s.truth.intensities);
  art.image("tikhonov.pgm", ImageGrid(s.truth.rows, s.truth.cols, x));
  summary.timings["total"] = total.seconds();
  art.finish(cfg);
  return summary;
}

RunSummary run_speedup_benchmark(const ExperimentConfig& cfg) {
  Stopwatch total;
  RunSummary summary;
  Artifacts art(cfg, summary);
  const OnedSetup setup = build_oned_setup(cfg);
  summary.n_c_selected = setup.model.prior().n_components();

  SamplerTuning t = cfg.sampler;
  t.kind = mechanism_from_string(cfg.bench.mechanism);
  SchedulerPlan plan = make_plan(setup.model, cfg.n_ens, 1, t, cfg.chain, stage_seed(cfg, parallel_stage(t.kind)),
                                 cfg.balance);
  BenchmarkOptions opt;
  opt.p_values = cfg.bench.p_values;
  opt.repetitions = cfg.bench.repetitions;
  opt.t_s = cfg.bench.t_s;
  opt.t_w = cfg.bench.t_w;
  opt.balance = cfg.balance;
  const std::vector<BenchmarkRow> rows = benchmark_speedup(setup.model, plan, t, opt);

  json predicted = json::array();
  json measured = json::array();
  for (const BenchmarkRow& r : rows) {
    if (r.oversubscribed) {
      summary.warnings.push_back("p=" + std::to_string(r.p) + " exceeds the " +
                                 std::to_string(std::max(1u, std::thread::hardware_concurrency())) +
                                 " logical processors available (oversubscribed)");
    }
    const CostReport c = predict_cost(cost_input_for(setup.model, plan, t, r.p, opt.t_s, opt.t_w));
    predicted.push_back({{"p", r.p},
                         {"serial_cost", c.serial_cost},
                         {"parallel_cost", c.parallel_cost},
                         {"speedup", c.speedup},
                         {"efficiency", c.efficiency},
                         {"speedup_integral", c.speedup_integral},
                         {"efficiency_integral", c.efficiency_integral},
                         {"comm_cost", c.comm_cost},
                         {"overhead", c.overhead},
                         {"isoefficiency", c.isoefficiency}});
    measured.push_back({{"p", r.p}, {"wall_s", r.wall_s}, {"speedup", r.speedup}, {"efficiency", r.efficiency}});
  }
  summary.metrics["predicted"] = predicted;
  summary.metrics["logical_processors"] = std::max(1u, std::thread::hardware_concurrency());
  summary.timings["measured"] = measured;
  std::ostringstream csv;
  write_benchmark_csv(csv, rows);
  art.text("bench.csv", csv.str());
  summary.timings["total"] = total.seconds();
  art.finish(cfg);
  return summary;
}

RunSummary run_em_fit(const ExperimentConfig& cfg) {
  Stopwatch total;
  RunSummary summary;
  Artifacts art(cfg, summary);
  Ensemble data;
  if (cfg.em_fit.input.empty()) {
    const GaussianMixture truth = oned_generator();
    RngStream rng(stage_seed(cfg, kPriorEnsemble), 0);
    for (std::size_t i = 0; i < cfg.em_fit.samples; ++i) data.members.push_back(gmm_sample(truth, rng));
  } else {
    data = read_samples_csv(resolve_path(cfg, cfg.em_fit.input));
    data.weights.clear();
  }
  art.samples("data.csv", data);
  const ModelSelection sel = fit_prior(cfg, data);
  summary.timings["em_fit"] = total.seconds();
  summary.n_c_selected = sel.best.mixture.n_components();
  summary.metrics["log_likelihood"] = sel.best.log_likelihood;
  summary.metrics["iterations"] = sel.best.iterations;
  summary.metrics["converged"] = sel.best.converged;
  summary.metrics["repairs"] = sel.best.repairs;
  summary.metrics["gmm"] = gmm_to_json(sel.best.mixture);
  if (!sel.best.converged) summary.warnings.push_back("EM hit max_iterations before converging");
  art.json_file("gmm.json", gmm_to_json(sel.best.mixture));
  art.text("aic.csv", aic_csv(sel));
  summary.timings["total"] = total.seconds();
  art.finish(cfg);
  return summary;
}

RunSummary run_experiment(const ExperimentConfig& cfg) {
  if (cfg.experiment == "oned") return run_oned_benchmark(cfg).summary;
  if (cfg.experiment == "deblur") return run_deblur_experiment(cfg).summary;
  if (cfg.experiment == "tikhonov") return run_tikhonov_experiment(cfg);
  if (cfg.experiment == "bench") return run_speedup_benchmark(cfg);
  if (cfg.experiment == "em-fit") return run_em_fit(cfg);
  throw ConfigError("unknown experiment '" + cfg.experiment + "'");
}

} // namespace csample
