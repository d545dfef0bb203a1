#include "csample/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>

#include "csample/errors.hpp"

namespace csample {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

bool is_diag(CovStructure s) { return s == CovStructure::diagonal || s == CovStructure::spherical; }

} // namespace

void Ensemble::validate() const {
  const std::size_t d = dim();
  for (const auto& m : members) {
    if (m.size() != d) throw DimensionMismatch("Ensemble", d, m.size());
  }
  if (weighted()) {
    if (weights.size() != members.size()) {
      throw DimensionMismatch("Ensemble weights", members.size(), weights.size());
    }
    const double s = std::accumulate(weights.begin(), weights.end(), 0.0);
    if (std::abs(s - 1.0) > 1e-12) throw Error("Ensemble: weights do not sum to one");
  }
}

GaussianMixture::GaussianMixture(CovStructure structure, Vector weights, std::vector<Vector> means,
                                 std::vector<SpdMatrix> covariances)
    : structure_(structure), weights_(std::move(weights)), means_(std::move(means)),
      covariances_(std::move(covariances)) {
  const std::size_t k = weights_.size();
  if (k == 0) throw Error("GaussianMixture: at least one component required");
  if (means_.size() != k) throw DimensionMismatch("GaussianMixture means", k, means_.size());
  if (covariances_.size() != k) {
    throw DimensionMismatch("GaussianMixture covariances", k, covariances_.size());
  }
  const double total = std::accumulate(weights_.begin(), weights_.end(), 0.0);
  if (std::abs(total - 1.0) > 1e-9) throw Error("GaussianMixture: weights must sum to one");
  for (auto& w : weights_) {
    if (!(w > 0.0)) throw Error("GaussianMixture: weights must be positive");
    w /= total;
  }
  const std::size_t d = means_.front().size();
  if (d == 0) throw Error("GaussianMixture: zero-dimensional state");
  factors_.reserve(k);
  log_dets_.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    if (means_[i].size() != d) throw DimensionMismatch("GaussianMixture mean", d, means_[i].size());
    const SpdMatrix& c = covariances_[i];
    if (c.order() != d) throw DimensionMismatch("GaussianMixture covariance", d, c.order());
    if (is_diag(structure_) != c.is_diagonal()) {
      throw Error("GaussianMixture: covariance storage does not match structure tag");
    }
    factors_.push_back(cholesky(c));
    log_dets_.push_back(factors_.back().log_determinant());
  }
  const double c = -0.5 * static_cast<double>(dim()) * kLog2Pi;
  for (std::size_t i = 0; i < n_components(); ++i)
    log_consts_.push_back(std::log(weights_[i]) + c - 0.5 * log_dets_[i]);
}

Vector GaussianMixture::half_mahalanobis(std::span<const double> x) const {
  if (x.size() != dim()) throw DimensionMismatch("GaussianMixture", dim(), x.size());
  Vector out(n_components());
  Vector diff(dim());
  for (std::size_t i = 0; i < n_components(); ++i) {
    for (std::size_t j = 0; j < diff.size(); ++j) diff[j] = x[j] - means_[i][j];
    out[i] = -0.5 * factors_[i].inverse_quadratic(diff);
  }
  return out;
}

Vector GaussianMixture::component_log_densities(std::span<const double> x) const {
  Vector out(n_components());
  Vector scratch(dim());
  component_log_densities(x, out, scratch);
  return out;
}

void GaussianMixture::component_log_densities(std::span<const double> x, std::span<double> out,
                                              std::span<double> scratch) const {
  if (x.size() != dim()) throw DimensionMismatch("GaussianMixture", dim(), x.size());
  if (out.size() != n_components()) {
    throw DimensionMismatch("GaussianMixture output", n_components(), out.size());
  }
  for (std::size_t i = 0; i < n_components(); ++i) {
    for (std::size_t j = 0; j < x.size(); ++j) scratch[j] = x[j] - means_[i][j];
    out[i] = log_consts_[i] - 0.5 * factors_[i].inverse_quadratic_inplace(scratch);
  }
}

Vector GaussianMixture::overall_mean() const {
  Vector m(dim(), 0.0);
  for (std::size_t i = 0; i < n_components(); ++i)
    for (std::size_t j = 0; j < dim(); ++j) m[j] += weights_[i] * means_[i][j];
  return m;
}

SpdMatrix GaussianMixture::overall_covariance() const {
  const std::size_t d = dim();
  const Vector m = overall_mean();
  if (is_diag(structure_)) {
    Vector v(d, 0.0);
    for (std::size_t i = 0; i < n_components(); ++i) {
      const Vector ci = covariances_[i].diag();
      for (std::size_t j = 0; j < d; ++j) {
        const double dm = means_[i][j] - m[j];
        v[j] += weights_[i] * (ci[j] + dm * dm);
      }
    }
    return SpdMatrix::diagonal(std::move(v));
  }
  DenseMatrix c(d, d);
  for (std::size_t i = 0; i < n_components(); ++i) {
    for (std::size_t a = 0; a < d; ++a) {
      for (std::size_t b = 0; b < d; ++b) {
        c(a, b) += weights_[i] *
                   (covariances_[i](a, b) + (means_[i][a] - m[a]) * (means_[i][b] - m[b]));
      }
    }
  }
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = 0; b < a; ++b) c(b, a) = c(a, b);
  return SpdMatrix::full(c);
}

double log_sum_exp(std::span<const double> v) {
  if (v.empty()) return -std::numeric_limits<double>::infinity();
  const double m = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 8) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

double gmm_logpdf(const GaussianMixture& g, std::span<const double> x) {
  return log_sum_exp(g.component_log_densities(x));
}

Vector gmm_sample(const GaussianMixture& g, RngStream& rng) {
  const double u = rng.uniform();
  double cumulative = 0.0;
  std::size_t k = g.n_components() - 1;
  for (std::size_t i = 0; i < g.n_components(); ++i) {
    cumulative += g.weights()[i];
    if (u < cumulative) {
      k = i;
      break;
    }
  }
  return sample_mvn(rng, g.means()[k], g.factor(k));
}

std::size_t free_parameter_count(std::size_t n_components, std::size_t dim, CovStructure s) {
  const std::size_t k = n_components;
  const std::size_t d = dim;
  const std::size_t base = (k - 1) + k * d;
  switch (s) {
  case CovStructure::full: return base + k * d * (d + 1) / 2;
  case CovStructure::diagonal: return base + k * d;
  case CovStructure::spherical: return base + k;
  case CovStructure::tied: return base + d * (d + 1) / 2;
  }
  return base;
}

double aic(double log_likelihood, std::size_t n_components, std::size_t dim, CovStructure s) {
  return 2.0 * static_cast<double>(free_parameter_count(n_components, dim, s)) -
         2.0 * log_likelihood;
}

namespace {

// Data in canonical order, stored row-major.
struct DataMatrix {
  std::size_t n = 0;
  std::size_t d = 0;
  std::vector<double> x;
  std::span<const double> row(std::size_t i) const { return {x.data() + i * d, d}; }
};

DataMatrix canonical(const Ensemble& data) {
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::lexicographical_compare(data.members[a].begin(), data.members[a].end(),
                                        data.members[b].begin(), data.members[b].end());
  });
  DataMatrix m;
  m.n = data.size();
  m.d = data.dim();
  m.x.reserve(m.n * m.d);
  for (std::size_t i : order) m.x.insert(m.x.end(), data.members[i].begin(), data.members[i].end());
  return m;
}

// Weighted scatter of the data about `mean`, stored per structure: diagonal
// and spherical keep only the diagonal.
SpdMatrix scatter(const DataMatrix& data, std::span<const double> resp, std::size_t stride,
                  std::size_t col, std::span<const double> mean, double mass, CovStructure s,
                  double floor_lambda) {
  const std::size_t d = data.d;
  if (is_diag(s)) {
    Vector v(d, 0.0);
    for (std::size_t n = 0; n < data.n; ++n) {
      const double r = resp[n * stride + col];
      if (r == 0.0) continue;
      const auto x = data.row(n);
      for (std::size_t j = 0; j < d; ++j) {
        const double dx = x[j] - mean[j];
        v[j] += r * dx * dx;
      }
    }
    double tr = 0.0;
    for (auto& vj : v) {
      vj /= mass;
      tr += vj;
    }
    const double floor = floor_lambda * tr / static_cast<double>(d);
    if (s == CovStructure::spherical) return SpdMatrix::spherical(d, tr / static_cast<double>(d) + floor);
    for (auto& vj : v) vj += floor;
    return SpdMatrix::diagonal(std::move(v));
  }
  DenseMatrix c(d, d);
  Vector dx(d);
  for (std::size_t n = 0; n < data.n; ++n) {
    const double r = resp[n * stride + col];
    if (r == 0.0) continue;
    const auto x = data.row(n);
    for (std::size_t j = 0; j < d; ++j) dx[j] = x[j] - mean[j];
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = 0; b <= a; ++b) c(a, b) += r * dx[a] * dx[b];
  }
  double tr = 0.0;
  for (std::size_t a = 0; a < d; ++a) {
    for (std::size_t b = 0; b <= a; ++b) {
      c(a, b) /= mass;
      c(b, a) = c(a, b);
    }
    tr += c(a, a);
  }
  const double floor = floor_lambda * tr / static_cast<double>(d);
  for (std::size_t a = 0; a < d; ++a) c(a, a) += floor;
  return SpdMatrix::full(c, s);
}

SpdMatrix pooled(const std::vector<SpdMatrix>& covs, const Vector& mass, double total,
                 double floor_lambda) {
  // Tied: mass-weighted average of the per-component scatters (floors removed
  // and re-applied once).
  const std::size_t d = covs.front().order();
  DenseMatrix c(d, d);
  for (std::size_t k = 0; k < covs.size(); ++k)
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = 0; b < d; ++b) c(a, b) += mass[k] / total * covs[k](a, b);
  double tr = 0.0;
  for (std::size_t a = 0; a < d; ++a) tr += c(a, a);
  const double floor = floor_lambda * tr / static_cast<double>(d);
  for (std::size_t a = 0; a < d; ++a) c(a, a) += floor;
  return SpdMatrix::full(c, CovStructure::tied);
}

class EmRun {
public:
  EmRun(const DataMatrix& data, std::size_t k, CovStructure s, const EmOptions& opt)
      : data_(data), k_(k), s_(s), opt_(opt), resp_(data.n * k), lse_(data.n) {}

  EmResult run(RngStream& rng) {
    GaussianMixture g = initialise(rng);
    std::vector<double> trace;
    int repairs = 0;
    double ll = e_step(g);
    trace.push_back(ll);
    bool converged = false;
    int it = 0;
    for (; it < opt_.max_iterations; ++it) {
      auto next = m_step();
      if (!next) {
        if (++repairs > opt_.max_repairs) {
          throw DegenerateComponent("EM: component responsibility mass below two points");
        }
        g = repair(g);
        ll = e_step(g);
        trace.assign(1, ll);
        continue;
      }
      const double new_ll = e_step(*next);
      if (new_ll < ll) {
        // The covariance floor makes the M-step inexact; near the optimum it
        // can cost likelihood, so keep the previous parameters and stop.
        converged = true;
        ++it;
        break;
      }
      g = std::move(*next);
      trace.push_back(new_ll);
      const double gain = new_ll - ll;
      ll = new_ll;
      if (gain < opt_.relative_tolerance * std::abs(ll)) {
        converged = true;
        ++it;
        break;
      }
    }
    return EmResult{std::move(g), ll, std::move(trace), it, converged, repairs};
  }

private:
  SpdMatrix global_covariance() const {
    Vector ones(data_.n, 1.0);
    Vector mean(data_.d, 0.0);
    for (std::size_t n = 0; n < data_.n; ++n)
      for (std::size_t j = 0; j < data_.d; ++j) mean[j] += data_.row(n)[j];
    for (auto& m : mean) m /= static_cast<double>(data_.n);
    return scatter(data_, ones, 1, 0, mean, static_cast<double>(data_.n), s_,
                   std::max(opt_.covariance_floor, 1e-12));
  }

  GaussianMixture initialise(RngStream& rng) {
    const std::size_t n = data_.n;
    std::vector<std::size_t> centres;
    centres.push_back(rng.uniform_index(n));
    Vector d2(n, std::numeric_limits<double>::infinity());
    while (centres.size() < k_) {
      const auto c = data_.row(centres.back());
      double total = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const auto x = data_.row(i);
        double s = 0.0;
        for (std::size_t j = 0; j < data_.d; ++j) s += (x[j] - c[j]) * (x[j] - c[j]);
        d2[i] = std::min(d2[i], s);
        total += d2[i];
      }
      std::size_t pick = 0;
      if (total > 0.0) {
        const double u = rng.uniform() * total;
        double acc = 0.0;
        pick = n - 1;
        for (std::size_t i = 0; i < n; ++i) {
          acc += d2[i];
          if (u < acc && d2[i] > 0.0) {
            pick = i;
            break;
          }
        }
      } else {
        pick = rng.uniform_index(n);
      }
      centres.push_back(pick);
    }
    // Hard assignment to the nearest centre.
    std::fill(resp_.begin(), resp_.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto x = data_.row(i);
      std::size_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k_; ++c) {
        const auto m = data_.row(centres[c]);
        double s = 0.0;
        for (std::size_t j = 0; j < data_.d; ++j) s += (x[j] - m[j]) * (x[j] - m[j]);
        if (s < best_d) {
          best_d = s;
          best = c;
        }
      }
      resp_[i * k_ + best] = 1.0;
    }
    const SpdMatrix global = global_covariance();
    Vector weights(k_);
    std::vector<Vector> means(k_);
    std::vector<SpdMatrix> covs;
    Vector mass(k_);
    for (std::size_t c = 0; c < k_; ++c) {
      mass[c] = 0.0;
      means[c].assign(data_.d, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        const double r = resp_[i * k_ + c];
        if (r == 0.0) continue;
        mass[c] += r;
        const auto x = data_.row(i);
        for (std::size_t j = 0; j < data_.d; ++j) means[c][j] += x[j];
      }
      if (mass[c] >= 2.0) {
        for (auto& m : means[c]) m /= mass[c];
        covs.push_back(scatter(data_, resp_, k_, c, means[c], mass[c], component_tag(),
                               opt_.covariance_floor));
      } else {
        const auto seed = data_.row(centres[c]);
        means[c].assign(seed.begin(), seed.end());
        covs.push_back(global.retagged(component_tag()));
      }
      weights[c] = std::max(mass[c], 1.0);
    }
    const double wsum = std::accumulate(weights.begin(), weights.end(), 0.0);
    for (auto& w : weights) w /= wsum;
    if (s_ == CovStructure::tied) {
      SpdMatrix t = pooled(covs, mass, static_cast<double>(n), 0.0);
      covs.assign(k_, t);
    }
    return GaussianMixture(s_, std::move(weights), std::move(means), std::move(covs));
  }

  CovStructure component_tag() const { return s_ == CovStructure::tied ? CovStructure::full : s_; }

  double e_step(const GaussianMixture& g) {
    Vector scratch(data_.d);
    for (std::size_t i = 0; i < data_.n; ++i) {
      const std::span<double> logp(resp_.data() + i * k_, k_);
      g.component_log_densities(data_.row(i), logp, scratch);
      const double l = log_sum_exp(logp);
      lse_[i] = l;
      for (auto& r : logp) r = std::exp(r - l);
    }
    return pairwise_sum(lse_);
  }

  std::optional<GaussianMixture> m_step() {
    Vector mass(k_, 0.0);
    std::vector<Vector> means(k_, Vector(data_.d, 0.0));
    for (std::size_t i = 0; i < data_.n; ++i) {
      const auto x = data_.row(i);
      for (std::size_t c = 0; c < k_; ++c) {
        const double r = resp_[i * k_ + c];
        mass[c] += r;
        for (std::size_t j = 0; j < data_.d; ++j) means[c][j] += r * x[j];
      }
    }
    for (std::size_t c = 0; c < k_; ++c) {
      if (mass[c] < 2.0) {
        degenerate_ = c;
        return std::nullopt;
      }
      for (auto& m : means[c]) m /= mass[c];
    }
    std::vector<SpdMatrix> covs;
    covs.reserve(k_);
    const double floor = s_ == CovStructure::tied ? 0.0 : opt_.covariance_floor;
    for (std::size_t c = 0; c < k_; ++c) {
      covs.push_back(scatter(data_, resp_, k_, c, means[c], mass[c], component_tag(), floor));
    }
    if (s_ == CovStructure::tied) {
      SpdMatrix t = pooled(covs, mass, static_cast<double>(data_.n), opt_.covariance_floor);
      covs.assign(k_, t);
    }
    Vector weights(k_);
    for (std::size_t c = 0; c < k_; ++c) weights[c] = mass[c] / static_cast<double>(data_.n);
    return GaussianMixture(s_, std::move(weights), std::move(means), std::move(covs));
  }

  // Move the degenerate component onto the worst-explained point with the
  // global covariance.
  GaussianMixture repair(const GaussianMixture& g) {
    const std::size_t worst = static_cast<std::size_t>(
        std::min_element(lse_.begin(), lse_.end()) - lse_.begin());
    Vector weights = g.weights();
    std::vector<Vector> means = g.means();
    std::vector<SpdMatrix> covs = g.covariances();
    const auto x = data_.row(worst);
    means[degenerate_].assign(x.begin(), x.end());
    weights[degenerate_] = std::max(weights[degenerate_], 1.0 / static_cast<double>(data_.n));
    const double wsum = std::accumulate(weights.begin(), weights.end(), 0.0);
    for (auto& w : weights) w /= wsum;
    if (s_ != CovStructure::tied) covs[degenerate_] = global_covariance().retagged(s_);
    return GaussianMixture(s_, std::move(weights), std::move(means), std::move(covs));
  }

  const DataMatrix& data_;
  std::size_t k_;
  CovStructure s_;
  const EmOptions& opt_;
  std::vector<double> resp_;
  std::vector<double> lse_;
  std::size_t degenerate_ = 0;
};

} // namespace

EmResult em_fit(const Ensemble& data, std::size_t n_components, CovStructure structure,
                RngStream& rng, const EmOptions& options) {
  data.validate();
  if (n_components == 0) throw Error("em_fit: n_c must be at least 1");
  if (data.size() < 2 * n_components) {
    throw DegenerateComponent("em_fit: need at least two points per component (N_ens=" +
                              std::to_string(data.size()) + ", n_c=" +
                              std::to_string(n_components) + ")");
  }
  const DataMatrix m = canonical(data);
  std::optional<EmResult> best;
  std::string last_failure;
  const int restarts = std::max(1, options.restarts);
  for (int r = 0; r < restarts; ++r) {
    RngStream restart_rng(rng.next_u64(), static_cast<std::uint64_t>(r));
    try {
      EmRun run(m, n_components, structure, options);
      EmResult res = run.run(restart_rng);
      if (!best || res.log_likelihood > best->log_likelihood) best = std::move(res);
    } catch (const NumericalError& e) {
      last_failure = e.what();
    } catch (const NotPositiveDefinite& e) {
      last_failure = e.what();
    }
  }
  if (!best) throw DegenerateComponent("em_fit: every restart failed: " + last_failure);
  return std::move(*best);
}

ModelSelection select_model_aic(const Ensemble& data, std::size_t min_components,
                                std::size_t max_components, CovStructure structure,
                                const RngStream& rng, const EmOptions& options) {
  if (min_components == 0 || max_components < min_components) {
    throw Error("select_model_aic: empty candidate range");
  }
  std::optional<EmResult> best;
  double best_aic = std::numeric_limits<double>::infinity();
  std::vector<AicCandidate> candidates;
  std::string last_failure = "no candidate fitted";
  for (std::size_t k = min_components; k <= max_components; ++k) {
    RngStream child(derive_seed(rng.seed(), rng.stream_id()), k);
    try {
      EmResult fit = em_fit(data, k, structure, child, options);
      const double score = aic(fit.log_likelihood, k, data.dim(), structure);
      candidates.push_back({k, true, fit.log_likelihood, score});
      if (score < best_aic) {
        best_aic = score;
        best = std::move(fit);
      }
    } catch (const NumericalError& e) {
      last_failure = e.what();
      candidates.push_back({k, false, std::numeric_limits<double>::quiet_NaN(),
                            std::numeric_limits<double>::quiet_NaN()});
    }
  }
  if (!best) throw DegenerateComponent("select_model_aic: " + last_failure);
  return ModelSelection{std::move(*best), std::move(candidates)};
}

} // namespace csample
