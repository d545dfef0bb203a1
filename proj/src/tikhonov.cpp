#include "csample/tikhonov.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iomanip>
#include <limits>
#include <string>
#include <thread>
#include <tuple>

#include "csample/errors.hpp"

namespace csample {

namespace {

constexpr double kArmijo = 1e-4;
constexpr double kFlatCurvature = 1e-12;

double menger_curvature(double ax, double ay, double bx, double by, double cx, double cy) {
  const double cross = (bx - ax) * (cy - by) - (by - ay) * (cx - bx);
  const double ab = std::hypot(bx - ax, by - ay);
  const double bc = std::hypot(cx - bx, cy - by);
  const double ca = std::hypot(ax - cx, ay - cy);
  const double denom = ab * bc * ca;
  if (!(denom > 0.0)) return 0.0;
  return 2.0 * cross / denom;
}

} // namespace

void TikhonovProblem::validate() const {
  if (!op) throw Error("Tikhonov: operator is null");
  if (y.size() != op->out_dim()) throw DimensionMismatch("Tikhonov y", op->out_dim(), y.size());
  if (obs_cov.order() != op->out_dim()) throw DimensionMismatch("Tikhonov R", op->out_dim(), obs_cov.order());
  if (reg.order() != op->in_dim()) throw DimensionMismatch("Tikhonov C", op->in_dim(), reg.order());
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw Error("Tikhonov: alpha must be finite and >= 0");
  (void)cholesky(reg);
}

TikhonovProblem TikhonovProblem::with_alpha(double a) const {
  TikhonovProblem p = *this;
  p.alpha = a;
  return p;
}

TikhonovObjective::TikhonovObjective(TikhonovProblem problem)
    : prob_((problem.validate(), std::move(problem))), r_factor_(cholesky(prob_.obs_cov)) {}

double TikhonovObjective::residual_norm(std::span<const double> x) const {
  if (x.size() != prob_.op->in_dim()) throw DimensionMismatch("Tikhonov x", prob_.op->in_dim(), x.size());
  return std::sqrt(r_factor_.inverse_quadratic(subtract(prob_.op->apply(x), prob_.y)));
}

double TikhonovObjective::solution_norm(std::span<const double> x) const {
  if (x.size() != prob_.op->in_dim()) throw DimensionMismatch("Tikhonov x", prob_.op->in_dim(), x.size());
  return std::sqrt(std::max(0.0, dot(x, prob_.reg.multiply(x))));
}

double TikhonovObjective::value(std::span<const double> x) const {
  const double r = residual_norm(x);
  const double s = solution_norm(x);
  return r * r + prob_.alpha * s * s;
}

std::pair<double, Vector> TikhonovObjective::value_and_gradient(std::span<const double> x) const {
  if (x.size() != prob_.op->in_dim()) throw DimensionMismatch("Tikhonov x", prob_.op->in_dim(), x.size());
  const Vector resid = subtract(prob_.op->apply(x), prob_.y);
  const Vector w = r_factor_.solve(resid);
  const Vector cx = prob_.reg.multiply(x);
  const double value = dot(resid, w) + prob_.alpha * dot(x, cx);
  Vector g = prob_.op->adjoint_jacobian_apply(x, w);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = 2.0 * g[i] + 2.0 * prob_.alpha * cx[i];
  return {value, std::move(g)};
}

Vector TikhonovObjective::gradient(std::span<const double> x) const {
  return value_and_gradient(x).second;
}

namespace {

// For linear H the objective is quadratic and its gradient is affine, so
// A v = grad(v) - grad(0) gives the Hessian action and plain CG is exact.
TikhonovSolution solve_linear_cg(const TikhonovObjective& obj, std::span<const double> x0,
                                 const TikhonovSolverOptions& options) {
  const std::size_t n = x0.size();
  const Vector zero(n, 0.0);
  const Vector g0 = obj.gradient(zero);
  auto hess = [&](std::span<const double> v) {
    Vector a = obj.gradient(v);
    for (std::size_t i = 0; i < n; ++i) a[i] -= g0[i];
    return a;
  };
  Vector x(x0.begin(), x0.end());
  Vector g = obj.gradient(x);
  const double tol = options.relative_tolerance * std::max(1.0, norm2(g));
  Vector d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = -g[i];
  double gg = dot(g, g);
  int it = 0;
  while (std::sqrt(gg) > tol && it < options.max_iterations) {
    const Vector ad = hess(d);
    const double dad = dot(d, ad);
    if (!(dad > 0.0)) break;
    const double t = gg / dad;
    for (std::size_t i = 0; i < n; ++i) {
      x[i] += t * d[i];
      g[i] += t * ad[i];
    }
    ++it;
    // Refresh the recursive gradient now and then to stop drift.
    if (it % 50 == 0) g = obj.gradient(x);
    const double gg1 = dot(g, g);
    const double beta = gg1 / gg;
    for (std::size_t i = 0; i < n; ++i) d[i] = -g[i] + beta * d[i];
    gg = gg1;
  }
  TikhonovSolution sol;
  g = obj.gradient(x);
  sol.objective = obj.value(x);
  sol.gradient_norm = norm2(g);
  sol.iterations = it;
  sol.converged = sol.gradient_norm <= tol;
  sol.x = std::move(x);
  return sol;
}

}

TikhonovSolution solve_tikhonov(const TikhonovProblem& problem, std::span<const double> x0,
                                const TikhonovSolverOptions& options) {
  const TikhonovObjective obj(problem);
  const std::size_t n = problem.op->in_dim();
  if (x0.size() != n) throw DimensionMismatch("solve_tikhonov x0", n, x0.size());
  for (double v : x0)
    if (!std::isfinite(v)) throw Error("solve_tikhonov: x0 is not finite");
  if (problem.op->is_linear()) return solve_linear_cg(obj, x0, options);

  Vector x(x0.begin(), x0.end());
  auto [f, g] = obj.value_and_gradient(x);
  const double tol = options.relative_tolerance * std::max(1.0, norm2(g));
  Vector d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = -g[i];
  double step_guess = 1.0 / std::max(1.0, norm2(g));

  TikhonovSolution sol;
  int it = 0;
  auto trial = [&](double t) {
    Vector xt(n);
    for (std::size_t i = 0; i < n; ++i) xt[i] = x[i] + t * d[i];
    return std::make_pair(obj.value(xt), xt);
  };

  while (norm2(g) > tol && it < options.max_iterations) {
    double slope = dot(g, d);
    if (!(slope < 0.0)) {
      for (std::size_t i = 0; i < n; ++i) d[i] = -g[i];
      slope = dot(g, d);
    }
    // Quadratic model through f(0), f'(0) and f(t0).
    const double t0 = step_guess;
    auto [f0t, x0t] = trial(t0);
    const double curv = (f0t - f - slope * t0) / (t0 * t0);
    double t = curv > 0.0 ? -slope / (2.0 * curv) : 2.0 * t0;
    auto [ft, xt] = trial(t);
    if (f0t < ft && f0t <= f + kArmijo * t0 * slope) {
      t = t0;
      ft = f0t;
      xt = std::move(x0t);
    }
    int backtracks = 0;
    while (!(ft <= f + kArmijo * t * slope) && backtracks < 60) {
      t *= 0.5;
      std::tie(ft, xt) = trial(t);
      ++backtracks;
    }
    if (!(ft <= f + kArmijo * t * slope)) break;  // no further descent possible
    x = std::move(xt);
    auto [f1, g1] = obj.value_and_gradient(x);
    double beta = 0.0;
    const double gg = dot(g, g);
    if (gg > 0.0) {
      double num = 0.0;
      for (std::size_t i = 0; i < n; ++i) num += g1[i] * (g1[i] - g[i]);
      beta = std::max(0.0, num / gg);
    }
    if ((it + 1) % static_cast<int>(std::max<std::size_t>(n, 1)) == 0) beta = 0.0;
    for (std::size_t i = 0; i < n; ++i) d[i] = -g1[i] + beta * d[i];
    step_guess = t;
    f = f1;
    g = std::move(g1);
    ++it;
  }
  sol.x = std::move(x);
  sol.objective = f;
  sol.gradient_norm = norm2(g);
  sol.iterations = it;
  sol.converged = sol.gradient_norm <= tol;
  return sol;
}

Vector log_spaced(double lo, double hi, std::size_t n) {
  if (!(lo > 0.0) || !(hi >= lo)) throw ConfigError("log_spaced: need 0 < lo <= hi");
  if (n == 0) throw ConfigError("log_spaced: need at least one point");
  Vector out(n);
  if (n == 1) {
    out[0] = lo;
    return out;
  }
  const double a = std::log10(lo);
  const double b = std::log10(hi);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = std::pow(10.0, a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1));
  }
  out.front() = lo;
  out.back() = hi;
  return out;
}

LCurveResult lcurve_select_alpha(const TikhonovProblem& base, Vector alphas,
                                 std::span<const double> x0,
                                 const TikhonovSolverOptions& options, std::size_t workers) {
  if (alphas.size() < 5) throw ConfigError("L-curve needs at least 5 alpha values");
  for (double a : alphas)
    if (!(a > 0.0) || !std::isfinite(a)) throw ConfigError("L-curve alphas must be positive");
  base.validate();
  std::sort(alphas.begin(), alphas.end());
  const std::size_t n = alphas.size();

  LCurveResult res;
  res.points.resize(n);
  res.solutions.resize(n);
  std::vector<std::string> errors(n);
  std::atomic<std::size_t> next{0};
  auto work = [&]() {
    for (std::size_t k = next++; k < n; k = next++) {
      try {
        const TikhonovProblem prob = base.with_alpha(alphas[k]);
        TikhonovSolution s = solve_tikhonov(prob, x0, options);
        const TikhonovObjective obj(prob);
        res.points[k] = LCurvePoint{alphas[k], obj.residual_norm(s.x), obj.solution_norm(s.x), 0.0,
                                    s.converged};
        res.solutions[k] = std::move(s.x);
      } catch (const std::exception& e) {
        errors[k] = e.what();
      }
    }
  };
  const std::size_t threads = std::clamp<std::size_t>(workers, 1, n);
  if (threads == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work);
  }
  for (const std::string& e : errors)
    if (!e.empty()) throw NumericalError("L-curve solve failed: " + e);

  const double tiny = std::numeric_limits<double>::min();
  bool any_nonflat = false;
  for (std::size_t k = 1; k + 1 < n; ++k) {
    auto lx = [&](std::size_t i) { return std::log(std::max(res.points[i].residual_norm, tiny)); };
    auto ly = [&](std::size_t i) { return std::log(std::max(res.points[i].solution_norm, tiny)); };
    res.points[k].curvature = menger_curvature(lx(k - 1), ly(k - 1), lx(k), ly(k), lx(k + 1), ly(k + 1));
    if (std::abs(res.points[k].curvature) > kFlatCurvature) any_nonflat = true;
  }
  std::size_t best = n;
  double best_kappa = 0.0;
  for (std::size_t k = 1; k + 1 < n; ++k) {
    const double kappa = res.points[k].curvature;
    if (kappa > kFlatCurvature && kappa >= best_kappa) {
      best = k;
      best_kappa = kappa;
    }
  }
  if (!any_nonflat || best == n) {
    res.degenerate = true;
    best = n / 2;
  }
  res.best = best;
  res.alpha_star = alphas[best];
  return res;
}

void write_lcurve_csv(std::ostream& out, const LCurveResult& result) {
  out << "alpha,residual_norm,solution_norm,curvature\n";
  out << std::setprecision(12);
  for (const LCurvePoint& p : result.points) {
    out << p.alpha << ',' << p.residual_norm << ',' << p.solution_norm << ',' << p.curvature << '\n';
  }
}

} // namespace csample
