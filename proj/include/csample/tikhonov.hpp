#pragma once

#include <cstddef>
#include <ostream>
#include <span>
#include <utility>
#include <vector>

#include "csample/forward.hpp"
#include "csample/linalg.hpp"

namespace csample {

struct TikhonovProblem {
  OperatorPtr op;
  Vector y;
  SpdMatrix obs_cov = SpdMatrix::identity(1);
  SpdMatrix reg = SpdMatrix::identity(1);  // C
  double alpha = 0.0;

  // Dimensional consistency, alpha >= 0, SPD R and C.
  void validate() const;
  TikhonovProblem with_alpha(double a) const;
};

// T(x) = ||H(x) - y||^2_{R^{-1}} + alpha ||x||^2_C with gradient
// 2 [dH]^T R^{-1} (H(x) - y) + 2 alpha C x. No 1/2 factors on either term.
class TikhonovObjective {
public:
  explicit TikhonovObjective(TikhonovProblem problem);

  const TikhonovProblem& problem() const noexcept { return prob_; }
  double value(std::span<const double> x) const;
  Vector gradient(std::span<const double> x) const;
  std::pair<double, Vector> value_and_gradient(std::span<const double> x) const;
  // ||H(x) - y||_{R^{-1}}
  double residual_norm(std::span<const double> x) const;
  // ||x||_C
  double solution_norm(std::span<const double> x) const;

private:
  TikhonovProblem prob_;
  CholeskyFactor r_factor_;
};

struct TikhonovSolverOptions {
  // Stop when ||grad|| <= relative_tolerance * max(1, ||grad(x0)||).
  double relative_tolerance = 1e-8;
  int max_iterations = 100000;
};

struct TikhonovSolution {
  Vector x;
  double objective = 0.0;
  double gradient_norm = 0.0;
  int iterations = 0;
  // False when max_iterations was hit; x is then the best iterate seen.
  bool converged = false;
};

// Linear operators get plain conjugate gradients on the quadratic objective.
// Otherwise Polak-Ribiere+ nonlinear CG with an interpolating backtracking
// line search.
TikhonovSolution solve_tikhonov(const TikhonovProblem& problem, std::span<const double> x0,
                                const TikhonovSolverOptions& options = {});

struct LCurvePoint {
  double alpha = 0.0;
  double residual_norm = 0.0;
  double solution_norm = 0.0;
  // Signed three-point curvature in (log residual, log solution norm); zero at the ends.
  double curvature = 0.0;
  bool converged = true;
};

struct LCurveResult {
  std::vector<LCurvePoint> points;  // ascending alpha
  std::vector<Vector> solutions;
  std::size_t best = 0;
  double alpha_star = 0.0;
  // Flat curvature: alpha_star is the grid midpoint.
  bool degenerate = false;
};

Vector log_spaced(double lo, double hi, std::size_t n);

// Solves every alpha (concurrently on `workers` threads, each solve serial)
// and picks the maximum positive curvature, ties going to the larger alpha.
LCurveResult lcurve_select_alpha(const TikhonovProblem& base, Vector alphas,
                                 std::span<const double> x0,
                                 const TikhonovSolverOptions& options = {},
                                 std::size_t workers = 1);

void write_lcurve_csv(std::ostream& out, const LCurveResult& result);

} // namespace csample
