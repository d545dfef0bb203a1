#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace csample {

using Vector = std::vector<double>;

// Row-major dense matrix. Only used where the operator is genuinely dense
// (small linear forward models, EM scatter matrices).
class DenseMatrix {
public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> row_major);

  static DenseMatrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
  std::span<const double> data() const noexcept { return data_; }

  Vector multiply(std::span<const double> x) const;
  Vector transpose_multiply(std::span<const double> v) const;

private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

enum class CovStructure { diagonal, spherical, tied, full };

class SpdMatrix;
class CholeskyFactor;
CholeskyFactor cholesky(const SpdMatrix& a);

const char* to_string(CovStructure s);
CovStructure cov_structure_from_string(const std::string_view name);

// Symmetric positive definite matrix. Diagonal and spherical matrices keep
// only their diagonal; tied and full keep the packed lower triangle.
class SpdMatrix {
public:
  static SpdMatrix identity(std::size_t n);
  static SpdMatrix diagonal(Vector diag);
  static SpdMatrix spherical(std::size_t n, double variance);
  // Symmetry is checked to 1e-12 relative; the upper triangle is discarded.
  static SpdMatrix full(const DenseMatrix& a, CovStructure tag = CovStructure::full);

  std::size_t order() const noexcept { return n_; }
  CovStructure structure() const noexcept { return structure_; }
  bool is_diagonal() const noexcept {
    return structure_ == CovStructure::diagonal || structure_ == CovStructure::spherical;
  }

  double operator()(std::size_t i, std::size_t j) const;
  Vector diag() const;
  DenseMatrix dense() const;
  Vector multiply(std::span<const double> v) const;
  double trace() const;

  // Same values, different structure tag (used for tied mixtures).
  SpdMatrix retagged(CovStructure tag) const;

private:
  SpdMatrix(std::size_t n, CovStructure s, std::vector<double> storage)
      : n_(n), structure_(s), storage_(std::move(storage)) {}

  std::size_t n_ = 0;
  CovStructure structure_ = CovStructure::full;
  std::vector<double> storage_;

  friend class CholeskyFactor;
  friend CholeskyFactor cholesky(const SpdMatrix& a);
};

// Lower-triangular L with L * L^T = A.
class CholeskyFactor {
public:
  std::size_t order() const noexcept { return n_; }
  bool is_diagonal() const noexcept { return diagonal_; }
  double operator()(std::size_t i, std::size_t j) const;

  Vector lower_multiply(std::span<const double> z) const;  // L z
  Vector solve_lower(std::span<const double> b) const;     // L^{-1} b
  Vector solve_upper(std::span<const double> b) const;     // L^{-T} b
  Vector solve(std::span<const double> b) const;           // A^{-1} b
  double inverse_quadratic(std::span<const double> v) const;  // v^T A^{-1} v
  // Same, overwriting v with L^{-1} v instead of allocating.
  double inverse_quadratic_inplace(std::span<double> v) const;
  double log_determinant() const;

private:
  CholeskyFactor(std::size_t n, bool diagonal, std::vector<double> storage)
      : n_(n), diagonal_(diagonal), storage_(std::move(storage)) {}

  std::size_t n_ = 0;
  bool diagonal_ = false;
  std::vector<double> storage_;

  friend CholeskyFactor cholesky(const SpdMatrix& a);
};

// Throws NotPositiveDefinite when a pivot drops to 1e-13 * max diagonal or below.
CholeskyFactor cholesky(const SpdMatrix& a);

// (c - d)^T M (c - d)
double weighted_norm_sq(std::span<const double> c, std::span<const double> d, const SpdMatrix& m);

// Number of O(n^2) kernels executed by the calling thread. Diagonal
// structures must never bump it.
std::uint64_t dense_kernel_count() noexcept;

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);
Vector subtract(std::span<const double> a, std::span<const double> b);

} // namespace csample
