#include "csample/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "csample/errors.hpp"

namespace csample {

namespace {

thread_local std::uint64_t t_dense_kernels = 0;

inline std::size_t packed(std::size_t i, std::size_t j) { return i * (i + 1) / 2 + j; }

void check_dim(const char* where, std::size_t expected, std::size_t got) {
  if (expected != got) throw DimensionMismatch(where, expected, got);
}

} // namespace

std::uint64_t dense_kernel_count() noexcept { return t_dense_kernels; }

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> row_major)
    : rows_(rows), cols_(cols), data_(std::move(row_major)) {
  check_dim("DenseMatrix", rows * cols, data_.size());
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Vector DenseMatrix::multiply(std::span<const double> x) const {
  check_dim("DenseMatrix::multiply", cols_, x.size());
  ++t_dense_kernels;
  Vector out(rows_, 0.0);
  for (std::size_t i = 0; i < rows_; ++i) {
    const double* row = data_.data() + i * cols_;
    double acc = 0.0;
    for (std::size_t j = 0; j < cols_; ++j) acc += row[j] * x[j];
    out[i] = acc;
  }
  return out;
}

Vector DenseMatrix::transpose_multiply(std::span<const double> v) const {
  check_dim("DenseMatrix::transpose_multiply", rows_, v.size());
  ++t_dense_kernels;
  Vector out(cols_, 0.0);
  for (std::size_t i = 0; i < rows_; ++i) {
    const double* row = data_.data() + i * cols_;
    for (std::size_t j = 0; j < cols_; ++j) out[j] += row[j] * v[i];
  }
  return out;
}

const char* to_string(CovStructure s) {
  switch (s) {
  case CovStructure::diagonal: return "diagonal";
  case CovStructure::spherical: return "spherical";
  case CovStructure::tied: return "tied";
  case CovStructure::full: return "full";
  }
  return "full";
}

CovStructure cov_structure_from_string(std::string_view name) {
  if (name == "diagonal") return CovStructure::diagonal;
  if (name == "spherical") return CovStructure::spherical;
  if (name == "tied") return CovStructure::tied;
  if (name == "full") return CovStructure::full;
  throw ConfigError("unknown covariance structure '" + std::string(name) + "'");
}

SpdMatrix SpdMatrix::identity(std::size_t n) { return spherical(n, 1.0); }

SpdMatrix SpdMatrix::diagonal(Vector diag) {
  if (diag.empty()) throw Error("SpdMatrix: order must be at least 1");
  const std::size_t n = diag.size();
  return SpdMatrix(n, CovStructure::diagonal, std::move(diag));
}

SpdMatrix SpdMatrix::spherical(std::size_t n, double variance) {
  if (n == 0) throw Error("SpdMatrix: order must be at least 1");
  return SpdMatrix(n, CovStructure::spherical, Vector(n, variance));
}

SpdMatrix SpdMatrix::full(const DenseMatrix& a, CovStructure tag) {
  if (a.rows() != a.cols()) throw DimensionMismatch("SpdMatrix::full", a.rows(), a.cols());
  const std::size_t n = a.rows();
  if (n == 0) throw Error("SpdMatrix: order must be at least 1");
  if (tag == CovStructure::diagonal || tag == CovStructure::spherical) {
    Vector d(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (i != j && a(i, j) != 0.0) throw Error("SpdMatrix: diagonal tag with off-diagonal entries");
      }
      d[i] = a(i, i);
    }
    if (tag == CovStructure::spherical &&
        std::any_of(d.begin(), d.end(), [&](double v) { return v != d[0]; })) {
      throw Error("SpdMatrix: spherical tag with unequal diagonal");
    }
    return SpdMatrix(n, tag, std::move(d));
  }
  std::vector<double> lower(n * (n + 1) / 2);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      const double lij = a(i, j);
      const double uij = a(j, i);
      const double scale = std::max({std::abs(lij), std::abs(uij), 1e-300});
      if (std::abs(lij - uij) > 1e-12 * scale) throw Error("SpdMatrix: input is not symmetric");
      lower[packed(i, j)] = lij;
    }
  }
  return SpdMatrix(n, tag, std::move(lower));
}

double SpdMatrix::operator()(std::size_t i, std::size_t j) const {
  if (is_diagonal()) return i == j ? storage_[i] : 0.0;
  return i >= j ? storage_[packed(i, j)] : storage_[packed(j, i)];
}

Vector SpdMatrix::diag() const {
  if (is_diagonal()) return storage_;
  Vector d(n_);
  for (std::size_t i = 0; i < n_; ++i) d[i] = storage_[packed(i, i)];
  return d;
}

DenseMatrix SpdMatrix::dense() const {
  DenseMatrix m(n_, n_);
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t j = 0; j < n_; ++j) m(i, j) = (*this)(i, j);
  return m;
}

Vector SpdMatrix::multiply(std::span<const double> v) const {
  check_dim("SpdMatrix::multiply", n_, v.size());
  Vector out(n_, 0.0);
  if (is_diagonal()) {
    for (std::size_t i = 0; i < n_; ++i) out[i] = storage_[i] * v[i];
    return out;
  }
  ++t_dense_kernels;
  for (std::size_t i = 0; i < n_; ++i) {
    const double* row = storage_.data() + packed(i, 0);
    for (std::size_t j = 0; j < i; ++j) {
      out[i] += row[j] * v[j];
      out[j] += row[j] * v[i];
    }
    out[i] += row[i] * v[i];
  }
  return out;
}

double SpdMatrix::trace() const {
  double t = 0.0;
  for (std::size_t i = 0; i < n_; ++i) t += (*this)(i, i);
  return t;
}

SpdMatrix SpdMatrix::retagged(CovStructure tag) const {
  if (is_diagonal() || tag == CovStructure::diagonal || tag == CovStructure::spherical) {
    return full(dense(), tag);
  }
  return SpdMatrix(n_, tag, storage_);
}

CholeskyFactor cholesky(const SpdMatrix& a) {
  const std::size_t n = a.order();
  if (a.is_diagonal()) {
    const double max_diag = *std::max_element(a.storage_.begin(), a.storage_.end());
    const double floor = 1e-13 * std::max(max_diag, 0.0);
    std::vector<double> l(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double d = a.storage_[i];
      if (!(d > floor) || !std::isfinite(d)) throw NotPositiveDefinite(i);
      l[i] = std::sqrt(d);
    }
    return CholeskyFactor(n, true, std::move(l));
  }
  ++t_dense_kernels;
  double max_diag = 0.0;
  for (std::size_t i = 0; i < n; ++i) max_diag = std::max(max_diag, a.storage_[packed(i, i)]);
  const double floor = 1e-13 * max_diag;
  std::vector<double> l(a.storage_);
  for (std::size_t j = 0; j < n; ++j) {
    double pivot = l[packed(j, j)];
    for (std::size_t k = 0; k < j; ++k) pivot -= l[packed(j, k)] * l[packed(j, k)];
    if (!(pivot > floor) || !std::isfinite(pivot)) throw NotPositiveDefinite(j);
    const double ljj = std::sqrt(pivot);
    l[packed(j, j)] = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = l[packed(i, j)];
      for (std::size_t k = 0; k < j; ++k) s -= l[packed(i, k)] * l[packed(j, k)];
      l[packed(i, j)] = s / ljj;
    }
  }
  return CholeskyFactor(n, false, std::move(l));
}

double CholeskyFactor::operator()(std::size_t i, std::size_t j) const {
  if (diagonal_) return i == j ? storage_[i] : 0.0;
  return i >= j ? storage_[packed(i, j)] : 0.0;
}

Vector CholeskyFactor::lower_multiply(std::span<const double> z) const {
  check_dim("CholeskyFactor::lower_multiply", n_, z.size());
  Vector out(n_, 0.0);
  if (diagonal_) {
    for (std::size_t i = 0; i < n_; ++i) out[i] = storage_[i] * z[i];
    return out;
  }
  ++t_dense_kernels;
  for (std::size_t i = 0; i < n_; ++i) {
    const double* row = storage_.data() + packed(i, 0);
    double acc = 0.0;
    for (std::size_t j = 0; j <= i; ++j) acc += row[j] * z[j];
    out[i] = acc;
  }
  return out;
}

Vector CholeskyFactor::solve_lower(std::span<const double> b) const {
  check_dim("CholeskyFactor::solve_lower", n_, b.size());
  Vector x(b.begin(), b.end());
  if (diagonal_) {
    for (std::size_t i = 0; i < n_; ++i) x[i] /= storage_[i];
    return x;
  }
  ++t_dense_kernels;
  for (std::size_t i = 0; i < n_; ++i) {
    const double* row = storage_.data() + packed(i, 0);
    double s = x[i];
    for (std::size_t j = 0; j < i; ++j) s -= row[j] * x[j];
    x[i] = s / row[i];
  }
  return x;
}

Vector CholeskyFactor::solve_upper(std::span<const double> b) const {
  check_dim("CholeskyFactor::solve_upper", n_, b.size());
  Vector x(b.begin(), b.end());
  if (diagonal_) {
    for (std::size_t i = 0; i < n_; ++i) x[i] /= storage_[i];
    return x;
  }
  ++t_dense_kernels;
  for (std::size_t ii = n_; ii-- > 0;) {
    x[ii] /= storage_[packed(ii, ii)];
    const double xi = x[ii];
    const double* row = storage_.data() + packed(ii, 0);
    for (std::size_t j = 0; j < ii; ++j) x[j] -= row[j] * xi;
  }
  return x;
}

Vector CholeskyFactor::solve(std::span<const double> b) const { return solve_upper(solve_lower(b)); }

double CholeskyFactor::inverse_quadratic(std::span<const double> v) const {
  const Vector w = solve_lower(v);
  return dot(w, w);
}

double CholeskyFactor::inverse_quadratic_inplace(std::span<double> v) const {
  check_dim("CholeskyFactor::inverse_quadratic_inplace", n_, v.size());
  double q = 0.0;
  if (diagonal_) {
    for (std::size_t i = 0; i < n_; ++i) {
      const double w = v[i] / storage_[i];
      q += w * w;
    }
    return q;
  }
  for (std::size_t i = 0; i < n_; ++i) {
    const double* row = storage_.data() + packed(i, 0);
    double s = v[i];
    for (std::size_t j = 0; j < i; ++j) s -= row[j] * v[j];
    v[i] = s / row[i];
    q += v[i] * v[i];
  }
  return q;
}

double CholeskyFactor::log_determinant() const {
  double s = 0.0;
  for (std::size_t i = 0; i < n_; ++i) s += std::log((*this)(i, i));
  return 2.0 * s;
}

double weighted_norm_sq(std::span<const double> c, std::span<const double> d, const SpdMatrix& m) {
  check_dim("weighted_norm_sq", c.size(), d.size());
  check_dim("weighted_norm_sq", m.order(), c.size());
  const Vector diff = subtract(c, d);
  const Vector mdiff = m.multiply(diff);
  return std::max(0.0, dot(diff, mdiff));
}

double dot(std::span<const double> a, std::span<const double> b) {
  check_dim("dot", a.size(), b.size());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

Vector subtract(std::span<const double> a, std::span<const double> b) {
  check_dim("subtract", a.size(), b.size());
  Vector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

} // namespace csample
