#include "csample/forward.hpp"

#include <algorithm>
#include <cmath>

#include "csample/errors.hpp"

namespace csample {

Vector ForwardOperator::apply(std::span<const double> x) const {
  if (x.size() != in_dim()) throw DimensionMismatch(kind() + "::apply", in_dim(), x.size());
  return do_apply(x);
}

Vector ForwardOperator::adjoint_jacobian_apply(std::span<const double> x,
                                               std::span<const double> v) const {
  if (x.size() != in_dim()) throw DimensionMismatch(kind() + "::adjoint", in_dim(), x.size());
  if (v.size() != out_dim()) throw DimensionMismatch(kind() + "::adjoint", out_dim(), v.size());
  return do_adjoint(x, v);
}

Boundary boundary_from_string(const std::string& name) {
  if (name == "reflect") return Boundary::reflect;
  if (name == "periodic") return Boundary::periodic;
  throw ConfigError("unknown boundary rule '" + name + "'");
}

namespace {

class IdentityOperator final : public ForwardOperator {
public:
  explicit IdentityOperator(std::size_t n) : n_(n) {}
  std::size_t in_dim() const override { return n_; }
  std::size_t out_dim() const override { return n_; }
  std::string kind() const override { return "identity"; }
  bool is_linear() const override { return true; }

protected:
  Vector do_apply(std::span<const double> x) const override { return {x.begin(), x.end()}; }
  Vector do_adjoint(std::span<const double>, std::span<const double> v) const override {
    return {v.begin(), v.end()};
  }

private:
  std::size_t n_;
};

class LinearOperator final : public ForwardOperator {
public:
  explicit LinearOperator(DenseMatrix a) : a_(std::move(a)) {}
  std::size_t in_dim() const override { return a_.cols(); }
  std::size_t out_dim() const override { return a_.rows(); }
  std::string kind() const override { return "linear"; }
  bool is_linear() const override { return true; }

protected:
  Vector do_apply(std::span<const double> x) const override { return a_.multiply(x); }
  Vector do_adjoint(std::span<const double>, std::span<const double> v) const override {
    return a_.transpose_multiply(v);
  }

private:
  DenseMatrix a_;
};

class GaussianBlur final : public ForwardOperator {
public:
  GaussianBlur(std::size_t rows, std::size_t cols, std::size_t width, double sigma, Boundary b)
      : rows_(rows), cols_(cols), taps_(gaussian_kernel_1d(width, sigma)), boundary_(b) {
    if (rows == 0 || cols == 0) throw Error("gaussian blur: empty image");
  }
  std::size_t in_dim() const override { return rows_ * cols_; }
  std::size_t out_dim() const override { return rows_ * cols_; }
  std::string kind() const override { return "gaussian-blur"; }
  bool is_linear() const override { return true; }

protected:
  Vector do_apply(std::span<const double> x) const override {
    const std::size_t w = taps_.size();
    const auto h = static_cast<std::ptrdiff_t>(w / 2);
    Vector tmp(x.size(), 0.0);
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t c = 0; c < cols_; ++c) {
        double acc = 0.0;
        for (std::size_t k = 0; k < w; ++k) {
          const std::size_t cc = wrap(static_cast<std::ptrdiff_t>(c) + static_cast<std::ptrdiff_t>(k) - h, cols_);
          acc += taps_[k] * x[r * cols_ + cc];
        }
        tmp[r * cols_ + c] = acc;
      }
    Vector out(x.size(), 0.0);
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t c = 0; c < cols_; ++c) {
        double acc = 0.0;
        for (std::size_t k = 0; k < w; ++k) {
          const std::size_t rr = wrap(static_cast<std::ptrdiff_t>(r) + static_cast<std::ptrdiff_t>(k) - h, rows_);
          acc += taps_[k] * tmp[rr * cols_ + c];
        }
        out[r * cols_ + c] = acc;
      }
    return out;
  }

  // Exact transpose of do_apply: scatter through the same index maps.
  Vector do_adjoint(std::span<const double>, std::span<const double> v) const override {
    const std::size_t w = taps_.size();
    const auto h = static_cast<std::ptrdiff_t>(w / 2);
    Vector tmp(v.size(), 0.0);
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t c = 0; c < cols_; ++c) {
        const double vrc = v[r * cols_ + c];
        for (std::size_t k = 0; k < w; ++k) {
          const std::size_t rr = wrap(static_cast<std::ptrdiff_t>(r) + static_cast<std::ptrdiff_t>(k) - h, rows_);
          tmp[rr * cols_ + c] += taps_[k] * vrc;
        }
      }
    Vector out(v.size(), 0.0);
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t c = 0; c < cols_; ++c) {
        const double trc = tmp[r * cols_ + c];
        for (std::size_t k = 0; k < w; ++k) {
          const std::size_t cc = wrap(static_cast<std::ptrdiff_t>(c) + static_cast<std::ptrdiff_t>(k) - h, cols_);
          out[r * cols_ + cc] += taps_[k] * trc;
        }
      }
    return out;
  }

private:
  std::size_t wrap(std::ptrdiff_t i, std::size_t n) const {
    const auto sn = static_cast<std::ptrdiff_t>(n);
    if (boundary_ == Boundary::periodic) return static_cast<std::size_t>(((i % sn) + sn) % sn);
    // Half-sample symmetric: -1 -> 0, n -> n - 1.
    while (i < 0 || i >= sn) i = i < 0 ? -i - 1 : 2 * sn - i - 1;
    return static_cast<std::size_t>(i);
  }

  std::size_t rows_;
  std::size_t cols_;
  Vector taps_;
  Boundary boundary_;
};

class SaturatedOperator final : public ForwardOperator {
public:
  explicit SaturatedOperator(OperatorPtr inner) : inner_(std::move(inner)) {}
  std::size_t in_dim() const override { return inner_->in_dim(); }
  std::size_t out_dim() const override { return inner_->out_dim(); }
  std::string kind() const override { return "saturated(" + inner_->kind() + ")"; }
  bool is_linear() const override { return false; }

protected:
  Vector do_apply(std::span<const double> x) const override {
    Vector z = inner_->apply(x);
    for (auto& zi : z) zi = zi / (1.0 + std::abs(zi));
    return z;
  }
  Vector do_adjoint(std::span<const double> x, std::span<const double> v) const override {
    const Vector z = inner_->apply(x);
    Vector scaled(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double d = 1.0 + std::abs(z[i]);
      scaled[i] = v[i] / (d * d);
    }
    return inner_->adjoint_jacobian_apply(x, scaled);
  }

private:
  OperatorPtr inner_;
};

} // namespace

OperatorPtr make_identity(std::size_t n) {
  if (n == 0) throw Error("identity operator: zero dimension");
  return std::make_shared<IdentityOperator>(n);
}

OperatorPtr make_linear(DenseMatrix a) {
  if (a.rows() == 0 || a.cols() == 0) throw Error("linear operator: empty matrix");
  if (a.rows() > a.cols()) {
    throw Error("linear operator: more observations than state variables");
  }
  return std::make_shared<LinearOperator>(std::move(a));
}

OperatorPtr make_gaussian_blur(std::size_t rows, std::size_t cols, std::size_t width,
                               double sigma, Boundary boundary) {
  return std::make_shared<GaussianBlur>(rows, cols, width, sigma, boundary);
}

OperatorPtr make_saturated(OperatorPtr inner) {
  if (!inner) throw Error("saturated operator: null inner operator");
  return std::make_shared<SaturatedOperator>(std::move(inner));
}

Vector gaussian_kernel_1d(std::size_t width, double sigma) {
  if (width == 0 || width % 2 == 0) throw Error("blur kernel width must be odd");
  if (!(sigma > 0.0)) throw Error("blur kernel sigma must be positive");
  Vector g(width);
  const double h = static_cast<double>(width / 2);
  double total = 0.0;
  for (std::size_t k = 0; k < width; ++k) {
    const double t = static_cast<double>(k) - h;
    g[k] = std::exp(-0.5 * t * t / (sigma * sigma));
    total += g[k];
  }
  for (auto& v : g) v /= total;
  return g;
}

DenseMatrix materialize_jacobian(const ForwardOperator& op, std::span<const double> x) {
  DenseMatrix j(op.out_dim(), op.in_dim());
  Vector e(op.out_dim(), 0.0);
  for (std::size_t i = 0; i < op.out_dim(); ++i) {
    e[i] = 1.0;
    const Vector row = op.adjoint_jacobian_apply(x, e);
    for (std::size_t c = 0; c < op.in_dim(); ++c) j(i, c) = row[c];
    e[i] = 0.0;
  }
  return j;
}

std::size_t jacobian_bandwidth(const DenseMatrix& j, double tol) {
  std::size_t band = 0;
  for (std::size_t r = 0; r < j.rows(); ++r)
    for (std::size_t c = 0; c < j.cols(); ++c)
      if (std::abs(j(r, c)) > tol) band = std::max(band, r > c ? r - c : c - r);
  return band;
}

bool is_toeplitz(const DenseMatrix& j, std::size_t margin, double tol) {
  if (j.rows() <= 2 * margin) return true;
  for (std::size_t r = margin + 1; r + margin < j.rows(); ++r) {
    for (std::size_t c = 1; c < j.cols(); ++c) {
      if (std::abs(j(r, c) - j(r - 1, c - 1)) > tol) return false;
    }
  }
  return true;
}

bool blur_jacobian_structure_check(std::size_t length, std::size_t width, double sigma,
                                   Boundary boundary) {
  const auto op = make_gaussian_blur(1, length, width, sigma, boundary);
  const Vector x(length, 0.0);
  return is_toeplitz(materialize_jacobian(*op, x), width / 2);
}

} // namespace csample
