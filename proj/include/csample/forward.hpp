#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>

#include "csample/linalg.hpp"

namespace csample {

// Observation operator H: R^in_dim -> R^out_dim with the adjoint of its
// Jacobian. Instances are immutable and safe to share between chains.
class ForwardOperator {
public:
  virtual ~ForwardOperator() = default;

  virtual std::size_t in_dim() const = 0;
  virtual std::size_t out_dim() const = 0;
  virtual std::string kind() const = 0;
  virtual bool is_linear() const = 0;

  Vector apply(std::span<const double> x) const;
  // [dH(x)]^T v
  Vector adjoint_jacobian_apply(std::span<const double> x, std::span<const double> v) const;

protected:
  virtual Vector do_apply(std::span<const double> x) const = 0;
  virtual Vector do_adjoint(std::span<const double> x, std::span<const double> v) const = 0;
};

using OperatorPtr = std::shared_ptr<const ForwardOperator>;

enum class Boundary { reflect, periodic };

Boundary boundary_from_string(const std::string& name);

OperatorPtr make_identity(std::size_t n);
// Requires rows <= cols (no more observations than state variables).
OperatorPtr make_linear(DenseMatrix a);
// Separable Gaussian blur on a rows x cols row-major image; width must be odd.
OperatorPtr make_gaussian_blur(std::size_t rows, std::size_t cols, std::size_t width,
                               double sigma, Boundary boundary = Boundary::reflect);
// Pointwise s(z) = z / (1 + |z|) applied after `inner`.
OperatorPtr make_saturated(OperatorPtr inner);

// Normalised 1-D Gaussian taps, centre at width / 2.
Vector gaussian_kernel_1d(std::size_t width, double sigma);

// Row i is [dH(x)]^T e_i, i.e. row i of the Jacobian.
DenseMatrix materialize_jacobian(const ForwardOperator& op, std::span<const double> x);

// Largest |i - j| with |J(i, j)| > tol.
std::size_t jacobian_bandwidth(const DenseMatrix& j, double tol = 0.0);

// True when every diagonal of J is constant on rows [margin, rows - margin).
bool is_toeplitz(const DenseMatrix& j, std::size_t margin, double tol = 1e-14);

// Blur restricted to a single image row: materialises the length x length
// Jacobian and checks it is Toeplitz away from the boundary band.
bool blur_jacobian_structure_check(std::size_t length, std::size_t width, double sigma,
                                   Boundary boundary = Boundary::reflect);

} // namespace csample
