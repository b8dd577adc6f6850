#pragma once

#include <Eigen/Core>

#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>

namespace klgauss {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Thrown when a potential produces a non-finite value. Keeps the offending point.
class EvaluationError : public std::runtime_error {
 public:
  EvaluationError(const std::string& what, Vector point)
      : std::runtime_error(what), point_(std::move(point)) {}
  const Vector& point() const { return point_; }

 private:
  Vector point_;
};

/// Coercivity constants of a confining potential: V(x) >= -c0 + c1 |x|^2.
/// Informational only.
struct Coercivity {
  double c0 = 0.0;
  double c1 = 0.0;
};

/// Implementation interface behind `Potential`. Implementations must be
/// immutable after construction; all methods are called concurrently.
class PotentialFunction {
 public:
  virtual ~PotentialFunction() = default;
  virtual double value(const Vector& x) const = 0;
  virtual Vector gradient(const Vector& x) const = 0;
  virtual Matrix hessian(const Vector& x) const = 0;
};

/// A twice-differentiable scalar field on R^dim with analytic gradient and
/// Hessian. Cheap to copy; copies share the underlying function.
class Potential {
 public:
  using ValueFn = std::function<double(const Vector&)>;
  using GradientFn = std::function<Vector(const Vector&)>;
  using HessianFn = std::function<Matrix(const Vector&)>;

  Potential() = default;
  Potential(int dim, std::shared_ptr<const PotentialFunction> impl);
  Potential(int dim, ValueFn value, GradientFn gradient, HessianFn hessian);

  int dim() const { return dim_; }
  bool valid() const { return impl_ != nullptr; }

  double value(const Vector& x) const;
  Vector gradient(const Vector& x) const;
  Matrix hessian(const Vector& x) const;

  /// Metadata: M_V in |d^a V| <= M_V exp(|x|^2). Not enforced.
  double growth_bound = 0.0;
  std::optional<Coercivity> coercivity;
  /// Set for members of the dominant-potential family, which must be >= 0.
  bool nonnegative = false;

 private:
  void check_dim(const Vector& x) const;

  int dim_ = 0;
  std::shared_ptr<const PotentialFunction> impl_;
};

/// The zero potential on R^dim.
Potential zero_potential(int dim);

/// Result of comparing analytic derivatives against central differences.
struct DerivativeCheck {
  double gradient_rel_error = 0.0;
  double hessian_rel_error = 0.0;
};

/// Central finite differences with step h = rel_step * (1 + |x|). Relative
/// errors are measured as |fd - analytic| / max(1, |analytic|).
DerivativeCheck check_derivatives(const Potential& v, const Vector& x, double rel_step = 1e-5);

}  // namespace klgauss
