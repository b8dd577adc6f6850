#include "klgauss/potential.hpp"

#include <cmath>
#include <sstream>

namespace klgauss {

namespace {

class LambdaPotential final : public PotentialFunction {
 public:
  LambdaPotential(Potential::ValueFn v, Potential::GradientFn g, Potential::HessianFn h)
      : v_(std::move(v)), g_(std::move(g)), h_(std::move(h)) {}
  double value(const Vector& x) const override { return v_(x); }
  Vector gradient(const Vector& x) const override { return g_(x); }
  Matrix hessian(const Vector& x) const override { return h_(x); }

 private:
  Potential::ValueFn v_;
  Potential::GradientFn g_;
  Potential::HessianFn h_;
};

std::string format_point(const Vector& x) {
  std::ostringstream os;
  os << "[";
  for (Eigen::Index i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x[i];
  os << "]";
  return os.str();
}

}  // namespace

Potential::Potential(int dim, std::shared_ptr<const PotentialFunction> impl)
    : dim_(dim), impl_(std::move(impl)) {
  if (dim_ <= 0) throw std::invalid_argument("potential dimension must be positive");
  if (!impl_) throw std::invalid_argument("potential implementation is null");
}

Potential::Potential(int dim, ValueFn value, GradientFn gradient, HessianFn hessian)
    : Potential(dim, std::make_shared<LambdaPotential>(std::move(value), std::move(gradient),
                                                       std::move(hessian))) {}

void Potential::check_dim(const Vector& x) const {
  if (!impl_) throw std::logic_error("evaluating an empty potential");
  if (x.size() != dim_) {
    throw std::invalid_argument("point has dimension " + std::to_string(x.size()) +
                                ", potential expects " + std::to_string(dim_));
  }
}

double Potential::value(const Vector& x) const {
  check_dim(x);
  const double v = impl_->value(x);
  if (!std::isfinite(v)) {
    throw EvaluationError("non-finite potential value at " + format_point(x), x);
  }
  return v;
}

Vector Potential::gradient(const Vector& x) const {
  check_dim(x);
  Vector g = impl_->gradient(x);
  if (!g.allFinite()) throw EvaluationError("non-finite gradient at " + format_point(x), x);
  return g;
}

Matrix Potential::hessian(const Vector& x) const {
  check_dim(x);
  Matrix h = impl_->hessian(x);
  if (!h.allFinite()) throw EvaluationError("non-finite Hessian at " + format_point(x), x);
  return h;
}

Potential zero_potential(int dim) {
  Potential p(
      dim, [](const Vector&) { return 0.0; },
      [dim](const Vector&) { return Vector::Zero(dim).eval(); },
      [dim](const Vector&) { return Matrix::Zero(dim, dim).eval(); });
  p.nonnegative = true;
  return p;
}

DerivativeCheck check_derivatives(const Potential& v, const Vector& x, double rel_step) {
  const int d = v.dim();
  const double h = rel_step * (1.0 + x.norm());
  Vector fd_grad(d);
  Matrix fd_hess(d, d);
  for (int i = 0; i < d; ++i) {
    Vector xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    fd_grad[i] = (v.value(xp) - v.value(xm)) / (2.0 * h);
    fd_hess.col(i) = (v.gradient(xp) - v.gradient(xm)) / (2.0 * h);
  }
  const Vector g = v.gradient(x);
  const Matrix H = v.hessian(x);
  DerivativeCheck out;
  out.gradient_rel_error = (fd_grad - g).norm() / std::max(1.0, g.norm());
  out.hessian_rel_error = (fd_hess - H).norm() / std::max(1.0, H.norm());
  return out;
}

}  // namespace klgauss
