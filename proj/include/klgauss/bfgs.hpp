#pragma once

#include "klgauss/potential.hpp"

#include <functional>

namespace klgauss {

/// Objective with gradient: returns f(x) and writes grad f(x) into *grad
/// when grad is non-null. May return +inf to reject a trial point.
using SmoothObjective = std::function<double(const Vector& x, Vector* grad)>;

struct BfgsOptions {
  int max_iters = 500;
  double grad_tol = 1e-9;
  int max_line_search = 40;
};

enum class BfgsStatus { converged, max_iterations, line_search_failed, non_finite_start };

struct BfgsResult {
  Vector x;
  double value = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
  BfgsStatus status = BfgsStatus::max_iterations;
  bool converged() const { return status == BfgsStatus::converged; }
};

/// Dense BFGS on the inverse Hessian with a strong Wolfe line search
/// (bracketing + zoom with cubic interpolation). Stops when |grad| <= grad_tol.
BfgsResult minimize_bfgs(const SmoothObjective& f, Vector x0, const BfgsOptions& opts);

}  // namespace klgauss
