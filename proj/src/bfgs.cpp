#include "klgauss/bfgs.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

namespace klgauss {

namespace {

constexpr double kC1 = 1e-4;
constexpr double kC2 = 0.9;

struct LineSample {
  double alpha = 0.0;
  double phi = 0.0;
  double dphi = 0.0;
  Vector grad;
};

class LineSearch {
 public:
  LineSearch(const SmoothObjective& f, const Vector& x, const Vector& p, const LineSample& origin,
             int budget)
      : f_(f), x_(x), p_(p), origin_(origin), budget_(budget),
        noise_(1e-13 * (1.0 + std::abs(origin.phi))) {}

  // Returns a sample satisfying the strong Wolfe conditions, or the best
  // sufficient-decrease point found, or nullopt-equivalent (alpha == 0).
  LineSample run(double alpha) {
    LineSample prev = origin_;
    for (int i = 0; i < budget_; ++i) {
      LineSample cur = eval(alpha);
      if (!armijo(cur) || (i > 0 && cur.phi > prev.phi + noise_)) {
        return zoom(prev, cur);
      }
      if (std::abs(cur.dphi) <= -kC2 * origin_.dphi) return cur;
      if (cur.dphi >= 0.0) return zoom(cur, prev);
      prev = cur;
      alpha *= 2.0;
      if (alpha > 1e12) break;
    }
    return best_;
  }

 private:
  LineSample eval(double alpha) {
    LineSample s;
    s.alpha = alpha;
    s.grad.resize(x_.size());
    s.phi = f_(x_ + alpha * p_, &s.grad);
    if (!std::isfinite(s.phi) || !s.grad.allFinite()) {
      s.phi = std::numeric_limits<double>::infinity();
      s.dphi = 0.0;
    } else {
      s.dphi = s.grad.dot(p_);
      if (armijo(s) && s.phi < best_phi_) {
        best_phi_ = s.phi;
        best_ = s;
      }
    }
    --budget_;
    return s;
  }

  // Sufficient decrease, with values closer than the rounding level treated as equal.
  bool armijo(const LineSample& s) const {
    return std::isfinite(s.phi) && s.phi <= origin_.phi + kC1 * s.alpha * origin_.dphi + noise_;
  }

  LineSample zoom(LineSample lo, LineSample hi) {
    while (budget_ > 0) {
      const double a = lo.alpha, b = hi.alpha;
      const double lo_end = std::min(a, b), hi_end = std::max(a, b);
      const double width = hi_end - lo_end;
      if (width <= 1e-16 * std::max(1.0, hi_end)) break;
      double trial = 0.5 * (a + b);
      if (std::isfinite(hi.phi)) {
        // Cubic interpolation through (a, phi_a, dphi_a), (b, phi_b, dphi_b).
        const double d1 = lo.dphi + hi.dphi - 3.0 * (lo.phi - hi.phi) / (a - b);
        const double disc = d1 * d1 - lo.dphi * hi.dphi;
        if (disc >= 0.0) {
          const double d2 = std::copysign(std::sqrt(disc), b - a);
          const double c = b - (b - a) * (hi.dphi + d2 - d1) / (hi.dphi - lo.dphi + 2.0 * d2);
          if (std::isfinite(c)) trial = c;
        }
      }
      trial = std::clamp(trial, lo_end + 0.1 * width, hi_end - 0.1 * width);
      LineSample cur = eval(trial);
      if (!armijo(cur) || cur.phi > lo.phi + noise_ || (cur.phi >= lo.phi - noise_ && cur.dphi >= 0.0)) {
        hi = cur;
      } else {
        if (std::abs(cur.dphi) <= -kC2 * origin_.dphi) return cur;
        if (cur.dphi * (hi.alpha - lo.alpha) >= 0.0) hi = lo;
        lo = cur;
      }
    }
    return best_;
  }

  const SmoothObjective& f_;
  const Vector& x_;
  const Vector& p_;
  LineSample origin_;
  int budget_;
  double noise_;
  LineSample best_;  // alpha == 0 means nothing acceptable found
  double best_phi_ = std::numeric_limits<double>::infinity();
};

}  // namespace

BfgsResult minimize_bfgs(const SmoothObjective& f, Vector x0, const BfgsOptions& opts) {
  const Eigen::Index n = x0.size();
  BfgsResult out;
  out.x = std::move(x0);
  Vector g(n);
  out.value = f(out.x, &g);
  if (!std::isfinite(out.value) || !g.allFinite()) {
    out.status = BfgsStatus::non_finite_start;
    out.grad_norm = std::numeric_limits<double>::infinity();
    return out;
  }

  Matrix H = Matrix::Identity(n, n);
  bool scaled = false;
  bool just_reset = false;
  for (out.iterations = 0; out.iterations < opts.max_iters; ++out.iterations) {
    out.grad_norm = g.norm();
    if (out.grad_norm <= opts.grad_tol) {
      out.status = BfgsStatus::converged;
      return out;
    }
    Vector p = -H * g;
    double dphi0 = g.dot(p);
    if (!(dphi0 < 0.0)) {
      H.setIdentity();
      scaled = false;
      p = -g;
      dphi0 = -g.squaredNorm();
    }
    const double alpha0 = scaled ? 1.0 : std::min(1.0, 1.0 / out.grad_norm);

    LineSample origin;
    origin.phi = out.value;
    origin.dphi = dphi0;
    LineSearch ls(f, out.x, p, origin, opts.max_line_search);
    LineSample step = ls.run(alpha0);
    if (step.alpha == 0.0) {
      if (just_reset) {
        out.status = BfgsStatus::line_search_failed;
        return out;
      }
      H.setIdentity();
      scaled = false;
      just_reset = true;
      continue;
    }
    just_reset = false;

    const Vector s = step.alpha * p;
    const Vector y = step.grad - g;
    out.x += s;
    out.value = step.phi;
    g = step.grad;

    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (!scaled) {
        H = Matrix::Identity(n, n) * (sy / y.squaredNorm());
        scaled = true;
      }
      const double rho = 1.0 / sy;
      const Vector Hy = H * y;
      // H+ = (I - rho s y^T) H (I - rho y s^T) + rho s s^T
      H += rho * ((1.0 + rho * y.dot(Hy)) * (s * s.transpose()) - (Hy * s.transpose()) -
                  (s * Hy.transpose()));
    }
  }
  out.grad_norm = g.norm();
  out.status = out.grad_norm <= opts.grad_tol ? BfgsStatus::converged : BfgsStatus::max_iterations;
  return out;
}

}  // namespace klgauss
