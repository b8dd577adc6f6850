#pragma once

#include "klgauss/potential.hpp"
#include "klgauss/quadrature.hpp"

#include <functional>
#include <stdexcept>
#include <vector>

namespace klgauss {

/// Unnormalized density exp(-V1(x)/eps - V2(x)) on R^dim.
class TargetMeasure {
 public:
  TargetMeasure(Potential v1, Potential v2, double epsilon);

  int dim() const { return v1_.dim(); }
  const Potential& v1() const { return v1_; }
  const Potential& v2() const { return v2_; }
  double epsilon() const { return epsilon_; }

 private:
  Potential v1_;
  Potential v2_;
  double epsilon_;
};

/// -V1(x)/eps - V2(x). Never includes log Z. Throws EvaluationError when a
/// potential is not finite at x.
double unnormalized_log_density(const TargetMeasure& mu, const Vector& x);

/// Uniform multistart in a box followed by local quasi-Newton descent.
struct MultistartConfig {
  Vector lo;
  Vector hi;
  int starts = 64;
  unsigned long long seed = 20170101;
  int max_iters = 400;
  double grad_tol = 1e-10;
  /// Minimizers with V1 within value_tol of the best found are kept.
  double value_tol = 1e-8;
  /// Two minimizers merge when |x - y| <= dedup_radius * (1 + |x|).
  double dedup_radius = 1e-6;

  static MultistartConfig box(int dim, double half_width, int starts = 64);
};

/// Global minimizers of the limit potential with their Hessians and the
/// Laplace weights beta_i = det(D^2 V1(x_i))^{-1/2} exp(-V2(x_i)).
struct ModeSet {
  std::vector<Vector> modes;
  std::vector<Matrix> hessians;
  std::vector<double> v2_values;
  std::vector<double> log_raw_weights;  // log beta_i
  std::vector<double> raw_weights;      // beta_i
  Vector weights;                       // beta normalized to sum one

  int size() const { return static_cast<int>(modes.size()); }
  int dim() const { return modes.empty() ? 0 : static_cast<int>(modes.front().size()); }
  /// log sum_i beta_i.
  double log_total_weight() const;
  /// Index of the mode nearest to x.
  int nearest(const Vector& x) const;
};

class ModeSearchError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A located minimizer violates the positive-definite Hessian requirement.
class DegenerateModeError : public ModeSearchError {
 public:
  DegenerateModeError(const std::string& what, Vector point)
      : ModeSearchError(what), point_(std::move(point)) {}
  const Vector& point() const { return point_; }

 private:
  Vector point_;
};

/// Builds a ModeSet from known minimizers. Modes are sorted lexicographically.
/// Throws DegenerateModeError if a Hessian is not SPD.
ModeSet make_mode_set(std::vector<Vector> modes, const Potential& v1_limit, const Potential& v2);

/// Multistart search for the global minimizers of v1_limit.
ModeSet find_modes(const Potential& v1_limit, const Potential& v2, const MultistartConfig& search);

/// Local minimizer via BFGS followed by Newton polishing.
struct LocalMinimum {
  Vector x;
  double value = 0.0;
  double grad_norm = 0.0;
  bool converged = false;
};
LocalMinimum local_minimize(const Potential& v, const Vector& start, int max_iters = 400,
                            double grad_tol = 1e-10);

/// (2 pi eps)^{d/2} sum_i beta_i, leading order only.
double laplace_normalization(const ModeSet& ms, double epsilon);
double log_laplace_normalization(const ModeSet& ms, double epsilon);

/// Grid for the brute-force normalization oracle (dim <= 3).
struct GridSpec {
  std::vector<Box> boxes;
  double step = 0.0;
  /// Whether boxes may be enlarged (x1.5 per round) when the tail check fails.
  bool adaptive = false;
  /// Largest admissible integrand on the box faces relative to the peak.
  double tail_tol = 1e-14;

  /// A declared integration domain: no tail check unless tail_tol is set.
  static GridSpec from_box(Box box, double step);
  /// Boxes of half-width radius_sigmas * sigma_max around each local mode of
  /// V1/eps + V2 (seeded from the limit modes), step sigma_min / points_per_sigma.
  static GridSpec automatic(const TargetMeasure& mu, const ModeSet& ms, double radius_sigmas = 9.0,
                            double points_per_sigma = 4.0);
  /// Adds a box covering +-radius_sigmas standard deviations of N(m, Sigma).
  GridSpec& cover_gaussian(const Vector& mean, const Matrix& covariance, double radius_sigmas = 9.0);
};

class GridTooSmallError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct QuadratureResult {
  double value = 0.0;
  double log_value = 0.0;
  double error_estimate = 0.0;
  double boundary_ratio = 0.0;
  std::vector<Box> boxes;  // boxes actually used
  double step = 0.0;
};

/// Tensor composite Simpson value of the integral of exp(-V1/eps - V2).
/// Throws std::invalid_argument for dim > 3 and GridTooSmallError when the
/// integrand on the box faces exceeds tail_tol of the peak.
QuadratureResult quadrature_normalization(const TargetMeasure& mu, const GridSpec& grid);

/// 1/2 integral |exp(log_q) - exp(log mu - log_z)| over the grid (boxes used as given).
double grid_total_variation(const TargetMeasure& mu, double log_z,
                            const std::function<double(const Vector&)>& log_q, const GridSpec& grid);

}  // namespace klgauss
