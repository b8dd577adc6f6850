#pragma once

#include "klgauss/gamma.hpp"
#include "klgauss/measure.hpp"
#include "klgauss/objective.hpp"
#include "klgauss/optimizer.hpp"

#include <nlohmann/json.hpp>

#include <iosfwd>
#include <string>
#include <vector>

namespace klgauss {

enum class Variant { exp, square };

Variant parse_variant(const std::string& s);
std::string to_string(Variant v);

/// -u'' + q(x) u = f on (0,1) with zero boundary values, discretized on M
/// interior points: (A + Q) u = f, A = tridiag(-1, 2, -1) / h^2, h = 1/(M+1),
/// Q = diag(exp(q)) or diag(q^2).
class EllipticProblem {
 public:
  EllipticProblem(int grid_size, Vector f, Variant variant);

  int grid_size() const { return m_; }
  double h() const { return 1.0 / (m_ + 1); }
  const Vector& f() const { return f_; }
  Variant variant() const { return variant_; }
  /// Dense copy of the discrete Laplacian.
  Matrix laplacian() const;

  /// Q entries and their first and second derivatives in q.
  Vector coefficient(const Vector& q) const;
  Vector coefficient_derivative(const Vector& q) const;
  Vector coefficient_second_derivative(const Vector& q) const;

  /// Solves (A + diag(c)) X = B by LDL^T of the symmetric tridiagonal matrix.
  Matrix solve(const Vector& c, const Matrix& rhs) const;

 private:
  int m_;
  Vector f_;
  Variant variant_;
};

/// u = (A + Q)^{-1} f.
Vector forward(const EllipticProblem& p, const Vector& q);
/// DG(q) = -(A + Q)^{-1} diag(u * Q'(q)).
Matrix jacobian(const EllipticProblem& p, const Vector& q);
/// 2-norm condition number of the Jacobian (inf when singular).
double jacobian_condition(const EllipticProblem& p, const Vector& q);
/// Second derivatives contracted with a residual: T_jl = sum_k r_k d^2 G_k / dq_j dq_l.
Matrix contracted_second_derivative(const EllipticProblem& p, const Vector& q, const Vector& r);

struct PosteriorOptions {
  /// Drop the residual curvature term from the Hessian of V1.
  bool gauss_newton = false;
};

/// 1/2 |y - G(q)|^2 as a Potential (gradient -J^T r, Hessian J^T J - T(r)).
Potential misfit_potential(const EllipticProblem& p, Vector y, PosteriorOptions opts = {});

/// Standard Gaussian prior potential |x|^2 / 2.
Potential gaussian_prior(int dim);

/// V1 = 1/2 |G(truth) - G(q) + sqrt(eps) eta|^2, V2 = prior.
TargetMeasure posterior(const EllipticProblem& p, const Vector& truth, const Vector& eta, double epsilon,
                        const Potential& prior, PosteriorOptions opts = {});

/// Large-data form with N = etas.cols() observations y_j = G(truth) + eta_j,
/// eps = 1/N and V1 = (1/2N) sum_j |y_j - G(q)|^2.
TargetMeasure posterior_large_data(const EllipticProblem& p, const Vector& truth, const Matrix& etas,
                                   const Potential& prior);
/// sqrt(N) times the mean noise: the small-noise eta giving the same posterior.
Vector equivalent_noise(const Matrix& etas);

/// Global minimizers of the limit misfit: {truth} for exp, all sign flips for square.
std::vector<Vector> limit_modes(const EllipticProblem& p, const Vector& truth);
/// ModeSet of the limit posterior (Hessian DG^T DG, weights |det DG|^{-1} e^{-V0}).
ModeSet posterior_modes(const EllipticProblem& p, const Vector& truth, const Potential& prior);

struct NormalityRecord {
  double epsilon = 0.0;
  double value = 0.0;
  double mean_error = 0.0;        // max_i |m_i - x_i|
  double covariance_error = 0.0;  // max_i relative Frobenius error of Sigma_i / eps
  double weight_error = 0.0;      // l1 distance to the limit weights (zero for single)
  bool converged = false;
};

/// Per eps: optimizes on the posterior with the given eta and compares with the
/// Gaussian limit. n = 1 runs the single-Gaussian optimizer, n > 1 the mixture.
std::vector<NormalityRecord> asymptotic_normality_check(const EllipticProblem& p, const Vector& truth,
                                                        const Vector& eta, const std::vector<double>& eps_list,
                                                        const Potential& prior, int n, const OptimizerConfig& cfg,
                                                        const MixtureConstraints& xi = {});

struct BvMConfig {
  int grid_size = 1;
  Variant variant = Variant::exp;
  Vector f;
  Vector truth;
  /// Prior potential id and parameters in the catalog schema; quadratic by default.
  nlohmann::json prior = {{"id", "quadratic"}};
  std::vector<double> eps_list;
  int draws = 100;
  unsigned long long seed = 20170101;
  LogZMethod log_z = LogZMethod::quadrature;
  OptimizerConfig optimizer;

  void validate() const;
};

BvMConfig bvm_config_from_json(const nlohmann::json& j);

struct BvMLevel {
  double epsilon = 0.0;
  double mean_kl = 0.0;
  double stderr_kl = 0.0;
  int failures = 0;
  /// Draws with grid d_TV > sqrt(KL/2) + 1e-3.
  int d_tv_violations = 0;
  /// Draws with d_TV > 10 sqrt(mean_kl / 2).
  int tail_exceedances = 0;
  double max_d_tv = 0.0;
  bool aborted = false;
  std::vector<double> kl;    // per draw (NaN for failures)
  std::vector<double> d_tv;  // per draw (NaN when not computed)
};

struct BvMResult {
  std::vector<BvMLevel> levels;
  RateFit fit;
  bool aborted() const;
};

/// Per eps and per draw: eta ~ N(0, I) (draw k uses the same eta at every eps),
/// single-Gaussian optimization on the posterior, KL and grid d_TV. Levels with
/// more than 10% failed draws are aborted.
BvMResult bvm_experiment(const BvMConfig& cfg);

void write_bvm_csv(std::ostream& out, const BvMResult& r);

struct LogZLevel {
  double epsilon = 0.0;
  double mean_log_z = 0.0;
  double stderr_log_z = 0.0;
  double predicted = 0.0;  // d/2 log(2 pi eps) - V0(truth) - log |det DG(truth)|
  double gap = 0.0;
};

/// Averages quadrature log Z over antithetic eta pairs (draws must be even) and
/// compares it with the leading-order prediction.
std::vector<LogZLevel> log_z_expectation_check(const EllipticProblem& p, const Vector& truth, const Potential& prior,
                                               const std::vector<double>& eps_list, int draws,
                                               unsigned long long seed);

/// Deterministic eta draws for the experiments (columns).
Matrix noise_draws(int dim, int count, unsigned long long seed);

}  // namespace klgauss
