#pragma once

#include "klgauss/catalog.hpp"
#include "klgauss/gaussian.hpp"
#include "klgauss/measure.hpp"
#include "klgauss/optimizer.hpp"

#include <nlohmann/json.hpp>

#include <iosfwd>
#include <string>
#include <vector>

namespace klgauss {

/// Tolerance for deciding that a mean is one of the modes.
inline constexpr double kModeMatchTol = 1e-6;

/// V2(x_i) + 1/2 Tr(H_i Sigma) - d/2 - 1/2 log det Sigma + log sum_j beta_j when
/// m is within tol of mode x_i and Sigma is SPD; +inf otherwise.
double f_limit(const ModeSet& ms, const Vector& m, const Matrix& sigma, double tol = kModeMatchTol);

struct LimitSplit {
  double gaussian_term = 0.0;     // KL(N(x_i, Sigma) || N(x_i, H_i^{-1}))
  double categorical_term = 0.0;  // KL(e_i || beta)
};
LimitSplit f_limit_split(const ModeSet& ms, int i0, const Matrix& sigma);

/// sum_i alpha_i KL(N(m_i, Sigma_i) || N(m_i, H^{-1})) + KL(alpha || beta) when
/// the shape satisfies its constraints and its means are distinct modes; +inf
/// otherwise. alpha is embedded in the mode simplex by the matching.
double g_limit(const ModeSet& ms, const MixtureParams& shape, double tol = kModeMatchTol);

struct LimitMinimizer {
  int index = 0;
  GaussianParams gaussian;  // (x_i, H_i^{-1})
  double value = 0.0;       // KL(e_i || beta)
};
/// Mode of largest beta (relative ties within 1e-9 go to the lowest index).
LimitMinimizer limit_minimizer_single(const ModeSet& ms);
/// Means x_i, covariances H_i^{-1}, weights beta.
MixtureParams limit_minimizer_mixture(const ModeSet& ms, const MixtureConstraints& xi);

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  double eps_min = 0.0;
  double eps_max = 0.0;
  int points = 0;
};
/// Least squares of log y on log x over entries with x, y > 0 and use[k].
RateFit fit_rate(const std::vector<double>& x, const std::vector<double>& y, const std::vector<bool>& use = {});
nlohmann::json to_json(const RateFit& f);

enum class Family { single, mixture };
Family parse_family(const std::string& s);
std::string to_string(Family f);

enum class LogZMethod { laplace, quadrature };
LogZMethod parse_logz(const std::string& s);
std::string to_string(LogZMethod m);

/// log Z by Laplace or by the automatic quadrature grid.
double log_normalization(const TargetMeasure& mu, const ModeSet& ms, LogZMethod method);

struct SweepConfig {
  Family family = Family::single;
  int n = 2;
  MixtureConstraints xi;
  LogZMethod log_z = LogZMethod::laplace;
  OptimizerConfig optimizer;
};

struct SweepRecord {
  double epsilon = 0.0;
  Family family = Family::single;
  std::vector<Vector> means;
  std::vector<Matrix> rescaled_covariances;
  Vector weights;
  double value = 0.0;
  double std_error = 0.0;
  double log_z = 0.0;
  double limit_value = 0.0;  // limit functional at the argmin snapped to the modes
  double gap = 0.0;          // value - limit_value
  double mode_dist = 0.0;    // max distance of a mean to its nearest mode
  double weight_dist = 0.0;  // l1 distance of the embedded weights to beta
  bool converged = false;
};

struct SweepResult {
  std::vector<SweepRecord> records;
  RateFit gap_fit;
  RateFit mode_fit;
};

/// Runs the optimizer at each eps (strictly decreasing), warm-starting from
/// the previous argmin.
SweepResult sweep(const Problem& problem, const std::vector<double>& eps_list, const SweepConfig& cfg);

/// epsilon,value,limit_value,gap,mode_dist,weight_dist,converged rows and a `#` JSON footer.
void write_sweep_csv(std::ostream& out, const SweepResult& r);

/// %.12g.
std::string format_number(double v);

}  // namespace klgauss
