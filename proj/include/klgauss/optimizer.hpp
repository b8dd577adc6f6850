#pragma once

#include "klgauss/gaussian.hpp"
#include "klgauss/measure.hpp"
#include "klgauss/objective.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace klgauss {

struct OptimizerConfig {
  int max_iters = 500;
  double grad_tol = 1e-9;
  /// Total number of starts; mode-seeded and warm starts count toward it,
  /// and are always used even when they exceed it.
  int starts = 8;
  /// Box for uniformly drawn start means. Defaults to the modes' hull
  /// padded by 2, or [-3, 3]^d without modes.
  std::optional<Box> box;
  unsigned long long seed = 20170101;
  bool verbose = false;
  /// expectation selects Gauss-Hermite nodes or common Monte-Carlo draws
  /// (shared by all components). The mixture entropy inside the optimizer
  /// uses the same nodes, per component.
  EstimatorConfig estimator;

  void validate() const;
};

struct StartTrace {
  std::string origin;  // "warm", "mode", "random"
  Vector initial_mean;  // first component
  double initial_value = 0.0;
  double final_value = 0.0;
  int iterations = 0;
  bool converged = false;
};

template <class Params>
struct OptimResult {
  Params argmin;  // actual covariance (not rescaled)
  double value = 0.0;
  double std_error = 0.0;
  bool converged = false;
  int iterations = 0;
  double grad_norm = 0.0;
  KLEstimate estimate;
  std::vector<StartTrace> trace;

  /// argmin with covariances divided by eps.
  Params rescaled(double epsilon) const { return scale_covariance(argmin, 1.0 / epsilon); }
};

using SingleResult = OptimResult<GaussianParams>;
using MixtureResult = OptimResult<MixtureParams>;

/// Minimizes kl_single over (m, L). `modes` seeds starts at each mode with
/// covariance eps * H^{-1}; `warm` (rescaled: covariance / eps) seeds one more.
SingleResult minimize_single(const TargetMeasure& mu, double log_z, const OptimizerConfig& cfg,
                             const ModeSet* modes = nullptr, const GaussianParams* warm = nullptr);

/// Minimizes the mixture KL over weights, means and Cholesky factors subject to
/// weights >= xi1 and separation >= xi2. Throws std::invalid_argument when
/// xi1 > 1/n. Components of the result are sorted by mean (lexicographic).
MixtureResult minimize_mixture(const TargetMeasure& mu, double log_z, int n, const MixtureConstraints& xi,
                               const OptimizerConfig& cfg, const ModeSet* modes = nullptr,
                               const MixtureParams* warm = nullptr);

/// Value and gradient of the internal smooth mixture objective at a mixture
/// (actual covariances), in the optimizer's parameterization around the
/// mixture itself. Exposed for gradient checks.
struct MixtureObjectiveProbe {
  double value = 0.0;
  Vector gradient;
  Vector theta;
  std::function<double(const Vector&, Vector*)> objective;
};
MixtureObjectiveProbe probe_mixture_objective(const TargetMeasure& mu, double log_z, const MixtureParams& mix,
                                              const OptimizerConfig& cfg, double penalty = 0.0);
/// Same for the single-Gaussian objective.
MixtureObjectiveProbe probe_single_objective(const TargetMeasure& mu, double log_z, const GaussianParams& g,
                                             const OptimizerConfig& cfg);

nlohmann::json to_json(const SingleResult& r, double epsilon, bool verbose);
nlohmann::json to_json(const MixtureResult& r, double epsilon, bool verbose);

}  // namespace klgauss
