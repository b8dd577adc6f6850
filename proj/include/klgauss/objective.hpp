#pragma once

#include "klgauss/gaussian.hpp"
#include "klgauss/measure.hpp"
#include "klgauss/quadrature.hpp"

#include <nlohmann/json.hpp>

#include <string>

namespace klgauss {

enum class EstimatorMethod { gauss_hermite, monte_carlo };

std::string to_string(EstimatorMethod m);

struct EstimatorConfig {
  /// Used for E[V1], E[V2].
  EstimatorMethod expectation = EstimatorMethod::gauss_hermite;
  /// Used by mixture_entropy.
  EstimatorMethod entropy = EstimatorMethod::monte_carlo;
  /// Per-axis order; capped so the tensor rule has at most 200000 nodes.
  int gh_order = 20;
  int mc_samples = 100000;
  unsigned long long seed = 20170101;

  void validate() const;
};

/// Standard normal nodes for the chosen method (per-axis GH order or MC draws).
NodeSet standard_nodes(int dim, EstimatorMethod method, const EstimatorConfig& est);

struct Estimate {
  double value = 0.0;
  /// Monte-Carlo standard error; zero for Gauss-Hermite.
  double std_error = 0.0;
  /// Gauss-Hermite only: |E_k - E_{k/2}| with k the order used.
  double refinement_error = 0.0;
};

/// E f(X), X ~ g, with x = m + L z.
Estimate expectation_under_gaussian(const Potential& f, const GaussianParams& g, const EstimatorConfig& est);

struct KLTerms {
  double v1 = 0.0;       // E[V1]/eps
  double v2 = 0.0;       // E[V2]
  double entropy = 0.0;  // integral of nu log nu
  double log_z = 0.0;
};

struct KLEstimate {
  double value = 0.0;  // v1 + v2 + entropy + log_z
  double std_error = 0.0;
  EstimatorMethod method = EstimatorMethod::gauss_hermite;
  KLTerms terms;

  static KLEstimate infinite(EstimatorMethod method);
};

void to_json(nlohmann::json& j, const KLEstimate& k);

/// KL(g || mu) given an externally supplied log Z.
KLEstimate kl_single(const TargetMeasure& mu, const GaussianParams& g, double log_z, const EstimatorConfig& est);

/// kl_single with nu = N(m, eps * sigma).
KLEstimate f_eps(const TargetMeasure& mu, const Vector& m, const Matrix& sigma, double log_z,
                 const EstimatorConfig& est);

/// Integral of rho log rho. Monte Carlo: stratified, n_i proportional to alpha_i.
/// Gauss-Hermite: per-component tensor rule.
Estimate mixture_entropy(const MixtureParams& mix, const EstimatorConfig& est);

/// sum_i alpha_i (-1/2 log((2 pi)^d det Sigma_i) - d/2 + log alpha_i).
double entropy_split(const MixtureParams& mix);

/// KL(mix || mu); +inf (not an exception) when the weight floor or separation fails.
KLEstimate kl_mixture(const TargetMeasure& mu, const MixtureParams& mix, double log_z, const EstimatorConfig& est);

/// kl_mixture with component covariances eps * Sigma_i.
KLEstimate g_eps(const TargetMeasure& mu, const MixtureParams& rescaled, double log_z, const EstimatorConfig& est);

}  // namespace klgauss
