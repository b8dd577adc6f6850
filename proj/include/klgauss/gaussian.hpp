#pragma once

#include "klgauss/potential.hpp"

#include <nlohmann/json.hpp>

#include <limits>
#include <vector>

namespace klgauss {

/// Distinguished value for divergences that are +infinity.
inline constexpr double kInfiniteDivergence = std::numeric_limits<double>::infinity();

/// N(m, Sigma) with Sigma held through its lower Cholesky factor L (Sigma = L L^T).
class GaussianParams {
 public:
  /// Smallest admissible Cholesky diagonal entry.
  static constexpr double kMinCholDiagonal = 1e-154;

  GaussianParams() = default;
  /// Validates that `chol` is lower triangular with diagonal >= kMinCholDiagonal.
  GaussianParams(Vector mean, Matrix chol);
  /// Factorizes an SPD covariance; throws std::invalid_argument otherwise.
  static GaussianParams from_covariance(Vector mean, const Matrix& covariance);

  int dim() const { return static_cast<int>(mean_.size()); }
  const Vector& mean() const { return mean_; }
  const Matrix& chol() const { return chol_; }
  Matrix covariance() const { return chol_ * chol_.transpose(); }
  /// log det Sigma = 2 sum log L_ii.
  double log_det() const;

  /// Solves L u = x - m.
  Vector whiten(const Vector& x) const;

  bool operator==(const GaussianParams& other) const {
    return mean_ == other.mean_ && chol_ == other.chol_;
  }

 private:
  Vector mean_;
  Matrix chol_;
};

/// Mixture separation constraints xi = (xi1, xi2) in (0,1) x (0,inf).
struct MixtureConstraints {
  double min_weight = 0.05;      // xi1
  double min_separation = 1.0;   // xi2

  /// Throws std::invalid_argument outside (0,1) x (0,inf).
  void validate() const;
};

/// sum_i alpha_i N(m_i, Sigma_i). Construction checks the simplex structure
/// only; membership in the constrained set is queried with `feasible()`, so
/// objectives can map infeasible shapes to +infinity.
class MixtureParams {
 public:
  MixtureParams() = default;
  MixtureParams(std::vector<GaussianParams> components, Vector weights,
                MixtureConstraints xi = {});

  int size() const { return static_cast<int>(components_.size()); }
  int dim() const { return components_.empty() ? 0 : components_.front().dim(); }
  const std::vector<GaussianParams>& components() const { return components_; }
  const GaussianParams& component(int i) const { return components_[static_cast<std::size_t>(i)]; }
  const Vector& weights() const { return weights_; }
  const MixtureConstraints& constraints() const { return xi_; }

  /// min_{i != j} |m_i - m_j|, +inf for a single component.
  double min_separation() const;
  /// Weights >= xi1 and pairwise separation >= xi2.
  bool feasible() const;

 private:
  std::vector<GaussianParams> components_;
  Vector weights_;
  MixtureConstraints xi_;
};

/// -1/2 (x-m)^T Sigma^{-1} (x-m) - 1/2 log((2 pi)^d det Sigma).
double log_density(const GaussianParams& g, const Vector& x);
/// log sum_i alpha_i N_i(x), evaluated stably.
double log_density(const MixtureParams& mix, const Vector& x);

/// KL(a || b) in closed form; exactly zero for identical arguments.
double kl_gaussian_gaussian(const GaussianParams& a, const GaussianParams& b);

/// sum_i p_i log(p_i / q_i) with 0 log 0 = 0. Returns kInfiniteDivergence
/// when some q_i = 0 < p_i. Length mismatch throws std::invalid_argument.
double kl_categorical(const Vector& p, const Vector& q);

/// Same mean, covariance multiplied by factor > 0.
GaussianParams scale_covariance(const GaussianParams& g, double factor);
/// Every component covariance multiplied by factor > 0.
MixtureParams scale_covariance(const MixtureParams& mix, double factor);

/// Deterministic draws (columns) given the seed.
Matrix sample(const GaussianParams& g, int count, unsigned long long seed);
/// Component index from the weights, then the component Gaussian.
Matrix sample(const MixtureParams& mix, int count, unsigned long long seed);

void to_json(nlohmann::json& j, const GaussianParams& g);
void from_json(const nlohmann::json& j, GaussianParams& g);
void to_json(nlohmann::json& j, const MixtureParams& m);
void from_json(const nlohmann::json& j, MixtureParams& m);

}  // namespace klgauss
