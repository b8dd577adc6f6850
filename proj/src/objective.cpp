#include "klgauss/objective.hpp"

#include "klgauss/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace klgauss {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

// Values of fn at x = m + L z for every node column z.
std::vector<double> evaluate_nodes(const NodeSet& nodes, const GaussianParams& g,
                                   const std::function<double(const Vector&)>& fn) {
  std::vector<double> out(static_cast<std::size_t>(nodes.size()));
  const std::size_t chunk = 1024;
  const std::size_t chunks = (out.size() + chunk - 1) / chunk;
  const auto L = g.chol().triangularView<Eigen::Lower>();
  parallel_for(chunks, [&](std::size_t c) {
    const std::size_t end = std::min(out.size(), (c + 1) * chunk);
    for (std::size_t k = c * chunk; k < end; ++k) {
      const Vector x = g.mean() + L * nodes.nodes.col(static_cast<Eigen::Index>(k));
      out[k] = fn(x);
    }
  });
  return out;
}

Estimate reduce(const NodeSet& nodes, const std::vector<double>& vals, EstimatorMethod method) {
  Estimate e;
  for (std::size_t k = 0; k < vals.size(); ++k) e.value += nodes.weights[static_cast<Eigen::Index>(k)] * vals[k];
  if (method == EstimatorMethod::monte_carlo && vals.size() > 1) {
    double ss = 0.0;
    for (double v : vals) ss += (v - e.value) * (v - e.value);
    e.std_error = std::sqrt(ss / static_cast<double>(vals.size() - 1) / static_cast<double>(vals.size()));
  }
  return e;
}

double gaussian_entropy(const GaussianParams& g) {
  return -0.5 * (g.dim() * kLog2Pi + g.log_det()) - 0.5 * g.dim();
}

unsigned long long stream_seed(unsigned long long seed, int stream) {
  return seed ^ (0x9E3779B97F4A7C15ULL * static_cast<unsigned long long>(stream + 1));
}

}  // namespace

std::string to_string(EstimatorMethod m) {
  return m == EstimatorMethod::gauss_hermite ? "gauss-hermite" : "monte-carlo";
}

void EstimatorConfig::validate() const {
  if (gh_order < 2) throw std::invalid_argument("Gauss-Hermite order must be >= 2");
  if (mc_samples < 2) throw std::invalid_argument("Monte-Carlo sample count must be >= 2");
}

NodeSet standard_nodes(int dim, EstimatorMethod method, const EstimatorConfig& est) {
  est.validate();
  if (method == EstimatorMethod::gauss_hermite) return tensor_gauss_hermite(dim, capped_order(dim, est.gh_order));
  return monte_carlo_nodes(dim, est.mc_samples, est.seed);
}

Estimate expectation_under_gaussian(const Potential& f, const GaussianParams& g, const EstimatorConfig& est) {
  if (f.dim() != g.dim()) throw std::invalid_argument("potential and Gaussian differ in dimension");
  const auto fn = [&f](const Vector& x) { return f.value(x); };
  const NodeSet nodes = standard_nodes(g.dim(), est.expectation, est);
  Estimate e = reduce(nodes, evaluate_nodes(nodes, g, fn), est.expectation);
  if (est.expectation == EstimatorMethod::gauss_hermite) {
    const int order = capped_order(g.dim(), est.gh_order);
    const NodeSet coarse = tensor_gauss_hermite(g.dim(), std::max(2, order / 2));
    const Estimate c = reduce(coarse, evaluate_nodes(coarse, g, fn), EstimatorMethod::gauss_hermite);
    e.refinement_error = std::abs(e.value - c.value);
  }
  return e;
}

KLEstimate KLEstimate::infinite(EstimatorMethod method) {
  KLEstimate k;
  k.value = kInfiniteDivergence;
  k.method = method;
  return k;
}

void to_json(nlohmann::json& j, const KLEstimate& k) {
  j = nlohmann::json{{"value", k.value},
                     {"stderr", k.std_error},
                     {"method", to_string(k.method)},
                     {"terms",
                      {{"v1", k.terms.v1}, {"v2", k.terms.v2}, {"entropy", k.terms.entropy}, {"log_z", k.terms.log_z}}}};
}

KLEstimate kl_single(const TargetMeasure& mu, const GaussianParams& g, double log_z, const EstimatorConfig& est) {
  if (g.dim() != mu.dim()) throw std::invalid_argument("Gaussian and target differ in dimension");
  const NodeSet nodes = standard_nodes(g.dim(), est.expectation, est);
  const double inv = 1.0 / mu.epsilon();
  const auto v1 = evaluate_nodes(nodes, g, [&](const Vector& x) { return mu.v1().value(x); });
  const auto v2 = evaluate_nodes(nodes, g, [&](const Vector& x) { return mu.v2().value(x); });
  std::vector<double> both(v1.size());
  for (std::size_t k = 0; k < both.size(); ++k) both[k] = inv * v1[k] + v2[k];

  KLEstimate out;
  out.method = est.expectation;
  out.terms.v1 = inv * reduce(nodes, v1, est.expectation).value;
  out.terms.v2 = reduce(nodes, v2, est.expectation).value;
  out.terms.entropy = gaussian_entropy(g);
  out.terms.log_z = log_z;
  out.std_error = reduce(nodes, both, est.expectation).std_error;
  out.value = out.terms.v1 + out.terms.v2 + out.terms.entropy + out.terms.log_z;
  return out;
}

KLEstimate f_eps(const TargetMeasure& mu, const Vector& m, const Matrix& sigma, double log_z,
                 const EstimatorConfig& est) {
  return kl_single(mu, GaussianParams::from_covariance(m, mu.epsilon() * sigma), log_z, est);
}

Estimate mixture_entropy(const MixtureParams& mix, const EstimatorConfig& est) {
  est.validate();
  const auto log_rho = [&mix](const Vector& x) { return log_density(mix, x); };
  Estimate out;
  if (est.entropy == EstimatorMethod::gauss_hermite) {
    const NodeSet nodes = standard_nodes(mix.dim(), EstimatorMethod::gauss_hermite, est);
    for (int i = 0; i < mix.size(); ++i) {
      const double a = mix.weights()[i];
      if (a <= 0.0) continue;
      out.value += a * reduce(nodes, evaluate_nodes(nodes, mix.component(i), log_rho), est.entropy).value;
    }
    return out;
  }

  // Stratum sizes proportional to the weights, largest remainders first.
  const int n = mix.size();
  std::vector<int> counts(static_cast<std::size_t>(n));
  std::vector<std::pair<double, int>> rem;
  int used = 0;
  for (int i = 0; i < n; ++i) {
    const double exact = mix.weights()[i] * est.mc_samples;
    counts[i] = static_cast<int>(std::floor(exact));
    used += counts[i];
    rem.emplace_back(exact - counts[i], i);
  }
  std::stable_sort(rem.begin(), rem.end(), [](auto a, auto b) { return a.first > b.first; });
  for (int k = 0; used < est.mc_samples; ++k, ++used) ++counts[rem[k % n].second];

  double var = 0.0;
  for (int i = 0; i < n; ++i) {
    const double a = mix.weights()[i];
    if (a <= 0.0) continue;
    EstimatorConfig sub = est;
    sub.mc_samples = std::max(2, counts[i]);
    sub.seed = stream_seed(est.seed, i);
    const NodeSet nodes = standard_nodes(mix.dim(), EstimatorMethod::monte_carlo, sub);
    const Estimate e = reduce(nodes, evaluate_nodes(nodes, mix.component(i), log_rho), EstimatorMethod::monte_carlo);
    out.value += a * e.value;
    var += a * a * e.std_error * e.std_error;
  }
  out.std_error = std::sqrt(var);
  return out;
}

double entropy_split(const MixtureParams& mix) {
  double acc = 0.0;
  for (int i = 0; i < mix.size(); ++i) {
    const double a = mix.weights()[i];
    if (a <= 0.0) continue;
    acc += a * (gaussian_entropy(mix.component(i)) + std::log(a));
  }
  return acc;
}

KLEstimate kl_mixture(const TargetMeasure& mu, const MixtureParams& mix, double log_z, const EstimatorConfig& est) {
  if (mix.dim() != mu.dim()) throw std::invalid_argument("mixture and target differ in dimension");
  if (!mix.feasible()) return KLEstimate::infinite(est.expectation);
  const double inv = 1.0 / mu.epsilon();
  const NodeSet nodes = standard_nodes(mix.dim(), est.expectation, est);
  KLEstimate out;
  out.method = est.expectation;
  double var = 0.0;
  for (int i = 0; i < mix.size(); ++i) {
    const double a = mix.weights()[i];
    const auto v1 = evaluate_nodes(nodes, mix.component(i), [&](const Vector& x) { return mu.v1().value(x); });
    const auto v2 = evaluate_nodes(nodes, mix.component(i), [&](const Vector& x) { return mu.v2().value(x); });
    std::vector<double> both(v1.size());
    for (std::size_t k = 0; k < both.size(); ++k) both[k] = inv * v1[k] + v2[k];
    out.terms.v1 += a * inv * reduce(nodes, v1, est.expectation).value;
    out.terms.v2 += a * reduce(nodes, v2, est.expectation).value;
    const double se = reduce(nodes, both, est.expectation).std_error;
    var += a * a * se * se;
  }
  const Estimate h = mixture_entropy(mix, est);
  out.terms.entropy = h.value;
  out.terms.log_z = log_z;
  out.std_error = std::sqrt(var + h.std_error * h.std_error);
  out.value = out.terms.v1 + out.terms.v2 + out.terms.entropy + out.terms.log_z;
  return out;
}

KLEstimate g_eps(const TargetMeasure& mu, const MixtureParams& rescaled, double log_z, const EstimatorConfig& est) {
  return kl_mixture(mu, scale_covariance(rescaled, mu.epsilon()), log_z, est);
}

}  // namespace klgauss
