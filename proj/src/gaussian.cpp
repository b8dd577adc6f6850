#include "klgauss/gaussian.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace klgauss {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;  // log(2 pi)

void check_chol(const Matrix& L) {
  if (L.rows() != L.cols()) throw std::invalid_argument("Cholesky factor must be square");
  for (Eigen::Index i = 0; i < L.rows(); ++i) {
    if (!(L(i, i) >= GaussianParams::kMinCholDiagonal) || !std::isfinite(L(i, i))) {
      throw std::invalid_argument("Cholesky diagonal entry out of range (covariance not SPD)");
    }
    for (Eigen::Index j = i + 1; j < L.cols(); ++j) {
      if (L(i, j) != 0.0) throw std::invalid_argument("Cholesky factor must be lower triangular");
    }
  }
  if (!L.allFinite()) throw std::invalid_argument("Cholesky factor has non-finite entries");
}

}  // namespace

GaussianParams::GaussianParams(Vector mean, Matrix chol) : mean_(std::move(mean)), chol_(std::move(chol)) {
  if (mean_.size() == 0) throw std::invalid_argument("Gaussian must have positive dimension");
  if (chol_.rows() != mean_.size()) throw std::invalid_argument("mean and Cholesky factor disagree in dimension");
  if (!mean_.allFinite()) throw std::invalid_argument("Gaussian mean has non-finite entries");
  check_chol(chol_);
}

GaussianParams GaussianParams::from_covariance(Vector mean, const Matrix& covariance) {
  if (covariance.rows() != covariance.cols() || covariance.rows() != mean.size()) {
    throw std::invalid_argument("covariance shape does not match mean");
  }
  Eigen::LLT<Matrix> llt(0.5 * (covariance + covariance.transpose()));
  if (llt.info() != Eigen::Success) throw std::invalid_argument("covariance is not positive definite");
  Matrix L = llt.matrixL();
  return GaussianParams(std::move(mean), std::move(L));
}

double GaussianParams::log_det() const {
  return 2.0 * chol_.diagonal().array().log().sum();
}

Vector GaussianParams::whiten(const Vector& x) const {
  return chol_.triangularView<Eigen::Lower>().solve(x - mean_);
}

void MixtureConstraints::validate() const {
  if (!(min_weight > 0.0 && min_weight < 1.0)) throw std::invalid_argument("xi1 must lie in (0, 1)");
  if (!(min_separation > 0.0) || !std::isfinite(min_separation)) {
    throw std::invalid_argument("xi2 must be positive");
  }
}

MixtureParams::MixtureParams(std::vector<GaussianParams> components, Vector weights, MixtureConstraints xi)
    : components_(std::move(components)), weights_(std::move(weights)), xi_(xi) {
  if (components_.empty()) throw std::invalid_argument("mixture needs at least one component");
  if (weights_.size() != static_cast<Eigen::Index>(components_.size())) {
    throw std::invalid_argument("mixture weight count does not match component count");
  }
  for (const auto& c : components_) {
    if (c.dim() != components_.front().dim()) throw std::invalid_argument("mixture components differ in dimension");
  }
  if ((weights_.array() < 0.0).any() || !weights_.allFinite()) {
    throw std::invalid_argument("mixture weights must be nonnegative");
  }
  if (std::abs(weights_.sum() - 1.0) > 1e-10) throw std::invalid_argument("mixture weights must sum to 1");
  xi_.validate();
}

double MixtureParams::min_separation() const {
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < size(); ++i)
    for (int j = i + 1; j < size(); ++j)
      best = std::min(best, (component(i).mean() - component(j).mean()).norm());
  return best;
}

bool MixtureParams::feasible() const {
  if ((weights_.array() < xi_.min_weight).any()) return false;
  return min_separation() >= xi_.min_separation;
}

double log_density(const GaussianParams& g, const Vector& x) {
  if (x.size() != g.dim()) throw std::invalid_argument("point dimension does not match Gaussian");
  const Vector u = g.whiten(x);
  return -0.5 * u.squaredNorm() - 0.5 * (g.dim() * kLog2Pi + g.log_det());
}

double log_density(const MixtureParams& mix, const Vector& x) {
  double top = -std::numeric_limits<double>::infinity();
  std::vector<double> terms(static_cast<std::size_t>(mix.size()));
  for (int i = 0; i < mix.size(); ++i) {
    const double w = mix.weights()[i];
    terms[i] = w > 0.0 ? std::log(w) + log_density(mix.component(i), x)
                       : -std::numeric_limits<double>::infinity();
    top = std::max(top, terms[i]);
  }
  double acc = 0.0;
  for (double t : terms) acc += std::exp(t - top);
  return top + std::log(acc);
}

double kl_gaussian_gaussian(const GaussianParams& a, const GaussianParams& b) {
  if (a.dim() != b.dim()) throw std::invalid_argument("KL arguments differ in dimension");
  const auto Lb = b.chol().triangularView<Eigen::Lower>();
  const Matrix M = Lb.solve(a.chol());
  const Vector u = Lb.solve(b.mean() - a.mean());
  const double trace = M.squaredNorm();
  const double maha = u.squaredNorm();
  const double log_ratio = 2.0 * (b.chol().diagonal().array().log().sum() -
                                  a.chol().diagonal().array().log().sum());
  const double kl = 0.5 * (trace + maha - a.dim() + log_ratio);
  return std::max(0.0, kl);
}

double kl_categorical(const Vector& p, const Vector& q) {
  if (p.size() != q.size()) throw std::invalid_argument("categorical KL arguments differ in length");
  double acc = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    if (q[i] <= 0.0) return kInfiniteDivergence;
    acc += p[i] * std::log(p[i] / q[i]);
  }
  return std::max(0.0, acc);
}

GaussianParams scale_covariance(const GaussianParams& g, double factor) {
  if (!(factor > 0.0) || !std::isfinite(factor)) throw std::invalid_argument("covariance scale must be positive");
  return GaussianParams(g.mean(), std::sqrt(factor) * g.chol());
}

MixtureParams scale_covariance(const MixtureParams& mix, double factor) {
  std::vector<GaussianParams> comps;
  for (const auto& c : mix.components()) comps.push_back(scale_covariance(c, factor));
  return MixtureParams(std::move(comps), mix.weights(), mix.constraints());
}

Matrix sample(const GaussianParams& g, int count, unsigned long long seed) {
  if (count < 1) throw std::invalid_argument("sample count must be >= 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix out(g.dim(), count);
  Vector z(g.dim());
  for (int c = 0; c < count; ++c) {
    for (int i = 0; i < g.dim(); ++i) z[i] = normal(rng);
    out.col(c) = g.mean() + g.chol().triangularView<Eigen::Lower>() * z;
  }
  return out;
}

Matrix sample(const MixtureParams& mix, int count, unsigned long long seed) {
  if (count < 1) throw std::invalid_argument("sample count must be >= 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::discrete_distribution<int> pick(mix.weights().data(), mix.weights().data() + mix.size());
  Matrix out(mix.dim(), count);
  Vector z(mix.dim());
  for (int c = 0; c < count; ++c) {
    const GaussianParams& g = mix.component(pick(rng));
    for (int i = 0; i < mix.dim(); ++i) z[i] = normal(rng);
    out.col(c) = g.mean() + g.chol().triangularView<Eigen::Lower>() * z;
  }
  return out;
}

void to_json(nlohmann::json& j, const GaussianParams& g) {
  j = nlohmann::json::object();
  j["mean"] = std::vector<double>(g.mean().data(), g.mean().data() + g.dim());
  nlohmann::json rows = nlohmann::json::array();
  for (int r = 0; r < g.dim(); ++r) {
    std::vector<double> row(static_cast<std::size_t>(g.dim()));
    for (int c = 0; c < g.dim(); ++c) row[c] = g.chol()(r, c);
    rows.push_back(row);
  }
  j["chol"] = rows;
}

void from_json(const nlohmann::json& j, GaussianParams& g) {
  const auto mean = j.at("mean").get<std::vector<double>>();
  const auto rows = j.at("chol").get<std::vector<std::vector<double>>>();
  const auto d = static_cast<Eigen::Index>(mean.size());
  if (static_cast<Eigen::Index>(rows.size()) != d) throw std::invalid_argument("chol row count mismatch");
  Matrix L(d, d);
  for (Eigen::Index r = 0; r < d; ++r) {
    if (static_cast<Eigen::Index>(rows[r].size()) != d) throw std::invalid_argument("chol column count mismatch");
    for (Eigen::Index c = 0; c < d; ++c) L(r, c) = rows[r][c];
  }
  g = GaussianParams(Eigen::Map<const Vector>(mean.data(), d), L);
}

void to_json(nlohmann::json& j, const MixtureParams& m) {
  j = nlohmann::json::object();
  nlohmann::json comps = nlohmann::json::array();
  for (int i = 0; i < m.size(); ++i) {
    nlohmann::json c = m.component(i);
    c["weight"] = m.weights()[i];
    comps.push_back(c);
  }
  j["components"] = comps;
  j["xi"] = {m.constraints().min_weight, m.constraints().min_separation};
}

void from_json(const nlohmann::json& j, MixtureParams& m) {
  std::vector<GaussianParams> comps;
  std::vector<double> w;
  for (const auto& c : j.at("components")) {
    comps.push_back(c.get<GaussianParams>());
    w.push_back(c.at("weight").get<double>());
  }
  MixtureConstraints xi;
  if (j.contains("xi")) {
    xi.min_weight = j["xi"].at(0).get<double>();
    xi.min_separation = j["xi"].at(1).get<double>();
  }
  m = MixtureParams(std::move(comps), Eigen::Map<const Vector>(w.data(), static_cast<Eigen::Index>(w.size())), xi);
}

}  // namespace klgauss
