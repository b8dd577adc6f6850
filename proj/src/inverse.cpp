#include "klgauss/inverse.hpp"

#include "klgauss/catalog.hpp"
#include "klgauss/parallel.hpp"

#include <Eigen/LU>
#include <Eigen/SVD>

#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <random>
#include <stdexcept>

namespace klgauss {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

class MisfitFunction final : public PotentialFunction {
 public:
  MisfitFunction(EllipticProblem p, Vector y, PosteriorOptions opts)
      : p_(std::move(p)), y_(std::move(y)), opts_(opts) {}

  double value(const Vector& q) const override { return 0.5 * (y_ - forward(p_, q)).squaredNorm(); }

  Vector gradient(const Vector& q) const override {
    return -jacobian(p_, q).transpose() * (y_ - forward(p_, q));
  }

  Matrix hessian(const Vector& q) const override {
    const Matrix J = jacobian(p_, q);
    Matrix H = J.transpose() * J;
    if (!opts_.gauss_newton) H -= contracted_second_derivative(p_, q, y_ - forward(p_, q));
    return 0.5 * (H + H.transpose());
  }

 private:
  EllipticProblem p_;
  Vector y_;
  PosteriorOptions opts_;
};

// (1/2N) sum_j |y_j - G(q)|^2 evaluated without completing the square.
class SummedMisfitFunction final : public PotentialFunction {
 public:
  SummedMisfitFunction(EllipticProblem p, Matrix ys) : p_(std::move(p)), ys_(std::move(ys)) {
    mean_ = ys_.rowwise().mean();
  }

  double value(const Vector& q) const override {
    const Vector u = forward(p_, q);
    double acc = 0.0;
    for (Eigen::Index j = 0; j < ys_.cols(); ++j) acc += (ys_.col(j) - u).squaredNorm();
    return 0.5 * acc / static_cast<double>(ys_.cols());
  }

  Vector gradient(const Vector& q) const override {
    return -jacobian(p_, q).transpose() * (mean_ - forward(p_, q));
  }

  Matrix hessian(const Vector& q) const override {
    const Matrix J = jacobian(p_, q);
    const Matrix H = J.transpose() * J - contracted_second_derivative(p_, q, mean_ - forward(p_, q));
    return 0.5 * (H + H.transpose());
  }

 private:
  EllipticProblem p_;
  Matrix ys_;
  Vector mean_;
};

void check_q(const EllipticProblem& p, const Vector& q) {
  if (q.size() != p.grid_size()) throw std::invalid_argument("parameter length does not match grid size");
  if (!q.allFinite()) throw std::invalid_argument("parameter has non-finite entries");
}

bool strictly_decreasing(const std::vector<double>& eps) {
  for (std::size_t i = 0; i < eps.size(); ++i) {
    if (!(eps[i] > 0.0)) return false;
    if (i > 0 && !(eps[i] < eps[i - 1])) return false;
  }
  return !eps.empty();
}

double mean_of(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v) acc += x;
  return acc / static_cast<double>(v.size());
}

double stderr_of(const std::vector<double>& v, double mean) {
  if (v.size() < 2) return 0.0;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

}  // namespace

Variant parse_variant(const std::string& s) {
  if (s == "exp") return Variant::exp;
  if (s == "square") return Variant::square;
  throw std::invalid_argument("unknown variant '" + s + "' (expected exp or square)");
}

std::string to_string(Variant v) { return v == Variant::exp ? "exp" : "square"; }

EllipticProblem::EllipticProblem(int grid_size, Vector f, Variant variant)
    : m_(grid_size), f_(std::move(f)), variant_(variant) {
  if (m_ < 1) throw std::invalid_argument("grid size must be >= 1");
  if (f_.size() != m_) throw std::invalid_argument("source length does not match grid size");
  if (!(f_.array() > 0.0).all() || !f_.allFinite()) throw std::invalid_argument("source must be strictly positive");
}

Matrix EllipticProblem::laplacian() const {
  const double s = 1.0 / (h() * h());
  Matrix A = Matrix::Zero(m_, m_);
  for (int i = 0; i < m_; ++i) {
    A(i, i) = 2.0 * s;
    if (i + 1 < m_) A(i, i + 1) = A(i + 1, i) = -s;
  }
  return A;
}

Vector EllipticProblem::coefficient(const Vector& q) const {
  return variant_ == Variant::exp ? Vector(q.array().exp()) : Vector(q.array().square());
}

Vector EllipticProblem::coefficient_derivative(const Vector& q) const {
  return variant_ == Variant::exp ? Vector(q.array().exp()) : Vector(2.0 * q);
}

Vector EllipticProblem::coefficient_second_derivative(const Vector& q) const {
  return variant_ == Variant::exp ? Vector(q.array().exp()) : Vector(Vector::Constant(q.size(), 2.0));
}

Matrix EllipticProblem::solve(const Vector& c, const Matrix& rhs) const {
  const double s = 1.0 / (h() * h());
  const double off = -s;
  std::vector<double> d(static_cast<std::size_t>(m_)), l(static_cast<std::size_t>(m_), 0.0);
  d[0] = 2.0 * s + c[0];
  for (int i = 1; i < m_; ++i) {
    l[i - 1] = off / d[i - 1];
    d[i] = 2.0 * s + c[i] - l[i - 1] * off;
  }
  for (double di : d)
    if (!(di > 0.0) || !std::isfinite(di)) throw EvaluationError("A + Q is numerically singular", c);
  Matrix x = rhs;
  for (Eigen::Index col = 0; col < x.cols(); ++col) {
    for (int i = 1; i < m_; ++i) x(i, col) -= l[i - 1] * x(i - 1, col);
    for (int i = 0; i < m_; ++i) x(i, col) /= d[i];
    for (int i = m_ - 2; i >= 0; --i) x(i, col) -= l[i] * x(i + 1, col);
  }
  return x;
}

Vector forward(const EllipticProblem& p, const Vector& q) {
  check_q(p, q);
  return p.solve(p.coefficient(q), p.f());
}

Matrix jacobian(const EllipticProblem& p, const Vector& q) {
  const Vector u = forward(p, q);
  const Vector s = u.cwiseProduct(p.coefficient_derivative(q));
  return -p.solve(p.coefficient(q), Matrix(s.asDiagonal()));
}

double jacobian_condition(const EllipticProblem& p, const Vector& q) {
  Eigen::JacobiSVD<Matrix> svd(jacobian(p, q));
  const auto& sv = svd.singularValues();
  const double lo = sv[sv.size() - 1];
  return lo > 0.0 ? sv[0] / lo : std::numeric_limits<double>::infinity();
}

Matrix contracted_second_derivative(const EllipticProblem& p, const Vector& q, const Vector& r) {
  check_q(p, q);
  const int m = p.grid_size();
  const Vector c = p.coefficient(q), c1 = p.coefficient_derivative(q), c2 = p.coefficient_second_derivative(q);
  const Vector u = p.solve(c, p.f());
  const Matrix B = p.solve(c, Matrix::Identity(m, m));
  const Vector w = B * r;
  Matrix T(m, m);
  for (int j = 0; j < m; ++j)
    for (int l = 0; l < m; ++l) T(j, l) = c1[j] * c1[l] * B(j, l) * (u[j] * w[l] + u[l] * w[j]);
  for (int j = 0; j < m; ++j) T(j, j) -= w[j] * c2[j] * u[j];
  return T;
}

Potential misfit_potential(const EllipticProblem& p, Vector y, PosteriorOptions opts) {
  if (y.size() != p.grid_size()) throw std::invalid_argument("data length does not match grid size");
  Potential v(p.grid_size(), std::make_shared<MisfitFunction>(p, std::move(y), opts));
  v.nonnegative = true;
  return v;
}

Potential gaussian_prior(int dim) { return quadratic_potential(dim); }

TargetMeasure posterior(const EllipticProblem& p, const Vector& truth, const Vector& eta, double epsilon,
                        const Potential& prior, PosteriorOptions opts) {
  if (eta.size() != p.grid_size() || !eta.allFinite()) throw std::invalid_argument("noise must be finite of length M");
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
  Vector y = forward(p, truth) + std::sqrt(epsilon) * eta;
  return TargetMeasure(misfit_potential(p, std::move(y), opts), prior, epsilon);
}

TargetMeasure posterior_large_data(const EllipticProblem& p, const Vector& truth, const Matrix& etas,
                                   const Potential& prior) {
  if (etas.rows() != p.grid_size() || etas.cols() < 1) throw std::invalid_argument("noise draws must be M x N");
  const Matrix ys = etas.colwise() + forward(p, truth);
  Potential v(p.grid_size(), std::make_shared<SummedMisfitFunction>(p, ys));
  v.nonnegative = true;
  return TargetMeasure(v, prior, 1.0 / static_cast<double>(etas.cols()));
}

Vector equivalent_noise(const Matrix& etas) {
  return std::sqrt(static_cast<double>(etas.cols())) * etas.rowwise().mean();
}

std::vector<Vector> limit_modes(const EllipticProblem& p, const Vector& truth) {
  check_q(p, truth);
  if (p.variant() == Variant::exp) return {truth};
  if ((truth.array() == 0.0).any()) throw std::invalid_argument("square variant needs a truth without zero entries");
  const int m = p.grid_size();
  if (m > 20) throw std::invalid_argument("too many sign patterns");
  std::vector<Vector> out;
  for (long mask = 0; mask < (1L << m); ++mask) {
    Vector x = truth;
    for (int i = 0; i < m; ++i)
      if (mask & (1L << i)) x[i] = -x[i];
    out.push_back(x);
  }
  return out;
}

ModeSet posterior_modes(const EllipticProblem& p, const Vector& truth, const Potential& prior) {
  return make_mode_set(limit_modes(p, truth), misfit_potential(p, forward(p, truth)), prior);
}

std::vector<NormalityRecord> asymptotic_normality_check(const EllipticProblem& p, const Vector& truth,
                                                        const Vector& eta, const std::vector<double>& eps_list,
                                                        const Potential& prior, int n, const OptimizerConfig& cfg,
                                                        const MixtureConstraints& xi) {
  if (!strictly_decreasing(eps_list)) throw std::invalid_argument("eps_list must be positive and strictly decreasing");
  const ModeSet ms = posterior_modes(p, truth, prior);
  std::vector<Matrix> limit_cov;
  for (const auto& H : ms.hessians) limit_cov.push_back(H.inverse());

  std::vector<NormalityRecord> out;
  std::optional<GaussianParams> warm_single;
  std::optional<MixtureParams> warm_mix;
  for (double eps : eps_list) {
    const TargetMeasure mu = posterior(p, truth, eta, eps, prior);
    const LogZMethod method = p.grid_size() <= 3 ? LogZMethod::quadrature : LogZMethod::laplace;
    const double log_z = log_normalization(mu, ms, method);
    NormalityRecord rec;
    rec.epsilon = eps;
    std::vector<GaussianParams> comps;
    Vector weights;
    if (n == 1) {
      const SingleResult r = minimize_single(mu, log_z, cfg, &ms, warm_single ? &*warm_single : nullptr);
      warm_single = r.rescaled(eps);
      comps.push_back(r.argmin);
      weights = Vector::Ones(1);
      rec.value = r.value;
      rec.converged = r.converged;
    } else {
      const MixtureResult r = minimize_mixture(mu, log_z, n, xi, cfg, &ms, warm_mix ? &*warm_mix : nullptr);
      warm_mix = r.rescaled(eps);
      comps = r.argmin.components();
      weights = r.argmin.weights();
      rec.value = r.value;
      rec.converged = r.converged;
    }
    Vector embedded = Vector::Zero(ms.size());
    for (std::size_t c = 0; c < comps.size(); ++c) {
      const int i = ms.nearest(comps[c].mean());
      rec.mean_error = std::max(rec.mean_error, (comps[c].mean() - ms.modes[i]).norm());
      const Matrix sigma = comps[c].covariance() / eps;
      rec.covariance_error = std::max(rec.covariance_error, (sigma - limit_cov[i]).norm() / limit_cov[i].norm());
      embedded[i] += weights[static_cast<Eigen::Index>(c)];
    }
    rec.weight_error = n == 1 ? 0.0 : (embedded - ms.weights).lpNorm<1>();
    out.push_back(rec);
  }
  return out;
}

void BvMConfig::validate() const {
  if (grid_size < 1) throw std::invalid_argument("M must be >= 1");
  if (variant != Variant::exp) throw std::invalid_argument("the BvM experiment requires the exp variant");
  if (f.size() != grid_size || truth.size() != grid_size) throw std::invalid_argument("f and truth must have length M");
  if (draws < 30) throw std::invalid_argument("the BvM experiment needs at least 30 draws per eps");
  if (!strictly_decreasing(eps_list)) throw std::invalid_argument("eps_list must be positive and strictly decreasing");
  if (log_z == LogZMethod::quadrature && grid_size > 3) throw std::invalid_argument("quadrature log Z needs M <= 3");
  optimizer.validate();
}

BvMConfig bvm_config_from_json(const nlohmann::json& j) {
  BvMConfig c;
  c.grid_size = j.at("M").get<int>();
  if (c.grid_size < 1) throw std::invalid_argument("M must be >= 1");
  c.variant = parse_variant(j.value("variant", std::string("exp")));
  auto vec = [&](const char* key, double fill) -> Vector {
    if (!j.contains(key)) return Vector::Constant(c.grid_size, fill);
    if (j.at(key).is_number()) return Vector::Constant(c.grid_size, j.at(key).get<double>());
    const auto raw = j.at(key).get<std::vector<double>>();
    return Eigen::Map<const Vector>(raw.data(), static_cast<Eigen::Index>(raw.size()));
  };
  c.f = vec("f", 81.0);
  c.truth = vec("truth", 0.0);
  if (j.contains("prior")) c.prior = j.at("prior");
  c.eps_list = j.at("eps_list").get<std::vector<double>>();
  c.draws = j.value("draws", c.draws);
  c.seed = j.value("seed", c.seed);
  if (j.contains("logz")) c.log_z = parse_logz(j.at("logz").get<std::string>());
  c.optimizer.starts = 1;
  if (j.contains("optimizer")) {
    const auto& o = j.at("optimizer");
    c.optimizer.starts = o.value("starts", c.optimizer.starts);
    c.optimizer.max_iters = o.value("max_iters", c.optimizer.max_iters);
    c.optimizer.grad_tol = o.value("grad_tol", c.optimizer.grad_tol);
    c.optimizer.estimator.gh_order = o.value("gh_order", c.optimizer.estimator.gh_order);
  }
  c.optimizer.seed = c.seed;
  return c;
}

Matrix noise_draws(int dim, int count, unsigned long long seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix out(dim, count);
  for (int k = 0; k < count; ++k)
    for (int i = 0; i < dim; ++i) out(i, k) = normal(rng);
  return out;
}

bool BvMResult::aborted() const {
  for (const auto& l : levels)
    if (l.aborted) return true;
  return false;
}

BvMResult bvm_experiment(const BvMConfig& cfg) {
  cfg.validate();
  const EllipticProblem p(cfg.grid_size, cfg.f, cfg.variant);
  const Potential prior = potential_from_json(cfg.prior, cfg.grid_size);
  const ModeSet ms = posterior_modes(p, cfg.truth, prior);
  const Matrix etas = noise_draws(cfg.grid_size, cfg.draws, cfg.seed);
  const bool grid_ok = cfg.grid_size <= 3;

  BvMResult out;
  std::vector<std::optional<GaussianParams>> warm(static_cast<std::size_t>(cfg.draws));
  for (double eps : cfg.eps_list) {
    BvMLevel level;
    level.epsilon = eps;
    level.kl.assign(static_cast<std::size_t>(cfg.draws), kNaN);
    level.d_tv.assign(static_cast<std::size_t>(cfg.draws), kNaN);
    parallel_for(static_cast<std::size_t>(cfg.draws), [&](std::size_t k) {
      const TargetMeasure mu = posterior(p, cfg.truth, etas.col(static_cast<Eigen::Index>(k)), eps, prior);
      double log_z;
      GridSpec grid;
      try {
        if (cfg.log_z == LogZMethod::quadrature) {
          const QuadratureResult q = quadrature_normalization(mu, GridSpec::automatic(mu, ms));
          log_z = q.log_value;
          grid = GridSpec{q.boxes, q.step, false, 1e-14};
        } else {
          log_z = log_laplace_normalization(ms, eps);
          if (grid_ok) grid = GridSpec::automatic(mu, ms);
        }
        const SingleResult r = minimize_single(mu, log_z, cfg.optimizer, &ms, warm[k] ? &*warm[k] : nullptr);
        if (!r.converged || !std::isfinite(r.value)) return;
        warm[k] = r.rescaled(eps);
        level.kl[k] = r.value;
        if (grid_ok) {
          grid.cover_gaussian(r.argmin.mean(), r.argmin.covariance());
          grid.step /= 4.0;
          const GaussianParams g = r.argmin;
          level.d_tv[k] = grid_total_variation(mu, log_z, [&g](const Vector& x) { return log_density(g, x); }, grid);
        }
      } catch (const std::exception&) {
        level.kl[k] = kNaN;
      }
    });

    std::vector<double> good;
    for (int k = 0; k < cfg.draws; ++k) {
      if (std::isnan(level.kl[k])) {
        ++level.failures;
        continue;
      }
      good.push_back(level.kl[k]);
      const double tv = level.d_tv[k];
      if (!std::isnan(tv)) {
        level.max_d_tv = std::max(level.max_d_tv, tv);
        if (tv > std::sqrt(std::max(level.kl[k], 0.0) / 2.0) + 1e-3) ++level.d_tv_violations;
      }
    }
    level.aborted = level.failures > 0.1 * cfg.draws;
    if (!good.empty()) {
      level.mean_kl = mean_of(good);
      level.stderr_kl = stderr_of(good, level.mean_kl);
      const double bound = 10.0 * std::sqrt(std::max(level.mean_kl, 0.0) / 2.0);
      for (int k = 0; k < cfg.draws; ++k)
        if (!std::isnan(level.d_tv[k]) && level.d_tv[k] > bound) ++level.tail_exceedances;
    }
    out.levels.push_back(std::move(level));
  }

  std::vector<double> xs, ys;
  std::vector<bool> use;
  for (const auto& l : out.levels) {
    xs.push_back(l.epsilon);
    ys.push_back(l.mean_kl);
    use.push_back(!l.aborted);
  }
  out.fit = fit_rate(xs, ys, use);
  return out;
}

void write_bvm_csv(std::ostream& out, const BvMResult& r) {
  out << "epsilon,mean_kl,stderr_kl,failures,d_tv_violations\n";
  nlohmann::json aborted = nlohmann::json::array();
  for (const auto& l : r.levels) {
    out << format_number(l.epsilon) << ',' << format_number(l.mean_kl) << ',' << format_number(l.stderr_kl) << ','
        << l.failures << ',' << l.d_tv_violations << '\n';
    if (l.aborted) aborted.push_back(l.epsilon);
  }
  nlohmann::json footer{{"rate_fit", to_json(r.fit)}, {"aborted_levels", aborted}};
  out << "# " << footer.dump() << '\n';
}

std::vector<LogZLevel> log_z_expectation_check(const EllipticProblem& p, const Vector& truth, const Potential& prior,
                                               const std::vector<double>& eps_list, int draws,
                                               unsigned long long seed) {
  if (p.grid_size() > 3) throw std::invalid_argument("log Z check needs M <= 3 for the quadrature oracle");
  if (draws < 2 || draws % 2 != 0) throw std::invalid_argument("log Z check needs an even number of draws >= 2");
  if (!strictly_decreasing(eps_list)) throw std::invalid_argument("eps_list must be positive and strictly decreasing");
  const ModeSet ms = posterior_modes(p, truth, prior);
  const Matrix half = noise_draws(p.grid_size(), draws / 2, seed);
  const double log_det = std::log(std::abs(jacobian(p, truth).determinant()));
  const int d = p.grid_size();

  std::vector<LogZLevel> out;
  for (double eps : eps_list) {
    std::vector<double> pair_means(static_cast<std::size_t>(draws / 2));
    parallel_for(pair_means.size(), [&](std::size_t k) {
      double acc = 0.0;
      for (double sign : {1.0, -1.0}) {
        const TargetMeasure mu = posterior(p, truth, sign * half.col(static_cast<Eigen::Index>(k)), eps, prior);
        acc += quadrature_normalization(mu, GridSpec::automatic(mu, ms)).log_value;
      }
      pair_means[k] = 0.5 * acc;
    });
    LogZLevel lvl;
    lvl.epsilon = eps;
    lvl.mean_log_z = mean_of(pair_means);
    lvl.stderr_log_z = stderr_of(pair_means, lvl.mean_log_z);
    lvl.predicted = 0.5 * d * std::log(2.0 * std::numbers::pi * eps) - prior.value(truth) - log_det;
    lvl.gap = lvl.mean_log_z - lvl.predicted;
    out.push_back(lvl);
  }
  return out;
}

}  // namespace klgauss
