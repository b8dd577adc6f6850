#include "klgauss/gamma.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <ostream>
#include <stdexcept>

namespace klgauss {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

int match_mode(const ModeSet& ms, const Vector& m, double tol) {
  if (m.size() != ms.dim()) return -1;
  const int i = ms.nearest(m);
  return (i >= 0 && (m - ms.modes[i]).norm() <= tol) ? i : -1;
}

bool spd(const Matrix& s) {
  if (s.rows() != s.cols() || !s.allFinite()) return false;
  Eigen::LLT<Matrix> llt(0.5 * (s + s.transpose()));
  return llt.info() == Eigen::Success;
}

Matrix limit_covariance(const ModeSet& ms, int i) {
  Eigen::LLT<Matrix> llt(ms.hessians[i]);
  return llt.solve(Matrix::Identity(ms.dim(), ms.dim()));
}

double gaussian_term(const ModeSet& ms, int i, const Matrix& sigma) {
  const GaussianParams a = GaussianParams::from_covariance(ms.modes[i], sigma);
  const GaussianParams b = GaussianParams::from_covariance(ms.modes[i], limit_covariance(ms, i));
  return kl_gaussian_gaussian(a, b);
}

}  // namespace

double f_limit(const ModeSet& ms, const Vector& m, const Matrix& sigma, double tol) {
  const int i = match_mode(ms, m, tol);
  if (i < 0 || !spd(sigma) || sigma.rows() != ms.dim()) return kInf;
  const GaussianParams g = GaussianParams::from_covariance(m, sigma);
  const int d = ms.dim();
  return ms.v2_values[i] + 0.5 * (ms.hessians[i] * sigma).trace() - 0.5 * d - 0.5 * g.log_det() +
         ms.log_total_weight();
}

LimitSplit f_limit_split(const ModeSet& ms, int i0, const Matrix& sigma) {
  if (i0 < 0 || i0 >= ms.size()) throw std::invalid_argument("mode index out of range");
  if (!spd(sigma)) throw std::invalid_argument("covariance is not positive definite");
  LimitSplit out;
  out.gaussian_term = gaussian_term(ms, i0, sigma);
  out.categorical_term = kl_categorical(Vector::Unit(ms.size(), i0), ms.weights);
  return out;
}

double g_limit(const ModeSet& ms, const MixtureParams& shape, double tol) {
  if (shape.size() == 0 || !shape.feasible()) return kInf;
  Vector embedded = Vector::Zero(ms.size());
  std::vector<bool> used(static_cast<std::size_t>(ms.size()), false);
  double acc = 0.0;
  for (int c = 0; c < shape.size(); ++c) {
    const int i = match_mode(ms, shape.component(c).mean(), tol);
    if (i < 0 || used[i]) return kInf;
    used[i] = true;
    const double a = shape.weights()[c];
    embedded[i] = a;
    acc += a * gaussian_term(ms, i, shape.component(c).covariance());
  }
  return acc + kl_categorical(embedded, ms.weights);
}

LimitMinimizer limit_minimizer_single(const ModeSet& ms) {
  if (ms.size() == 0) throw std::invalid_argument("mode set must be nonempty");
  int best = 0;
  for (int i = 1; i < ms.size(); ++i) {
    const double diff = ms.log_raw_weights[i] - ms.log_raw_weights[best];
    if (diff > 1e-9) best = i;
  }
  LimitMinimizer out;
  out.index = best;
  out.gaussian = GaussianParams::from_covariance(ms.modes[best], limit_covariance(ms, best));
  out.value = kl_categorical(Vector::Unit(ms.size(), best), ms.weights);
  return out;
}

MixtureParams limit_minimizer_mixture(const ModeSet& ms, const MixtureConstraints& xi) {
  std::vector<GaussianParams> comps;
  for (int i = 0; i < ms.size(); ++i) comps.push_back(GaussianParams::from_covariance(ms.modes[i], limit_covariance(ms, i)));
  return MixtureParams(std::move(comps), ms.weights, xi);
}

RateFit fit_rate(const std::vector<double>& x, const std::vector<double>& y, const std::vector<bool>& use) {
  if (x.size() != y.size() || (!use.empty() && use.size() != x.size())) {
    throw std::invalid_argument("rate fit inputs differ in length");
  }
  std::vector<double> lx, ly;
  RateFit fit;
  fit.eps_min = kInf;
  fit.eps_max = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    if ((!use.empty() && !use[k]) || !(x[k] > 0.0) || !(y[k] > 0.0) || !std::isfinite(y[k])) continue;
    lx.push_back(std::log(x[k]));
    ly.push_back(std::log(y[k]));
    fit.eps_min = std::min(fit.eps_min, x[k]);
    fit.eps_max = std::max(fit.eps_max, x[k]);
  }
  fit.points = static_cast<int>(lx.size());
  if (fit.points < 2) {
    fit.slope = fit.intercept = fit.r2 = std::numeric_limits<double>::quiet_NaN();
    if (fit.points == 0) fit.eps_min = 0.0;
    return fit;
  }
  const double n = static_cast<double>(lx.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t k = 0; k < lx.size(); ++k) {
    mx += lx[k];
    my += ly[k];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t k = 0; k < lx.size(); ++k) {
    sxx += (lx[k] - mx) * (lx[k] - mx);
    sxy += (lx[k] - mx) * (ly[k] - my);
    syy += (ly[k] - my) * (ly[k] - my);
  }
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r2 = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return fit;
}

nlohmann::json to_json(const RateFit& f) {
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  return {{"slope", num(f.slope)},         {"intercept", num(f.intercept)}, {"r2", num(f.r2)},
          {"eps_min", num(f.eps_min)},     {"eps_max", num(f.eps_max)},     {"points", f.points}};
}

Family parse_family(const std::string& s) {
  if (s == "single") return Family::single;
  if (s == "mixture") return Family::mixture;
  throw std::invalid_argument("unknown family '" + s + "' (expected single or mixture)");
}

std::string to_string(Family f) { return f == Family::single ? "single" : "mixture"; }

LogZMethod parse_logz(const std::string& s) {
  if (s == "laplace") return LogZMethod::laplace;
  if (s == "quadrature") return LogZMethod::quadrature;
  throw std::invalid_argument("unknown log Z method '" + s + "' (expected laplace or quadrature)");
}

std::string to_string(LogZMethod m) { return m == LogZMethod::laplace ? "laplace" : "quadrature"; }

double log_normalization(const TargetMeasure& mu, const ModeSet& ms, LogZMethod method) {
  if (method == LogZMethod::laplace) return log_laplace_normalization(ms, mu.epsilon());
  return quadrature_normalization(mu, GridSpec::automatic(mu, ms)).log_value;
}

SweepResult sweep(const Problem& problem, const std::vector<double>& eps_list, const SweepConfig& cfg) {
  if (eps_list.empty()) throw std::invalid_argument("eps_list must be nonempty");
  for (std::size_t i = 0; i < eps_list.size(); ++i) {
    if (!(eps_list[i] > 0.0)) throw std::invalid_argument("every eps must be positive");
    if (i > 0 && !(eps_list[i] < eps_list[i - 1])) throw std::invalid_argument("eps_list must be strictly decreasing");
  }
  const ModeSet ms = problem.modes();
  SweepResult out;
  std::optional<GaussianParams> warm_single;
  std::optional<MixtureParams> warm_mix;
  for (double eps : eps_list) {
    const TargetMeasure mu = problem.measure(eps);
    SweepRecord rec;
    rec.epsilon = eps;
    rec.family = cfg.family;
    rec.log_z = log_normalization(mu, ms, cfg.log_z);
    std::vector<GaussianParams> comps;
    if (cfg.family == Family::single) {
      const SingleResult r = minimize_single(mu, rec.log_z, cfg.optimizer, &ms, warm_single ? &*warm_single : nullptr);
      warm_single = r.rescaled(eps);
      comps.push_back(r.argmin);
      rec.weights = Vector::Ones(1);
      rec.value = r.value;
      rec.std_error = r.std_error;
      rec.converged = r.converged;
    } else {
      const MixtureResult r =
          minimize_mixture(mu, rec.log_z, cfg.n, cfg.xi, cfg.optimizer, &ms, warm_mix ? &*warm_mix : nullptr);
      warm_mix = r.rescaled(eps);
      comps = r.argmin.components();
      rec.weights = r.argmin.weights();
      rec.value = r.value;
      rec.std_error = r.std_error;
      rec.converged = r.converged;
    }

    Vector embedded = Vector::Zero(ms.size());
    std::vector<GaussianParams> snapped;
    for (std::size_t c = 0; c < comps.size(); ++c) {
      const int i = ms.nearest(comps[c].mean());
      rec.means.push_back(comps[c].mean());
      rec.rescaled_covariances.push_back(comps[c].covariance() / eps);
      rec.mode_dist = std::max(rec.mode_dist, (comps[c].mean() - ms.modes[i]).norm());
      embedded[i] += rec.weights[static_cast<Eigen::Index>(c)];
      snapped.push_back(GaussianParams::from_covariance(ms.modes[i], rec.rescaled_covariances.back()));
    }
    rec.weight_dist = (embedded - ms.weights).lpNorm<1>();
    if (cfg.family == Family::single) {
      rec.limit_value = f_limit(ms, snapped.front().mean(), rec.rescaled_covariances.front());
    } else {
      rec.limit_value = g_limit(ms, MixtureParams(snapped, rec.weights, cfg.xi));
    }
    rec.gap = rec.value - rec.limit_value;
    out.records.push_back(std::move(rec));
  }

  std::vector<double> xs, gaps, dists;
  std::vector<bool> use_gap, use_dist;
  for (const auto& r : out.records) {
    xs.push_back(r.epsilon);
    gaps.push_back(r.gap);
    dists.push_back(r.mode_dist);
    use_gap.push_back(r.converged && r.gap > 10.0 * r.std_error);
    use_dist.push_back(r.converged);
  }
  out.gap_fit = fit_rate(xs, gaps, use_gap);
  out.mode_fit = fit_rate(xs, dists, use_dist);
  return out;
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

void write_sweep_csv(std::ostream& out, const SweepResult& r) {
  out << "epsilon,value,limit_value,gap,mode_dist,weight_dist,converged\n";
  for (const auto& rec : r.records) {
    out << format_number(rec.epsilon) << ',' << format_number(rec.value) << ',' << format_number(rec.limit_value)
        << ',' << format_number(rec.gap) << ',' << format_number(rec.mode_dist) << ','
        << format_number(rec.weight_dist) << ',' << (rec.converged ? "true" : "false") << '\n';
  }
  nlohmann::json footer{{"gap_fit", to_json(r.gap_fit)}, {"mode_fit", to_json(r.mode_fit)}};
  out << "# " << footer.dump() << '\n';
}

}  // namespace klgauss
