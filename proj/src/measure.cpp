#include "klgauss/measure.hpp"

#include "klgauss/bfgs.hpp"
#include "klgauss/parallel.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

namespace klgauss {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double log_sum_exp(const std::vector<double>& v) {
  double top = -kInf;
  for (double x : v) top = std::max(top, x);
  if (!std::isfinite(top)) return top;
  double acc = 0.0;
  for (double x : v) acc += std::exp(x - top);
  return top + std::log(acc);
}

bool lex_less(const Vector& a, const Vector& b) {
  return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(), b.data() + b.size());
}

Potential scaled_sum(const TargetMeasure& mu) {
  const Potential v1 = mu.v1(), v2 = mu.v2();
  const double inv = 1.0 / mu.epsilon();
  return Potential(
      mu.dim(), [=](const Vector& x) { return inv * v1.value(x) + v2.value(x); },
      [=](const Vector& x) -> Vector { return inv * v1.gradient(x) + v2.gradient(x); },
      [=](const Vector& x) -> Matrix { return inv * v1.hessian(x) + v2.hessian(x); });
}

}  // namespace

TargetMeasure::TargetMeasure(Potential v1, Potential v2, double epsilon)
    : v1_(std::move(v1)), v2_(std::move(v2)), epsilon_(epsilon) {
  if (!v1_.valid() || !v2_.valid()) throw std::invalid_argument("target measure needs both potentials");
  if (v1_.dim() != v2_.dim()) throw std::invalid_argument("V1 and V2 differ in dimension");
  if (!(epsilon_ > 0.0) || !std::isfinite(epsilon_)) throw std::invalid_argument("epsilon must be positive");
}

double unnormalized_log_density(const TargetMeasure& mu, const Vector& x) {
  const double out = -mu.v1().value(x) / mu.epsilon() - mu.v2().value(x);
  if (!std::isfinite(out)) throw EvaluationError("log density is not finite", x);
  return out;
}

MultistartConfig MultistartConfig::box(int dim, double half_width, int starts) {
  MultistartConfig c;
  c.lo = Vector::Constant(dim, -half_width);
  c.hi = Vector::Constant(dim, half_width);
  c.starts = starts;
  return c;
}

double ModeSet::log_total_weight() const { return log_sum_exp(log_raw_weights); }

int ModeSet::nearest(const Vector& x) const {
  int best = -1;
  double dist = kInf;
  for (int i = 0; i < size(); ++i) {
    const double d = (modes[i] - x).norm();
    if (d < dist) {
      dist = d;
      best = i;
    }
  }
  return best;
}

ModeSet make_mode_set(std::vector<Vector> modes, const Potential& v1_limit, const Potential& v2) {
  if (modes.empty()) throw std::invalid_argument("mode set must be nonempty");
  std::sort(modes.begin(), modes.end(), lex_less);
  for (std::size_t i = 0; i < modes.size(); ++i)
    for (std::size_t j = i + 1; j < modes.size(); ++j)
      if ((modes[i] - modes[j]).norm() == 0.0) throw std::invalid_argument("modes must be distinct");

  ModeSet ms;
  for (auto& x : modes) {
    Matrix H = v1_limit.hessian(x);
    H = 0.5 * (H + H.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> eig(H, Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues().minCoeff();
    const double scale = std::max(1.0, eig.eigenvalues().cwiseAbs().maxCoeff());
    if (!(lo > 1e-10 * scale)) throw DegenerateModeError("Hessian at minimizer is not positive definite", x);
    const double v2x = v2.value(x);
    const double log_beta = -0.5 * eig.eigenvalues().array().log().sum() - v2x;
    ms.hessians.push_back(std::move(H));
    ms.v2_values.push_back(v2x);
    ms.log_raw_weights.push_back(log_beta);
    ms.raw_weights.push_back(std::exp(log_beta));
    ms.modes.push_back(std::move(x));
  }
  const double total = ms.log_total_weight();
  ms.weights.resize(ms.size());
  for (int i = 0; i < ms.size(); ++i) ms.weights[i] = std::exp(ms.log_raw_weights[i] - total);
  return ms;
}

LocalMinimum local_minimize(const Potential& v, const Vector& start, int max_iters, double grad_tol) {
  const SmoothObjective f = [&v](const Vector& x, Vector* g) {
    try {
      const double val = v.value(x);
      if (g) *g = v.gradient(x);
      return val;
    } catch (const EvaluationError&) {
      return kInf;
    }
  };
  BfgsOptions opts;
  opts.max_iters = max_iters;
  opts.grad_tol = grad_tol;
  const BfgsResult r = minimize_bfgs(f, start, opts);

  LocalMinimum out;
  out.x = r.x;
  out.value = r.value;
  if (r.status == BfgsStatus::non_finite_start) {
    out.grad_norm = kInf;
    return out;
  }
  // Newton polish: accepted only while it does not increase the value.
  for (int k = 0; k < 200; ++k) {
    const Vector g = v.gradient(out.x);
    if (g.norm() == 0.0) break;
    Eigen::LLT<Matrix> llt(v.hessian(out.x));
    if (llt.info() != Eigen::Success) break;
    const Vector step = -llt.solve(g);
    if (!step.allFinite()) break;
    const Vector trial = out.x + step;
    double tv;
    try {
      tv = v.value(trial);
    } catch (const EvaluationError&) {
      break;
    }
    if (!(tv <= out.value)) break;
    out.x = trial;
    out.value = tv;
    if (step.norm() <= 1e-15 * (1.0 + out.x.norm())) break;
  }
  out.grad_norm = v.gradient(out.x).norm();
  out.converged = out.grad_norm <= std::max(grad_tol, 1e-8);
  return out;
}

ModeSet find_modes(const Potential& v1_limit, const Potential& v2, const MultistartConfig& search) {
  const int d = v1_limit.dim();
  if (search.lo.size() != d || search.hi.size() != d) throw std::invalid_argument("search box dimension mismatch");
  if (search.starts < 1) throw std::invalid_argument("multistart count must be >= 1");
  if ((search.hi.array() < search.lo.array()).any()) throw std::invalid_argument("search box is empty");

  std::mt19937_64 rng(search.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Vector> starts(static_cast<std::size_t>(search.starts), Vector(d));
  for (auto& s : starts)
    for (int i = 0; i < d; ++i) s[i] = search.lo[i] + unit(rng) * (search.hi[i] - search.lo[i]);

  std::vector<LocalMinimum> found(starts.size());
  parallel_for(starts.size(), [&](std::size_t k) {
    found[k] = local_minimize(v1_limit, starts[k], search.max_iters, search.grad_tol);
  });

  double best = kInf;
  for (const auto& m : found)
    if (m.converged) best = std::min(best, m.value);
  if (!std::isfinite(best)) throw ModeSearchError("no minimizer found within the iteration budget");

  std::vector<const LocalMinimum*> order;
  for (const auto& m : found)
    if (m.converged && m.value <= best + search.value_tol) order.push_back(&m);
  std::stable_sort(order.begin(), order.end(),
                   [](const LocalMinimum* a, const LocalMinimum* b) { return a->value < b->value; });

  std::vector<Vector> kept;
  for (const LocalMinimum* m : order) {
    bool dup = false;
    for (const auto& k : kept) {
      if ((k - m->x).norm() <= search.dedup_radius * (1.0 + k.norm())) {
        dup = true;
        break;
      }
    }
    if (!dup) kept.push_back(m->x);
  }
  return make_mode_set(std::move(kept), v1_limit, v2);
}

double log_laplace_normalization(const ModeSet& ms, double epsilon) {
  if (ms.size() == 0) throw std::invalid_argument("mode set must be nonempty");
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
  return 0.5 * ms.dim() * std::log(2.0 * std::numbers::pi * epsilon) + ms.log_total_weight();
}

double laplace_normalization(const ModeSet& ms, double epsilon) {
  return std::exp(log_laplace_normalization(ms, epsilon));
}

GridSpec GridSpec::from_box(Box box, double step) {
  GridSpec g;
  g.boxes.push_back(std::move(box));
  g.step = step;
  g.tail_tol = std::numeric_limits<double>::infinity();
  return g;
}

GridSpec GridSpec::automatic(const TargetMeasure& mu, const ModeSet& ms, double radius_sigmas,
                             double points_per_sigma) {
  if (ms.size() == 0) throw std::invalid_argument("automatic grid needs at least one mode");
  const Potential u = scaled_sum(mu);
  GridSpec g;
  g.adaptive = true;
  g.step = kInf;
  for (int i = 0; i < ms.size(); ++i) {
    const LocalMinimum c = local_minimize(u, ms.modes[i]);
    Matrix H = u.hessian(c.x);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (H + H.transpose()), Eigen::EigenvaluesOnly);
    Vector lam = eig.eigenvalues();
    if (!(lam.minCoeff() > 0.0)) {
      Eigen::SelfAdjointEigenSolver<Matrix> lim(ms.hessians[i] / mu.epsilon(), Eigen::EigenvaluesOnly);
      lam = lim.eigenvalues();
    }
    const double sigma_max = 1.0 / std::sqrt(lam.minCoeff());
    const double sigma_min = 1.0 / std::sqrt(lam.maxCoeff());
    const Vector r = Vector::Constant(mu.dim(), radius_sigmas * sigma_max);
    g.boxes.push_back(Box{c.x - r, c.x + r});
    g.step = std::min(g.step, sigma_min / points_per_sigma);
  }
  return g;
}

GridSpec& GridSpec::cover_gaussian(const Vector& mean, const Matrix& covariance, double radius_sigmas) {
  const Vector r = radius_sigmas * covariance.diagonal().cwiseSqrt();
  boxes.push_back(Box{mean - r, mean + r});
  Eigen::SelfAdjointEigenSolver<Matrix> eig(covariance, Eigen::EigenvaluesOnly);
  const double s = std::sqrt(std::max(eig.eigenvalues().minCoeff(), 0.0)) / 4.0;
  if (s > 0.0 && (step <= 0.0 || s < step)) step = s;
  return *this;
}

QuadratureResult quadrature_normalization(const TargetMeasure& mu, const GridSpec& grid) {
  if (mu.dim() > 3) throw std::invalid_argument("quadrature oracle supports dimension <= 3");
  if (grid.boxes.empty()) throw std::invalid_argument("grid has no boxes");
  std::vector<Box> boxes = grid.boxes;
  const auto log_f = [&mu](const Vector& x) { return unnormalized_log_density(mu, x); };
  const int rounds = grid.adaptive ? 8 : 1;
  for (int round = 0; round < rounds; ++round) {
    const std::vector<Box> merged = merge_boxes(boxes);
    const GridIntegral r = integrate_exp(merged, grid.step, log_f);
    if (r.boundary_ratio <= grid.tail_tol) {
      QuadratureResult out;
      out.value = r.value;
      out.log_value = r.log_value;
      out.error_estimate = std::max(r.error_estimate, 1e-12 * r.value);
      out.boundary_ratio = r.boundary_ratio;
      out.boxes = merged;
      out.step = grid.step;
      return out;
    }
    for (auto& b : boxes) {
      const Vector c = 0.5 * (b.lo + b.hi);
      const Vector half = 0.75 * (b.hi - b.lo);
      b = Box{c - half, c + half};
    }
  }
  throw GridTooSmallError("integrand on the grid boundary exceeds the tail tolerance");
}

double grid_total_variation(const TargetMeasure& mu, double log_z,
                            const std::function<double(const Vector&)>& log_q, const GridSpec& grid) {
  if (mu.dim() > 3) throw std::invalid_argument("grid total variation supports dimension <= 3");
  const auto f = [&](const Vector& x) {
    return 0.5 * std::abs(std::exp(log_q(x)) - std::exp(unnormalized_log_density(mu, x) - log_z));
  };
  return integrate(merge_boxes(grid.boxes), grid.step, f).value;
}

}  // namespace klgauss
