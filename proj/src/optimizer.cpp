#include "klgauss/optimizer.hpp"

#include "klgauss/bfgs.hpp"
#include "klgauss/parallel.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <random>
#include <stdexcept>

namespace klgauss {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kLog2Pi = 1.8378770664093454836;

int tri_size(int d) { return d * (d + 1) / 2; }

// Lower factor from packed parameters: row-major lower triangle, diagonal as log.
Matrix unpack_chol(const double* p, int d) {
  Matrix L = Matrix::Zero(d, d);
  int k = 0;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j <= i; ++j, ++k) L(i, j) = (i == j) ? std::exp(p[k]) : p[k];
  return L;
}

void pack_chol(const Matrix& L, double* p) {
  const int d = static_cast<int>(L.rows());
  int k = 0;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j <= i; ++j, ++k) p[k] = (i == j) ? std::log(L(i, i)) : L(i, j);
}

// Gradient wrt packed parameters from gradient wrt the actual factor L = s * Ltilde.
void pack_chol_gradient(const Matrix& gL, const Matrix& L, double s, double* out) {
  const int d = static_cast<int>(L.rows());
  int k = 0;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j <= i; ++j, ++k) out[k] = (i == j) ? gL(i, i) * L(i, i) : s * gL(i, j);
}

bool lex_less(const Vector& a, const Vector& b) {
  return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(), b.data() + b.size());
}

bool better(double v, bool conv, const Vector& m, double best, bool best_conv, const Vector& best_m) {
  if (!std::isfinite(v)) return false;
  if (!std::isfinite(best)) return true;
  const double tie = 1e-12 * (1.0 + std::abs(best));
  if (v < best - tie) return true;
  if (v > best + tie) return false;
  if (conv != best_conv) return conv;
  return lex_less(m, best_m);
}

Box default_box(int d, const ModeSet* modes) {
  if (!modes || modes->size() == 0) return Box{Vector::Constant(d, -3.0), Vector::Constant(d, 3.0)};
  Vector lo = modes->modes.front(), hi = lo;
  for (const auto& x : modes->modes) {
    lo = lo.cwiseMin(x);
    hi = hi.cwiseMax(x);
  }
  return Box{lo.array() - 2.0, hi.array() + 2.0};
}

Matrix inverse_chol(const Matrix& H) {
  Eigen::LLT<Matrix> llt(H);
  const Matrix S = llt.solve(Matrix::Identity(H.rows(), H.cols()));
  Eigen::LLT<Matrix> factor(0.5 * (S + S.transpose()));
  return factor.matrixL();
}

// ---- single Gaussian --------------------------------------------------------

struct SingleObjective {
  const TargetMeasure* mu;
  double log_z;
  NodeSet nodes;
  Vector anchor;
  double root_eps;

  int dim() const { return mu->dim(); }
  int size() const { return dim() + tri_size(dim()); }

  Vector mean(const Vector& th) const { return anchor + root_eps * th.head(dim()); }
  Matrix chol(const Vector& th) const { return root_eps * unpack_chol(th.data() + dim(), dim()); }

  Vector encode(const Vector& m, const Matrix& L) const {
    Vector th(size());
    th.head(dim()) = (m - anchor) / root_eps;
    pack_chol(L / root_eps, th.data() + dim());
    return th;
  }

  double operator()(const Vector& th, Vector* grad) const {
    const int d = dim();
    const double inv = 1.0 / mu->epsilon();
    const Vector m = mean(th);
    const Matrix L = chol(th);
    double acc = 0.0;
    Vector gm = Vector::Zero(d);
    Matrix gL = Matrix::Zero(d, d);
    Vector x(d);
    try {
      for (int k = 0; k < nodes.size(); ++k) {
        const auto z = nodes.nodes.col(k);
        x.noalias() = m + L.triangularView<Eigen::Lower>() * z;
        const double w = nodes.weights[k];
        acc += w * (inv * mu->v1().value(x) + mu->v2().value(x));
        if (grad) {
          const Vector g = inv * mu->v1().gradient(x) + mu->v2().gradient(x);
          gm += w * g;
          gL += w * g * z.transpose();
        }
      }
    } catch (const EvaluationError&) {
      return kInf;
    }
    double log_diag = 0.0;
    for (int i = 0; i < d; ++i) log_diag += std::log(L(i, i));
    const double value = acc - log_diag - 0.5 * d * kLog2Pi - 0.5 * d + log_z;
    if (grad) {
      for (int i = 0; i < d; ++i) gL(i, i) -= 1.0 / L(i, i);
      grad->resize(size());
      grad->head(d) = root_eps * gm;
      pack_chol_gradient(gL, L, root_eps, grad->data() + d);
    }
    return value;
  }
};

// ---- mixture ----------------------------------------------------------------

struct MixtureObjective {
  const TargetMeasure* mu;
  double log_z;
  NodeSet nodes;
  std::vector<Vector> anchors;
  double root_eps;
  MixtureConstraints xi;
  double penalty = 0.0;

  int n() const { return static_cast<int>(anchors.size()); }
  int dim() const { return mu->dim(); }
  int block() const { return dim() + tri_size(dim()); }
  int size() const { return n() * block() + n(); }

  Vector mean(const Vector& th, int i) const { return anchors[i] + root_eps * th.segment(i * block(), dim()); }
  Matrix chol(const Vector& th, int i) const {
    return root_eps * unpack_chol(th.data() + i * block() + dim(), dim());
  }
  Vector softmax(const Vector& th) const {
    const Vector w = th.tail(n());
    const Vector e = (w.array() - w.maxCoeff()).exp();
    return e / e.sum();
  }
  Vector weights(const Vector& th) const {
    return Vector::Constant(n(), xi.min_weight) + (1.0 - n() * xi.min_weight) * softmax(th);
  }

  Vector encode(const std::vector<Vector>& means, const std::vector<Matrix>& chols, const Vector& alpha) const {
    Vector th(size());
    for (int i = 0; i < n(); ++i) {
      th.segment(i * block(), dim()) = (means[i] - anchors[i]) / root_eps;
      pack_chol(chols[i] / root_eps, th.data() + i * block() + dim());
    }
    const double free = 1.0 - n() * xi.min_weight;
    for (int i = 0; i < n(); ++i) {
      const double s = free > 0.0 ? std::max((alpha[i] - xi.min_weight) / free, 1e-3) : 1.0;
      th[n() * block() + i] = std::log(s);
    }
    return th;
  }

  double separation_term(const std::vector<Vector>& m, std::vector<Vector>* gm) const {
    if (penalty <= 0.0) return 0.0;
    const double target = xi.min_separation * (1.0 + 1e-6);
    double p = 0.0;
    for (int i = 0; i < n(); ++i)
      for (int j = i + 1; j < n(); ++j) {
        const Vector diff = m[i] - m[j];
        const double dist = diff.norm();
        const double viol = target - dist;
        if (viol <= 0.0) continue;
        p += penalty * viol * viol;
        if (gm && dist > 0.0) {
          const Vector g = -2.0 * penalty * viol * diff / dist;
          (*gm)[i] += g;
          (*gm)[j] -= g;
        }
      }
    return p;
  }

  struct Terms {
    double v1 = 0.0, v2 = 0.0, entropy = 0.0, variance = 0.0;
  };

  double evaluate(const Vector& th, Vector* grad, Terms* terms) const {
    const int d = dim(), nc = n();
    const double inv = 1.0 / mu->epsilon();
    const Vector alpha = weights(th);
    std::vector<Vector> m(nc);
    std::vector<Matrix> L(nc);
    std::vector<double> log_norm(nc);
    for (int i = 0; i < nc; ++i) {
      m[i] = mean(th, i);
      L[i] = chol(th, i);
      log_norm[i] = -L[i].diagonal().array().log().sum() - 0.5 * d * kLog2Pi;
    }

    double acc = 0.0;
    std::vector<Vector> gm(nc, Vector::Zero(d));
    std::vector<Matrix> gL(nc, Matrix::Zero(d, d));
    Vector galpha = Vector::Zero(nc);
    std::vector<Vector> u(nc), v(nc);
    std::vector<double> lterm(nc), r(nc);
    Vector x(d);
    try {
      for (int i = 0; i < nc; ++i) {
        double mean_phi = 0.0, mean_phi2 = 0.0;
        for (int k = 0; k < nodes.size(); ++k) {
          const auto z = nodes.nodes.col(k);
          x.noalias() = m[i] + L[i].triangularView<Eigen::Lower>() * z;
          double top = -kInf;
          for (int j = 0; j < nc; ++j) {
            u[j] = L[j].triangularView<Eigen::Lower>().solve(x - m[j]);
            lterm[j] = std::log(alpha[j]) + log_norm[j] - 0.5 * u[j].squaredNorm();
            top = std::max(top, lterm[j]);
          }
          double s = 0.0;
          for (int j = 0; j < nc; ++j) s += std::exp(lterm[j] - top);
          const double log_rho = top + std::log(s);
          const double e1 = inv * mu->v1().value(x), e2 = mu->v2().value(x);
          const double phi = e1 + e2 + log_rho;
          const double w = nodes.weights[k];
          const double omega = alpha[i] * w;
          acc += omega * phi;
          mean_phi += w * phi;
          mean_phi2 += w * phi * phi;
          if (terms) {
            terms->v1 += omega * e1;
            terms->v2 += omega * e2;
            terms->entropy += omega * log_rho;
          }
          if (!grad) continue;
          Vector grad_phi = inv * mu->v1().gradient(x) + mu->v2().gradient(x);
          for (int j = 0; j < nc; ++j) {
            r[j] = std::exp(lterm[j] - log_rho);
            v[j] = L[j].triangularView<Eigen::Lower>().transpose().solve(u[j]);
            grad_phi -= r[j] * v[j];
          }
          gm[i] += omega * grad_phi;
          gL[i] += omega * grad_phi * z.transpose();
          galpha[i] += w * phi;
          for (int j = 0; j < nc; ++j) {
            const double c = omega * r[j];
            gm[j] += c * v[j];
            gL[j] += c * v[j] * u[j].transpose();
            gL[j].diagonal() -= c * L[j].diagonal().cwiseInverse();
            galpha[j] += c / alpha[j];
          }
        }
        if (terms && nodes.size() > 1) {
          const double var = std::max(0.0, mean_phi2 - mean_phi * mean_phi);
          terms->variance += alpha[i] * alpha[i] * var / (nodes.size() - 1);
        }
      }
    } catch (const EvaluationError&) {
      return kInf;
    }
    const double value = acc + log_z + separation_term(m, grad ? &gm : nullptr);
    if (grad) {
      grad->resize(size());
      for (int i = 0; i < nc; ++i) {
        grad->segment(i * block(), d) = root_eps * gm[i];
        Matrix lower = gL[i].triangularView<Eigen::Lower>();
        pack_chol_gradient(lower, L[i], root_eps, grad->data() + i * block() + d);
      }
      const Vector sm = softmax(th);
      const double free = 1.0 - nc * xi.min_weight;
      const double dot = galpha.dot(sm);
      for (int l = 0; l < nc; ++l) (*grad)[nc * block() + l] = free * sm[l] * (galpha[l] - dot);
    }
    return value;
  }

  double operator()(const Vector& th, Vector* grad) const { return evaluate(th, grad, nullptr); }

  bool feasible(const Vector& th) const {
    for (int i = 0; i < n(); ++i)
      for (int j = i + 1; j < n(); ++j)
        if ((mean(th, i) - mean(th, j)).norm() < xi.min_separation) return false;
    return true;
  }
};

NodeSet optimizer_nodes(int d, const OptimizerConfig& cfg) {
  return standard_nodes(d, cfg.estimator.expectation, cfg.estimator);
}

Vector uniform_point(const Box& box, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Vector x(box.dim());
  for (int i = 0; i < box.dim(); ++i) x[i] = box.lo[i] + unit(rng) * (box.hi[i] - box.lo[i]);
  return x;
}

nlohmann::json vec_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

nlohmann::json matrix_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    std::vector<double> row(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index c = 0; c < m.cols(); ++c) row[c] = m(r, c);
    rows.push_back(row);
  }
  return rows;
}

nlohmann::json trace_json(const std::vector<StartTrace>& trace) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& t : trace) {
    out.push_back({{"origin", t.origin},
                   {"initial_mean", vec_json(t.initial_mean)},
                   {"initial_value", t.initial_value},
                   {"final_value", t.final_value},
                   {"iterations", t.iterations},
                   {"converged", t.converged}});
  }
  return out;
}

}  // namespace

void OptimizerConfig::validate() const {
  if (max_iters < 1) throw std::invalid_argument("max_iters must be >= 1");
  if (!(grad_tol > 0.0)) throw std::invalid_argument("grad_tol must be positive");
  if (starts < 1) throw std::invalid_argument("multistart count must be >= 1");
  estimator.validate();
}

SingleResult minimize_single(const TargetMeasure& mu, double log_z, const OptimizerConfig& cfg,
                             const ModeSet* modes, const GaussianParams* warm) {
  cfg.validate();
  const int d = mu.dim();
  const double root_eps = std::sqrt(mu.epsilon());
  const NodeSet nodes = optimizer_nodes(d, cfg);

  struct Start {
    std::string origin;
    Vector mean;
    Matrix chol_rescaled;
  };
  std::vector<Start> starts;
  if (warm) {
    if (warm->dim() != d) throw std::invalid_argument("warm start dimension mismatch");
    starts.push_back({"warm", warm->mean(), warm->chol()});
  }
  if (modes) {
    for (int i = 0; i < modes->size(); ++i) starts.push_back({"mode", modes->modes[i], inverse_chol(modes->hessians[i])});
  }
  const Box box = cfg.box.value_or(default_box(d, modes));
  std::mt19937_64 rng(cfg.seed);
  while (static_cast<int>(starts.size()) < cfg.starts) starts.push_back({"random", uniform_point(box, rng), Matrix::Identity(d, d)});

  std::vector<BfgsResult> runs(starts.size());
  std::vector<StartTrace> trace(starts.size());
  std::vector<SingleObjective> objectives(starts.size());
  parallel_for(starts.size(), [&](std::size_t s) {
    SingleObjective obj{&mu, log_z, nodes, starts[s].mean, root_eps};
    const Vector th0 = obj.encode(starts[s].mean, root_eps * starts[s].chol_rescaled);
    BfgsOptions opts;
    opts.max_iters = cfg.max_iters;
    opts.grad_tol = cfg.grad_tol;
    trace[s].origin = starts[s].origin;
    trace[s].initial_mean = starts[s].mean;
    trace[s].initial_value = obj(th0, nullptr);
    runs[s] = minimize_bfgs(std::cref(obj), th0, opts);
    trace[s].final_value = runs[s].value;
    trace[s].iterations = runs[s].iterations;
    trace[s].converged = runs[s].converged();
    objectives[s] = std::move(obj);
  });

  int best = -1;
  double best_value = kInf;
  Vector best_mean;
  for (std::size_t s = 0; s < runs.size(); ++s) {
    if (runs[s].status == BfgsStatus::non_finite_start) continue;
    const Vector m = objectives[s].mean(runs[s].x);
    if (better(runs[s].value, runs[s].converged(), m, best_value, best >= 0 && runs[best].converged(), best_mean)) {
      best = static_cast<int>(s);
      best_value = runs[s].value;
      best_mean = m;
    }
  }
  if (best < 0) throw std::runtime_error("every optimizer start produced a non-finite objective");

  const SingleObjective& obj = objectives[best];
  SingleResult out;
  out.argmin = GaussianParams(obj.mean(runs[best].x), obj.chol(runs[best].x));
  out.estimate = kl_single(mu, out.argmin, log_z, cfg.estimator);
  out.value = out.estimate.value;
  out.std_error = out.estimate.std_error;
  out.converged = runs[best].converged();
  out.iterations = runs[best].iterations;
  out.grad_norm = runs[best].grad_norm;
  out.trace = std::move(trace);
  return out;
}

MixtureResult minimize_mixture(const TargetMeasure& mu, double log_z, int n, const MixtureConstraints& xi,
                               const OptimizerConfig& cfg, const ModeSet* modes, const MixtureParams* warm) {
  cfg.validate();
  xi.validate();
  if (n < 1) throw std::invalid_argument("mixture needs n >= 1");
  if (xi.min_weight * n > 1.0 + 1e-12) throw std::invalid_argument("infeasible constraints: xi1 > 1/n");
  const int d = mu.dim();
  const double root_eps = std::sqrt(mu.epsilon());
  const NodeSet nodes = optimizer_nodes(d, cfg);

  struct Start {
    std::string origin;
    std::vector<Vector> means;
    std::vector<Matrix> chols;  // rescaled
    Vector alpha;
  };
  std::vector<Start> starts;
  if (warm) {
    if (warm->size() != n || warm->dim() != d) throw std::invalid_argument("warm start shape mismatch");
    Start s{"warm", {}, {}, warm->weights()};
    for (const auto& c : warm->components()) {
      s.means.push_back(c.mean());
      s.chols.push_back(c.chol());
    }
    starts.push_back(std::move(s));
  }
  const Box box = cfg.box.value_or(default_box(d, modes));
  std::mt19937_64 rng(cfg.seed);
  auto random_mean_far = [&](const std::vector<Vector>& taken) {
    Vector x = uniform_point(box, rng);
    for (int tries = 0; tries < 100; ++tries) {
      bool ok = true;
      for (const auto& t : taken) ok = ok && (t - x).norm() >= xi.min_separation;
      if (ok) break;
      x = uniform_point(box, rng);
    }
    return x;
  };
  if (modes && modes->size() > 0) {
    std::vector<int> order(static_cast<std::size_t>(modes->size()));
    for (int i = 0; i < modes->size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return modes->weights[a] > modes->weights[b]; });
    Start s{"mode", {}, {}, Vector(n)};
    for (int i = 0; i < n; ++i) {
      if (i < modes->size()) {
        s.means.push_back(modes->modes[order[i]]);
        s.chols.push_back(inverse_chol(modes->hessians[order[i]]));
        s.alpha[i] = modes->weights[order[i]];
      } else {
        s.means.push_back(random_mean_far(s.means));
        s.chols.push_back(Matrix::Identity(d, d));
        s.alpha[i] = modes->weights.minCoeff();
      }
    }
    s.alpha = s.alpha.cwiseMax(xi.min_weight);
    s.alpha /= s.alpha.sum();
    starts.push_back(std::move(s));
  }
  while (static_cast<int>(starts.size()) < cfg.starts) {
    Start s{"random", {}, {}, Vector::Constant(n, 1.0 / n)};
    for (int i = 0; i < n; ++i) {
      s.means.push_back(random_mean_far(s.means));
      s.chols.push_back(Matrix::Identity(d, d));
    }
    starts.push_back(std::move(s));
  }

  std::vector<BfgsResult> runs(starts.size());
  std::vector<StartTrace> trace(starts.size());
  std::vector<MixtureObjective> objectives(starts.size());
  std::vector<char> feasible(starts.size(), 0);
  parallel_for(starts.size(), [&](std::size_t s) {
    MixtureObjective obj{&mu, log_z, nodes, starts[s].means, root_eps, xi, 1.0 / mu.epsilon()};
    std::vector<Matrix> chols;
    for (const auto& c : starts[s].chols) chols.push_back(root_eps * c);
    Vector th = obj.encode(starts[s].means, chols, starts[s].alpha);
    trace[s].origin = starts[s].origin;
    trace[s].initial_mean = starts[s].means.front();
    trace[s].initial_value = obj(th, nullptr);
    BfgsOptions opts;
    opts.max_iters = cfg.max_iters;
    opts.grad_tol = cfg.grad_tol;
    BfgsResult r;
    int total_iters = 0;
    for (int round = 0; round < 8; ++round) {
      r = minimize_bfgs(std::cref(obj), th, opts);
      total_iters += r.iterations;
      if (r.status == BfgsStatus::non_finite_start) break;
      th = r.x;
      if (obj.feasible(th)) {
        feasible[s] = 1;
        break;
      }
      obj.penalty *= 10.0;
    }
    r.iterations = total_iters;
    runs[s] = r;
    trace[s].final_value = r.value;
    trace[s].iterations = total_iters;
    trace[s].converged = r.converged() && feasible[s];
    objectives[s] = std::move(obj);
  });

  int best = -1;
  double best_value = kInf;
  Vector best_key;
  for (std::size_t s = 0; s < runs.size(); ++s) {
    if (!feasible[s]) continue;
    std::vector<Vector> ms;
    for (int i = 0; i < n; ++i) ms.push_back(objectives[s].mean(runs[s].x, i));
    std::sort(ms.begin(), ms.end(), lex_less);
    Vector key(n * d);
    for (int i = 0; i < n; ++i) key.segment(i * d, d) = ms[i];
    if (better(runs[s].value, runs[s].converged(), key, best_value, best >= 0 && runs[best].converged(), best_key)) {
      best = static_cast<int>(s);
      best_value = runs[s].value;
      best_key = key;
    }
  }
  if (best < 0) throw std::runtime_error("no optimizer start reached the constrained set");

  const MixtureObjective& obj = objectives[best];
  const Vector& th = runs[best].x;
  const Vector alpha = obj.weights(th);
  std::vector<int> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return lex_less(obj.mean(th, a), obj.mean(th, b)); });
  std::vector<GaussianParams> comps;
  Vector w(n);
  for (int i = 0; i < n; ++i) {
    comps.emplace_back(obj.mean(th, order[i]), obj.chol(th, order[i]));
    w[i] = alpha[order[i]];
  }
  w /= w.sum();

  MixtureResult out;
  out.argmin = MixtureParams(std::move(comps), w, xi);
  MixtureObjective plain = obj;
  plain.penalty = 0.0;
  MixtureObjective::Terms terms;
  plain.evaluate(th, nullptr, &terms);
  out.estimate.method = cfg.estimator.expectation;
  out.estimate.terms = {terms.v1, terms.v2, terms.entropy, log_z};
  out.estimate.value = terms.v1 + terms.v2 + terms.entropy + log_z;
  out.estimate.std_error =
      cfg.estimator.expectation == EstimatorMethod::monte_carlo ? std::sqrt(terms.variance) : 0.0;
  out.value = out.estimate.value;
  out.std_error = out.estimate.std_error;
  out.converged = runs[best].converged();
  out.iterations = runs[best].iterations;
  out.grad_norm = runs[best].grad_norm;
  out.trace = std::move(trace);
  return out;
}

MixtureObjectiveProbe probe_mixture_objective(const TargetMeasure& mu, double log_z, const MixtureParams& mix,
                                              const OptimizerConfig& cfg, double penalty) {
  auto obj = std::make_shared<MixtureObjective>();
  obj->mu = &mu;
  obj->log_z = log_z;
  obj->nodes = optimizer_nodes(mu.dim(), cfg);
  obj->root_eps = std::sqrt(mu.epsilon());
  obj->xi = mix.constraints();
  obj->penalty = penalty;
  std::vector<Matrix> chols;
  for (const auto& c : mix.components()) {
    obj->anchors.push_back(c.mean());
    chols.push_back(c.chol());
  }
  MixtureObjectiveProbe p;
  p.theta = obj->encode(obj->anchors, chols, mix.weights());
  p.objective = [obj](const Vector& th, Vector* g) { return (*obj)(th, g); };
  p.value = p.objective(p.theta, &p.gradient);
  return p;
}

MixtureObjectiveProbe probe_single_objective(const TargetMeasure& mu, double log_z, const GaussianParams& g,
                                             const OptimizerConfig& cfg) {
  auto obj = std::make_shared<SingleObjective>(
      SingleObjective{&mu, log_z, optimizer_nodes(mu.dim(), cfg), g.mean(), std::sqrt(mu.epsilon())});
  MixtureObjectiveProbe p;
  p.theta = obj->encode(g.mean(), g.chol());
  p.objective = [obj](const Vector& th, Vector* gr) { return (*obj)(th, gr); };
  p.value = p.objective(p.theta, &p.gradient);
  return p;
}

nlohmann::json to_json(const SingleResult& r, double epsilon, bool verbose) {
  nlohmann::json j{{"family", "single"},
                   {"epsilon", epsilon},
                   {"argmin", r.argmin},
                   {"rescaled_covariance", matrix_json(r.argmin.covariance() / epsilon)},
                   {"value", r.value},
                   {"stderr", r.std_error},
                   {"converged", r.converged},
                   {"iterations", r.iterations},
                   {"grad_norm", r.grad_norm},
                   {"estimate", r.estimate}};
  if (verbose) j["starts"] = trace_json(r.trace);
  return j;
}

nlohmann::json to_json(const MixtureResult& r, double epsilon, bool verbose) {
  nlohmann::json covs = nlohmann::json::array();
  for (const auto& c : r.argmin.components()) covs.push_back(matrix_json(c.covariance() / epsilon));
  nlohmann::json j{{"family", "mixture"},
                   {"epsilon", epsilon},
                   {"argmin", r.argmin},
                   {"rescaled_covariances", covs},
                   {"value", r.value},
                   {"stderr", r.std_error},
                   {"converged", r.converged},
                   {"iterations", r.iterations},
                   {"grad_norm", r.grad_norm},
                   {"estimate", r.estimate}};
  if (verbose) j["starts"] = trace_json(r.trace);
  return j;
}

}  // namespace klgauss
