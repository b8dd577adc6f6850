#include "klgauss/catalog.hpp"
#include "klgauss/gamma.hpp"
#include "klgauss/optimizer.hpp"
#include "klgauss/parallel.hpp"

#include "support.hpp"

#include <doctest.h>

#include <Eigen/Cholesky>

#include <cmath>
#include <numbers>

using namespace klgauss;
using test_support::mat1;
using test_support::oracles;
using test_support::vec;

namespace {

struct Setup {
  Problem problem;
  ModeSet modes;
  TargetMeasure mu;
  double log_z;
};

Setup setup(const std::string& name, double eps) {
  Problem p = builtin_problem(name);
  ModeSet ms = p.modes();
  TargetMeasure mu = p.measure(eps);
  const double log_z = log_normalization(mu, ms, LogZMethod::quadrature);
  return {std::move(p), std::move(ms), std::move(mu), log_z};
}

bool is_spd(const Matrix& s) { return Eigen::LLT<Matrix>(s).info() == Eigen::Success; }

double fd_gradient_error(const MixtureObjectiveProbe& probe) {
  const Vector& th = probe.theta;
  Vector fd(th.size());
  for (Eigen::Index i = 0; i < th.size(); ++i) {
    const double h = 1e-6 * (1.0 + std::abs(th[i]));
    Vector p = th, m = th;
    p[i] += h;
    m[i] -= h;
    fd[i] = (probe.objective(p, nullptr) - probe.objective(m, nullptr)) / (2.0 * h);
  }
  return (fd - probe.gradient).norm() / std::max(1.0, probe.gradient.norm());
}

}  // namespace

TEST_CASE("single Gaussian on the exactly Gaussian target") {
  for (double eps : {1.0, 0.1, 0.01, 1e-3}) {
    const Setup s = setup("quadratic", eps);
    const SingleResult r = minimize_single(s.mu, s.log_z, {}, &s.modes);
    CHECK(r.converged);
    CHECK(r.value <= 1e-8);
    CHECK(std::abs(r.argmin.mean()[0]) <= 1e-6);
    CHECK(std::abs(r.rescaled(eps).covariance()(0, 0) - 1.0) <= 1e-6);
  }
}

TEST_CASE("rescaled covariance is eps-independent on the quadratic target") {
  Problem p = problem_from_json({{"dim", 2}, {"v1", {{"id", "quadratic"}, {"params", {{"stiffness", 2.0}}}}},
                                 {"v2", {{"id", "zero"}}}});
  const ModeSet ms = p.modes();
  Matrix first;
  for (double eps : {1.0, 0.1, 0.01}) {
    const TargetMeasure mu = p.measure(eps);
    const SingleResult r = minimize_single(mu, log_normalization(mu, ms, LogZMethod::laplace), {}, &ms);
    const Matrix s = r.rescaled(eps).covariance();
    if (first.size() == 0) first = s;
    CHECK((s - first).norm() <= 1e-6);
    CHECK((s - 0.5 * Matrix::Identity(2, 2)).norm() <= 1e-6);
  }
}

TEST_CASE("single Gaussian on the double well") {
  const double eps = 0.001;
  const Setup s = setup("double-well", eps);
  const SingleResult r = minimize_single(s.mu, s.log_z, {}, &s.modes);
  CHECK(r.converged);
  CHECK(std::abs(std::abs(r.argmin.mean()[0]) - 1.0) <= 1e-3);
  CHECK(std::abs(r.rescaled(eps).covariance()(0, 0) / 0.125 - 1.0) <= 0.02);
  CHECK(std::abs(r.value / std::log(2.0) - 1.0) <= 0.02);
  // Equal-value minima at +-1: the lexicographically smaller mean wins.
  CHECK(r.argmin.mean()[0] < 0.0);
  CHECK(is_spd(r.argmin.covariance()));
  for (const auto& t : r.trace) CHECK(r.value <= t.initial_value);
}

TEST_CASE("single Gaussian picks the heavier mode of the shifted double well") {
  const Setup s = setup("shifted-double-well", 0.01);
  const SingleResult r = minimize_single(s.mu, s.log_z, {}, &s.modes);
  CHECK(r.converged);
  CHECK(std::abs(r.argmin.mean()[0] + 1.0) <= 0.05);
}

TEST_CASE("mixture on the double well") {
  const double eps = 0.001;
  const Setup s = setup("double-well", eps);
  const MixtureResult r = minimize_mixture(s.mu, s.log_z, 2, {}, {}, &s.modes);
  CHECK(r.converged);
  REQUIRE(r.argmin.size() == 2);
  CHECK(std::abs(r.argmin.component(0).mean()[0] + 1.0) <= 1e-2);
  CHECK(std::abs(r.argmin.component(1).mean()[0] - 1.0) <= 1e-2);
  for (int i = 0; i < 2; ++i) {
    CHECK(std::abs(r.argmin.component(i).covariance()(0, 0) / eps / 0.125 - 1.0) <= 0.05);
    CHECK(is_spd(r.argmin.component(i).covariance()));
  }
  CHECK((r.argmin.weights() - vec({0.5, 0.5})).lpNorm<1>() <= 1e-2);
  CHECK(r.value <= 0.05);
  CHECK(r.value >= -1e-8);
  for (const auto& t : r.trace) CHECK(r.value <= t.initial_value);
}

TEST_CASE("mixture on the shifted double well recovers beta") {
  const Setup s = setup("shifted-double-well", 0.001);
  const MixtureResult r = minimize_mixture(s.mu, s.log_z, 2, {}, {}, &s.modes);
  CHECK(r.converged);
  CHECK((r.argmin.weights() - test_support::vec(oracles()["shifted_beta"])).lpNorm<1>() <= 2e-2);
}

TEST_CASE("one-component mixture agrees with the single Gaussian") {
  const Setup s = setup("shifted-double-well", 0.01);
  const SingleResult single = minimize_single(s.mu, s.log_z, {}, &s.modes);
  const MixtureResult mix = minimize_mixture(s.mu, s.log_z, 1, {}, {}, &s.modes);
  CHECK(std::abs(single.value - mix.value) <= 3.0 * std::hypot(single.std_error, mix.std_error) + 1e-9);
  CHECK((single.argmin.mean() - mix.argmin.component(0).mean()).norm() <= 1e-5);
}

TEST_CASE("mixture components are canonically ordered") {
  const double eps = 0.01;
  const Setup s = setup("shifted-double-well", eps);
  const MixtureParams swapped({GaussianParams::from_covariance(vec({1.0}), mat1(0.125)),
                               GaussianParams::from_covariance(vec({-1.0}), mat1(0.125))},
                              vec({0.2, 0.8}));
  OptimizerConfig cfg;
  cfg.starts = 1;
  const MixtureResult r = minimize_mixture(s.mu, s.log_z, 2, {}, cfg, nullptr, &swapped);
  CHECK(r.argmin.component(0).mean()[0] < r.argmin.component(1).mean()[0]);
  CHECK(r.argmin.weights()[0] > r.argmin.weights()[1]);
}

TEST_CASE("infeasible weight floors are rejected") {
  const Setup s = setup("double-well", 0.01);
  MixtureConstraints xi;
  xi.min_weight = 0.6;
  CHECK_THROWS_AS(minimize_mixture(s.mu, s.log_z, 2, xi, {}, &s.modes), std::invalid_argument);
  CHECK_THROWS_AS(minimize_mixture(s.mu, s.log_z, 0, {}, {}, &s.modes), std::invalid_argument);
  OptimizerConfig bad;
  bad.starts = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("analytic objective gradients match finite differences") {
  const Setup s = setup("shifted-double-well", 0.05);
  OptimizerConfig cfg;
  const GaussianParams g = GaussianParams::from_covariance(vec({-0.8}), mat1(0.01));
  CHECK(fd_gradient_error(probe_single_objective(s.mu, s.log_z, g, cfg)) <= 1e-6);

  const MixtureParams mix({GaussianParams::from_covariance(vec({-0.9}), mat1(0.004)),
                           GaussianParams::from_covariance(vec({1.1}), mat1(0.007))},
                          vec({0.7, 0.3}));
  CHECK(fd_gradient_error(probe_mixture_objective(s.mu, s.log_z, mix, cfg)) <= 1e-6);
  // Penalty term active: separation below xi2.
  const MixtureParams close({GaussianParams::from_covariance(vec({-0.3}), mat1(0.004)),
                             GaussianParams::from_covariance(vec({0.4}), mat1(0.007))},
                            vec({0.5, 0.5}));
  CHECK(fd_gradient_error(probe_mixture_objective(s.mu, s.log_z, close, cfg, 100.0)) <= 1e-6);

  Problem p2 = problem_from_json({{"dim", 2}, {"v1", {{"id", "double-well"}}}, {"v2", {{"id", "linear"}}}});
  const TargetMeasure mu2 = p2.measure(0.1);
  Matrix c(2, 2);
  c << 0.02, 0.005, 0.005, 0.03;
  const GaussianParams g2 = GaussianParams::from_covariance(vec({0.9, 0.1}), c);
  CHECK(fd_gradient_error(probe_single_objective(mu2, 0.0, g2, cfg)) <= 1e-6);
  const MixtureParams mix2({g2, GaussianParams::from_covariance(vec({-1.0, -0.2}), c * 1.5)}, vec({0.4, 0.6}));
  CHECK(fd_gradient_error(probe_mixture_objective(mu2, 0.0, mix2, cfg)) <= 1e-6);
}

TEST_CASE("results do not depend on the worker count") {
  const Setup s = setup("double-well", 0.01);
  const int saved = worker_count();
  set_worker_count(1);
  const MixtureResult a = minimize_mixture(s.mu, s.log_z, 2, {}, {}, &s.modes);
  set_worker_count(4);
  const MixtureResult b = minimize_mixture(s.mu, s.log_z, 2, {}, {}, &s.modes);
  set_worker_count(saved);
  CHECK(a.value == b.value);
  CHECK(to_json(a, 0.01, false).dump() == to_json(b, 0.01, false).dump());
}

TEST_CASE("Monte-Carlo estimator") {
  const Setup s = setup("double-well", 0.01);
  OptimizerConfig cfg;
  cfg.estimator.expectation = EstimatorMethod::monte_carlo;
  cfg.estimator.entropy = EstimatorMethod::monte_carlo;
  cfg.estimator.mc_samples = 20000;
  const SingleResult r = minimize_single(s.mu, s.log_z, cfg, &s.modes);
  CHECK(r.std_error > 0.0);
  const SingleResult gh = minimize_single(s.mu, s.log_z, {}, &s.modes);
  CHECK(std::abs(r.value - gh.value) <= 3.0 * r.std_error + 1e-3);
  CHECK(std::abs(std::abs(r.argmin.mean()[0]) - 1.0) <= 0.02);
}

TEST_CASE("result JSON") {
  const Setup s = setup("quadratic", 0.1);
  OptimizerConfig cfg;
  cfg.verbose = true;
  const nlohmann::json j = to_json(minimize_single(s.mu, s.log_z, cfg, &s.modes), 0.1, true);
  CHECK(j["family"] == "single");
  CHECK(j["converged"] == true);
  CHECK(j["starts"].size() == static_cast<std::size_t>(cfg.starts));
  CHECK(j["rescaled_covariance"][0][0].get<double>() == doctest::Approx(1.0).epsilon(1e-6));
}
