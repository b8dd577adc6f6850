#include "klgauss/catalog.hpp"
#include "klgauss/gaussian.hpp"
#include "klgauss/measure.hpp"

#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace klgauss;
using test_support::oracles;
using test_support::vec;

namespace {

const double kTwoPi = 2.0 * std::numbers::pi;

Potential quartic() {
  return Potential(
      1, [](const Vector& x) { return std::pow(x[0], 4); },
      [](const Vector& x) -> Vector { return Vector::Constant(1, 4.0 * std::pow(x[0], 3)); },
      [](const Vector& x) -> Matrix { return Matrix::Constant(1, 1, 12.0 * x[0] * x[0]); });
}

}  // namespace

TEST_CASE("unnormalized_log_density") {
  const TargetMeasure quad(quadratic_potential(1), zero_potential(1), 1.0);
  CHECK(unnormalized_log_density(quad, vec({0.0})) == 0.0);
  CHECK(unnormalized_log_density(quad, vec({2.0})) == doctest::Approx(-2.0));
  const TargetMeasure dw(double_well_potential(1), zero_potential(1), 0.1);
  CHECK(unnormalized_log_density(dw, vec({1.0})) == 0.0);

  const Potential nan_pot(
      1, [](const Vector&) { return std::nan(""); }, [](const Vector&) -> Vector { return Vector::Zero(1); },
      [](const Vector&) -> Matrix { return Matrix::Zero(1, 1); });
  const TargetMeasure bad(nan_pot, zero_potential(1), 1.0);
  CHECK_THROWS_AS(unnormalized_log_density(bad, vec({0.0})), EvaluationError);
  CHECK_THROWS_AS(TargetMeasure(quadratic_potential(1), zero_potential(1), 0.0), std::invalid_argument);
  CHECK_THROWS_AS(TargetMeasure(quadratic_potential(1), zero_potential(2), 1.0), std::invalid_argument);
}

TEST_CASE("find_modes on the catalog") {
  const ModeSet q = builtin_problem("quadratic").modes();
  REQUIRE(q.size() == 1);
  CHECK(std::abs(q.modes[0][0]) <= 1e-6);
  CHECK(q.hessians[0](0, 0) == doctest::Approx(1.0));
  CHECK(q.weights[0] == doctest::Approx(1.0));

  const ModeSet dw = builtin_problem("double-well").modes();
  REQUIRE(dw.size() == 2);
  CHECK(std::abs(dw.modes[0][0] + 1.0) <= 1e-6);
  CHECK(std::abs(dw.modes[1][0] - 1.0) <= 1e-6);
  CHECK(dw.hessians[0](0, 0) == doctest::Approx(8.0).epsilon(1e-9));
  CHECK(dw.hessians[1](0, 0) == doctest::Approx(8.0).epsilon(1e-9));
  CHECK(dw.weights[0] == doctest::Approx(0.5).epsilon(1e-12));

  const ModeSet sdw = builtin_problem("shifted-double-well").modes();
  REQUIRE(sdw.size() == 2);
  const auto beta = oracles()["shifted_beta"];
  CHECK(sdw.weights[0] == doctest::Approx(beta[0].get<double>()).epsilon(1e-10));
  CHECK(sdw.weights[1] == doctest::Approx(beta[1].get<double>()).epsilon(1e-10));
  CHECK(sdw.raw_weights[0] == doctest::Approx(std::exp(1.0) / std::sqrt(8.0)).epsilon(1e-10));

  const ModeSet ee = builtin_problem("elliptic-exp").modes();
  REQUIRE(ee.size() == 1);
  CHECK(std::abs(ee.modes[0][0]) <= 1e-6);
  const ModeSet es = builtin_problem("elliptic-square").modes();
  REQUIRE(es.size() == 2);
  CHECK(std::abs(es.modes[0][0] + 1.0) <= 1e-6);
  CHECK(std::abs(es.modes[1][0] - 1.0) <= 1e-6);
}

TEST_CASE("two-dimensional double well") {
  Problem p = problem_from_json({{"dim", 2}, {"v1", {{"id", "double-well"}}}, {"v2", {{"id", "zero"}}}});
  const ModeSet ms = p.modes();
  REQUIRE(ms.size() == 2);
  CHECK((ms.modes[0] - vec({-1.0, 0.0})).norm() <= 1e-6);
  CHECK((ms.modes[1] - vec({1.0, 0.0})).norm() <= 1e-6);
  CHECK((ms.hessians[0] - Matrix(vec({8.0, 1.0}).asDiagonal())).norm() <= 1e-8);
}

TEST_CASE("beta is equivariant under relabeling of modes") {
  const Potential v1 = double_well_potential(1);
  const Potential v2 = linear_potential(vec({0.3}));
  const ModeSet a = make_mode_set({vec({-1.0}), vec({1.0})}, v1, v2);
  const ModeSet b = make_mode_set({vec({1.0}), vec({-1.0})}, v1, v2);
  for (int i = 0; i < 2; ++i) {
    CHECK(a.modes[i] == b.modes[i]);
    CHECK(a.weights[i] == b.weights[i]);
  }
  const int j = a.nearest(vec({1.0}));
  CHECK(a.weights[j] == doctest::Approx(std::exp(-0.3) / (std::exp(-0.3) + std::exp(0.3))));
}

TEST_CASE("degenerate minima are rejected") {
  CHECK_THROWS_AS(make_mode_set({vec({0.0})}, quartic(), zero_potential(1)), DegenerateModeError);
  CHECK_THROWS_AS(find_modes(quartic(), zero_potential(1), MultistartConfig::box(1, 2.0, 16)), DegenerateModeError);
}

TEST_CASE("catalog derivatives match central differences") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (const auto& name : builtin_problem_names()) {
    const Problem p = builtin_problem(name);
    for (int k = 0; k < 20; ++k) {
      Vector x(p.dim);
      for (int i = 0; i < p.dim; ++i) x[i] = u(rng);
      for (const Potential& v : {p.v1_limit, p.v2, p.v1_at(0.01)}) {
        const DerivativeCheck c = check_derivatives(v, x, 1e-5);
        CHECK(c.gradient_rel_error <= 1e-5);
        CHECK(c.hessian_rel_error <= 1e-5);
      }
    }
  }
}

TEST_CASE("Laplace normalization") {
  const ModeSet q = builtin_problem("quadratic").modes();
  CHECK(laplace_normalization(q, 0.01) == doctest::Approx(std::sqrt(kTwoPi * 0.01)).epsilon(1e-9));
  CHECK(laplace_normalization(q, 0.01) == doctest::Approx(0.250663).epsilon(1e-6));
  const ModeSet dw = builtin_problem("double-well").modes();
  CHECK(laplace_normalization(dw, 0.001) ==
        doctest::Approx(std::sqrt(kTwoPi * 0.001) * 2.0 / std::sqrt(8.0)).epsilon(1e-9));
  const ModeSet q2 = problem_from_json({{"dim", 2}, {"v1", {{"id", "quadratic"}}}, {"v2", {{"id", "zero"}}}}).modes();
  CHECK(laplace_normalization(q2, 1.0) == doctest::Approx(kTwoPi).epsilon(1e-9));
  CHECK(log_laplace_normalization(dw, 1e-300) == doctest::Approx(0.5 * std::log(kTwoPi * 1e-300) + std::log(2.0 / std::sqrt(8.0))));
}

TEST_CASE("quadrature normalization") {
  const Problem quad = builtin_problem("quadratic");
  const TargetMeasure mu = quad.measure(0.01);
  const QuadratureResult r = quadrature_normalization(mu, GridSpec::automatic(mu, quad.modes()));
  CHECK(std::abs(r.value / 0.250663 - 1.0) <= 1e-3);
  CHECK(r.value == doctest::Approx(std::sqrt(kTwoPi * 0.01)).epsilon(1e-10));

  const Problem dw = builtin_problem("double-well");
  const ModeSet ms = dw.modes();
  const auto ref = oracles()["double_well_log_z"];
  for (std::size_t k = 0; k < ref["eps"].size(); ++k) {
    const TargetMeasure m = dw.measure(ref["eps"][k].get<double>());
    const QuadratureResult q = quadrature_normalization(m, GridSpec::automatic(m, ms));
    CHECK(q.log_value == doctest::Approx(ref["value"][k].get<double>()).epsilon(1e-9));
    CHECK(std::abs(q.value - std::exp(ref["value"][k].get<double>())) <= q.error_estimate);
  }

  const TargetMeasure flat(zero_potential(2), zero_potential(2), 1.0);
  const QuadratureResult box = quadrature_normalization(flat, GridSpec::from_box({vec({0.0, -1.0}), vec({2.0, 2.0})}, 0.1));
  CHECK(box.value == doctest::Approx(6.0).epsilon(1e-12));
}

TEST_CASE("quadrature rejects small grids and high dimension") {
  const Problem quad = builtin_problem("quadratic");
  GridSpec tight = GridSpec::from_box({vec({-0.5}), vec({0.5})}, 0.01);
  tight.tail_tol = 1e-14;
  CHECK_THROWS_AS(quadrature_normalization(quad.measure(1.0), tight), GridTooSmallError);
  tight.adaptive = true;
  CHECK(quadrature_normalization(quad.measure(1.0), tight).value == doctest::Approx(std::sqrt(kTwoPi)).epsilon(1e-8));

  const TargetMeasure mu4(quadratic_potential(4), zero_potential(4), 1.0);
  CHECK_THROWS_AS(quadrature_normalization(mu4, GridSpec::from_box({Vector::Constant(4, -1.0), Vector::Constant(4, 1.0)}, 0.5)),
                  std::invalid_argument);
}

TEST_CASE("Laplace error versus quadrature decreases monotonically") {
  const Problem dw = builtin_problem("double-well");
  const ModeSet ms = dw.modes();
  double prev = INFINITY;
  double last = 0.0;
  for (double eps : {0.1, 0.03, 0.01, 0.003, 0.001}) {
    const TargetMeasure mu = dw.measure(eps);
    const double quad = quadrature_normalization(mu, GridSpec::automatic(mu, ms)).value;
    const double rel = std::abs(laplace_normalization(ms, eps) - quad) / quad;
    CHECK(rel < prev);
    prev = last = rel;
  }
  CHECK(last <= 0.05);
}

TEST_CASE("grid total variation") {
  const Problem quad = builtin_problem("quadratic");
  const TargetMeasure mu = quad.measure(0.5);
  const double log_z = 0.5 * std::log(kTwoPi * 0.5);
  GridSpec grid = GridSpec::from_box({vec({-8.0}), vec({8.0})}, 0.01);
  const GaussianParams same = GaussianParams::from_covariance(vec({0.0}), Matrix::Constant(1, 1, 0.5));
  const GaussianParams shifted = GaussianParams::from_covariance(vec({1.0}), Matrix::Constant(1, 1, 0.5));
  auto tv = [&](const GaussianParams& g) {
    return grid_total_variation(mu, log_z, [&](const Vector& x) { return log_density(g, x); }, grid);
  };
  CHECK(tv(same) <= 1e-12);
  // Equal variances: d_TV = 2 Phi(delta / (2 sigma)) - 1.
  const double expect = std::erf(1.0 / (2.0 * std::sqrt(0.5)) / std::sqrt(2.0));
  CHECK(tv(shifted) == doctest::Approx(expect).epsilon(1e-8));
}

TEST_CASE("multistart configuration validation") {
  MultistartConfig cfg = MultistartConfig::box(1, 2.0, 0);
  CHECK_THROWS_AS(find_modes(double_well_potential(1), zero_potential(1), cfg), std::invalid_argument);
}
