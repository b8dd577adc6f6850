#include "klgauss/gaussian.hpp"
#include "klgauss/quadrature.hpp"

#include "support.hpp"

#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <random>

using namespace klgauss;
using test_support::mat1;
using test_support::vec;

namespace {

GaussianParams random_gaussian(int d, std::mt19937_64& rng) {
  std::normal_distribution<double> z(0.0, 1.0);
  Vector m(d);
  Matrix a(d, d);
  for (int i = 0; i < d; ++i) m[i] = z(rng);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) a(i, j) = z(rng);
  return GaussianParams::from_covariance(m, a * a.transpose() / d + 0.3 * Matrix::Identity(d, d));
}

Matrix random_rotation(int d, std::mt19937_64& rng) {
  std::normal_distribution<double> z(0.0, 1.0);
  Matrix a(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) a(i, j) = z(rng);
  Eigen::HouseholderQR<Matrix> qr(a);
  return qr.householderQ();
}

Box box_around(const GaussianParams& a, const GaussianParams& b, double radius) {
  const int d = a.dim();
  Vector lo(d), hi(d);
  for (int i = 0; i < d; ++i) {
    const double sa = std::sqrt(a.covariance()(i, i)), sb = std::sqrt(b.covariance()(i, i));
    lo[i] = std::min(a.mean()[i] - radius * sa, b.mean()[i] - radius * sb);
    hi[i] = std::max(a.mean()[i] + radius * sa, b.mean()[i] + radius * sb);
  }
  return {lo, hi};
}

}  // namespace

TEST_CASE("log_density of standard normals") {
  const double c = 0.5 * std::log(2.0 * std::numbers::pi);
  const GaussianParams g1(vec({0.0}), mat1(1.0));
  CHECK(log_density(g1, vec({0.0})) == doctest::Approx(-c).epsilon(1e-14));
  CHECK(log_density(g1, vec({1.0})) == doctest::Approx(-0.5 - c).epsilon(1e-14));
  const GaussianParams g2(Vector::Zero(2), Matrix::Identity(2, 2));
  CHECK(log_density(g2, vec({1.0, 1.0})) == doctest::Approx(-1.0 - 2.0 * c).epsilon(1e-14));
}

TEST_CASE("kl_gaussian_gaussian closed forms") {
  for (int d : {1, 2, 3}) {
    const GaussianParams a(Vector::Zero(d), Matrix::Identity(d, d));
    CHECK(kl_gaussian_gaussian(a, a) == 0.0);
  }
  const GaussianParams n01(vec({0.0}), mat1(1.0));
  const GaussianParams n11(vec({1.0}), mat1(1.0));
  CHECK(kl_gaussian_gaussian(n01, n11) == doctest::Approx(0.5).epsilon(1e-14));
  const GaussianParams n02 = GaussianParams::from_covariance(vec({0.0}), mat1(2.0));
  const double expect = 0.5 * (2.0 - 1.0 - std::log(2.0));
  CHECK(kl_gaussian_gaussian(n02, n01) == doctest::Approx(expect).epsilon(1e-14));
  CHECK(kl_gaussian_gaussian(n02, n01) ==
        doctest::Approx(test_support::oracles()["kl_var2_vs_standard"].get<double>()).epsilon(1e-12));
}

TEST_CASE("kl_gaussian_gaussian rejects dimension mismatch") {
  const GaussianParams a(Vector::Zero(1), mat1(1.0));
  const GaussianParams b(Vector::Zero(2), Matrix::Identity(2, 2));
  CHECK_THROWS_AS(kl_gaussian_gaussian(a, b), std::invalid_argument);
}

TEST_CASE("kl_gaussian_gaussian is nonnegative and vanishes only on equal arguments") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const int d = 1 + trial % 3;
    const GaussianParams a = random_gaussian(d, rng), b = random_gaussian(d, rng);
    CHECK(kl_gaussian_gaussian(a, b) > 1e-12);
    CHECK(std::abs(kl_gaussian_gaussian(a, a)) <= 1e-12);
  }
}

TEST_CASE("kl_gaussian_gaussian is invariant under simultaneous rotation") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 100; ++trial) {
    const int d = 2 + trial % 2;
    const GaussianParams a = random_gaussian(d, rng), b = random_gaussian(d, rng);
    const Matrix r = random_rotation(d, rng);
    const GaussianParams ra = GaussianParams::from_covariance(r * a.mean(), r * a.covariance() * r.transpose());
    const GaussianParams rb = GaussianParams::from_covariance(r * b.mean(), r * b.covariance() * r.transpose());
    CHECK(kl_gaussian_gaussian(ra, rb) == doctest::Approx(kl_gaussian_gaussian(a, b)).epsilon(1e-10));
  }
}

TEST_CASE("Pinsker holds for grid total variation of Gaussian pairs") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 30; ++trial) {
    const int d = 1 + trial % 2;
    const GaussianParams a = random_gaussian(d, rng), b = random_gaussian(d, rng);
    const Box box = box_around(a, b, 9.0);
    const double step = 0.02;
    auto tv_integrand = [&](const Vector& x) {
      return 0.5 * std::abs(std::exp(log_density(a, x)) - std::exp(log_density(b, x)));
    };
    const GridIntegral tv = integrate({box}, step, tv_integrand);
    CHECK(tv.value <= std::sqrt(0.5 * kl_gaussian_gaussian(a, b)) + tv.error_estimate + 1e-6);
  }
}

TEST_CASE("log_density integrates to one") {
  std::mt19937_64 rng(14);
  for (int d : {1, 2, 3}) {
    const GaussianParams g = random_gaussian(d, rng);
    const Box box = box_around(g, g, 9.0);
    const double step = d == 3 ? 0.08 : 0.03;
    const GridIntegral r = integrate_exp({box}, step, [&](const Vector& x) { return log_density(g, x); });
    CHECK(std::abs(r.value - 1.0) <= 1e-6);
  }
  const MixtureParams mix({GaussianParams(vec({-1.0}), mat1(0.3)), GaussianParams(vec({2.0}), mat1(0.5))},
                          vec({0.3, 0.7}));
  const GridIntegral r = integrate_exp({Box{vec({-6.0}), vec({8.0})}}, 0.01,
                                       [&](const Vector& x) { return log_density(mix, x); });
  CHECK(std::abs(r.value - 1.0) <= 1e-6);
}

TEST_CASE("kl_categorical examples and edge cases") {
  CHECK(kl_categorical(vec({0.5, 0.5}), vec({0.5, 0.5})) == 0.0);
  CHECK(kl_categorical(vec({1.0, 0.0}), vec({0.5, 0.5})) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(kl_categorical(vec({0.7, 0.3}), vec({0.5, 0.5})) ==
        doctest::Approx(0.7 * std::log(1.4) + 0.3 * std::log(0.6)).epsilon(1e-14));
  CHECK(kl_categorical(vec({0.5, 0.5}), vec({1.0, 0.0})) == kInfiniteDivergence);
  CHECK_THROWS_AS(kl_categorical(vec({1.0}), vec({0.5, 0.5})), std::invalid_argument);
}

TEST_CASE("GaussianParams validation") {
  CHECK_THROWS_AS(GaussianParams(vec({0.0}), mat1(0.0)), std::invalid_argument);
  CHECK_THROWS_AS(GaussianParams(vec({0.0}), mat1(-1.0)), std::invalid_argument);
  Matrix upper(2, 2);
  upper << 1.0, 0.5, 0.0, 1.0;
  CHECK_THROWS_AS(GaussianParams(Vector::Zero(2), upper), std::invalid_argument);
  Matrix indefinite(2, 2);
  indefinite << 1.0, 2.0, 2.0, 1.0;
  CHECK_THROWS_AS(GaussianParams::from_covariance(Vector::Zero(2), indefinite), std::invalid_argument);
  CHECK_THROWS_AS(GaussianParams(vec({0.0, 1.0}), mat1(1.0)), std::invalid_argument);
}

TEST_CASE("mixture constraints and feasibility") {
  const GaussianParams a(vec({-1.0}), mat1(0.1)), b(vec({1.0}), mat1(0.1));
  CHECK(MixtureParams({a, b}, vec({0.5, 0.5})).feasible());
  CHECK_FALSE(MixtureParams({a, b}, vec({0.025, 0.975})).feasible());
  CHECK(MixtureParams({a, b}, vec({0.5, 0.5})).min_separation() == doctest::Approx(2.0));
  MixtureConstraints tight;
  tight.min_separation = 3.0;
  CHECK_FALSE(MixtureParams({a, b}, vec({0.5, 0.5}), tight).feasible());
  CHECK_THROWS_AS(MixtureParams({a, b}, vec({0.6, 0.6})), std::invalid_argument);
  CHECK_THROWS_AS(MixtureParams({a, b}, vec({1.0})), std::invalid_argument);
  MixtureConstraints bad;
  bad.min_weight = 1.5;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("sampling") {
  const GaussianParams g(Vector::Zero(3), Matrix::Identity(3, 3));
  const Matrix x = sample(g, 100000, 5);
  const Vector mean = x.rowwise().mean();
  for (int i = 0; i < 3; ++i) CHECK(std::abs(mean[i]) <= 0.02);
  CHECK(sample(g, 1, 5).rows() == 3);
  CHECK(sample(g, 1, 5).cols() == 1);
  CHECK(sample(g, 10, 5) == sample(g, 10, 5));

  const MixtureParams mix({GaussianParams(vec({-1.0}), mat1(1e-3)), GaussianParams(vec({1.0}), mat1(1e-3))},
                          vec({0.5, 0.5}));
  const Matrix y = sample(mix, 100000, 6);
  const double frac_neg = (y.array() < 0.0).cast<double>().mean();
  CHECK(std::abs(frac_neg - 0.5) <= 0.01);
}

TEST_CASE("scale_covariance and JSON round trip") {
  const GaussianParams g = GaussianParams::from_covariance(vec({1.0, 2.0}), Matrix::Identity(2, 2) * 4.0);
  const GaussianParams s = scale_covariance(g, 0.25);
  CHECK((s.covariance() - Matrix::Identity(2, 2)).norm() <= 1e-14);
  CHECK(s.mean() == g.mean());

  nlohmann::json j = g;
  CHECK(j.get<GaussianParams>().covariance().isApprox(g.covariance(), 1e-15));
  const MixtureParams mix({g, GaussianParams(vec({-3.0, 0.0}), Matrix::Identity(2, 2))}, vec({0.4, 0.6}));
  nlohmann::json jm = mix;
  const MixtureParams back = jm.get<MixtureParams>();
  CHECK(back.size() == 2);
  CHECK(back.weights().isApprox(mix.weights()));
  CHECK(back.component(1).mean() == mix.component(1).mean());
}
