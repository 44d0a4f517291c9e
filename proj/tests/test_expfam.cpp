#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "expfam.hpp"
#include "oracles.hpp"
#include "rng.hpp"

using namespace tlgp;

namespace {

GaussianNat random_gaussian(Rng& rng, int dim, bool positive_definite) {
  Eigen::MatrixXd a(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) a(i, j) = rng.normal();
  Eigen::MatrixXd prec = a * a.transpose();
  if (positive_definite) {
    prec += 0.3 * Eigen::MatrixXd::Identity(dim, dim);
  }
  Eigen::VectorXd shift(dim);
  for (int i = 0; i < dim; ++i) shift(i) = rng.normal();
  return {prec, shift};
}

}  // namespace

TEST_CASE("gaussian product adds natural parameters") {
  GaussianNat a{Eigen::MatrixXd::Identity(1, 1), Eigen::VectorXd::Zero(1)};
  GaussianNat p = gaussian_product(a, a);
  CHECK(p.precision(0, 0) == doctest::Approx(2.0));
  CHECK(p.shift(0) == doctest::Approx(0.0));

  GaussianNat vague = GaussianNat::vague(1);
  GaussianNat q = gaussian_product(a, vague);
  CHECK(q.precision(0, 0) == doctest::Approx(1.0));
  CHECK(q.shift(0) == doctest::Approx(0.0));
}

TEST_CASE("gaussian product matches pointwise density multiplication") {
  // 1-D: fit a Gaussian to the normalized product on a grid.
  Rng rng(7);
  for (int rep = 0; rep < 20; ++rep) {
    double m1 = 3.0 * rng.normal(), v1 = 0.2 + 2.0 * rng.uniform();
    double m2 = 3.0 * rng.normal(), v2 = 0.2 + 2.0 * rng.uniform();
    Gaussian1 g1 = Gaussian1::from_moments(m1, v1);
    Gaussian1 g2 = Gaussian1::from_moments(m2, v2);
    Gaussian1 prod = gaussian_product(g1, g2);

    // Constant rescaling keeps the quadrature well conditioned when the two
    // means are far apart (the raw product mass underflows); moment ratios
    // are unaffected by it.
    const double scale = std::exp(0.5 * (m1 - m2) * (m1 - m2) / (v1 + v2));
    auto density = [&](double x) {
      return scale * norm_pdf(x, m1, v1) * norm_pdf(x, m2, v2);
    };
    const double lo = std::min(m1, m2) - 10.0 * std::sqrt(std::max(v1, v2));
    const double hi = std::max(m1, m2) + 10.0 * std::sqrt(std::max(v1, v2));
    double z = oracle::integrate(density, lo, hi);
    double mean =
        oracle::integrate([&](double x) { return x * density(x); }, lo, hi) / z;
    double second =
        oracle::integrate([&](double x) { return x * x * density(x); }, lo,
                          hi) /
        z;
    CHECK(prod.mean() == doctest::Approx(mean).epsilon(1e-8));
    CHECK(prod.variance() ==
          doctest::Approx(second - mean * mean).epsilon(1e-7));
  }
}

TEST_CASE("gaussian quotient inverts the product") {
  Rng rng(13);
  for (int rep = 0; rep < 50; ++rep) {
    int dim = 1 + static_cast<int>(rng.uniform_below(5));
    GaussianNat a = random_gaussian(rng, dim, true);
    GaussianNat b = random_gaussian(rng, dim, true);
    GaussianNat back = gaussian_quotient(gaussian_product(a, b), b);
    CHECK((back.precision - a.precision).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((back.shift - a.shift).cwiseAbs().maxCoeff() < 1e-10);

    GaussianNat self = gaussian_quotient(a, a);
    CHECK(self.precision.cwiseAbs().maxCoeff() == 0.0);
    CHECK(self.shift.cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("1-D quotient hand example: N(1,1)/N(0,2)") {
  Gaussian1 a = Gaussian1::from_moments(1.0, 1.0);
  Gaussian1 b = Gaussian1::from_moments(0.0, 2.0);
  Gaussian1 q = gaussian_quotient(a, b);
  CHECK(q.precision == doctest::Approx(0.5));
  CHECK(q.shift == doctest::Approx(1.0));
  CHECK(q.mean() == doctest::Approx(2.0));
  CHECK(q.variance() == doctest::Approx(2.0));
}

TEST_CASE("quotient may produce indefinite precision") {
  GaussianNat narrow{Eigen::MatrixXd::Identity(2, 2) * 0.5,
                     Eigen::VectorXd::Zero(2)};
  GaussianNat wide{Eigen::MatrixXd::Identity(2, 2), Eigen::VectorXd::Zero(2)};
  GaussianNat q = gaussian_quotient(narrow, wide);
  CHECK(q.precision(0, 0) < 0.0);
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  CHECK_THROWS_AS(q.to_moments(mean, cov), Error);
}

TEST_CASE("product is commutative and associative; PD closed under product") {
  Rng rng(99);
  for (int rep = 0; rep < 30; ++rep) {
    int dim = 1 + static_cast<int>(rng.uniform_below(4));
    GaussianNat a = random_gaussian(rng, dim, true);
    GaussianNat b = random_gaussian(rng, dim, true);
    GaussianNat c = random_gaussian(rng, dim, true);
    GaussianNat ab = gaussian_product(a, b);
    GaussianNat ba = gaussian_product(b, a);
    CHECK((ab.precision - ba.precision).cwiseAbs().maxCoeff() < 1e-12);
    GaussianNat abc1 = gaussian_product(ab, c);
    GaussianNat abc2 = gaussian_product(a, gaussian_product(b, c));
    double scale = abc1.precision.cwiseAbs().maxCoeff();
    CHECK((abc1.precision - abc2.precision).cwiseAbs().maxCoeff() <
          1e-12 * std::max(1.0, scale));

    Eigen::LLT<Eigen::MatrixXd> llt(ab.precision);
    CHECK(llt.info() == Eigen::Success);
  }
}

TEST_CASE("dimension mismatch is a structured error") {
  GaussianNat a = GaussianNat::vague(2);
  GaussianNat b = GaussianNat::vague(3);
  CHECK_THROWS_AS(gaussian_product(a, b), Error);
  try {
    gaussian_product(a, b);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::dimension_mismatch);
  }
}

TEST_CASE("probit basics") {
  CHECK(probit(0.0) == doctest::Approx(0.5));
  CHECK(probit(1.96) == doctest::Approx(0.975002104).epsilon(1e-8));
  CHECK(probit(std::numeric_limits<double>::infinity()) == 1.0);
  CHECK(probit(-std::numeric_limits<double>::infinity()) == 0.0);
  CHECK(probit_inv(probit(1.7)) == doctest::Approx(1.7).epsilon(1e-10));

  // Mutual inverses over the clamped domain.
  Rng rng(3);
  for (int rep = 0; rep < 200; ++rep) {
    double z = -5.0 + 10.0 * rng.uniform();
    CHECK(probit_inv(probit(z)) == doctest::Approx(z).epsilon(1e-9));
  }
  for (int rep = 0; rep < 200; ++rep) {
    double p = rng.uniform();
    CHECK(probit(probit_inv(p)) == doctest::Approx(p).epsilon(1e-9));
  }

  // Degenerate scores round-trip within the clamping tolerance.
  double z_top = probit_inv(probit(std::numeric_limits<double>::infinity()));
  CHECK(z_top > 7.5);
  CHECK(z_top <= kProbitClamp + 1e-9);
}

TEST_CASE("log_probit lower tail") {
  // against exact values: log Phi(-10) and a very deep tail
  CHECK(log_probit(-10.0) == doctest::Approx(-53.231285150512471).epsilon(1e-12));
  CHECK(std::isfinite(log_probit(-60.0)));
  CHECK(log_probit(-60.0) == doctest::Approx(-1805.0135606805671).epsilon(1e-10));
}

TEST_CASE("bernoulli product basics and oracle") {
  CHECK(bernoulli_product(0.0, 0.0) == doctest::Approx(0.0));
  Rng rng(21);
  for (int rep = 0; rep < 100; ++rep) {
    double z = -6.0 + 12.0 * rng.uniform();
    CHECK(bernoulli_product(z, 0.0) == doctest::Approx(z).epsilon(1e-10));
    CHECK(bernoulli_product(0.0, z) == doctest::Approx(z).epsilon(1e-10));
  }
  for (int rep = 0; rep < 200; ++rep) {
    double z1 = -4.0 + 8.0 * rng.uniform();
    double z2 = -4.0 + 8.0 * rng.uniform();
    double t12 = bernoulli_product(z1, z2);
    CHECK(t12 == bernoulli_product(z2, z1));  // symmetric exactly
    // direct probability arithmetic
    double p1 = probit(z1), p2 = probit(z2);
    double expected = p1 * p2 / (p1 * p2 + (1.0 - p1) * (1.0 - p2));
    CHECK(probit(t12) == doctest::Approx(expected).epsilon(1e-10));
  }
  CHECK_THROWS_AS(bernoulli_product(9.0, -9.0), Error);
  CHECK_THROWS_AS(
      bernoulli_product(-std::numeric_limits<double>::infinity(),
                        std::numeric_limits<double>::infinity()),
      Error);
}

TEST_CASE("bernoulli quotient basics and inverse property") {
  Rng rng(22);
  for (int rep = 0; rep < 100; ++rep) {
    double z = -6.0 + 12.0 * rng.uniform();
    CHECK(bernoulli_quotient(z, z) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(bernoulli_quotient(z, 0.0) == doctest::Approx(z).epsilon(1e-10));
  }
  for (int rep = 0; rep < 200; ++rep) {
    double z1 = -4.0 + 8.0 * rng.uniform();
    double z2 = -4.0 + 8.0 * rng.uniform();
    double back = bernoulli_quotient(bernoulli_product(z1, z2), z2);
    CHECK(back == doctest::Approx(z1).epsilon(1e-10));
  }
  CHECK_THROWS_AS(
      bernoulli_quotient(0.0, std::numeric_limits<double>::infinity()), Error);
  CHECK_THROWS_AS(bernoulli_quotient(0.0, 40.0), Error);
}
