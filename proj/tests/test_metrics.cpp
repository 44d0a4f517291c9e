#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "errors.hpp"
#include "metrics.hpp"
#include "rng.hpp"

using namespace tlgp;

TEST_CASE("nmse") {
  Eigen::MatrixXd x(2, 2);
  x << 1, 0, 0, 1;
  CHECK(nmse(x, x) == doctest::Approx(0.0));
  CHECK(nmse(x, Eigen::MatrixXd::Zero(2, 2)) == doctest::Approx(1.0));

  Eigen::MatrixXd est(2, 2);
  est << 1, 0, 0, 0;
  CHECK(nmse(x, est) == doctest::Approx(0.5));

  CHECK_THROWS_AS(nmse(Eigen::MatrixXd::Zero(2, 2), est), Error);
  CHECK_THROWS_AS(nmse(x, Eigen::MatrixXd::Zero(3, 2)), Error);
}

TEST_CASE("nmse is invariant under orthonormal column transforms") {
  Rng rng(5);
  Eigen::MatrixXd x(4, 3), est(4, 3);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 3; ++j) {
      x(i, j) = rng.normal();
      est(i, j) = rng.normal();
    }
  Eigen::MatrixXd q =
      Eigen::HouseholderQR<Eigen::MatrixXd>(Eigen::MatrixXd::Random(4, 4))
          .householderQ();
  CHECK(nmse(q * x, q * est) == doctest::Approx(nmse(x, est)).epsilon(1e-12));
}

TEST_CASE("support extraction rules") {
  Eigen::MatrixXd prob(2, 2);
  prob << 0.0, 1.0, 0.4, 0.6;
  Eigen::MatrixXi mask = support_from_posterior(prob);
  CHECK(mask(0, 0) == 1);  // certain slab
  CHECK(mask(0, 1) == 0);  // certain spike
  CHECK(mask(1, 0) == 1);
  CHECK(mask(1, 1) == 0);

  // mixed z = {-1, +1}: spike probabilities Phi(-1) < 0.5 < Phi(+1)
  Eigen::MatrixXd z_prob(1, 2);
  z_prob << 0.1587, 0.8413;
  Eigen::MatrixXi zm = support_from_posterior(z_prob);
  CHECK(zm(0, 0) == 1);
  CHECK(zm(0, 1) == 0);

  Eigen::MatrixXd est(1, 3);
  est << 100.0, 0.05, 0.0;
  Eigen::MatrixXi mm = support_from_magnitude(est, 1e-3);
  CHECK(mm(0, 0) == 1);
  CHECK(mm(0, 1) == 0);  // under the relative threshold 0.1
  CHECK(mm(0, 2) == 0);

  Eigen::MatrixXd omega(1, 2);
  omega << 0, 1;
  CHECK(support_from_omega(omega)(0, 0) == 1);
  CHECK(support_from_omega(omega)(0, 1) == 0);
}

TEST_CASE("f-measure") {
  Eigen::MatrixXi a(2, 2), b(2, 2);
  a << 1, 0, 1, 0;
  b = a;
  ScoreReport same = f_measure(a, b);
  CHECK(same.f_measure == doctest::Approx(1.0));
  CHECK(!same.degenerate);

  b << 0, 1, 0, 1;
  CHECK(f_measure(a, b).f_measure == doctest::Approx(0.0));

  // est is a superset with double the size: precision 0.5, recall 1
  Eigen::MatrixXi t(1, 4), e(1, 4);
  t << 1, 0, 0, 0;
  e << 1, 1, 0, 0;
  ScoreReport sup = f_measure(t, e);
  CHECK(sup.precision == doctest::Approx(0.5));
  CHECK(sup.recall == doctest::Approx(1.0));
  CHECK(sup.f_measure == doctest::Approx(2.0 / 3.0));

  // empty estimate -> degenerate zero
  Eigen::MatrixXi empty = Eigen::MatrixXi::Zero(1, 4);
  ScoreReport deg = f_measure(t, empty);
  CHECK(deg.f_measure == 0.0);
  CHECK(deg.degenerate);
}

TEST_CASE("f-measure is invariant under entry permutation") {
  Rng rng(9);
  Eigen::MatrixXi a(1, 10), b(1, 10);
  for (int i = 0; i < 10; ++i) {
    a(0, i) = rng.uniform() < 0.4;
    b(0, i) = rng.uniform() < 0.4;
  }
  double f = f_measure(a, b).f_measure;
  // reverse both
  Eigen::MatrixXi ar = a.rowwise().reverse();
  Eigen::MatrixXi br = b.rowwise().reverse();
  CHECK(f_measure(ar, br).f_measure == doctest::Approx(f));
}
