#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "admm.hpp"
#include "errors.hpp"
#include "model.hpp"

using namespace tlgp;

TEST_CASE("soft threshold closed form") {
  CHECK(soft_threshold(2.0, 1.0) == doctest::Approx(1.0));
  CHECK(soft_threshold(-2.0, 1.0) == doctest::Approx(-1.0));
  CHECK(soft_threshold(0.5, 1.0) == 0.0);
}

TEST_CASE("identity design: x = soft_threshold(y, lambda)") {
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(4, 4);
  Eigen::MatrixXd y = Eigen::MatrixXd::Constant(4, 1, 2.0);
  AdmmConfig cfg;
  cfg.lambda = 1.0;
  AdmmResult res = lasso_admm(a, y, cfg);
  CHECK(res.converged);
  for (int i = 0; i < 4; ++i) {
    CHECK(res.x(i, 0) == doctest::Approx(1.0).epsilon(1e-5));
  }
}

TEST_CASE("lambda = 0 with full column rank recovers least squares") {
  Eigen::MatrixXd a = make_design_matrix(30, 10, 2);
  Eigen::VectorXd x_true = Eigen::VectorXd::Random(10);
  Eigen::MatrixXd y = a * x_true;
  AdmmConfig cfg;
  cfg.lambda = 0.0;
  cfg.max_iters = 5000;
  cfg.abs_tol = 1e-9;
  cfg.rel_tol = 1e-9;
  AdmmResult res = lasso_admm(a, y, cfg);
  Eigen::VectorXd ls = (a.transpose() * a).ldlt().solve(a.transpose() * y);
  CHECK((res.x.col(0) - ls).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("zero observations give the zero solution") {
  Eigen::MatrixXd a = make_design_matrix(8, 12, 3);
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(8, 2);
  AdmmConfig cfg;
  cfg.lambda = 0.5;
  AdmmResult res = lasso_admm(a, y, cfg);
  CHECK(res.x.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("objective is non-increasing after the first iterations") {
  // unit-scale instance so the 1e-10 slack is meaningful
  Eigen::MatrixXd a = make_design_matrix(20, 40, 4);
  Eigen::VectorXd x_true = Eigen::VectorXd::Zero(40);
  x_true(3) = 1.0;
  x_true(17) = -0.5;
  Eigen::MatrixXd y = a * x_true;
  AdmmConfig cfg;
  cfg.lambda = 0.1;
  AdmmResult res = lasso_admm(a, y, cfg);
  REQUIRE(res.objective_trace.size() > 6);
  double scale = std::max(1.0, res.objective_trace.front());
  for (size_t i = 5; i + 1 < res.objective_trace.size(); ++i) {
    CHECK(res.objective_trace[i + 1] <=
          res.objective_trace[i] + 1e-10 * scale);
  }
}

TEST_CASE("solution satisfies the lasso optimality conditions") {
  Eigen::MatrixXd a = make_design_matrix(25, 50, 5);
  Eigen::VectorXd x_true = Eigen::VectorXd::Zero(50);
  x_true(1) = 2.0;
  x_true(30) = -1.5;
  Eigen::MatrixXd y = a * x_true;
  AdmmConfig cfg;
  cfg.lambda = 0.2;
  cfg.max_iters = 10000;
  cfg.abs_tol = 1e-9;
  cfg.rel_tol = 1e-9;
  AdmmResult res = lasso_admm(a, y, cfg);
  REQUIRE(res.converged);
  Eigen::VectorXd g = a.transpose() * (a * res.x.col(0) - y.col(0));
  for (int i = 0; i < 50; ++i) {
    if (res.x(i, 0) != 0.0) {
      CHECK(std::abs(g(i) + cfg.lambda * (res.x(i, 0) > 0 ? 1.0 : -1.0)) <
            1e-4);
    } else {
      CHECK(std::abs(g(i)) <= cfg.lambda + 1e-4);
    }
  }
}

TEST_CASE("multi-column solve matches per-column solves") {
  Eigen::MatrixXd a = make_design_matrix(15, 25, 6);
  Eigen::MatrixXd y(15, 3);
  y.setRandom();
  AdmmConfig cfg;
  cfg.lambda = 0.3;
  AdmmResult all = lasso_admm(a, y, cfg);
  for (int c = 0; c < 3; ++c) {
    AdmmResult one = lasso_admm(a, y.col(c), cfg);
    CHECK((all.x.col(c) - one.x.col(0)).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("input validation") {
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(3, 3);
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(4, 1);
  CHECK_THROWS_AS(lasso_admm(a, y, AdmmConfig{}), Error);

  Eigen::MatrixXd bad = a;
  bad(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(lasso_admm(bad, Eigen::MatrixXd::Zero(3, 1), AdmmConfig{}),
                  Error);

  AdmmConfig cfg;
  cfg.lambda = -1.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = AdmmConfig{};
  cfg.rho = 0.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("lambda grid selection is deterministic") {
  Eigen::MatrixXd a = make_design_matrix(20, 60, 7);
  Eigen::MatrixXd x_true = Eigen::MatrixXd::Zero(60, 2);
  x_true(5, 0) = 30.0;
  x_true(6, 0) = -20.0;
  x_true(5, 1) = 25.0;
  Eigen::MatrixXd y = a * x_true;
  double l1 = select_lambda(a, y, x_true, AdmmConfig{},
                            {0.3, 0.1, 0.03, 0.01, 0.003}, 1e-3);
  double l2 = select_lambda(a, y, x_true, AdmmConfig{},
                            {0.3, 0.1, 0.03, 0.01, 0.003}, 1e-3);
  CHECK(l1 == l2);
  CHECK(l1 > 0.0);
}
