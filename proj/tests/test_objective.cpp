#include <doctest.h>

#include <cmath>

#include "dnadmm/errors.hpp"
#include "dnadmm/objective.hpp"
#include "helpers.hpp"

using namespace dnadmm;

TEST_CASE("quadratic cost value, gradient and Hessian") {
  Eigen::MatrixXd A = Eigen::MatrixXd::Identity(2, 2);
  Eigen::VectorXd b(2);
  b << 2.0, 0.5;
  QuadraticCost f(A, b);

  Eigen::VectorXd x = Eigen::VectorXd::Zero(2);
  CHECK(f.value(x) == doctest::Approx(0.5 * (4.0 + 0.25)));
  CHECK((f.gradient(x) + b).norm() == 0.0);
  CHECK((f.hessian() - Eigen::MatrixXd::Identity(2, 2)).norm() == 0.0);

  // Gradient against central differences at a generic point.
  auto rng = testutil::rng_for(4);
  Eigen::MatrixXd A2 = testutil::randn(5, 3, rng);
  Eigen::VectorXd b2 = testutil::randn_vec(5, rng);
  QuadraticCost f2(A2, b2, /*ridge=*/0.3);
  Eigen::VectorXd p = testutil::randn_vec(3, rng);
  Eigen::VectorXd grad = f2.gradient(p);
  const double h = 1e-6;
  for (int k = 0; k < 3; ++k) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(3);
    e(k) = h;
    const double fd = (f2.value(p + e) - f2.value(p - e)) / (2.0 * h);
    CHECK(grad(k) == doctest::Approx(fd).epsilon(1e-6));
  }
  CHECK((f2.hessian() - (A2.transpose() * A2 +
                         0.3 * Eigen::MatrixXd::Identity(3, 3)))
            .norm() < 1e-14);

  CHECK_THROWS_AS(QuadraticCost(A2, b, 0.0), DimensionMismatch);
  CHECK_THROWS_AS(QuadraticCost(A, b, -1.0), InvalidParameter);
}

TEST_CASE("curvature bounds across agents") {
  // One agent with Hessian diag(1, 4): bounds are (1, 4).
  Eigen::MatrixXd A(2, 2);
  A << 1.0, 0.0, 0.0, 2.0;
  std::vector<QuadraticCost> costs;
  costs.emplace_back(A, Eigen::VectorXd::Zero(2));
  SmoothBounds sb = smooth_bounds(costs);
  CHECK(sb.m_f == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(sb.M_f == doctest::Approx(4.0).epsilon(1e-14));

  // A second, flatter agent drags the lower bound down.
  Eigen::MatrixXd A2(2, 2);
  A2 << 0.5, 0.0, 0.0, 1.0;
  costs.emplace_back(A2, Eigen::VectorXd::Zero(2));
  sb = smooth_bounds(costs);
  CHECK(sb.m_f == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(sb.M_f == doctest::Approx(4.0).epsilon(1e-14));

  // A rank-deficient agent without ridge is rejected...
  std::vector<QuadraticCost> flat;
  flat.emplace_back(Eigen::MatrixXd::Zero(2, 2), Eigen::VectorXd::Zero(2));
  CHECK_THROWS_AS(smooth_bounds(flat), DegenerateCurvature);
  // ...but the ridge restores strong convexity.
  std::vector<QuadraticCost> ridged;
  ridged.emplace_back(Eigen::MatrixXd::Zero(2, 2), Eigen::VectorXd::Zero(2), 0.7);
  CHECK(smooth_bounds(ridged).m_f == doctest::Approx(0.7).epsilon(1e-14));
}

TEST_CASE("soft threshold prox") {
  auto l1 = make_l1_regularizer(1.0);
  Eigen::VectorXd v(1);
  v << 1.2;
  // mu = 0.5 shrinks by 0.5: 1.2 -> 0.7.
  CHECK(l1->prox(v, 0.5)(0) == doctest::Approx(0.7).epsilon(1e-15));
  v << -1.2;
  CHECK(l1->prox(v, 0.5)(0) == doctest::Approx(-0.7).epsilon(1e-15));
  v << 0.3;
  CHECK(l1->prox(v, 0.5)(0) == 0.0);
  CHECK_THROWS_AS(l1->prox(v, 0.0), InvalidParameter);
  CHECK_THROWS_AS(make_l1_regularizer(-2.0), InvalidParameter);

  auto zero = make_zero_regularizer();
  Eigen::VectorXd w(3);
  w << -4.0, 0.0, 2.5;
  CHECK((zero->prox(w, 0.5) - w).norm() == 0.0);
  CHECK(zero->value(w) == 0.0);
}

TEST_CASE("prox is firmly nonexpansive") {
  auto l1 = make_l1_regularizer(0.8);
  auto rng = testutil::rng_for(21);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd a = testutil::randn_vec(4, rng);
    Eigen::VectorXd b = testutil::randn_vec(4, rng);
    CHECK((l1->prox(a, 1.3) - l1->prox(b, 1.3)).norm() <= (a - b).norm() + 1e-15);
  }
}

TEST_CASE("subgradient membership margin") {
  auto l1 = make_l1_regularizer(1.0);
  Eigen::VectorXd z(2), y(2);
  z << 1.0, 0.0;
  y << 1.0, 0.5;
  // Active coordinate needs y = sign(z); inactive allows |y| <= 1.
  CHECK(l1->subgradient_margin(z, y, 1e-12) == doctest::Approx(0.0));
  y << 1.2, 1.5;
  CHECK(l1->subgradient_margin(z, y, 1e-12) == doctest::Approx(0.5).epsilon(1e-14));
  y << 0.4, -0.3;
  CHECK(l1->subgradient_margin(z, y, 1e-12) == doctest::Approx(0.6).epsilon(1e-14));

  auto zero = make_zero_regularizer();
  Eigen::VectorXd y0(2);
  y0 << 1e-3, -2e-3;
  CHECK(zero->subgradient_margin(z, y0, 1e-12) == doctest::Approx(2e-3));
}

TEST_CASE("prox optimality implies zero membership margin") {
  // y = (v - prox(v)) / mu is always a subgradient at the prox point.
  auto l1 = make_l1_regularizer(0.6);
  auto rng = testutil::rng_for(33);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd v = testutil::randn_vec(5, rng);
    const double mu = 0.25 + trial * 0.1;
    Eigen::VectorXd z = l1->prox(v, mu);
    Eigen::VectorXd y = (v - z) / mu;
    CHECK(l1->subgradient_margin(z, y, 1e-12) < 1e-12);
  }
}

TEST_CASE("Moreau envelope") {
  auto l1 = make_l1_regularizer(1.0);
  Eigen::VectorXd v(1);
  v << 2.0;
  // prox = 1, envelope = |1| + (2-1)^2 / 2 = 1.5.
  CHECK(moreau_envelope(*l1, v, 1.0) == doctest::Approx(1.5).epsilon(1e-14));
  // The envelope is the infimum of g(z) + ||v - z||^2 / (2 mu): grid check.
  double best = 1e300;
  for (double z = -3.0; z <= 3.0; z += 1e-4) {
    best = std::min(best, std::abs(z) + (2.0 - z) * (2.0 - z) / 2.0);
  }
  CHECK(moreau_envelope(*l1, v, 1.0) == doctest::Approx(best).epsilon(1e-6));
}

TEST_CASE("regularizer JSON round-trip") {
  auto l1 = make_l1_regularizer(0.35);
  auto back = regularizer_from_json(l1->to_json());
  Eigen::VectorXd v(2);
  v << 1.0, -0.2;
  CHECK(back->value(v) == l1->value(v));
  CHECK((back->prox(v, 2.0) - l1->prox(v, 2.0)).norm() == 0.0);

  auto zero = make_zero_regularizer();
  CHECK(regularizer_from_json(zero->to_json())->value(v) == 0.0);

  nlohmann::json bad = {{"kind", "cauchy"}};
  CHECK_THROWS_AS(regularizer_from_json(bad), ParseError);
}

TEST_CASE("global cost aggregates smooth parts and the regularizer") {
  auto problem = testutil::random_lasso(4, 3, 6, 51, 0.4);
  auto rng = testutil::rng_for(52);
  Eigen::VectorXd xhat = testutil::randn_vec(3, rng);
  double expect = problem.reg->value(xhat);
  for (const auto& c : problem.costs) expect += c.value(xhat);
  CHECK(global_cost(problem.costs, *problem.reg, xhat) ==
        doctest::Approx(expect).epsilon(1e-14));
}
