#include <doctest.h>

#include <cmath>
#include <limits>

#include "dnadmm/errors.hpp"
#include "dnadmm/solver.hpp"
#include "helpers.hpp"

using namespace dnadmm;

namespace {

// Two agents on one edge pulling toward 1 and 3; the consensus optimum is 2.
Problem two_agent_pull() {
  Graph g = Graph::make(2, {{0, 1}}, 0);
  std::vector<QuadraticCost> costs;
  for (double c : {1.0, 3.0}) {
    Eigen::VectorXd b(1);
    b << c;
    costs.emplace_back(Eigen::MatrixXd::Identity(1, 1), b);
  }
  return Problem(std::move(g), std::move(costs), make_zero_regularizer());
}

// Three scalar agents on a path with Hessians exactly 1, 1.5, 2, so the
// curvature bounds are (m_f, M_f) = (1, 2); used by the rate-certificate tests.
Problem curvature_pinned_path() {
  Graph g = Graph::make(3, {{0, 1}, {1, 2}}, 0);
  std::vector<QuadraticCost> costs;
  const double hess[] = {1.0, 1.5, 2.0};
  const double target[] = {1.0, -2.0, 0.5};
  for (int i = 0; i < 3; ++i) {
    Eigen::MatrixXd A(1, 1);
    A << std::sqrt(hess[i]);
    Eigen::VectorXd b(1);
    b << target[i];
    costs.emplace_back(A, b);
  }
  return Problem(std::move(g), std::move(costs), make_l1_regularizer(0.1));
}

}  // namespace

TEST_CASE("hyperparameter validation") {
  Hyper h;
  CHECK_NOTHROW(h.validate());
  h.mu = 0.0;
  CHECK_THROWS_AS(h.validate(), InvalidParameter);
  h = Hyper{};
  h.eps = -0.1;
  CHECK_THROWS_AS(h.validate(), InvalidParameter);
  h = Hyper{};
  h.K = -1;
  CHECK_THROWS_AS(h.validate(), InvalidParameter);
  h = Hyper{};
  h.max_iters = 0;
  CHECK_THROWS_AS(h.validate(), InvalidParameter);
}

TEST_CASE("theory constants: damping lower bound and rate certificate") {
  // m_f=1, M_f=2, n=3, mu=1: [2*2 + (1 + 4)/1]^2 * 3/4 = 169 * 0.75 = 126.75.
  CHECK(eps_theory_bound(1.0, 2.0, 3, 1.0) == 126.75);

  Graph g = Graph::make(3, {{0, 1}, {1, 2}}, 0);
  const double lmin = lambda_min_anchor(g);
  for (int K : {0, 2, 5}) {
    TheoryParams tp = theory_params(1.0, 2.0, 3, 1.0, 127.0, K, lmin);
    CHECK(tp.eps_theory == 126.75);
    CHECK(tp.delta > 0.0);
    CHECK(tp.gamma == gamma_bound(3, 1.0, 1.0, 2.0, 127.0, K));
    // zeta sits strictly inside its interval.
    CHECK(tp.zeta > 0.75);
    CHECK(tp.zeta < 127.0 / (tp.gamma * tp.gamma));
  }

  // Too little damping empties the zeta interval.
  CHECK_THROWS_AS(theory_params(1.0, 2.0, 3, 1.0, 1.0, 0, lmin),
                  EmptyZetaInterval);

  // The grid search can only improve the rate constant.
  TheoryParams base = theory_params(1.0, 2.0, 3, 1.0, 127.0, 2, lmin);
  TheoryParams best = theory_params_maximized(1.0, 2.0, 3, 1.0, 127.0, 2, lmin);
  CHECK(best.delta >= base.delta);
}

TEST_CASE("Lyapunov distance") {
  auto problem = two_agent_pull();
  GlobalState a = GlobalState::zeros(problem);
  GlobalState b = a;
  CHECK(lyapunov(a, b, 1.0, 1.0) == 0.0);
  b.x << 1.0, -1.0;
  b.y << 0.5, 0.0;
  // eps = 0 leaves only the dual part.
  CHECK(lyapunov(a, b, 2.0, 0.0) == doctest::Approx(2.0 * 0.25).epsilon(1e-15));
  CHECK(lyapunov(a, b, 2.0, 3.0) ==
        doctest::Approx(3.0 * 2.0 + 2.0 * 0.25).epsilon(1e-15));
  CHECK(lyapunov(a, b, 0.1, 0.0) >= 0.0);
}

TEST_CASE("optimum is a fixed point of the iteration") {
  auto problem = testutil::random_lasso(4, 2, 6, 141, 0.3);
  ReferenceSolution ref = compute_reference(problem, 1e-13);
  GlobalState s;
  s.x = stack_copies(ref.x_star, problem.n());
  s.y = ref.y_star;
  s.zhat = ref.z_star;
  Hyper h;
  h.mu = 0.8;
  h.eps = 1.2;
  h.K = 3;
  GlobalState next = admm_step(s, problem, h);
  CHECK((next.x - s.x).norm() < 1e-8);
  CHECK((next.y - s.y).norm() < 1e-8);
  CHECK((next.zhat - s.zhat).norm() < 1e-8);
}

TEST_CASE("two agents agree on the average") {
  auto problem = two_agent_pull();
  Hyper h;
  h.mu = 1.0;
  h.eps = 1.0;
  h.K = 1;
  h.tol = 1e-11;
  h.max_iters = 5000;
  IterationTrace trace = run(problem, h);
  CHECK(trace.converged);
  CHECK(std::abs(trace.final_state.x(0) - 2.0) < 1e-8);
  CHECK(std::abs(trace.final_state.x(1) - 2.0) < 1e-8);
  CHECK(std::abs(trace.final_state.zhat(0) - 2.0) < 1e-8);
}

TEST_CASE("one step equals a dense transcription of the update equations") {
  auto problem = testutil::random_lasso(5, 3, 7, 151, 0.2);
  const int n = problem.n(), d = problem.d(), m = problem.graph.num_edges();
  Hyper h;
  h.mu = 0.9;
  h.eps = 0.7;
  h.K = 3;

  // Start from zero and from a generic state.
  std::vector<GlobalState> starts;
  starts.push_back(GlobalState::zeros(problem));
  auto rng = testutil::rng_for(152);
  GlobalState s1;
  s1.x = testutil::randn_vec(n * d, rng);
  s1.y = testutil::randn_vec((m + 1) * d, rng);
  s1.zhat = testutil::randn_vec(d, rng);
  starts.push_back(s1);

  Eigen::MatrixXd B = testutil::dense_B(problem.graph, d);
  for (const GlobalState& s : starts) {
    // Dense transcription: prox pre-step, damped Newton with the truncated
    // series assembled from dense matrices, prox post-step, dual ascent.
    Eigen::VectorXd theta =
        problem.reg->prox(s.x.segment(problem.graph.anchor * d, d) +
                              h.mu * s.y.tail(d),
                          h.mu);
    Eigen::VectorXd theta_ext = Eigen::VectorXd::Zero((m + 1) * d);
    theta_ext.tail(d) = theta;
    Eigen::VectorXd grad = problem.grad_smooth(s.x) +
                           B * (B.transpose() * s.x - theta_ext) / h.mu +
                           B * s.y;
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(n * d, n * d);
    for (int i = 0; i < n; ++i) {
      D.block(i * d, i * d, d, d) =
          problem.costs[i].hessian() +
          ((double(i == problem.graph.anchor) +
            2.0 * problem.graph.degree[i]) /
               h.mu +
           h.eps) *
              Eigen::MatrixXd::Identity(d, d);
    }
    Eigen::MatrixXd H = testutil::dense_newton_matrix(problem.costs,
                                                      problem.graph, h.mu, h.eps);
    Eigen::MatrixXd N = D - H;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(D);
    Eigen::MatrixXd Dx = es.operatorInverseSqrt();
    Eigen::MatrixXd core = Dx * N * Dx;
    Eigen::MatrixXd series = Eigen::MatrixXd::Identity(n * d, n * d);
    Eigen::MatrixXd pow = Eigen::MatrixXd::Identity(n * d, n * d);
    for (int k = 1; k <= h.K; ++k) {
      pow = pow * core;
      series += pow;
    }
    Eigen::VectorXd x_next = s.x - Dx * series * Dx * grad;
    Eigen::VectorXd z_next =
        problem.reg->prox(x_next.segment(problem.graph.anchor * d, d) +
                              h.mu * s.y.tail(d),
                          h.mu);
    Eigen::VectorXd z_ext = Eigen::VectorXd::Zero((m + 1) * d);
    z_ext.tail(d) = z_next;
    Eigen::VectorXd y_next = s.y + (B.transpose() * x_next - z_ext) / h.mu;

    StepDetail detail = admm_step_detail(s, problem, h);
    CHECK((detail.theta - theta).norm() < 1e-12);
    CHECK((detail.next.x - x_next).norm() < 1e-12);
    CHECK((detail.next.zhat - z_next).norm() < 1e-12);
    CHECK((detail.next.y - y_next).norm() < 1e-12);
  }
}

TEST_CASE("disabled tolerance runs the full budget") {
  auto problem = two_agent_pull();
  Hyper h;
  h.max_iters = 37;
  h.tol = std::numeric_limits<double>::infinity();
  IterationTrace trace = run(problem, h);
  CHECK_FALSE(trace.converged);
  CHECK(trace.records.size() == 37);
  for (std::size_t i = 0; i < trace.records.size(); ++i) {
    CHECK(trace.records[i].iter == static_cast<long>(i + 1));
    CHECK(trace.records[i].comm_rounds_cum ==
          static_cast<long>(i + 1) * (h.K + 1));
  }
}

TEST_CASE("small LASSO run converges with full diagnostics") {
  auto problem = testutil::random_lasso(3, 2, 6, 161, 0.3);
  ReferenceSolution ref = compute_reference(problem, 1e-13);
  Hyper h;
  h.mu = 1.0;
  h.eps = 1.0;
  h.K = 2;
  h.tol = 1e-9;
  h.max_iters = 500;
  IterationTrace trace = run(problem, h, &ref, /*record_iterates=*/true);
  CHECK(trace.converged);
  CHECK(trace.records.back().r_c < 1e-8);
  CHECK(trace.records.back().rel_cost < 1e-6);
  CHECK(trace.x_iterates.size() == trace.records.size() + 1);

  // The inexactness bound holds at every iteration and the dual stays in the
  // row space of the constraint matrix.
  for (const IterRecord& rec : trace.records) {
    CHECK(rec.e_norm <= rec.gamma_dx + 1e-12);
    CHECK(rec.r_b_ok);
  }
  CHECK(range_projection_residual(problem.graph, problem.d(),
                                  trace.final_state.y) < 1e-10);

  // Converged iterates match the reference pointwise.
  for (int i = 0; i < problem.n(); ++i) {
    CHECK((trace.final_state.x.segment(i * problem.d(), problem.d()) -
           ref.z_star)
              .norm() < 1e-6);
  }
}

TEST_CASE("deeper truncation never needs more iterations") {
  auto problem = testutil::random_lasso(4, 2, 6, 171, 0.2);
  ReferenceSolution ref = compute_reference(problem, 1e-13);
  auto iters_to = [&](int K) {
    Hyper h;
    h.K = K;
    h.tol = std::numeric_limits<double>::infinity();
    h.max_iters = 800;
    IterationTrace t = run(problem, h, &ref);
    for (const auto& rec : t.records)
      if (rec.rel_cost <= 1e-6) return rec.iter;
    return h.max_iters + 1;
  };
  const long i5 = iters_to(5), i2 = iters_to(2), i0 = iters_to(0);
  CHECK(i5 <= i2);
  CHECK(i2 <= i0);
  CHECK(i0 <= 800);
}

TEST_CASE("inexactness vanishes for a null step") {
  auto problem = testutil::random_lasso(4, 2, 6, 181, 0.2);
  auto rng = testutil::rng_for(182);
  Eigen::VectorXd x = testutil::randn_vec(8, rng);
  Eigen::VectorXd theta = testutil::randn_vec(2, rng);
  Hyper h;
  // x_next = x_t and z_next = theta: everything cancels identically.
  CHECK(error_term(x, x, theta, theta, problem, h).norm() == 0.0);
}

TEST_CASE("quadratic gradient linearization cancels bitwise") {
  auto problem = testutil::random_lasso(5, 3, 7, 191, 0.4);
  auto rng = testutil::rng_for(192);
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::VectorXd a = testutil::randn_vec(15, rng);
    Eigen::VectorXd b = testutil::randn_vec(15, rng);
    CHECK(quadratic_cancellation(problem, a, b).norm() == 0.0);
  }
}

TEST_CASE("both inexactness routes agree on real steps") {
  auto problem = testutil::random_lasso(4, 3, 6, 201, 0.3);
  Hyper h;
  h.mu = 1.1;
  h.eps = 0.9;
  h.K = 2;
  GlobalState s = GlobalState::zeros(problem);
  for (int t = 0; t < 20; ++t) {
    StepDetail detail = admm_step_detail(s, problem, h);
    Eigen::VectorXd direct = error_term(s.x, detail.next.x, detail.theta,
                                        detail.next.zhat, problem, h);
    Eigen::VectorXd via_identity =
        error_term_from_gradient(s.x, detail.next.x, detail.theta,
                                 detail.next.zhat, detail.grad, problem, h);
    CHECK((direct - via_identity).norm() <
          1e-10 * std::max(1.0, direct.norm()));
    s = detail.next;
  }
}

TEST_CASE("rate certificate holds along the trajectory") {
  auto problem = curvature_pinned_path();
  SmoothBounds sb = smooth_bounds(problem.costs);
  CHECK(sb.m_f == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(sb.M_f == doctest::Approx(2.0).epsilon(1e-12));
  const double lmin = lambda_min_anchor(problem.graph);
  Hyper h;
  h.mu = 1.0;
  h.eps = 127.0;
  h.K = 2;
  h.tol = std::numeric_limits<double>::infinity();
  h.max_iters = 60;
  TheoryParams tp = theory_params(sb.m_f, sb.M_f, problem.n(), h.mu, h.eps, h.K, lmin);
  REQUIRE(tp.delta > 0.0);
  ReferenceSolution ref = compute_reference(problem, 1e-13);
  IterationTrace trace = run(problem, h, &ref);
  GlobalState star_state;
  star_state.x = stack_copies(ref.x_star, problem.n());
  star_state.y = ref.y_star;
  star_state.zhat = ref.z_star;
  double prev = lyapunov(GlobalState::zeros(problem), star_state, h.mu, h.eps);
  for (const IterRecord& rec : trace.records) {
    CHECK(rec.lyapunov <= prev / (1.0 + tp.delta) + 1e-9);
    prev = rec.lyapunov;
  }
}

TEST_CASE("non-finite states are rejected as divergence") {
  auto problem = two_agent_pull();
  GlobalState s = GlobalState::zeros(problem);
  s.x(0) = std::numeric_limits<double>::quiet_NaN();
  Hyper h;
  CHECK_THROWS_AS(admm_step(s, problem, h), NonFinite);
}
