#include <doctest.h>

#include <cmath>
#include <set>

#include "dnadmm/errors.hpp"
#include "dnadmm/graph.hpp"
#include "helpers.hpp"

using namespace dnadmm;
using testutil::dense_B;

TEST_CASE("graph construction normalizes and validates") {
  Graph g = Graph::make(3, {{2, 1}, {0, 1}}, 0);
  CHECK(g.n == 3);
  CHECK(g.anchor == 0);
  // Edges are stored with i < j and sorted lexicographically.
  REQUIRE(g.num_edges() == 2);
  CHECK(g.edges[0] == std::pair<int, int>(0, 1));
  CHECK(g.edges[1] == std::pair<int, int>(1, 2));
  CHECK(g.degree[0] == 1);
  CHECK(g.degree[1] == 2);
  CHECK(g.degree[2] == 1);
  CHECK(g.neighbors[1] == std::vector<int>{0, 2});
  CHECK(g.is_connected());

  CHECK_THROWS_AS(Graph::make(1, {}, 0), InvalidParameter);
  CHECK_THROWS_AS(Graph::make(3, {{0, 1}, {1, 2}}, 3), InvalidParameter);
  CHECK_THROWS_AS(Graph::make(3, {{0, 0}}, 0), InvalidParameter);
  CHECK_THROWS_AS(Graph::make(3, {{0, 1}, {1, 0}, {1, 2}}, 0), InvalidParameter);
  CHECK_THROWS_AS(Graph::make(3, {{0, 4}}, 0), InvalidParameter);
}

TEST_CASE("connectivity detection") {
  Graph path = Graph::make(4, {{0, 1}, {1, 2}, {2, 3}}, 0);
  CHECK(path.is_connected());
  Graph split = Graph::make(4, {{0, 1}, {2, 3}}, 0);
  CHECK_FALSE(split.is_connected());
  CHECK_THROWS_AS(lambda_min_anchor(split), InvalidParameter);
}

TEST_CASE("random connected graphs are deterministic and connected") {
  for (std::uint64_t seed : {1ull, 7ull, 42ull}) {
    Graph a = build_random_connected(12, 0.3, seed);
    Graph b = build_random_connected(12, 0.3, seed);
    CHECK(a.edges == b.edges);
    CHECK(a.is_connected());
  }
  // p = 1 always yields the complete graph.
  Graph full = build_random_connected(6, 1.0, 3);
  CHECK(full.num_edges() == 15);
  // Impossible edge probability exhausts the resampling budget.
  CHECK_THROWS_AS(build_random_connected(4, 0.0, 1, 0, 50), InvalidParameter);
}

TEST_CASE("anchored Laplacian smallest eigenvalue on a single edge") {
  // For K_2 with the anchor tie on node 0 the spectrum of L + e0 e0^T is
  // {(3 - sqrt(5))/2, (3 + sqrt(5))/2}.
  Graph g = Graph::make(2, {{0, 1}}, 0);
  const double expect = (3.0 - std::sqrt(5.0)) / 2.0;
  CHECK(lambda_min_anchor(g) == doctest::Approx(expect).epsilon(1e-14));
}

TEST_CASE("anchored Laplacian eigenvalue is positive on connected graphs") {
  for (std::uint64_t seed : {2ull, 9ull, 31ull}) {
    Graph g = build_random_connected(10, 0.4, seed);
    const double lmin = lambda_min_anchor(g);
    CHECK(lmin > 0.0);
    // Oracle: eigenvalue of the dense matrix assembled from parts.
    Eigen::MatrixXd M = laplacian_parts(g).laplacian().cast<double>();
    M(g.anchor, g.anchor) += 1.0;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
    CHECK(lmin == doctest::Approx(es.eigenvalues()(0)).epsilon(1e-12));
  }
}

TEST_CASE("incidence matrix reproduces the Laplacian") {
  Graph g = build_random_connected(8, 0.4, 5);
  Eigen::MatrixXi A = incidence_matrix(g);
  REQUIRE(A.rows() == g.n);
  REQUIRE(A.cols() == g.num_edges());
  Eigen::MatrixXi L = laplacian_parts(g).laplacian();
  CHECK((A * A.transpose() - L).cwiseAbs().maxCoeff() == 0);
}

TEST_CASE("constraint operator matches the dense oracle") {
  const int d = 3;
  for (std::uint64_t seed : {11ull, 23ull}) {
    Graph g = build_random_connected(7, 0.5, seed, /*anchor=*/2);
    Eigen::MatrixXd B = dense_B(g, d);
    auto rng = testutil::rng_for(seed + 100);
    Eigen::VectorXd x = testutil::randn_vec(g.n * d, rng);
    Eigen::VectorXd y = testutil::randn_vec((g.num_edges() + 1) * d, rng);

    CHECK((bt_apply(g, d, x) - B.transpose() * x).norm() < 1e-12);
    CHECK((b_apply(g, d, y) - B * y).norm() < 1e-12);
    // Adjointness: <B^T x, y> == <x, B y>.
    const double lhs = bt_apply(g, d, x).dot(y);
    const double rhs = x.dot(b_apply(g, d, y));
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
    // B B^T is the anchored Laplacian lifted to blocks.
    Eigen::MatrixXd M = laplacian_parts(g).laplacian().cast<double>();
    M(g.anchor, g.anchor) += 1.0;
    Eigen::MatrixXd lifted = Eigen::MatrixXd::Zero(g.n * d, g.n * d);
    for (int i = 0; i < g.n; ++i)
      for (int j = 0; j < g.n; ++j)
        lifted.block(i * d, j * d, d, d) =
            M(i, j) * Eigen::MatrixXd::Identity(d, d);
    CHECK((B * B.transpose() - lifted).norm() < 1e-12);
  }
}

TEST_CASE("row-space projection residual") {
  const int d = 2;
  Graph g = build_random_connected(6, 0.5, 17);
  auto rng = testutil::rng_for(99);
  // Images of B^T have zero residual.
  Eigen::VectorXd w = testutil::randn_vec(g.n * d, rng);
  Eigen::VectorXd y = bt_apply(g, d, w);
  CHECK(range_projection_residual(g, d, y) < 1e-12);
  // A generic vector with a kernel component does not.
  if (g.num_edges() + 1 > g.n) {
    Eigen::VectorXd z = testutil::randn_vec((g.num_edges() + 1) * d, rng);
    Eigen::MatrixXd B = dense_B(g, d);
    // Remove the row-space part with a dense projector to land in the kernel.
    Eigen::MatrixXd P =
        B.transpose() * (B * B.transpose()).ldlt().solve(Eigen::MatrixXd(B));
    Eigen::VectorXd kernel = z - P * z;
    if (kernel.norm() > 1e-8) {
      CHECK(range_projection_residual(g, d, kernel) ==
            doctest::Approx(kernel.norm()).epsilon(1e-10));
    }
  }
}

TEST_CASE("graph JSON round-trip") {
  Graph g = build_random_connected(9, 0.35, 77, /*anchor=*/4);
  Graph back = Graph::from_json(g.to_json());
  CHECK(back.n == g.n);
  CHECK(back.anchor == g.anchor);
  CHECK(back.edges == g.edges);
  // Malformed documents are rejected; a missing anchor defaults to 0.
  auto j = g.to_json();
  j.erase("anchor");
  CHECK(Graph::from_json(j).anchor == 0);
  j.erase("edges");
  CHECK_THROWS_AS(Graph::from_json(j), ParseError);
}
