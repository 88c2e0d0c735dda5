#pragma once

// Shared fixtures and independent dense oracles for the test suite. The
// oracles are deliberately built from first principles (edge lists, Kronecker
// blocks) rather than through the library's own operators.

#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "dnadmm/graph.hpp"
#include "dnadmm/objective.hpp"
#include "dnadmm/problem.hpp"

namespace testutil {

inline std::mt19937_64 rng_for(std::uint64_t seed) { return std::mt19937_64(seed); }

inline Eigen::MatrixXd randn(Eigen::Index rows, Eigen::Index cols,
                             std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = dist(rng);
  return m;
}

inline Eigen::VectorXd randn_vec(Eigen::Index size, std::mt19937_64& rng) {
  return randn(size, 1, rng);
}

// One strongly convex least-squares cost per agent; rows >= d keeps every
// agent's Hessian positive definite with probability one.
inline std::vector<dnadmm::QuadraticCost> random_costs(int n, int d, int rows,
                                                       std::mt19937_64& rng,
                                                       double ridge = 0.0) {
  std::vector<dnadmm::QuadraticCost> costs;
  costs.reserve(n);
  for (int i = 0; i < n; ++i) {
    Eigen::MatrixXd A = randn(rows, d, rng) / std::sqrt(static_cast<double>(rows));
    Eigen::VectorXd b = randn_vec(rows, rng);
    costs.emplace_back(std::move(A), std::move(b), ridge);
  }
  return costs;
}

inline dnadmm::Problem random_lasso(int n, int d, int rows, std::uint64_t seed,
                                    double weight, double edge_p = 0.5,
                                    double ridge = 0.0) {
  auto rng = rng_for(seed);
  dnadmm::Graph g = dnadmm::build_random_connected(n, edge_p, seed);
  auto costs = random_costs(n, d, rows, rng, ridge);
  auto reg = weight > 0.0 ? dnadmm::make_l1_regularizer(weight)
                          : dnadmm::make_zero_regularizer();
  return dnadmm::Problem(std::move(g), std::move(costs), std::move(reg));
}

// Dense constraint matrix [incidence ⊗ I_d, e_anchor ⊗ I_d] assembled
// straight from the edge list: rows n·d, columns (m+1)·d.
inline Eigen::MatrixXd dense_B(const dnadmm::Graph& g, int d) {
  const int n = g.n;
  const int m = g.num_edges();
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(n * d, (m + 1) * d);
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(d, d);
  for (int e = 0; e < m; ++e) {
    const auto [i, j] = g.edges[e];
    B.block(i * d, e * d, d, d) = eye;
    B.block(j * d, e * d, d, d) = -eye;
  }
  B.block(g.anchor * d, m * d, d, d) = eye;
  return B;
}

// Dense damped Newton matrix ∇²F + (1/μ)BBᵀ + εI from the oracle B.
inline Eigen::MatrixXd dense_newton_matrix(const std::vector<dnadmm::QuadraticCost>& costs,
                                           const dnadmm::Graph& g, double mu,
                                           double eps) {
  const int d = costs[0].dim();
  const int n = g.n;
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(n * d, n * d);
  for (int i = 0; i < n; ++i) H.block(i * d, i * d, d, d) = costs[i].hessian();
  const Eigen::MatrixXd B = dense_B(g, d);
  H += (B * B.transpose()) / mu;
  H.diagonal().array() += eps;
  return H;
}

}  // namespace testutil
