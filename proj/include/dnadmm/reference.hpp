#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "dnadmm/graph.hpp"
#include "dnadmm/objective.hpp"
#include "dnadmm/problem.hpp"

namespace dnadmm {

// The three optimality residuals: stationarity, subgradient membership of the
// nonsmooth block (boolean with the worst per-coordinate margin), and primal
// feasibility.
struct KktResiduals {
  double r_a = 0.0;
  bool r_b_ok = false;
  double r_b_margin = 0.0;
  double r_c = 0.0;
};

// Centralized ground truth for one problem instance: the primal optimum, its
// objective value, the unique dual optimum in the row space of the constraint
// matrix, and the residuals at the solution.
struct ReferenceSolution {
  Eigen::VectorXd x_star;
  double obj_star = 0.0;
  Eigen::VectorXd y_star;
  Eigen::VectorXd z_star;
  KktResiduals residuals;

  nlohmann::json to_json() const;
  static ReferenceSolution from_json(const nlohmann::json& j);
};

// Stack n copies of a d-vector into one n·d vector.
Eigen::VectorXd stack_copies(const Eigen::VectorXd& v, int n);

// Accelerated proximal gradient (fixed step 1/M_F, monotone restart) on
// l(x) = Σ_i f^i(x) + g(x), run until the prox fixed-point residual
// ‖x − prox(x − ∇F(x)/M_F)‖ drops to tol. Returns (minimizer, value).
std::pair<Eigen::VectorXd, double> solve_centralized(
    const std::vector<QuadraticCost>& costs, const Regularizer& reg, double tol,
    long max_iters = 500000);

// The unique dual optimum in range(Bᵀ): solves (L + e_l e_lᵀ ⊗ I) w = −∇F(x⋆ⁿᵈ)
// and returns y⋆ = Bᵀw. Verifies the stationarity residual (≤ 1e−9) and, when
// a regularizer is supplied, the subgradient membership of the anchor block;
// failure of either signals an inaccurate x_star.
Eigen::VectorXd dual_optimal(const Eigen::VectorXd& x_star,
                             const std::vector<QuadraticCost>& costs, const Graph& g,
                             const Regularizer* reg = nullptr);

// All three residuals at an arbitrary triple; membership is tested with the
// given tolerance.
KktResiduals kkt_residuals(const Eigen::VectorXd& x, const Eigen::VectorXd& zhat,
                           const Eigen::VectorXd& y, const Problem& problem,
                           double membership_tol = 1e-8);

// Full oracle pipeline: centralized solve, dual recovery, residual check.
ReferenceSolution compute_reference(const Problem& problem, double tol = 1e-12,
                                    long max_iters = 500000);

// FNV-1a digest of the problem data (graph, cost matrices, regularizer);
// keys the reference-solution cache.
std::uint64_t problem_hash(const Problem& problem);
std::string problem_hash_hex(const Problem& problem);

}  // namespace dnadmm
