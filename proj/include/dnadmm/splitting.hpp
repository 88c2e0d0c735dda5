#pragma once

#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "dnadmm/graph.hpp"
#include "dnadmm/objective.hpp"

namespace dnadmm {

// Block-diagonal part of the damped Newton matrix. Block i is
//
//   D^{ii} = ∇²f^i(x^i) + (1/μ)(𝟙[i = anchor] + 2·deg(i))·I + ε·I,
//
// symmetric positive definite with λ_min ≥ m_f + ε. Each block is factored
// once on construction and the factorization is reused across all inner
// solves of an outer iteration.
class DiagBlocks {
 public:
  DiagBlocks(std::vector<Eigen::MatrixXd> blocks);

  int n() const { return static_cast<int>(blocks_.size()); }
  int d() const { return d_; }

  const Eigen::MatrixXd& block(int i) const { return blocks_.at(i); }

  // D⁻¹ h applied blockwise to a stacked n·d vector.
  Eigen::VectorXd solve(const Eigen::VectorXd& h) const;

  // (D^{ii})⁻¹ h^i for a single agent (used by the message-passing agents).
  Eigen::VectorXd solve_block(int i, const Eigen::VectorXd& h_i) const;

  // Dense n·d × n·d assemblies; test/certification oracles only.
  Eigen::MatrixXd dense() const;
  Eigen::MatrixXd dense_inv_sqrt() const;

 private:
  std::vector<Eigen::MatrixXd> blocks_;
  std::vector<Eigen::LLT<Eigen::MatrixXd>> factors_;
  int d_ = 0;
};

// The per-agent diagonal block above, assembled from purely local data.
Eigen::MatrixXd diag_block(const Eigen::MatrixXd& local_hessian, int degree,
                           bool is_anchor, double mu, double eps);

DiagBlocks build_diag_blocks(const std::vector<QuadraticCost>& costs,
                             const Eigen::VectorXd& x, const Graph& g, double mu,
                             double eps);

// Off-diagonal remainder N = D − H = (1/μ)(L_dia + L_off) ⊗ I_d, applied
// matrix-free: block i of N·u is (1/μ)(deg(i)·u^i + Σ_{j ∈ 𝒩(i)} u^j), the
// neighbor sum accumulated in ascending agent id. N ⪰ 0 (it is a scaled
// signless Laplacian). This is the communication object: one application
// costs each agent one d-vector exchange with every neighbor.
class CouplingApplier {
 public:
  CouplingApplier(const Graph& g, double mu);

  Eigen::VectorXd apply(const Eigen::VectorXd& u) const;

  // (1/μ)(L + e_l e_lᵀ)⊗I applied to a stacked vector, i.e. the coupled
  // quadratic part of the augmented-Lagrangian gradient. Block i is
  //   (1/μ)(2·deg(i) + 𝟙[i = anchor])·x^i − (N x)^i,
  // so it consumes the same neighbor accumulation as apply(): a wrong
  // neighbor sign corrupts the gradient and the direction recursion alike.
  Eigen::VectorXd coupled_quadratic(const Eigen::VectorXd& x) const;

  // Dense N for the test/certification oracles (d inferred from callers).
  Eigen::MatrixXd dense(int d) const;

  const Graph& graph() const { return *graph_; }
  double mu() const { return mu_; }

  // Sign on the neighbor-sum term. +1 is the algorithm; the certification
  // suite flips it to −1 to prove its checks catch a wrong implementation.
  // The flip reaches every consumer of the accumulation — coupled_quadratic
  // and the recursion — the way a sign bug in one shared subroutine would.
  double neighbor_sign = 1.0;

 private:
  const Graph* graph_;
  double mu_;
};

Eigen::VectorXd apply_coupling(const CouplingApplier& cpl, const Eigen::VectorXd& u);

// K-term truncated expansion of H⁻¹ applied to h via the recursion
//   u(0) = D⁻¹h,   u(k+1) = D⁻¹h + D⁻¹·N·u(k),
// returning u(K). Exactly K applications of the coupling, i.e. K
// communication rounds.
Eigen::VectorXd newton_direction(int K, const DiagBlocks& D, const CouplingApplier& cpl,
                                 const Eigen::VectorXd& h);

// Dense truncated inverse D^{−1/2} Σ_{i=0..K} (D^{−1/2} N D^{−1/2})^i D^{−1/2}.
// Oracle only; capped at n·d ≤ 400.
Eigen::MatrixXd dense_approx_inverse(int K, const DiagBlocks& D,
                                     const Eigen::MatrixXd& N_dense);

// Largest singular value of D^{−1/2} N D^{−1/2}, measured densely (oracle;
// same size cap as above).
double coupling_spectral_norm(const DiagBlocks& D, const Eigen::MatrixXd& N_dense);

// Closed-form upper bound on that singular value:
//   2(n−1) / (μ(m_f+ε) + 2(n−1)),  strictly below 1.
double spectral_radius_bound(int n, double mu, double m_f, double eps);

// Error-amplification constant of the approximate-Newton step:
//   γ = 2M_f + 1/μ + (M_f + ε + (1 + 2(n−1))/μ)·ratio^{K+1}
// with ratio = spectral_radius_bound(n, μ, m_f, ε).
double gamma_bound(int n, double mu, double m_f, double M_f, double eps, int K);

}  // namespace dnadmm
