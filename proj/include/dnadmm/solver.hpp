#pragma once

#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "dnadmm/problem.hpp"
#include "dnadmm/reference.hpp"
#include "dnadmm/splitting.hpp"

namespace dnadmm {

// Global-form iterate: stacked local copies, edge-space dual (one d-block per
// edge plus the anchor tie), and the nonsmooth variable. The first m blocks
// of z are identically zero, so z and the prox target θ are stored as
// d-vectors only and expanded on the fly.
struct GlobalState {
  Eigen::VectorXd x;     // n·d
  Eigen::VectorXd y;     // (m+1)·d
  Eigen::VectorXd zhat;  // d
  long iter = 0;

  static GlobalState zeros(const Problem& p);
};

struct Hyper {
  double mu = 1.0;   // penalty
  double eps = 1.0;  // proximal damping
  int K = 0;         // truncation order = inner communication rounds
  long max_iters = 5000;
  // Stop when max(stationarity, feasibility, prox fixed-point residual of
  // ẑ) < tol; a non-finite tol disables early stopping.
  double tol = 1e-8;

  void validate() const;
};

// Constants of the linear-rate certificate.
struct TheoryParams {
  double beta = 2.0;
  double eta = 2.0;
  double zeta = 0.0;
  double gamma = 0.0;
  double delta = 0.0;
  double lambda_min = 0.0;
  double eps_theory = 0.0;
};

struct IterRecord {
  long iter = 0;             // 1-based outer iteration count
  long comm_rounds_cum = 0;  // iter · (K+1)
  double rel_cost = std::numeric_limits<double>::quiet_NaN();
  double e_norm = 0.0;       // ‖e_t‖ of the step that produced this iterate
  double gamma_dx = 0.0;     // γ‖x_{t+1} − x_t‖, the bound on e_norm
  double lyapunov = std::numeric_limits<double>::quiet_NaN();
  double contraction = std::numeric_limits<double>::quiet_NaN();  // V_t / V_{t−1}
  double r_a = 0.0;
  bool r_b_ok = false;
  double r_b_margin = 0.0;
  double r_c = 0.0;
  double z_fixed_point = 0.0;  // ‖ẑ − prox(x^l + μ y^{m+1})‖, third stop residual
};

struct IterationTrace {
  std::vector<IterRecord> records;  // one per executed outer iteration
  bool converged = false;
  GlobalState final_state;
  std::vector<Eigen::VectorXd> x_iterates;  // x_0, x_1, … when requested
};

// One outer iteration plus the transients the diagnostics need.
struct StepDetail {
  GlobalState next;
  Eigen::VectorXd theta;  // prox target of the pre-step (d-vector)
  Eigen::VectorXd grad;   // augmented-Lagrangian gradient the step descended
};

// A single outer iteration in the given order: prox pre-step, approximate
// Newton primal update, prox post-step, dual ascent. `coupling` overrides the
// neighbor-sum operator (the certification suite passes a corrupted one);
// null means the correct operator for the problem graph.
StepDetail admm_step_detail(const GlobalState& s, const Problem& problem,
                            const Hyper& h, const CouplingApplier* coupling = nullptr);
GlobalState admm_step(const GlobalState& s, const Problem& problem, const Hyper& h);

// Iterate from the zero state until the stopping rule or max_iters. `star`
// enables the optimum-relative columns (rel_cost, lyapunov, contraction);
// `record_iterates` additionally keeps every x_t (memory scales with
// max_iters — meant for equivalence tests, not sweeps).
IterationTrace run(const Problem& problem, const Hyper& h,
                   const ReferenceSolution* star = nullptr,
                   bool record_iterates = false);

// Inexactness of one approximate-Newton step,
//   e_t = [∇F(x_t) + ∇²F(x_t)Δ − ∇F(x⁺)] + (Ĥ_t − H_t)Δ + (1/μ)B(z⁺ − θ),
// Δ = x⁺ − x_t. Definitional route: materializes the truncated inverse and
// solves against it, so it is an independent check on the step (dense oracle,
// n·d ≤ 400).
Eigen::VectorXd error_term(const Eigen::VectorXd& x_t, const Eigen::VectorXd& x_next,
                           const Eigen::VectorXd& theta, const Eigen::VectorXd& z_next,
                           const Problem& problem, const Hyper& h);

// Same quantity via the in-step identity Ĥ_t Δ = −grad (exact for iterates
// produced by admm_step); matrix-free, used for the per-iteration trace.
Eigen::VectorXd error_term_from_gradient(const Eigen::VectorXd& x_t,
                                         const Eigen::VectorXd& x_next,
                                         const Eigen::VectorXd& theta,
                                         const Eigen::VectorXd& z_next,
                                         const Eigen::VectorXd& grad,
                                         const Problem& problem, const Hyper& h);

// First bracket of e_t. The gradient of a quadratic is affine, so the
// remainder collapses to ∇²F·((x_t − x⁺) + Δ), evaluated in exactly that
// factored form; it vanishes identically (down to the last bit).
Eigen::VectorXd quadratic_cancellation(const Problem& problem,
                                       const Eigen::VectorXd& x_t,
                                       const Eigen::VectorXd& x_next);

// Strict lower bound on ε required by the linear-rate theorem:
//   [2M_f + (m_f + 2M_f(n−1))/(μ m_f)]² · (m_f+M_f)/(2 m_f M_f).
double eps_theory_bound(double m_f, double M_f, int n, double mu);

// Assemble the certificate constants: γ, the ζ interval (interpolated by
// zeta_frac), and δ as the minimum of the three rate terms. Throws
// EmptyZetaInterval when ε/γ² does not exceed the ζ lower bound.
TheoryParams theory_params(double m_f, double M_f, int n, double mu, double eps,
                           int K, double lambda_min, double beta = 2.0,
                           double eta = 2.0, double zeta_frac = 0.5);

// Coarse 10×10×10 grid over β, η ∈ (1,10] and the ζ interval, keeping the
// parameters that maximize δ.
TheoryParams theory_params_maximized(double m_f, double M_f, int n, double mu,
                                     double eps, int K, double lambda_min);

// ε-weighted primal plus μ-weighted dual squared distance to the optimum.
double lyapunov(const GlobalState& s, const GlobalState& star, double mu, double eps);

}  // namespace dnadmm
