#include "dnadmm/solver.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Cholesky>

#include "dnadmm/errors.hpp"

namespace dnadmm {

GlobalState GlobalState::zeros(const Problem& p) {
  GlobalState s;
  const int d = p.d();
  s.x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p.n()) * d);
  s.y = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p.graph.num_edges() + 1) * d);
  s.zhat = Eigen::VectorXd::Zero(d);
  s.iter = 0;
  return s;
}

void Hyper::validate() const {
  if (mu <= 0.0) throw InvalidParameter("penalty mu must be positive");
  if (eps < 0.0) throw InvalidParameter("damping eps must be nonnegative");
  if (K < 0) throw InvalidParameter("truncation order K must be nonnegative");
  if (max_iters < 1) throw InvalidParameter("max_iters must be at least 1");
  if (std::isfinite(tol) && tol <= 0.0)
    throw InvalidParameter("tolerance must be positive (or non-finite to disable)");
}

namespace {

void check_state_dims(const GlobalState& s, const Problem& p) {
  const int d = p.d();
  if (s.x.size() != static_cast<Eigen::Index>(p.n()) * d)
    throw DimensionMismatch("state: x has wrong length");
  if (s.y.size() != static_cast<Eigen::Index>(p.graph.num_edges() + 1) * d)
    throw DimensionMismatch("state: y has wrong length");
  if (s.zhat.size() != d) throw DimensionMismatch("state: zhat has wrong length");
}

// (1/μ)·B applied to a vector whose first m blocks vanish: only the anchor
// block of the result is populated.
void add_anchor_block(Eigen::VectorXd& out, const Graph& g, const Eigen::VectorXd& block,
                      double scale) {
  out.segment(static_cast<Eigen::Index>(g.anchor) * block.size(), block.size()) +=
      scale * block;
}

}  // namespace

StepDetail admm_step_detail(const GlobalState& s, const Problem& problem, const Hyper& h,
                            const CouplingApplier* coupling) {
  h.validate();
  check_state_dims(s, problem);
  const Graph& g = problem.graph;
  const int d = problem.d();
  const Eigen::VectorXd y_anchor = s.y.tail(d);

  // Prox pre-step on the anchor copy.
  const Eigen::VectorXd theta =
      problem.reg->prox(s.x.segment(static_cast<Eigen::Index>(g.anchor) * d, d) +
                            h.mu * y_anchor,
                        h.mu);

  // The coupling operator may be supplied by the caller (the certification
  // suite injects a corrupted one to prove its checks catch a bad build).
  const CouplingApplier own(g, h.mu);
  const CouplingApplier& cpl = coupling ? *coupling : own;

  // Augmented-Lagrangian gradient ∇F(x) + (1/μ)B(Bᵀx − θ) + By. The coupled
  // quadratic (1/μ)BBᵀx runs through the same neighbor accumulation as the
  // direction recursion below.
  Eigen::VectorXd grad =
      problem.grad_smooth(s.x) + cpl.coupled_quadratic(s.x) + b_apply(g, d, s.y);
  add_anchor_block(grad, g, theta, -1.0 / h.mu);

  // Approximate Newton step through the diagonal/coupling splitting.
  const DiagBlocks D = build_diag_blocks(problem.costs, s.x, g, h.mu, h.eps);
  const Eigen::VectorXd direction = newton_direction(h.K, D, cpl, grad);

  StepDetail out;
  out.next.x = s.x - direction;
  if (!out.next.x.allFinite())
    throw NonFinite("iterate diverged at iteration " + std::to_string(s.iter + 1));

  // Prox post-step and dual ascent.
  out.next.zhat =
      problem.reg->prox(out.next.x.segment(static_cast<Eigen::Index>(g.anchor) * d, d) +
                            h.mu * y_anchor,
                        h.mu);
  Eigen::VectorXd residual = bt_apply(g, d, out.next.x);
  residual.tail(d) -= out.next.zhat;
  out.next.y = s.y + (1.0 / h.mu) * residual;
  if (!out.next.y.allFinite())
    throw NonFinite("dual diverged at iteration " + std::to_string(s.iter + 1));

  out.next.iter = s.iter + 1;
  out.theta = theta;
  out.grad = std::move(grad);
  return out;
}

GlobalState admm_step(const GlobalState& s, const Problem& problem, const Hyper& h) {
  return admm_step_detail(s, problem, h).next;
}

Eigen::VectorXd quadratic_cancellation(const Problem& problem, const Eigen::VectorXd& x_t,
                                       const Eigen::VectorXd& x_next) {
  const Eigen::VectorXd delta = x_next - x_t;
  return problem.hess_smooth_apply((x_t - x_next) + delta);
}

namespace {

// Shared tail of both error-term routes: everything except the Ĥ_t·Δ part.
Eigen::VectorXd error_term_common(const Eigen::VectorXd& x_t,
                                  const Eigen::VectorXd& x_next,
                                  const Eigen::VectorXd& theta,
                                  const Eigen::VectorXd& z_next, const Problem& problem,
                                  const Hyper& h, const Eigen::VectorXd& Hhat_delta) {
  const Graph& g = problem.graph;
  const int d = problem.d();
  const Eigen::VectorXd delta = x_next - x_t;
  // Full Newton matrix applied to Δ: ∇²F·Δ + (1/μ)BBᵀΔ + εΔ.
  Eigen::VectorXd H_delta = problem.hess_smooth_apply(delta) +
                            (1.0 / h.mu) * b_apply(g, d, bt_apply(g, d, delta)) +
                            h.eps * delta;
  Eigen::VectorXd e = quadratic_cancellation(problem, x_t, x_next) + Hhat_delta - H_delta;
  add_anchor_block(e, g, Eigen::VectorXd(z_next - theta), 1.0 / h.mu);
  return e;
}

}  // namespace

Eigen::VectorXd error_term(const Eigen::VectorXd& x_t, const Eigen::VectorXd& x_next,
                           const Eigen::VectorXd& theta, const Eigen::VectorXd& z_next,
                           const Problem& problem, const Hyper& h) {
  const DiagBlocks D = build_diag_blocks(problem.costs, x_t, problem.graph, h.mu, h.eps);
  const CouplingApplier cpl(problem.graph, h.mu);
  const Eigen::MatrixXd approx_inv =
      dense_approx_inverse(h.K, D, cpl.dense(problem.d()));
  const Eigen::VectorXd delta = x_next - x_t;
  const Eigen::VectorXd Hhat_delta = Eigen::LLT<Eigen::MatrixXd>(approx_inv).solve(delta);
  return error_term_common(x_t, x_next, theta, z_next, problem, h, Hhat_delta);
}

Eigen::VectorXd error_term_from_gradient(const Eigen::VectorXd& x_t,
                                         const Eigen::VectorXd& x_next,
                                         const Eigen::VectorXd& theta,
                                         const Eigen::VectorXd& z_next,
                                         const Eigen::VectorXd& grad,
                                         const Problem& problem, const Hyper& h) {
  // The step took x⁺ = x − Ĥ⁻¹·grad, so Ĥ·Δ = −grad identically.
  return error_term_common(x_t, x_next, theta, z_next, problem, h,
                           Eigen::VectorXd(-grad));
}

double eps_theory_bound(double m_f, double M_f, int n, double mu) {
  if (m_f <= 0.0 || M_f < m_f || n < 2 || mu <= 0.0)
    throw InvalidParameter("eps bound: invalid curvature or graph parameters");
  const double base = 2.0 * M_f + (m_f + 2.0 * M_f * (n - 1)) / (mu * m_f);
  return base * base * (m_f + M_f) / (2.0 * m_f * M_f);
}

TheoryParams theory_params(double m_f, double M_f, int n, double mu, double eps, int K,
                           double lambda_min, double beta, double eta,
                           double zeta_frac) {
  if (beta <= 1.0 || eta <= 1.0)
    throw InvalidParameter("rate constants beta and eta must exceed 1");
  if (zeta_frac <= 0.0 || zeta_frac >= 1.0)
    throw InvalidParameter("zeta_frac must lie strictly inside (0,1)");
  if (lambda_min <= 0.0)
    throw InvalidParameter("lambda_min must be positive (connected anchored graph)");
  if (eps <= 0.0) throw InvalidParameter("theory constants need positive eps");

  TheoryParams tp;
  tp.beta = beta;
  tp.eta = eta;
  tp.lambda_min = lambda_min;
  tp.eps_theory = eps_theory_bound(m_f, M_f, n, mu);
  tp.gamma = gamma_bound(n, mu, m_f, M_f, eps, K);

  const double zeta_lo = (m_f + M_f) / (2.0 * m_f * M_f);
  const double zeta_hi = eps / (tp.gamma * tp.gamma);
  if (zeta_hi <= zeta_lo)
    throw EmptyZetaInterval(
        "zeta interval (" + std::to_string(zeta_lo) + ", " + std::to_string(zeta_hi) +
        ") is empty; eps is too small for this gamma");
  tp.zeta = zeta_lo + zeta_frac * (zeta_hi - zeta_lo);

  const double g2 = tp.gamma * tp.gamma;
  const double term1 =
      2.0 * m_f * M_f / (eps * (m_f + M_f)) - 1.0 / (eps * tp.zeta);
  const double term2 = (eps - tp.zeta * g2) * lambda_min * (beta - 1.0) * (eta - 1.0) /
                       (mu * beta * (eps * eps * (eta - 1.0) + eta * g2 * (beta - 1.0)));
  const double term3 = 2.0 * lambda_min / ((m_f + M_f) * mu * beta * eta);
  tp.delta = std::min({term1, term2, term3});
  if (!(tp.delta > 0.0))
    throw InvalidParameter("contraction constant came out nonpositive: delta = " +
                           std::to_string(tp.delta));
  return tp;
}

TheoryParams theory_params_maximized(double m_f, double M_f, int n, double mu,
                                     double eps, int K, double lambda_min) {
  TheoryParams best;
  bool found = false;
  for (int bi = 1; bi <= 10; ++bi) {
    const double beta = 1.0 + 0.9 * bi;
    for (int ei = 1; ei <= 10; ++ei) {
      const double eta = 1.0 + 0.9 * ei;
      for (int zi = 1; zi <= 10; ++zi) {
        const double frac = zi / 11.0;
        TheoryParams tp =
            theory_params(m_f, M_f, n, mu, eps, K, lambda_min, beta, eta, frac);
        if (!found || tp.delta > best.delta) {
          best = tp;
          found = true;
        }
      }
    }
  }
  return best;
}

double lyapunov(const GlobalState& s, const GlobalState& star, double mu, double eps) {
  if (s.x.size() != star.x.size() || s.y.size() != star.y.size())
    throw DimensionMismatch("lyapunov: states have different shapes");
  return eps * (s.x - star.x).squaredNorm() + mu * (s.y - star.y).squaredNorm();
}

IterationTrace run(const Problem& problem, const Hyper& h, const ReferenceSolution* star,
                   bool record_iterates) {
  h.validate();
  const int d = problem.d();
  const Graph& g = problem.graph;
  const SmoothBounds sb = smooth_bounds(problem.costs);
  const double gamma = gamma_bound(problem.n(), h.mu, sb.m_f, sb.M_f, h.eps, h.K);

  GlobalState s = GlobalState::zeros(problem);
  GlobalState star_state;
  double rel_denom = 0.0;
  double lyap_prev = std::numeric_limits<double>::quiet_NaN();
  if (star) {
    star_state.x = stack_copies(star->x_star, problem.n());
    star_state.y = star->y_star;
    star_state.zhat = star->z_star;
    rel_denom = problem.mean_cost_at_blocks(s.x) - star->obj_star;
    lyap_prev = lyapunov(s, star_state, h.mu, h.eps);
  }

  IterationTrace trace;
  if (record_iterates) trace.x_iterates.push_back(s.x);

  for (long t = 0; t < h.max_iters; ++t) {
    StepDetail detail = admm_step_detail(s, problem, h);
    const Eigen::VectorXd e = error_term_from_gradient(
        s.x, detail.next.x, detail.theta, detail.next.zhat, detail.grad, problem, h);

    IterRecord rec;
    rec.iter = t + 1;
    rec.comm_rounds_cum = (t + 1) * static_cast<long>(h.K + 1);
    rec.e_norm = e.norm();
    rec.gamma_dx = gamma * (detail.next.x - s.x).norm();

    const KktResiduals kkt =
        kkt_residuals(detail.next.x, detail.next.zhat, detail.next.y, problem);
    rec.r_a = kkt.r_a;
    rec.r_b_ok = kkt.r_b_ok;
    rec.r_b_margin = kkt.r_b_margin;
    rec.r_c = kkt.r_c;
    const Eigen::VectorXd z_target =
        detail.next.x.segment(static_cast<Eigen::Index>(g.anchor) * d, d) +
        h.mu * detail.next.y.tail(d);
    rec.z_fixed_point = (detail.next.zhat - problem.reg->prox(z_target, h.mu)).norm();

    if (star) {
      const double num = problem.mean_cost_at_blocks(detail.next.x) - star->obj_star;
      rec.rel_cost = rel_denom > 0.0 ? num / rel_denom
                                     : std::numeric_limits<double>::quiet_NaN();
      rec.lyapunov = lyapunov(detail.next, star_state, h.mu, h.eps);
      rec.contraction = lyap_prev > 0.0 ? rec.lyapunov / lyap_prev
                                        : std::numeric_limits<double>::quiet_NaN();
      lyap_prev = rec.lyapunov;
    }

    trace.records.push_back(rec);
    s = std::move(detail.next);
    if (record_iterates) trace.x_iterates.push_back(s.x);

    const double worst = std::max({rec.r_a, rec.r_c, rec.z_fixed_point});
    if (std::isfinite(h.tol) && worst < h.tol) {
      trace.converged = true;
      break;
    }
  }
  trace.final_state = std::move(s);
  return trace;
}

}  // namespace dnadmm
