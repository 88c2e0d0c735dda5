#include "dnadmm/certify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "dnadmm/errors.hpp"
#include "dnadmm/splitting.hpp"

namespace dnadmm {

namespace {

struct Meter {
  CheckResult result;

  explicit Meter(std::string name, double tolerance) {
    result.name = std::move(name);
    result.tolerance = tolerance;
    result.worst_margin = -std::numeric_limits<double>::infinity();
  }

  void observe(double margin) {
    result.worst_margin = std::max(result.worst_margin, margin);
    ++result.iterations;
  }

  CheckResult finish() {
    result.pass = result.iterations > 0 && result.worst_margin <= result.tolerance;
    if (result.iterations == 0) result.note = "never evaluated";
    return result;
  }
};

}  // namespace

CertificateReport certify(const Problem& problem, const Hyper& h,
                          const TheoryParams& theory, long iters,
                          const ReferenceSolution& star, Fault fault) {
  h.validate();
  if (iters < 1) throw InvalidParameter("certification needs at least one iteration");
  const Graph& g = problem.graph;
  const int d = problem.d();
  const SmoothBounds sb = smooth_bounds(problem.costs);
  const double radius_bound = spectral_radius_bound(problem.n(), h.mu, sb.m_f, h.eps);

  Meter spectral("coupling-spectral-radius", 1e-10);
  Meter range("dual-in-row-space", 1e-9);
  Meter membership("subgradient-membership", 1e-8);
  Meter stationarity("stationarity-identity", 1e-8);
  Meter error_bound("error-bound", 1e-10);
  Meter contraction("contraction", 1e-9);

  // The iteration may be corrupted; every check below uses correct operators.
  CouplingApplier stepping(g, h.mu);
  if (fault == Fault::flip_coupling_sign) stepping.neighbor_sign = -1.0;
  const CouplingApplier honest(g, h.mu);
  const Eigen::MatrixXd N_dense = honest.dense(d);

  GlobalState star_state;
  star_state.x = stack_copies(star.x_star, problem.n());
  star_state.y = star.y_star;
  star_state.zhat = star.z_star;
  const Eigen::VectorXd grad_at_star = problem.grad_smooth(star_state.x);

  GlobalState s = GlobalState::zeros(problem);
  double lyap = lyapunov(s, star_state, h.mu, h.eps);
  std::string divergence_note;

  for (long t = 0; t < iters; ++t) {
    const DiagBlocks D = build_diag_blocks(problem.costs, s.x, g, h.mu, h.eps);
    spectral.observe(coupling_spectral_norm(D, N_dense) - radius_bound);

    StepDetail detail;
    try {
      detail = admm_step_detail(s, problem, h, &stepping);
    } catch (const NonFinite& ex) {
      divergence_note = ex.what();
      break;
    }
    const GlobalState& next = detail.next;
    const Eigen::VectorXd e =
        error_term(s.x, next.x, detail.theta, next.zhat, problem, h);

    error_bound.observe(e.norm() - theory.gamma * (next.x - s.x).norm());
    const Eigen::VectorXd identity = problem.grad_smooth(next.x) - grad_at_star +
                                     b_apply(g, d, next.y - star_state.y) + e +
                                     h.eps * (next.x - s.x);
    stationarity.observe(identity.norm());
    range.observe(range_projection_residual(g, d, next.y));
    membership.observe(problem.reg->subgradient_margin(next.zhat, next.y.tail(d), 1e-8));

    const double lyap_next = lyapunov(next, star_state, h.mu, h.eps);
    contraction.observe(lyap_next - lyap / (1.0 + theory.delta));
    lyap = lyap_next;
    s = next;
  }

  CertificateReport report;
  report.checks = {spectral.finish(),      range.finish(),       membership.finish(),
                   stationarity.finish(),  error_bound.finish(), contraction.finish()};
  if (!divergence_note.empty())
    for (auto& c : report.checks)
      c.note = c.note.empty() ? "run stopped early: " + divergence_note : c.note;
  report.pass = std::all_of(report.checks.begin(), report.checks.end(),
                            [](const CheckResult& c) { return c.pass; });
  return report;
}

nlohmann::json CertificateReport::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& c : checks)
    arr.push_back({{"name", c.name},
                   {"iterations", c.iterations},
                   {"worst_margin", c.worst_margin},
                   {"tolerance", c.tolerance},
                   {"pass", c.pass},
                   {"note", c.note}});
  return {{"pass", pass}, {"checks", arr}};
}

std::string CertificateReport::table() const {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof line, "%-26s %10s %14s %12s  %s\n", "check", "iters",
                "worst margin", "tolerance", "verdict");
  out += line;
  out += std::string(76, '-') + "\n";
  for (const auto& c : checks) {
    std::snprintf(line, sizeof line, "%-26s %10ld %14.3e %12.1e  %s%s%s\n",
                  c.name.c_str(), c.iterations, c.worst_margin, c.tolerance,
                  c.pass ? "pass" : "FAIL", c.note.empty() ? "" : "  # ",
                  c.note.c_str());
    out += line;
  }
  std::snprintf(line, sizeof line, "overall: %s\n", pass ? "pass" : "FAIL");
  out += line;
  return out;
}

}  // namespace dnadmm
