#include "dnadmm/simulator.hpp"

#include <atomic>
#include <barrier>
#include <cmath>
#include <exception>
#include <mutex>
#include <string>
#include <thread>

#include "dnadmm/errors.hpp"
#include "dnadmm/splitting.hpp"

namespace dnadmm {

Mailboxes::Mailboxes(const Graph& g, int payload_dim) : graph_(&g), dim_(payload_dim) {
  if (payload_dim < 1) throw InvalidParameter("mailboxes: payload dimension must be positive");
  for (int e = 0; e < g.num_edges(); ++e) edge_index_[g.edges[e]] = e;
  slots_.resize(2 * static_cast<std::size_t>(g.num_edges()));
}

int Mailboxes::slot_of(int sender, int receiver) const {
  if (sender == receiver || sender < 0 || receiver < 0 || sender >= graph_->n ||
      receiver >= graph_->n)
    throw ProtocolViolation("message endpoints " + std::to_string(sender) + "->" +
                            std::to_string(receiver) + " are not valid agents");
  const auto key = std::minmax(sender, receiver);
  const auto it = edge_index_.find({key.first, key.second});
  if (it == edge_index_.end())
    throw ProtocolViolation("message " + std::to_string(sender) + "->" +
                            std::to_string(receiver) + " does not follow a graph edge");
  return 2 * it->second + (sender == key.first ? 0 : 1);
}

void Mailboxes::post(RoundMessage m) {
  const int s = slot_of(m.sender, m.receiver);
  if (m.payload.size() != dim_)
    throw ProtocolViolation("message payload has wrong dimension");
  Slot& slot = slots_[s];
  if (slot.full)
    throw ProtocolViolation("unread message in slot " + std::to_string(m.sender) + "->" +
                            std::to_string(m.receiver) + " would be overwritten");
  slot.full = true;
  slot.tag = m.tag;
  slot.round = m.round;
  slot.payload = std::move(m.payload);
}

Eigen::VectorXd Mailboxes::take(int receiver, int sender, MsgTag tag, long round) {
  Slot& slot = slots_[slot_of(sender, receiver)];
  if (!slot.full)
    throw ProtocolViolation("no message waiting in slot " + std::to_string(sender) +
                            "->" + std::to_string(receiver));
  if (slot.tag != tag || slot.round != round)
    throw ProtocolViolation("message in slot " + std::to_string(sender) + "->" +
                            std::to_string(receiver) +
                            " has unexpected tag or round index");
  slot.full = false;
  return std::move(slot.payload);
}

nlohmann::json CommStats::to_json() const {
  return {{"vectors_sent", vectors_sent},
          {"message_rounds", message_rounds},
          {"iterations", iterations}};
}

long comm_rounds_per_iteration(int K) {
  if (K < 0) throw InvalidParameter("truncation order K must be nonnegative");
  return static_cast<long>(K) + 1;
}

namespace {

// Everything one agent owns during a run, plus the histories the
// post-run diagnostics are assembled from.
struct AgentCore {
  int id = -1;
  bool is_anchor = false;
  const QuadraticCost* cost = nullptr;
  const std::vector<int>* nbrs = nullptr;
  int degree = 0;
  Eigen::LLT<Eigen::MatrixXd> D;

  Eigen::VectorXd x, phi, y_extra;
  std::vector<Eigen::VectorXd> neighbor_x;  // aligned with *nbrs

  // Per-iteration transients.
  Eigen::VectorXd h, base, u, x_next, theta, z_next;

  // Histories (each agent appends only its own rows — race-free).
  std::vector<Eigen::VectorXd> x_hist;    // x_0 … x_T
  std::vector<Eigen::VectorXd> h_hist;    // gradient used at iteration t
  std::vector<Eigen::VectorXd> phi_hist;  // φ_{t+1}
  std::vector<Eigen::VectorXd> theta_hist, z_hist, yx_hist;  // anchor only
  long sent = 0;
};

struct SimContext {
  const Problem* problem = nullptr;
  Hyper hyper;
  long iterations = 0;
  int d = 0;
  Mailboxes mail;
  std::vector<AgentCore> agents;

  std::atomic<bool> abort{false};
  std::exception_ptr error;
  std::mutex error_mutex;

  SimContext(const Problem& p, const Hyper& h, long iters)
      : problem(&p), hyper(h), iterations(iters), d(p.d()), mail(p.graph, p.d()) {}

  void fail(std::exception_ptr e) {
    {
      std::lock_guard<std::mutex> lock(error_mutex);
      if (!error) error = std::move(e);
    }
    abort.store(true, std::memory_order_release);
  }

  // ---- phases; each touches only agent i's state plus its mailbox slots ----

  void phase_prep(int i) {
    AgentCore& a = agents[i];
    a.h = a.cost->gradient(a.x);
    Eigen::VectorXd cons = static_cast<double>(a.degree) * a.x;
    for (const auto& xj : a.neighbor_x) cons -= xj;
    a.h += cons / hyper.mu + a.phi;
    if (a.is_anchor) {
      a.theta = problem->reg->prox(a.x + hyper.mu * a.y_extra, hyper.mu);
      a.h += (a.x - a.theta) / hyper.mu + a.y_extra;
    }
    a.base = a.D.solve(a.h);
    a.u = a.base;
  }

  void phase_post_u(int i, int k) {
    AgentCore& a = agents[i];
    for (int j : *a.nbrs) {
      mail.post({a.id, j, MsgTag::U, k, a.u});
      ++a.sent;
    }
  }

  void phase_recv_u(int i, int k) {
    AgentCore& a = agents[i];
    Eigen::VectorXd acc = static_cast<double>(a.degree) * a.u;
    for (int j : *a.nbrs) acc += mail.take(a.id, j, MsgTag::U, k);
    a.u = a.base + a.D.solve(Eigen::VectorXd(acc / hyper.mu));
  }

  void phase_post_x(int i, long t) {
    AgentCore& a = agents[i];
    a.x_next = a.x - a.u;
    if (!a.x_next.allFinite())
      throw NonFinite("agent " + std::to_string(a.id) + " diverged at iteration " +
                      std::to_string(t + 1));
    for (int j : *a.nbrs) {
      mail.post({a.id, j, MsgTag::XNEXT, t, a.x_next});
      ++a.sent;
    }
  }

  void phase_recv_x(int i, long t) {
    AgentCore& a = agents[i];
    Eigen::VectorXd acc = static_cast<double>(a.degree) * a.x_next;
    for (std::size_t idx = 0; idx < a.nbrs->size(); ++idx) {
      Eigen::VectorXd xj = mail.take(a.id, (*a.nbrs)[idx], MsgTag::XNEXT, t);
      acc -= xj;
      a.neighbor_x[idx] = std::move(xj);  // doubles as next iteration's X
    }
    a.phi += acc / hyper.mu;
    if (a.is_anchor) {
      a.z_next = problem->reg->prox(a.x_next + hyper.mu * a.y_extra, hyper.mu);
      a.y_extra += (a.x_next - a.z_next) / hyper.mu;
      a.theta_hist.push_back(a.theta);
      a.z_hist.push_back(a.z_next);
      a.yx_hist.push_back(a.y_extra);
    }
    a.x = a.x_next;
    a.x_hist.push_back(a.x);
    a.h_hist.push_back(a.h);
    a.phi_hist.push_back(a.phi);
  }
};

void run_serial(SimContext& ctx) {
  const int n = ctx.problem->n();
  for (long t = 0; t < ctx.iterations; ++t) {
    for (int i = 0; i < n; ++i) ctx.phase_prep(i);
    for (int k = 0; k < ctx.hyper.K; ++k) {
      for (int i = 0; i < n; ++i) ctx.phase_post_u(i, k);
      for (int i = 0; i < n; ++i) ctx.phase_recv_u(i, k);
    }
    for (int i = 0; i < n; ++i) ctx.phase_post_x(i, t);
    for (int i = 0; i < n; ++i) ctx.phase_recv_x(i, t);
  }
}

void run_parallel(SimContext& ctx) {
  const int n = ctx.problem->n();
  std::barrier sync(n);

  auto worker = [&](int i) {
    auto guarded = [&](auto&& phase) {
      if (!ctx.abort.load(std::memory_order_acquire)) {
        try {
          phase();
        } catch (...) {
          ctx.fail(std::current_exception());
        }
      }
    };
    // Every worker passes the same number of barriers per iteration, so an
    // abort raised anywhere is observed by all workers at the iteration
    // boundary and they leave together.
    for (long t = 0; t < ctx.iterations; ++t) {
      guarded([&] { ctx.phase_prep(i); });
      for (int k = 0; k < ctx.hyper.K; ++k) {
        guarded([&] { ctx.phase_post_u(i, k); });
        sync.arrive_and_wait();
        guarded([&] { ctx.phase_recv_u(i, k); });
        sync.arrive_and_wait();
      }
      guarded([&] { ctx.phase_post_x(i, t); });
      sync.arrive_and_wait();
      guarded([&] { ctx.phase_recv_x(i, t); });
      sync.arrive_and_wait();
      if (ctx.abort.load(std::memory_order_acquire)) break;
    }
  };

  std::vector<std::thread> pool;
  pool.reserve(n);
  for (int i = 0; i < n; ++i) pool.emplace_back(worker, i);
  for (auto& th : pool) th.join();
  if (ctx.error) std::rethrow_exception(ctx.error);
}

}  // namespace

DistributedRun run_distributed(const Problem& problem, const Hyper& h, long iterations,
                               const ReferenceSolution* star, Scheduler scheduler) {
  h.validate();
  if (iterations < 0) throw InvalidParameter("iteration count must be nonnegative");
  const Graph& g = problem.graph;
  const int n = problem.n();
  const int d = problem.d();

  SimContext ctx(problem, h, iterations);
  ctx.agents.resize(n);
  for (int i = 0; i < n; ++i) {
    AgentCore& a = ctx.agents[i];
    a.id = i;
    a.is_anchor = (i == g.anchor);
    a.cost = &problem.costs[i];
    a.nbrs = &g.neighbors[i];
    a.degree = g.degree[i];
    a.D.compute(diag_block(a.cost->hessian(), a.degree, a.is_anchor, h.mu, h.eps));
    if (a.D.info() != Eigen::Success)
      throw DegenerateCurvature("agent " + std::to_string(i) +
                                ": local block is not positive definite");
    a.x = Eigen::VectorXd::Zero(d);
    a.phi = Eigen::VectorXd::Zero(d);
    if (a.is_anchor) a.y_extra = Eigen::VectorXd::Zero(d);
    a.neighbor_x.assign(a.nbrs->size(), Eigen::VectorXd::Zero(d));
    a.x_hist.push_back(a.x);
  }

  if (scheduler == Scheduler::serial)
    run_serial(ctx);
  else
    run_parallel(ctx);

  // ---- assemble the run view and the diagnostic records ----
  DistributedRun out;
  out.comm.vectors_sent.resize(n);
  for (int i = 0; i < n; ++i) out.comm.vectors_sent[i] = ctx.agents[i].sent;
  out.comm.iterations = iterations;
  out.comm.message_rounds = iterations * comm_rounds_per_iteration(h.K);

  out.agents.resize(n);
  for (int i = 0; i < n; ++i) out.agents[i].x = ctx.agents[i].x_hist;
  out.final_agents.resize(n);
  for (int i = 0; i < n; ++i)
    out.final_agents[i] = {ctx.agents[i].x, ctx.agents[i].phi, ctx.agents[i].y_extra};

  const AgentCore& anchor = ctx.agents[g.anchor];
  out.final_x.resize(static_cast<Eigen::Index>(n) * d);
  for (int i = 0; i < n; ++i) out.final_x.segment(i * d, d) = ctx.agents[i].x;
  out.final_zhat = anchor.z_hist.empty() ? Eigen::VectorXd::Zero(d) : anchor.z_hist.back();
  out.final_y_extra =
      anchor.yx_hist.empty() ? Eigen::VectorXd::Zero(d) : anchor.yx_hist.back();

  const SmoothBounds sb = smooth_bounds(problem.costs);
  const double gamma = gamma_bound(n, h.mu, sb.m_f, sb.M_f, h.eps, h.K);
  double rel_denom = 0.0;
  if (star)
    rel_denom = problem.mean_cost_at_blocks(
                    Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n) * d)) -
                star->obj_star;

  auto stack_at = [&](const std::vector<Eigen::VectorXd> AgentCore::* field, long t) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(n) * d);
    for (int i = 0; i < n; ++i) v.segment(i * d, d) = (ctx.agents[i].*field)[t];
    return v;
  };

  out.records.reserve(iterations);
  for (long t = 0; t < iterations; ++t) {
    const Eigen::VectorXd x_t = stack_at(&AgentCore::x_hist, t);
    const Eigen::VectorXd x_n = stack_at(&AgentCore::x_hist, t + 1);
    const Eigen::VectorXd h_t = stack_at(&AgentCore::h_hist, t);
    const Eigen::VectorXd& theta = anchor.theta_hist[t];
    const Eigen::VectorXd& z_n = anchor.z_hist[t];
    const Eigen::VectorXd& y_x = anchor.yx_hist[t];
    const Eigen::VectorXd e =
        error_term_from_gradient(x_t, x_n, theta, z_n, h_t, problem, h);

    IterRecord rec;
    rec.iter = t + 1;
    rec.comm_rounds_cum = (t + 1) * comm_rounds_per_iteration(h.K);
    rec.e_norm = e.norm();
    rec.gamma_dx = gamma * (x_n - x_t).norm();

    // Stationarity from the agents' own dual bookkeeping: block i of
    // ∇F(x⁺) + By⁺ is ∇f^i(x⁺^i) + φ⁺^i (+ y⁺^{m+1} at the anchor).
    Eigen::VectorXd stat(static_cast<Eigen::Index>(n) * d);
    for (int i = 0; i < n; ++i)
      stat.segment(i * d, d) = problem.costs[i].gradient(x_n.segment(i * d, d)) +
                               ctx.agents[i].phi_hist[t];
    stat.segment(static_cast<Eigen::Index>(g.anchor) * d, d) += y_x;
    rec.r_a = stat.norm();

    Eigen::VectorXd gap = bt_apply(g, d, x_n);
    gap.tail(d) -= z_n;
    rec.r_c = gap.norm();
    rec.r_b_margin = problem.reg->subgradient_margin(z_n, y_x, 1e-8);
    rec.r_b_ok = rec.r_b_margin <= 1e-8;
    rec.z_fixed_point =
        (z_n - problem.reg->prox(
                   Eigen::VectorXd(x_n.segment(static_cast<Eigen::Index>(g.anchor) * d,
                                               d) +
                                   h.mu * y_x),
                   h.mu))
            .norm();
    if (star)
      rec.rel_cost = rel_denom > 0.0
                         ? (problem.mean_cost_at_blocks(x_n) - star->obj_star) / rel_denom
                         : std::numeric_limits<double>::quiet_NaN();
    out.records.push_back(rec);
  }
  return out;
}

}  // namespace dnadmm
