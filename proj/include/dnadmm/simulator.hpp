#pragma once

#include <map>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "dnadmm/problem.hpp"
#include "dnadmm/reference.hpp"
#include "dnadmm/solver.hpp"

namespace dnadmm {

// What one agent owns: its local copy, the aggregated edge-dual block
// φ^i (block i of A·y^[m], which replaces explicit edge duals), and — at the
// anchor only — the tie dual y^{m+1}. Column sums of the incidence matrix
// vanish, so Σ_i φ^i = 0 throughout a run.
struct AgentState {
  Eigen::VectorXd x;
  Eigen::VectorXd phi;
  Eigen::VectorXd y_extra;  // empty except at the anchor
};

enum class MsgTag { X, U, XNEXT };

struct RoundMessage {
  int sender = -1;
  int receiver = -1;
  MsgTag tag = MsgTag::X;
  long round = 0;  // inner index k for U, outer iteration for X / XNEXT
  Eigen::VectorXd payload;
};

// One single-slot buffer per directed edge. Posting to an unread slot,
// posting off-graph, or consuming with an unexpected tag is a protocol
// violation — these catch ordering bugs in schedulers.
class Mailboxes {
 public:
  Mailboxes(const Graph& g, int payload_dim);

  void post(RoundMessage m);
  Eigen::VectorXd take(int receiver, int sender, MsgTag tag, long round);

 private:
  struct Slot {
    bool full = false;
    MsgTag tag = MsgTag::X;
    long round = 0;
    Eigen::VectorXd payload;
  };

  int slot_of(int sender, int receiver) const;

  const Graph* graph_;
  int dim_;
  std::map<std::pair<int, int>, int> edge_index_;
  std::vector<Slot> slots_;  // [2e] low→high endpoint, [2e+1] high→low
};

struct CommStats {
  std::vector<long> vectors_sent;  // d-vector broadcasts per agent
  long message_rounds = 0;         // synchronous rounds executed
  long iterations = 0;

  nlohmann::json to_json() const;
};

// Broadcast rounds per agent per outer iteration: K inner exchanges plus the
// single iterate exchange (the new iterate doubles as the next iteration's
// starting point, so it is counted once).
long comm_rounds_per_iteration(int K);

struct AgentTrace {
  std::vector<Eigen::VectorXd> x;  // x_0, x_1, …, x_T for this agent
};

enum class Scheduler { serial, parallel };

struct DistributedRun {
  std::vector<IterRecord> records;  // same schema as the global-form trace
  std::vector<AgentTrace> agents;
  std::vector<AgentState> final_agents;
  CommStats comm;
  Eigen::VectorXd final_x;        // stacked view, for convergence checks
  Eigen::VectorXd final_zhat;     // anchor's nonsmooth variable
  Eigen::VectorXd final_y_extra;  // anchor's tie dual
};

// Execute the agent-form algorithm for exactly `iterations` outer
// iterations. Every quantity an agent uses is local or arrives through the
// mailboxes; the returned records are assembled afterwards from the per-agent
// histories (diagnostics only — the Lyapunov columns stay NaN because agents
// never materialize edge duals). `star` enables the rel_cost column. The two
// schedulers are required to produce bitwise-identical output.
DistributedRun run_distributed(const Problem& problem, const Hyper& h, long iterations,
                               const ReferenceSolution* star = nullptr,
                               Scheduler scheduler = Scheduler::serial);

}  // namespace dnadmm
