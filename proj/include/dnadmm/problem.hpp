#pragma once

#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "dnadmm/errors.hpp"
#include "dnadmm/graph.hpp"
#include "dnadmm/objective.hpp"

namespace dnadmm {

// One consensus problem instance: a connected agent graph, one quadratic cost
// per agent, and a shared (possibly nonsmooth) regularizer applied at the
// anchor. All agents share the decision dimension d.
struct Problem {
  Graph graph;
  std::vector<QuadraticCost> costs;
  std::shared_ptr<const Regularizer> reg;

  Problem(Graph g, std::vector<QuadraticCost> cs, std::shared_ptr<const Regularizer> r)
      : graph(std::move(g)), costs(std::move(cs)), reg(std::move(r)) {
    if (!reg) throw InvalidParameter("problem: regularizer is null");
    if (static_cast<int>(costs.size()) != graph.n)
      throw DimensionMismatch("problem: need exactly one cost per agent");
    for (std::size_t i = 1; i < costs.size(); ++i)
      if (costs[i].dim() != costs[0].dim())
        throw DimensionMismatch("problem: costs disagree on decision dimension");
  }

  int n() const { return graph.n; }
  int d() const { return static_cast<int>(costs[0].dim()); }

  // Gradient of the separable smooth part at a stacked iterate (n*d entries,
  // agent i owning the slice [i*d, (i+1)*d)).
  Eigen::VectorXd grad_smooth(const Eigen::VectorXd& x) const {
    const int dd = d();
    if (x.size() != static_cast<Eigen::Index>(n()) * dd)
      throw DimensionMismatch("grad_smooth: stacked iterate has wrong length");
    Eigen::VectorXd g(x.size());
    for (int i = 0; i < n(); ++i)
      g.segment(i * dd, dd) = costs[i].gradient(x.segment(i * dd, dd));
    return g;
  }

  // Block-diagonal Hessian of the smooth part applied to a stacked vector.
  Eigen::VectorXd hess_smooth_apply(const Eigen::VectorXd& v) const {
    const int dd = d();
    if (v.size() != static_cast<Eigen::Index>(n()) * dd)
      throw DimensionMismatch("hess_smooth_apply: stacked vector has wrong length");
    Eigen::VectorXd out(v.size());
    for (int i = 0; i < n(); ++i)
      out.segment(i * dd, dd) = costs[i].hessian() * v.segment(i * dd, dd);
    return out;
  }

  // Sum of the per-agent smooth costs evaluated at one shared point.
  double smooth_value_at(const Eigen::VectorXd& point) const {
    double total = 0.0;
    for (const auto& c : costs) total += c.value(point);
    return total;
  }

  // Mean over agents of the full objective evaluated at each agent's own block.
  double mean_cost_at_blocks(const Eigen::VectorXd& x) const {
    const int dd = d();
    if (x.size() != static_cast<Eigen::Index>(n()) * dd)
      throw DimensionMismatch("mean_cost_at_blocks: stacked iterate has wrong length");
    double total = 0.0;
    for (int i = 0; i < n(); ++i)
      total += global_cost(costs, *reg, x.segment(i * dd, dd));
    return total / n();
  }
};

}  // namespace dnadmm
