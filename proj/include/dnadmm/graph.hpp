#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <utility>
#include <vector>

#include <json.hpp>

namespace dnadmm {

/// Undirected communication topology. One agent (the anchor) additionally
/// holds the nonsmooth variable. Edges are stored as (i, j) with i < j in
/// lexicographic order; edge k contributes +1 at row i and -1 at row j of
/// the signed incidence matrix.
struct Graph {
  int n = 0;
  int anchor = 0;
  std::vector<std::pair<int, int>> edges;

  // Derived adjacency, ascending neighbor ids.
  std::vector<std::vector<int>> neighbors;
  std::vector<int> degree;

  static Graph make(int n, std::vector<std::pair<int, int>> edges, int anchor = 0);

  int num_edges() const { return static_cast<int>(edges.size()); }
  bool is_connected() const;

  nlohmann::json to_json() const;
  static Graph from_json(const nlohmann::json& j);
};

/// Samples each unordered pair i.i.d. Bernoulli(p) and resamples with an
/// incremented seed until the graph is connected. Deterministic in
/// (n, p, seed) across platforms.
Graph build_random_connected(int n, double p, std::uint64_t seed, int anchor = 0,
                             int resample_cap = 10000);

/// Signed node-edge incidence matrix (n x m, integer entries).
Eigen::MatrixXi incidence_matrix(const Graph& g);

struct LaplacianParts {
  Eigen::VectorXi diag;     // per-agent degrees
  Eigen::MatrixXi offdiag;  // -1 per edge, symmetric

  Eigen::MatrixXi laplacian() const;
};

LaplacianParts laplacian_parts(const Graph& g);

/// Smallest eigenvalue of L + e_l e_l^T, the anchored Laplacian. Positive
/// exactly when the graph is connected; throws InvalidParameter otherwise.
/// Equals the smallest positive eigenvalue of B^T B.
double lambda_min_anchor(const Graph& g);

// Matrix-free actions of the constraint matrix B = [incidence (x) I_d, e_anchor (x) I_d].
// B^T x stacks one d-block per edge (x^i - x^j) followed by the anchor block x^l.

/// B^T x for stacked x in R^{nd}; result in R^{(m+1)d}.
Eigen::VectorXd bt_apply(const Graph& g, int d, const Eigen::VectorXd& x);

/// B y for y in R^{(m+1)d}; result in R^{nd}.
Eigen::VectorXd b_apply(const Graph& g, int d, const Eigen::VectorXd& y);

/// Distance of y from range(B^T), computed through the projection
/// B^T (B B^T)^{-1} B y with the Kronecker structure of B B^T.
double range_projection_residual(const Graph& g, int d, const Eigen::VectorXd& y);

}  // namespace dnadmm
