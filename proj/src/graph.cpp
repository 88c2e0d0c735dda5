#include "dnadmm/graph.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <set>
#include <string>

#include "dnadmm/errors.hpp"

namespace dnadmm {

namespace {

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int a) {
    while (parent[a] != a) {
      parent[a] = parent[parent[a]];
      a = parent[a];
    }
    return a;
  }
  bool unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[b] = a;
    return true;
  }
};

bool edges_connect(int n, const std::vector<std::pair<int, int>>& edges) {
  UnionFind uf(n);
  int components = n;
  for (const auto& [i, j] : edges)
    if (uf.unite(i, j)) --components;
  return components == 1;
}

// Uniform double in [0, 1) from the top 53 bits of the generator output;
// unlike std::uniform_real_distribution this is identical across standard
// library implementations.
double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace

Graph Graph::make(int n, std::vector<std::pair<int, int>> edges, int anchor) {
  if (n < 2) throw InvalidParameter("graph needs at least 2 agents, got " + std::to_string(n));
  if (anchor < 0 || anchor >= n)
    throw InvalidParameter("anchor " + std::to_string(anchor) + " out of range");

  for (auto& [i, j] : edges) {
    if (i == j) throw InvalidParameter("self-loop at agent " + std::to_string(i));
    if (i > j) std::swap(i, j);
    if (i < 0 || j >= n) throw InvalidParameter("edge endpoint out of range");
  }
  std::sort(edges.begin(), edges.end());
  if (std::adjacent_find(edges.begin(), edges.end()) != edges.end())
    throw InvalidParameter("duplicate edge");

  Graph g;
  g.n = n;
  g.anchor = anchor;
  g.edges = std::move(edges);
  g.neighbors.assign(n, {});
  g.degree.assign(n, 0);
  for (const auto& [i, j] : g.edges) {
    g.neighbors[i].push_back(j);
    g.neighbors[j].push_back(i);
    ++g.degree[i];
    ++g.degree[j];
  }
  for (auto& nb : g.neighbors) std::sort(nb.begin(), nb.end());
  return g;
}

bool Graph::is_connected() const { return edges_connect(n, edges); }

nlohmann::json Graph::to_json() const {
  nlohmann::json j;
  j["n"] = n;
  j["anchor"] = anchor;
  auto arr = nlohmann::json::array();
  for (const auto& [i, k] : edges) arr.push_back({i, k});
  j["edges"] = arr;
  return j;
}

Graph Graph::from_json(const nlohmann::json& j) {
  try {
    std::vector<std::pair<int, int>> edges;
    for (const auto& e : j.at("edges")) edges.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
    return make(j.at("n").get<int>(), std::move(edges), j.value("anchor", 0));
  } catch (const nlohmann::json::exception& ex) {
    throw ParseError(std::string("graph document: ") + ex.what(), 0);
  }
}

Graph build_random_connected(int n, double p, std::uint64_t seed, int anchor,
                             int resample_cap) {
  if (n < 2) throw InvalidParameter("need at least 2 agents, got " + std::to_string(n));
  if (p <= 0.0 || p > 1.0)
    throw InvalidParameter("edge probability must be in (0, 1], got " + std::to_string(p));

  for (int attempt = 0; attempt < resample_cap; ++attempt) {
    std::mt19937_64 rng(seed + static_cast<std::uint64_t>(attempt));
    std::vector<std::pair<int, int>> edges;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        if (uniform01(rng) < p) edges.emplace_back(i, j);
    if (edges_connect(n, edges)) return Graph::make(n, std::move(edges), anchor);
  }
  throw InvalidParameter("no connected sample after " + std::to_string(resample_cap) +
                         " attempts (n=" + std::to_string(n) + ", p=" + std::to_string(p) +
                         "); increase p or the resample cap");
}

Eigen::MatrixXi incidence_matrix(const Graph& g) {
  Eigen::MatrixXi a = Eigen::MatrixXi::Zero(g.n, g.num_edges());
  for (int k = 0; k < g.num_edges(); ++k) {
    a(g.edges[k].first, k) = 1;
    a(g.edges[k].second, k) = -1;
  }
  return a;
}

LaplacianParts laplacian_parts(const Graph& g) {
  LaplacianParts parts;
  parts.diag = Eigen::VectorXi::Zero(g.n);
  parts.offdiag = Eigen::MatrixXi::Zero(g.n, g.n);
  for (const auto& [i, j] : g.edges) {
    ++parts.diag(i);
    ++parts.diag(j);
    parts.offdiag(i, j) = -1;
    parts.offdiag(j, i) = -1;
  }
  return parts;
}

Eigen::MatrixXi LaplacianParts::laplacian() const {
  Eigen::MatrixXi l = offdiag;
  l.diagonal() = diag;
  return l;
}

namespace {

Eigen::MatrixXd anchored_laplacian(const Graph& g) {
  Eigen::MatrixXd m = laplacian_parts(g).laplacian().cast<double>();
  m(g.anchor, g.anchor) += 1.0;
  return m;
}

}  // namespace

double lambda_min_anchor(const Graph& g) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(anchored_laplacian(g),
                                                    Eigen::EigenvaluesOnly);
  double lmin = es.eigenvalues().minCoeff();
  if (lmin <= 1e-10)
    throw InvalidParameter("anchored Laplacian is singular; the graph is not connected");
  return lmin;
}

Eigen::VectorXd bt_apply(const Graph& g, int d, const Eigen::VectorXd& x) {
  if (x.size() != static_cast<Eigen::Index>(g.n) * d)
    throw DimensionMismatch("bt_apply: expected " + std::to_string(g.n * d) + " entries");
  const int m = g.num_edges();
  Eigen::VectorXd out((m + 1) * d);
  for (int k = 0; k < m; ++k)
    out.segment(k * d, d) = x.segment(g.edges[k].first * d, d) - x.segment(g.edges[k].second * d, d);
  out.segment(m * d, d) = x.segment(g.anchor * d, d);
  return out;
}

Eigen::VectorXd b_apply(const Graph& g, int d, const Eigen::VectorXd& y) {
  const int m = g.num_edges();
  if (y.size() != static_cast<Eigen::Index>(m + 1) * d)
    throw DimensionMismatch("b_apply: expected " + std::to_string((m + 1) * d) + " entries");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(g.n) * d);
  for (int k = 0; k < m; ++k) {
    out.segment(g.edges[k].first * d, d) += y.segment(k * d, d);
    out.segment(g.edges[k].second * d, d) -= y.segment(k * d, d);
  }
  out.segment(g.anchor * d, d) += y.segment(m * d, d);
  return out;
}

double range_projection_residual(const Graph& g, int d, const Eigen::VectorXd& y) {
  // P y = B^T (B B^T)^{-1} B y with B B^T = (L + e_l e_l^T) (x) I_d; the
  // Kronecker factor is solved coordinate-wise over the d components.
  Eigen::VectorXd by = b_apply(g, d, y);
  Eigen::LLT<Eigen::MatrixXd> llt(anchored_laplacian(g));
  Eigen::VectorXd w(by.size());
  Eigen::VectorXd rhs(g.n);
  for (int c = 0; c < d; ++c) {
    for (int i = 0; i < g.n; ++i) rhs(i) = by(i * d + c);
    Eigen::VectorXd sol = llt.solve(rhs);
    for (int i = 0; i < g.n; ++i) w(i * d + c) = sol(i);
  }
  return (y - bt_apply(g, d, w)).norm();
}

}  // namespace dnadmm
