#include "dnadmm/splitting.hpp"

#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>

#include "dnadmm/errors.hpp"

namespace dnadmm {

DiagBlocks::DiagBlocks(std::vector<Eigen::MatrixXd> blocks) : blocks_(std::move(blocks)) {
  if (blocks_.empty()) throw InvalidParameter("diag blocks: empty");
  d_ = static_cast<int>(blocks_[0].rows());
  factors_.reserve(blocks_.size());
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const auto& b = blocks_[i];
    if (b.rows() != d_ || b.cols() != d_)
      throw DimensionMismatch("diag blocks: inconsistent block shapes");
    factors_.emplace_back(b);
    if (factors_.back().info() != Eigen::Success)
      throw DegenerateCurvature("diag block " + std::to_string(i) +
                                " is not positive definite");
  }
}

Eigen::VectorXd DiagBlocks::solve(const Eigen::VectorXd& h) const {
  if (h.size() != static_cast<Eigen::Index>(n()) * d_)
    throw DimensionMismatch("diag solve: stacked vector has wrong length");
  Eigen::VectorXd out(h.size());
  for (int i = 0; i < n(); ++i)
    out.segment(i * d_, d_) = factors_[i].solve(h.segment(i * d_, d_));
  return out;
}

Eigen::VectorXd DiagBlocks::solve_block(int i, const Eigen::VectorXd& h_i) const {
  if (i < 0 || i >= n()) throw InvalidParameter("diag solve: agent id out of range");
  if (h_i.size() != d_) throw DimensionMismatch("diag solve: block has wrong length");
  return factors_[i].solve(h_i);
}

Eigen::MatrixXd DiagBlocks::dense() const {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n() * d_, n() * d_);
  for (int i = 0; i < n(); ++i) out.block(i * d_, i * d_, d_, d_) = blocks_[i];
  return out;
}

Eigen::MatrixXd DiagBlocks::dense_inv_sqrt() const {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n() * d_, n() * d_);
  for (int i = 0; i < n(); ++i) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(blocks_[i]);
    out.block(i * d_, i * d_, d_, d_) = es.operatorInverseSqrt();
  }
  return out;
}

Eigen::MatrixXd diag_block(const Eigen::MatrixXd& local_hessian, int degree,
                           bool is_anchor, double mu, double eps) {
  if (mu <= 0.0) throw InvalidParameter("penalty mu must be positive");
  if (eps < 0.0) throw InvalidParameter("damping eps must be nonnegative");
  if (degree < 0) throw InvalidParameter("degree must be nonnegative");
  Eigen::MatrixXd b = local_hessian;
  b.diagonal().array() += ((is_anchor ? 1.0 : 0.0) + 2.0 * degree) / mu + eps;
  return b;
}

DiagBlocks build_diag_blocks(const std::vector<QuadraticCost>& costs,
                             const Eigen::VectorXd& x, const Graph& g, double mu,
                             double eps) {
  if (static_cast<int>(costs.size()) != g.n)
    throw DimensionMismatch("diag blocks: one cost per agent required");
  const int d = static_cast<int>(costs[0].dim());
  if (x.size() != static_cast<Eigen::Index>(g.n) * d)
    throw DimensionMismatch("diag blocks: stacked iterate has wrong length");
  std::vector<Eigen::MatrixXd> blocks;
  blocks.reserve(costs.size());
  for (int i = 0; i < g.n; ++i)
    blocks.push_back(diag_block(costs[i].hessian(), g.degree[i], i == g.anchor, mu, eps));
  return DiagBlocks(std::move(blocks));
}

CouplingApplier::CouplingApplier(const Graph& g, double mu) : graph_(&g), mu_(mu) {
  if (mu <= 0.0) throw InvalidParameter("penalty mu must be positive");
}

Eigen::VectorXd CouplingApplier::apply(const Eigen::VectorXd& u) const {
  const int n = graph_->n;
  if (u.size() % n != 0)
    throw DimensionMismatch("coupling: vector length is not a multiple of agent count");
  const int d = static_cast<int>(u.size()) / n;
  Eigen::VectorXd out(u.size());
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd acc = static_cast<double>(graph_->degree[i]) * u.segment(i * d, d);
    // Adjacency lists are sorted, so the neighbor sum runs in ascending id.
    for (int j : graph_->neighbors[i]) acc += neighbor_sign * u.segment(j * d, d);
    out.segment(i * d, d) = acc / mu_;
  }
  return out;
}

Eigen::VectorXd CouplingApplier::coupled_quadratic(const Eigen::VectorXd& x) const {
  Eigen::VectorXd out = apply(x);  // validates the length and does the neighbor sums
  const int n = graph_->n;
  const int d = static_cast<int>(x.size()) / n;
  for (int i = 0; i < n; ++i) {
    const double scale =
        (2.0 * graph_->degree[i] + (i == graph_->anchor ? 1.0 : 0.0)) / mu_;
    out.segment(i * d, d) = scale * x.segment(i * d, d) - out.segment(i * d, d);
  }
  return out;
}

Eigen::MatrixXd CouplingApplier::dense(int d) const {
  const int n = graph_->n;
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n * d, n * d);
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(d, d);
  for (int i = 0; i < n; ++i)
    out.block(i * d, i * d, d, d) = (graph_->degree[i] / mu_) * eye;
  for (const auto& [i, j] : graph_->edges) {
    out.block(i * d, j * d, d, d) = (neighbor_sign / mu_) * eye;
    out.block(j * d, i * d, d, d) = (neighbor_sign / mu_) * eye;
  }
  return out;
}

Eigen::VectorXd apply_coupling(const CouplingApplier& cpl, const Eigen::VectorXd& u) {
  return cpl.apply(u);
}

Eigen::VectorXd newton_direction(int K, const DiagBlocks& D, const CouplingApplier& cpl,
                                 const Eigen::VectorXd& h) {
  if (K < 0) throw InvalidParameter("truncation order K must be nonnegative");
  Eigen::VectorXd base = D.solve(h);
  Eigen::VectorXd u = base;
  for (int k = 0; k < K; ++k) u = base + D.solve(cpl.apply(u));
  return u;
}

namespace {

void check_oracle_size(Eigen::Index nd) {
  if (nd > 400)
    throw InvalidParameter("dense oracle capped at 400 total dimensions, got " +
                           std::to_string(nd));
}

}  // namespace

Eigen::MatrixXd dense_approx_inverse(int K, const DiagBlocks& D,
                                     const Eigen::MatrixXd& N_dense) {
  if (K < 0) throw InvalidParameter("truncation order K must be nonnegative");
  const Eigen::Index nd = static_cast<Eigen::Index>(D.n()) * D.d();
  check_oracle_size(nd);
  if (N_dense.rows() != nd || N_dense.cols() != nd)
    throw DimensionMismatch("dense coupling has wrong shape");
  const Eigen::MatrixXd Dis = D.dense_inv_sqrt();
  const Eigen::MatrixXd T = Dis * N_dense * Dis;
  Eigen::MatrixXd series = Eigen::MatrixXd::Identity(nd, nd);
  Eigen::MatrixXd power = Eigen::MatrixXd::Identity(nd, nd);
  for (int i = 1; i <= K; ++i) {
    power = T * power;
    series += power;
  }
  Eigen::MatrixXd out = Dis * series * Dis;
  return 0.5 * (out + out.transpose());  // strip roundoff asymmetry
}

double coupling_spectral_norm(const DiagBlocks& D, const Eigen::MatrixXd& N_dense) {
  const Eigen::Index nd = static_cast<Eigen::Index>(D.n()) * D.d();
  check_oracle_size(nd);
  if (N_dense.rows() != nd || N_dense.cols() != nd)
    throw DimensionMismatch("dense coupling has wrong shape");
  const Eigen::MatrixXd Dis = D.dense_inv_sqrt();
  Eigen::MatrixXd T = Dis * N_dense * Dis;
  T = 0.5 * (T + T.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T, Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

namespace {

void check_bound_params(int n, double mu, double m_f, double eps) {
  if (n < 2) throw InvalidParameter("bounds need at least two agents");
  if (mu <= 0.0) throw InvalidParameter("penalty mu must be positive");
  if (m_f <= 0.0) throw InvalidParameter("strong-convexity constant must be positive");
  if (eps < 0.0) throw InvalidParameter("damping eps must be nonnegative");
}

}  // namespace

double spectral_radius_bound(int n, double mu, double m_f, double eps) {
  check_bound_params(n, mu, m_f, eps);
  const double two_nm1 = 2.0 * (n - 1);
  return two_nm1 / (mu * (m_f + eps) + two_nm1);
}

double gamma_bound(int n, double mu, double m_f, double M_f, double eps, int K) {
  check_bound_params(n, mu, m_f, eps);
  if (M_f < m_f) throw InvalidParameter("smoothness constant below strong convexity");
  if (K < 0) throw InvalidParameter("truncation order K must be nonnegative");
  const double ratio = spectral_radius_bound(n, mu, m_f, eps);
  const double tail = (M_f + eps + (1.0 + 2.0 * (n - 1)) / mu) * std::pow(ratio, K + 1);
  return 2.0 * M_f + 1.0 / mu + tail;
}

}  // namespace dnadmm
