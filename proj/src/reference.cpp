#include "dnadmm/reference.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "dnadmm/errors.hpp"

namespace dnadmm {

Eigen::VectorXd stack_copies(const Eigen::VectorXd& v, int n) {
  if (n < 1) throw InvalidParameter("stack_copies: need at least one copy");
  Eigen::VectorXd out(static_cast<Eigen::Index>(n) * v.size());
  for (int i = 0; i < n; ++i) out.segment(i * v.size(), v.size()) = v;
  return out;
}

std::pair<Eigen::VectorXd, double> solve_centralized(
    const std::vector<QuadraticCost>& costs, const Regularizer& reg, double tol,
    long max_iters) {
  if (costs.empty()) throw InvalidParameter("centralized solve: no costs");
  if (tol <= 0.0) throw InvalidParameter("centralized solve: tolerance must be positive");
  const Eigen::Index d = costs[0].dim();

  // The smooth part aggregates to a single quadratic: Hx − c.
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(d, d);
  for (const auto& c : costs) H += c.hessian();
  Eigen::VectorXd lin = Eigen::VectorXd::Zero(d);
  const Eigen::VectorXd origin = Eigen::VectorXd::Zero(d);
  for (const auto& c : costs) lin -= c.gradient(origin);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H, Eigen::EigenvaluesOnly);
  const double M_F = es.eigenvalues().maxCoeff();
  if (!(M_F > 0.0))
    throw DegenerateCurvature("centralized solve: aggregate curvature is zero");
  const double step = 1.0 / M_F;

  auto grad_sum = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd { return H * x - lin; };
  auto forward = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    return reg.prox(x - step * grad_sum(x), step);
  };

  Eigen::VectorXd x = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd x_prev = x;
  double val = global_cost(costs, reg, x);
  long momentum_age = 0;

  for (long it = 0; it < max_iters; ++it) {
    const double mom = momentum_age / (momentum_age + 3.0);
    Eigen::VectorXd probe = x + mom * (x - x_prev);
    Eigen::VectorXd x_next = forward(probe);
    double val_next = global_cost(costs, reg, x_next);
    if (val_next > val) {
      // Momentum overshot; restart from the last accepted point.
      x_next = forward(x);
      val_next = global_cost(costs, reg, x_next);
      momentum_age = 0;
    } else {
      ++momentum_age;
    }
    x_prev = x;
    x = x_next;
    val = val_next;
    if (!x.allFinite())
      throw NonFinite("centralized solve: iterate overflowed at iteration " +
                      std::to_string(it + 1));
    if ((x - forward(x)).norm() <= tol) {
      const double final_val = global_cost(costs, reg, x);
      if (!std::isfinite(final_val))
        throw NonFinite("centralized solve: objective is not finite at the solution");
      return {x, final_val};
    }
  }
  throw MaxItersReached("centralized solve: fixed-point residual still above " +
                        std::to_string(tol) + " after " + std::to_string(max_iters) +
                        " iterations");
}

Eigen::VectorXd dual_optimal(const Eigen::VectorXd& x_star,
                             const std::vector<QuadraticCost>& costs, const Graph& g,
                             const Regularizer* reg) {
  const int n = g.n;
  const int d = static_cast<int>(x_star.size());
  if (static_cast<int>(costs.size()) != n)
    throw DimensionMismatch("dual recovery: one cost per agent required");

  // Stacked gradient of the smooth part at the consensus point, as an n×d
  // matrix with one agent per row: the Kronecker system decouples per
  // coordinate into n×n solves against the anchored Laplacian.
  Eigen::MatrixXd G(n, d);
  for (int i = 0; i < n; ++i) G.row(i) = costs[i].gradient(x_star).transpose();

  Eigen::MatrixXd M = laplacian_parts(g).laplacian().cast<double>();
  M(g.anchor, g.anchor) += 1.0;
  Eigen::LLT<Eigen::MatrixXd> llt(M);
  if (llt.info() != Eigen::Success)
    throw DegenerateCurvature("dual recovery: anchored Laplacian not positive definite");
  const Eigen::MatrixXd W = llt.solve(-G);

  Eigen::VectorXd w(static_cast<Eigen::Index>(n) * d);
  for (int i = 0; i < n; ++i) w.segment(i * d, d) = W.row(i).transpose();
  Eigen::VectorXd y = bt_apply(g, d, w);

  // Stationarity must hold at the claimed optimum.
  Eigen::VectorXd grad_flat(static_cast<Eigen::Index>(n) * d);
  for (int i = 0; i < n; ++i) grad_flat.segment(i * d, d) = G.row(i).transpose();
  // Negated comparison so a NaN residual (overflowing data) also lands here.
  const double r_a = (grad_flat + b_apply(g, d, y)).norm();
  if (!(r_a <= 1e-9))
    throw KktViolation("dual recovery: stationarity residual " + std::to_string(r_a) +
                       " exceeds 1e-9; x_star is not accurate enough");
  if (reg != nullptr) {
    const double margin = reg->subgradient_margin(x_star, y.tail(d), 1e-8);
    if (margin > 1e-8)
      throw KktViolation("dual recovery: anchor dual is not a subgradient (margin " +
                         std::to_string(margin) + "); x_star is not accurate enough");
  }
  return y;
}

KktResiduals kkt_residuals(const Eigen::VectorXd& x, const Eigen::VectorXd& zhat,
                           const Eigen::VectorXd& y, const Problem& problem,
                           double membership_tol) {
  const int d = problem.d();
  const Graph& g = problem.graph;
  if (zhat.size() != d) throw DimensionMismatch("kkt: nonsmooth block has wrong length");
  const Eigen::Index edge_dim = static_cast<Eigen::Index>(g.num_edges() + 1) * d;
  if (y.size() != edge_dim) throw DimensionMismatch("kkt: dual has wrong length");

  KktResiduals out;
  out.r_a = (problem.grad_smooth(x) + b_apply(g, d, y)).norm();
  out.r_b_margin = problem.reg->subgradient_margin(zhat, y.tail(d), membership_tol);
  out.r_b_ok = out.r_b_margin <= membership_tol;
  Eigen::VectorXd gap = bt_apply(g, d, x);
  gap.tail(d) -= zhat;
  out.r_c = gap.norm();
  return out;
}

ReferenceSolution compute_reference(const Problem& problem, double tol, long max_iters) {
  ReferenceSolution ref;
  std::tie(ref.x_star, ref.obj_star) =
      solve_centralized(problem.costs, *problem.reg, tol, max_iters);
  ref.y_star = dual_optimal(ref.x_star, problem.costs, problem.graph, problem.reg.get());
  ref.z_star = ref.x_star;
  ref.residuals = kkt_residuals(stack_copies(ref.x_star, problem.n()), ref.z_star,
                                ref.y_star, problem);
  if (!(ref.residuals.r_a <= 1e-8) || !ref.residuals.r_b_ok ||
      !(ref.residuals.r_c <= 1e-8))
    throw KktViolation("reference solution fails its own residual check");
  return ref;
}

namespace {

nlohmann::json vec_to_json(const Eigen::VectorXd& v) {
  nlohmann::json a = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Eigen::VectorXd vec_from_json(const nlohmann::json& a) {
  Eigen::VectorXd v(a.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = a.at(i).get<double>();
  return v;
}

}  // namespace

nlohmann::json ReferenceSolution::to_json() const {
  return {{"x_star", vec_to_json(x_star)},
          {"obj_star", obj_star},
          {"y_star", vec_to_json(y_star)},
          {"z_star", vec_to_json(z_star)},
          {"residuals",
           {{"r_a", residuals.r_a},
            {"r_b_ok", residuals.r_b_ok},
            {"r_b_margin", residuals.r_b_margin},
            {"r_c", residuals.r_c}}}};
}

ReferenceSolution ReferenceSolution::from_json(const nlohmann::json& j) {
  ReferenceSolution ref;
  ref.x_star = vec_from_json(j.at("x_star"));
  ref.obj_star = j.at("obj_star").get<double>();
  ref.y_star = vec_from_json(j.at("y_star"));
  ref.z_star = vec_from_json(j.at("z_star"));
  const auto& r = j.at("residuals");
  ref.residuals.r_a = r.at("r_a").get<double>();
  ref.residuals.r_b_ok = r.at("r_b_ok").get<bool>();
  ref.residuals.r_b_margin = r.at("r_b_margin").get<double>();
  ref.residuals.r_c = r.at("r_c").get<double>();
  return ref;
}

namespace {

class Fnv1a {
 public:
  void bytes(const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
      state_ ^= p[i];
      state_ *= 0x100000001b3ULL;
    }
  }
  void i64(std::int64_t v) { bytes(&v, sizeof v); }
  void f64(double v) { bytes(&v, sizeof v); }
  std::uint64_t digest() const { return state_; }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

}  // namespace

std::uint64_t problem_hash(const Problem& problem) {
  Fnv1a h;
  h.i64(problem.graph.n);
  h.i64(problem.graph.anchor);
  for (const auto& [i, j] : problem.graph.edges) {
    h.i64(i);
    h.i64(j);
  }
  for (const auto& c : problem.costs) {
    h.i64(c.rows());
    h.i64(c.dim());
    const auto& A = c.design();
    for (Eigen::Index r = 0; r < A.rows(); ++r)
      for (Eigen::Index k = 0; k < A.cols(); ++k) h.f64(A(r, k));
    for (Eigen::Index r = 0; r < c.target().size(); ++r) h.f64(c.target()(r));
    h.f64(c.ridge());
  }
  const std::string reg = problem.reg->to_json().dump();
  h.bytes(reg.data(), reg.size());
  return h.digest();
}

std::string problem_hash_hex(const Problem& problem) {
  std::ostringstream os;
  os << std::hex << problem_hash(problem);
  return os.str();
}

}  // namespace dnadmm
