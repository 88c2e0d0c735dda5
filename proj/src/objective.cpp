#include "dnadmm/objective.hpp"

#include <cmath>
#include <limits>

#include "dnadmm/errors.hpp"

namespace dnadmm {

QuadraticCost::QuadraticCost(Eigen::MatrixXd design, Eigen::VectorXd target, double ridge)
    : design_(std::move(design)), target_(std::move(target)), ridge_(ridge) {
  if (design_.rows() != target_.size())
    throw DimensionMismatch("design rows and target length differ");
  if (ridge_ < 0.0) throw InvalidParameter("ridge must be nonnegative");
  if (!design_.allFinite() || !target_.allFinite())
    throw InvalidParameter("non-finite entries in cost data");
  hessian_ = design_.transpose() * design_;
  hessian_.diagonal().array() += ridge_;
}

double QuadraticCost::value(const Eigen::VectorXd& x) const {
  if (x.size() != dim()) throw DimensionMismatch("cost value: dimension mismatch");
  return 0.5 * (design_ * x - target_).squaredNorm() + 0.5 * ridge_ * x.squaredNorm();
}

Eigen::VectorXd QuadraticCost::gradient(const Eigen::VectorXd& x) const {
  if (x.size() != dim()) throw DimensionMismatch("cost gradient: dimension mismatch");
  return design_.transpose() * (design_ * x - target_) + ridge_ * x;
}

Eigen::VectorXd local_gradient(const QuadraticCost& c, const Eigen::VectorXd& x) {
  return c.gradient(x);
}

SmoothBounds smooth_bounds(const std::vector<QuadraticCost>& costs) {
  if (costs.empty()) throw InvalidParameter("smooth_bounds: no costs");
  SmoothBounds b{std::numeric_limits<double>::infinity(), 0.0};
  for (const auto& c : costs) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c.hessian(), Eigen::EigenvaluesOnly);
    b.m_f = std::min(b.m_f, es.eigenvalues().minCoeff());
    b.M_f = std::max(b.M_f, es.eigenvalues().maxCoeff());
  }
  if (b.m_f <= 1e-12)
    throw DegenerateCurvature("smooth part is not strongly convex (m_f = " +
                              std::to_string(b.m_f) + "); raise the ridge");
  return b;
}

namespace {

void require_positive_prox_parameter(double mu) {
  if (mu <= 0.0 || !std::isfinite(mu))
    throw InvalidParameter("prox parameter must be positive and finite, got " +
                           std::to_string(mu));
}

class ZeroRegularizer final : public Regularizer {
 public:
  double value(const Eigen::VectorXd&) const override { return 0.0; }
  Eigen::VectorXd prox(const Eigen::VectorXd& v, double mu) const override {
    require_positive_prox_parameter(mu);
    return v;
  }
  double subgradient_margin(const Eigen::VectorXd&, const Eigen::VectorXd& y,
                            double) const override {
    return y.size() == 0 ? 0.0 : y.cwiseAbs().maxCoeff();
  }
  std::string kind() const override { return "zero"; }
  nlohmann::json to_json() const override { return {{"kind", "zero"}}; }
};

class L1Regularizer final : public Regularizer {
 public:
  explicit L1Regularizer(double weight) : weight_(weight) {
    if (weight <= 0.0) throw InvalidParameter("l1 weight must be positive");
  }

  double value(const Eigen::VectorXd& z) const override {
    return weight_ * z.lpNorm<1>();
  }

  Eigen::VectorXd prox(const Eigen::VectorXd& v, double mu) const override {
    require_positive_prox_parameter(mu);
    const double t = mu * weight_;
    Eigen::VectorXd out(v.size());
    for (Eigen::Index j = 0; j < v.size(); ++j) {
      double mag = std::abs(v(j)) - t;
      out(j) = mag > 0.0 ? (v(j) > 0.0 ? mag : -mag) : 0.0;
    }
    return out;
  }

  double subgradient_margin(const Eigen::VectorXd& z, const Eigen::VectorXd& y,
                            double active_tol) const override {
    double worst = 0.0;
    for (Eigen::Index j = 0; j < z.size(); ++j) {
      double m;
      if (std::abs(z(j)) > active_tol)
        m = std::abs(y(j) - (z(j) > 0.0 ? weight_ : -weight_));
      else
        m = std::max(0.0, std::abs(y(j)) - weight_);
      worst = std::max(worst, m);
    }
    return worst;
  }

  std::string kind() const override { return "l1"; }
  nlohmann::json to_json() const override { return {{"kind", "l1"}, {"weight", weight_}}; }

 private:
  double weight_;
};

}  // namespace

std::shared_ptr<const Regularizer> make_zero_regularizer() {
  return std::make_shared<ZeroRegularizer>();
}

std::shared_ptr<const Regularizer> make_l1_regularizer(double weight) {
  return std::make_shared<L1Regularizer>(weight);
}

std::shared_ptr<const Regularizer> regularizer_from_json(const nlohmann::json& j) {
  try {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "zero") return make_zero_regularizer();
    if (kind == "l1") return make_l1_regularizer(j.at("weight").get<double>());
    throw ParseError("unknown regularizer kind: " + kind, 0);
  } catch (const nlohmann::json::exception& ex) {
    throw ParseError(std::string("regularizer document: ") + ex.what(), 0);
  }
}

Eigen::VectorXd prox_apply(const Regularizer& r, const Eigen::VectorXd& v, double mu) {
  if (mu <= 0.0) throw InvalidParameter("prox parameter must be positive");
  return r.prox(v, mu);
}

double moreau_envelope(const Regularizer& r, const Eigen::VectorXd& v, double mu) {
  if (mu <= 0.0) throw InvalidParameter("prox parameter must be positive");
  Eigen::VectorXd p = r.prox(v, mu);
  return r.value(p) + (v - p).squaredNorm() / (2.0 * mu);
}

bool subgradient_contains(const Regularizer& r, const Eigen::VectorXd& z,
                          const Eigen::VectorXd& y, double tol) {
  if (tol <= 0.0) throw InvalidParameter("tolerance must be positive");
  return r.subgradient_margin(z, y, tol) <= tol;
}

double global_cost(const std::vector<QuadraticCost>& costs, const Regularizer& r,
                   const Eigen::VectorXd& xhat) {
  double total = r.value(xhat);
  for (const auto& c : costs) total += c.value(xhat);
  return total;
}

}  // namespace dnadmm
