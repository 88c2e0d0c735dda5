#pragma once

#include <Eigen/Dense>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

namespace dnadmm {

/// Local least-squares cost 0.5 ||A x - b||^2 + (ridge/2) ||x||^2.
/// The Hessian A^T A + ridge I is constant and cached.
class QuadraticCost {
 public:
  QuadraticCost(Eigen::MatrixXd design, Eigen::VectorXd target, double ridge = 0.0);

  int dim() const { return static_cast<int>(design_.cols()); }
  long rows() const { return design_.rows(); }
  const Eigen::MatrixXd& design() const { return design_; }
  const Eigen::VectorXd& target() const { return target_; }
  double ridge() const { return ridge_; }

  double value(const Eigen::VectorXd& x) const;
  Eigen::VectorXd gradient(const Eigen::VectorXd& x) const;
  const Eigen::MatrixXd& hessian() const { return hessian_; }

 private:
  Eigen::MatrixXd design_;
  Eigen::VectorXd target_;
  double ridge_;
  Eigen::MatrixXd hessian_;
};

/// Gradient of a single local cost; dimension-checked.
Eigen::VectorXd local_gradient(const QuadraticCost& c, const Eigen::VectorXd& x);

/// Two-sided curvature constants: m_f I <= hessian of every local cost <= M_f I.
struct SmoothBounds {
  double m_f = 0.0;
  double M_f = 0.0;
};

/// Extremal Hessian eigenvalues over all agents. Throws DegenerateCurvature
/// when m_f <= 1e-12 (remedy: raise the ridge).
SmoothBounds smooth_bounds(const std::vector<QuadraticCost>& costs);

/// Proper closed convex regularizer with proximal machinery.
class Regularizer {
 public:
  virtual ~Regularizer() = default;

  virtual double value(const Eigen::VectorXd& z) const = 0;
  virtual Eigen::VectorXd prox(const Eigen::VectorXd& v, double mu) const = 0;

  /// Largest per-coordinate distance of y from the subdifferential at z,
  /// with |z_j| <= active_tol treated as an inactive coordinate.
  virtual double subgradient_margin(const Eigen::VectorXd& z, const Eigen::VectorXd& y,
                                    double active_tol) const = 0;

  virtual std::string kind() const = 0;
  virtual nlohmann::json to_json() const = 0;
};

std::shared_ptr<const Regularizer> make_zero_regularizer();
std::shared_ptr<const Regularizer> make_l1_regularizer(double weight);
std::shared_ptr<const Regularizer> regularizer_from_json(const nlohmann::json& j);

Eigen::VectorXd prox_apply(const Regularizer& r, const Eigen::VectorXd& v, double mu);
double moreau_envelope(const Regularizer& r, const Eigen::VectorXd& v, double mu);
bool subgradient_contains(const Regularizer& r, const Eigen::VectorXd& z,
                          const Eigen::VectorXd& y, double tol);

/// Full objective sum_i f^i(xhat) + g(xhat) at a single decision vector.
double global_cost(const std::vector<QuadraticCost>& costs, const Regularizer& r,
                   const Eigen::VectorXd& xhat);

}  // namespace dnadmm
