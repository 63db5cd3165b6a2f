#pragma once

/**
 * @file
 * @brief Max-affine and difference-of-convex potentials, their log-sum-exp
 * smoothing, and the vector field they predict.
 */

#include "gradflow/basis.hpp"

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include <vector>

namespace gradflow {

/**
 * @brief Pointwise maximum of planes  <xi_i, x - x_i> + theta_i.
 *
 * With sign = -1 the object represents psi = -phi, the concave potential of
 * a concave fit; every evaluation below (value, gradient, Hessian) then
 * refers to psi.
 */
class MaxAffinePotential
{
public:
  MaxAffinePotential() = default;
  /// anchors and slopes are n_s x n, heights has n_s entries.
  MaxAffinePotential(Eigen::MatrixXd anchors, Eigen::VectorXd heights, Eigen::MatrixXd slopes, int sign = 1);

  Eigen::Index dim() const { return anchors_.cols(); }
  Eigen::Index num_planes() const { return anchors_.rows(); }
  int sign() const { return sign_; }

  const Eigen::MatrixXd& anchors() const { return anchors_; }
  const Eigen::VectorXd& heights() const { return heights_; }
  const Eigen::MatrixXd& slopes() const { return slopes_; }

  /// <xi_i, x - x_i> + theta_i, unsigned
  double plane_value(Eigen::Index i, const Eigen::VectorXd& x) const;
  Eigen::VectorXd plane_values(const Eigen::VectorXd& x) const;

  /// sign * max_i plane_i(x)
  double eval(const Eigen::VectorXd& x) const;

  /// Indices whose plane value is within tol of the maximum; never empty.
  std::vector<Eigen::Index> active_planes(const Eigen::VectorXd& x, double tol) const;

  /// sign * tau * ln( (1/n_s) sum_i exp(plane_i(x) / tau) )
  double eval_smoothed(double tau, const Eigen::VectorXd& x) const;
  /// Softmax weights of the plane values at temperature tau (sum to one).
  Eigen::VectorXd softmax_weights(double tau, const Eigen::VectorXd& x) const;
  Eigen::VectorXd grad_smoothed(double tau, const Eigen::VectorXd& x) const;
  /// sign / tau * (sum_i w_i xi_i xi_i' - g g'), g = sum_i w_i xi_i
  Eigen::MatrixXd hessian_smoothed(double tau, const Eigen::VectorXd& x) const;

  bool operator==(const MaxAffinePotential& other) const;

private:
  void check_point(const Eigen::VectorXd& x) const;

  Eigen::MatrixXd anchors_;
  Eigen::VectorXd heights_;
  Eigen::MatrixXd slopes_;
  int sign_ = 1;
};

/// phi = phi1 - phi2, optionally plus a parametric field sum_k alpha_k h_k.
class DcPotential
{
public:
  DcPotential() = default;
  DcPotential(MaxAffinePotential phi1, MaxAffinePotential phi2, Eigen::VectorXd alpha = {}, Basis basis = {});

  Eigen::Index dim() const { return phi1_.dim(); }
  const MaxAffinePotential& phi1() const { return phi1_; }
  const MaxAffinePotential& phi2() const { return phi2_; }
  const Eigen::VectorXd& alpha() const { return alpha_; }
  const Basis& basis() const { return basis_; }

  /// Exact (unsmoothed) value phi1(x) - phi2(x).
  double eval(const Eigen::VectorXd& x) const;
  double eval_smoothed(double tau, const Eigen::VectorXd& x) const;
  Eigen::VectorXd grad_smoothed(double tau, const Eigen::VectorXd& x) const;
  /// sum_k alpha_k h_k(x); zero vector without a basis.
  Eigen::VectorXd parametric_field(const Eigen::VectorXd& x) const;

private:
  MaxAffinePotential phi1_;
  MaxAffinePotential phi2_;
  Eigen::VectorXd alpha_;
  Basis basis_;
};

/// Identified field: -grad of the smoothed potential (plus the parametric part for DC models).
Eigen::VectorXd predict_field(const MaxAffinePotential& model, double tau, const Eigen::VectorXd& x);
Eigen::VectorXd predict_field(const DcPotential& model, double tau, const Eigen::VectorXd& x);

/// Largest tau (with a 0.99 safety factor) that keeps the smoothing gap below
/// epsilon: epsilon / ln n_s, halved for DC models. Requires n_s >= 2.
double tau_for_accuracy(double epsilon, Eigen::Index num_planes, bool dc);

nlohmann::json to_json(const MaxAffinePotential& model);
nlohmann::json to_json(const DcPotential& model);
MaxAffinePotential max_affine_from_json(const nlohmann::json& doc);
DcPotential dc_from_json(const nlohmann::json& doc);

}  // namespace gradflow
