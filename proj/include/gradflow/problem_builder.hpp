#pragma once

/**
 * @file
 * @brief Translate a dataset into the fitting QP of a chosen variant and map
 * QP solutions back into potential models.
 *
 * Convex variants use z = [theta (n_s); xi (n_s * n)] and one inequality per
 * ordered sample pair (i, j), i != j:
 *
 *   theta_j - theta_i >= <xi_i, x_j - x_i> + mu/2 |x_j - x_i|^2
 *
 * (mu = 0 unless strongly convex). DC variants duplicate (theta, xi) for the
 * two convex pieces and append the parametric coefficients alpha.
 */

#include "gradflow/basis.hpp"
#include "gradflow/dataset.hpp"
#include "gradflow/potential_model.hpp"
#include "gradflow/qp_solver.hpp"

#include <optional>
#include <string>

namespace gradflow {

enum class Variant {
  Convex,
  Concave,
  StronglyConvex,
  StronglyConcave,
  ConvexWithEquilibrium,
  DC,
  DCParametric,
};

std::string to_string(Variant v);
/// Accepts the CLI spellings: convex, concave, strongly-convex, strongly-concave,
/// equilibrium, dc, dc-parametric.
Variant parse_variant(const std::string& s);
bool is_dc(Variant v);

struct FitConfig
{
  Variant variant = Variant::Convex;
  /// regularization weight on the heights (and on xi1 + xi2 for DC fits)
  double lambda = 0.0;
  /// strong convexity modulus, strong variants only
  double mu = 0.0;
  /// known equilibrium, equilibrium variant only
  Eigen::VectorXd x0;
  /// parametric fields h_k, DCParametric only
  Basis basis;
  /// also penalize lambda |xi|^2 (Tikhonov on all variables), convex variants only
  bool tikhonov = false;

  void validate(Eigen::Index n) const;
};

/// Index ranges of each variable block inside z; absent blocks have size 0.
struct VariableLayout
{
  struct Block
  {
    Eigen::Index offset = 0;
    Eigen::Index size   = 0;
  };

  Variant variant = Variant::Convex;
  Eigen::Index num_samples = 0;
  Eigen::Index dim         = 0;
  Block theta1, xi1, theta2, xi2, alpha;

  Eigen::Index num_vars() const;
};

struct FitProblem
{
  QpProblem qp;
  VariableLayout layout;
  /// sum_i |y_i|^2; the fitting loss equals qp objective + loss_offset
  double loss_offset = 0;
  /// lambda = 0 leaves the heights non-unique
  bool theta_unique = true;
};

/// Convex, concave, strongly convex/concave and equilibrium variants.
/// Throws Error(VariantMismatch) for DC variants.
FitProblem build_convex_fit(const Dataset& data, const FitConfig& cfg);

/// DC and DCParametric variants. Throws Error(VariantMismatch) otherwise and
/// Error(BasisEvaluationError) when a basis field is non-finite at a sample.
FitProblem build_dc_fit(const Dataset& data, const FitConfig& cfg);

/// Dispatches on cfg.variant.
FitProblem build_fit(const Dataset& data, const FitConfig& cfg);

/**
 * @brief Read (theta, xi) from a solved convex-variant QP.
 *
 * Concave fits are returned with sign -1. Equilibrium fits carry the extra
 * plane (x0, 0, 0); heights whose plane would exceed zero at x0 are clipped
 * so the model evaluates to exactly zero there.
 */
MaxAffinePotential extract_convex_model(
  const QpSolution& sol, const VariableLayout& layout, const Dataset& data, const FitConfig& cfg);

DcPotential extract_dc_model(
  const QpSolution& sol, const VariableLayout& layout, const Dataset& data, const FitConfig& cfg);

/// Largest violation of the pairwise plane inequalities of one convex piece.
double max_pairwise_violation(const Dataset& data, const Eigen::VectorXd& theta, const Eigen::MatrixXd& xi, double mu = 0);

struct ConvexFit
{
  /// present only when the solve is Solved
  std::optional<MaxAffinePotential> model;
  QpSolution solution;
  FitProblem problem;
  /// sum_i |y_i +- xi_i|^2 + regularization, including the constant term
  double loss = 0;
};

struct DcFit
{
  std::optional<DcPotential> model;
  QpSolution solution;
  FitProblem problem;
  double loss = 0;
};

/// Build, solve, extract. Models are extracted only when the solve is Solved;
/// otherwise `model` stays empty and the caller inspects `solution.status`.
ConvexFit fit_convex(const Dataset& data, const FitConfig& cfg, const SolverSettings& settings = {});
DcFit fit_dc(const Dataset& data, const FitConfig& cfg, const SolverSettings& settings = {});

/// Heights and slopes of each piece read from z (theta n_s, xi n_s x n).
Eigen::VectorXd block_vector(const Eigen::VectorXd& z, const VariableLayout::Block& blk);
Eigen::MatrixXd block_slopes(const Eigen::VectorXd& z, const VariableLayout::Block& blk, Eigen::Index n);

}  // namespace gradflow
