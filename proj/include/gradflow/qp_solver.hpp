#pragma once

/**
 * @file
 * @brief Convex quadratic programs with inequality constraints.
 *
 * Problems have the form
 *
 *   minimize    0.5 z'Pz + q'z
 *   subject to  Az <= b
 *
 * Two methods share Ruiz equilibration and the same certificate: a solution
 * is reported as Solved only when the unscaled KKT residuals meet the
 * requested tolerances.
 *
 *  - InteriorPoint: primal-dual Mehrotra predictor-corrector on the reduced
 *    normal equations P + A'WA. Robust on the heavily degenerate fitting
 *    problems (thousands of weakly active rows).
 *  - Admm: alternating-direction splitting with adaptive penalty and
 *    active-set polishing.
 */

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <nlohmann/json_fwd.hpp>

#include <string>
#include <vector>

namespace gradflow {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
/// Column-major sparse matrix, used for the cost curvature P.
using SparseMatrix = Eigen::SparseMatrix<double>;
/// Row-compressed sparse matrix, used for constraint rows.
using SparseRowMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

struct QpProblem
{
  /// symmetric positive semidefinite cost curvature (full storage, d x d)
  SparseMatrix P;
  /// linear cost term (d)
  Vector q;
  /// inequality rows (m x d)
  SparseRowMatrix A;
  /// right-hand sides (m)
  Vector b;
  /// optional per-variable labels, empty or size d
  std::vector<std::string> names;

  Eigen::Index num_vars() const { return q.size(); }
  Eigen::Index num_rows() const { return b.size(); }

  /// Checks dimensions, symmetry, finiteness and nonempty rows.
  /// Throws Error(InvalidProblem / DimensionMismatch) on violation.
  void validate() const;

  /// 0.5 z'Pz + q'z
  double objective(const Vector& z) const;
};

enum class SolveStatus { Solved, MaxIters, NumericalFailure };

enum class QpMethod { InteriorPoint, Admm };

std::string to_string(SolveStatus status);

struct QpSolution
{
  Vector z;
  Vector y;
  double objective       = 0;
  double primal_residual = 0;
  double dual_residual   = 0;
  double comp_slackness  = 0;
  long iterations        = 0;
  bool polished          = false;
  SolveStatus status     = SolveStatus::NumericalFailure;
};

struct SolverSettings
{
  /// primal feasibility tolerance, max(0, Az - b)
  double eps_prim = 1e-8;
  /// stationarity tolerance, |Pz + q + A'y|
  double eps_dual = 1e-8;
  /// complementary slackness tolerance, |y_i (Az - b)_i|
  double eps_comp = 1e-8;
  /// iteration cap for ADMM
  long max_iters = 200000;
  /// iteration cap for the interior-point method
  long ipm_max_iters = 200;
  QpMethod method = QpMethod::InteriorPoint;
  /// initial ADMM penalty
  double penalty_init = 0.1;
  bool penalty_adapt  = true;
  /// Ruiz equilibration passes (0 disables scaling)
  int scaling_iters = 10;

  /// ADMM proximal term on z
  double sigma = 1e-6;
  /// over-relaxation
  double alpha = 1.6;
  /// iterations between termination checks
  int check_interval = 25;
  /// attempt active-set polishing once the active set stabilizes
  bool polish = true;
  /// polishing regularization (scaled units)
  double polish_delta = 1e-7;
  int polish_refine_iters = 15;
  /// print progress to stderr at every check
  bool verbose = false;

  void validate() const;
};

struct KktResiduals
{
  double primal = 0;
  double dual   = 0;
  double comp   = 0;
};

/// Primal infeasibility, stationarity and complementarity in infinity norm.
/// Throws Error(DimensionMismatch) when z or y do not fit the problem.
KktResiduals kkt_residuals(const QpProblem& problem, const Vector& z, const Vector& y);

QpSolution solve_qp(const QpProblem& problem, const SolverSettings& settings = {});

/**
 * @brief Exhaustive active-set solver, intended as a test oracle.
 *
 * Enumerates candidate active sets in order of increasing size, solves the
 * equality-constrained KKT system of each, and returns the first candidate
 * that is primal feasible with nonnegative multipliers. For a convex problem
 * such a KKT point is a global minimizer.
 *
 * Limited to d <= 12 and m <= 20 (Error SizeExceeded). Throws Error(Infeasible)
 * when no candidate is feasible.
 */
QpSolution active_set_reference(const QpProblem& problem);

/// Debug dump: {"d","m","P":[[i,j,v]...],"q":[...],"A":[[i,j,v]...],"b":[...]}
nlohmann::json qp_to_json(const QpProblem& problem);
QpProblem qp_from_json(const nlohmann::json& doc);

}  // namespace gradflow
