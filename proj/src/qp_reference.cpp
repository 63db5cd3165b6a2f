#include "gradflow/error.hpp"
#include "gradflow/qp_solver.hpp"

#include <Eigen/QR>

#include <limits>
#include <numeric>
#include <optional>

namespace gradflow {

namespace {

struct EqualitySolve
{
  Vector z;
  Vector y_active;
};

// Minimum-norm solve of [P A_S'; A_S 0][z; y] = [-q; b_S]; rejects inconsistent systems.
std::optional<EqualitySolve> solve_equality(
  const Matrix& P, const Vector& q, const Matrix& A, const Vector& b, const std::vector<int>& S)
{
  const Eigen::Index d = q.size();
  const auto k         = static_cast<Eigen::Index>(S.size());
  Matrix K             = Matrix::Zero(d + k, d + k);
  Vector rhs(d + k);
  K.topLeftCorner(d, d) = P;
  rhs.head(d)           = -q;
  for (Eigen::Index r = 0; r < k; ++r) {
    K.block(d + r, 0, 1, d) = A.row(S[r]);
    K.block(0, d + r, d, 1) = A.row(S[r]).transpose();
    rhs(d + r)              = b(S[r]);
  }
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(K);
  const Vector sol = cod.solve(rhs);
  const double scale = 1.0 + K.cwiseAbs().maxCoeff() * sol.cwiseAbs().maxCoeff() + rhs.cwiseAbs().maxCoeff();
  if (!sol.allFinite() || (K * sol - rhs).lpNorm<Eigen::Infinity>() > 1e-10 * scale) { return std::nullopt; }
  return EqualitySolve{sol.head(d), sol.tail(k)};
}

// Advance S to the next k-combination of {0..m-1} in lexicographic order.
bool next_combination(std::vector<int>& S, int m)
{
  const int k = static_cast<int>(S.size());
  int i       = k - 1;
  while (i >= 0 && S[i] == m - k + i) { --i; }
  if (i < 0) { return false; }
  ++S[i];
  for (int j = i + 1; j < k; ++j) { S[j] = S[j - 1] + 1; }
  return true;
}

}  // namespace

QpSolution active_set_reference(const QpProblem& problem)
{
  problem.validate();
  const Eigen::Index d = problem.num_vars(), m = problem.num_rows();
  if (d > 12 || m > 20) {
    throw Error(ErrorKind::SizeExceeded, "active_set_reference is limited to d <= 12 and m <= 20");
  }

  const Matrix P = Matrix(problem.P);
  const Matrix A = Matrix(problem.A);

  auto feasible = [&](const Vector& z) {
    if (m == 0) { return true; }
    const Vector slack = A * z - problem.b;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (slack(i) > 1e-9 * (1.0 + std::abs(problem.b(i)))) { return false; }
    }
    return true;
  };

  auto make_solution = [&](const Vector& z, const Vector& y, SolveStatus status) {
    QpSolution sol;
    sol.z              = z;
    sol.y              = y;
    sol.objective      = problem.objective(z);
    const auto kkt     = kkt_residuals(problem, z, y);
    sol.primal_residual = kkt.primal;
    sol.dual_residual   = kkt.dual;
    sol.comp_slackness  = kkt.comp;
    sol.status          = status;
    return sol;
  };

  std::optional<QpSolution> best_feasible;
  const int max_k = static_cast<int>(std::min(d, m));
  for (int k = 0; k <= max_k; ++k) {
    std::vector<int> S(k);
    std::iota(S.begin(), S.end(), 0);
    do {
      const auto eq = solve_equality(P, problem.q, A, problem.b, S);
      if (!eq || !feasible(eq->z)) { continue; }
      Vector y = Vector::Zero(m);
      bool dual_ok = true;
      for (int r = 0; r < k; ++r) {
        y(S[r]) = eq->y_active(r);
        dual_ok = dual_ok && eq->y_active(r) >= -1e-10;
      }
      if (dual_ok) {
        y = y.cwiseMax(0.0);
        return make_solution(eq->z, y, SolveStatus::Solved);
      }
      const double obj = problem.objective(eq->z);
      if (!best_feasible || obj < best_feasible->objective) {
        best_feasible = make_solution(eq->z, Vector::Zero(m), SolveStatus::NumericalFailure);
      }
    } while (next_combination(S, static_cast<int>(m)));
  }
  if (best_feasible) { return *best_feasible; }
  throw Error(ErrorKind::Infeasible, "no active set yields a feasible point");
}

}  // namespace gradflow
