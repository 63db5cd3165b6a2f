#include "gradflow/qp_solver.hpp"

#include "gradflow/error.hpp"

#include <Eigen/Cholesky>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdio>
#include <cmath>
#include <limits>
#include <optional>

namespace gradflow {

namespace {

double inf_norm(const Vector& v) { return v.size() == 0 ? 0.0 : v.lpNorm<Eigen::Infinity>(); }

bool all_finite(const SparseMatrix& M)
{
  for (Eigen::Index k = 0; k < M.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(M, k); it; ++it) {
      if (!std::isfinite(it.value())) { return false; }
    }
  }
  return true;
}

bool all_finite(const SparseRowMatrix& M)
{
  for (Eigen::Index k = 0; k < M.outerSize(); ++k) {
    for (SparseRowMatrix::InnerIterator it(M, k); it; ++it) {
      if (!std::isfinite(it.value())) { return false; }
    }
  }
  return true;
}

// Ruiz norms outside [1e-4, 1e4] are clamped; tiny norms leave the entry unscaled.
double clamp_scaling(double norm)
{
  if (norm < 1e-4) { return 1.0; }
  return std::min(norm, 1e4);
}

/// Problem data after equilibration: Pbar = c D P D, qbar = c D q, Abar = E A D, bbar = E b.
struct ScaledProblem
{
  Matrix P;
  Vector q;
  SparseRowMatrix A;
  Vector b;
  Vector D;
  Vector E;
  double c = 1.0;
};

ScaledProblem equilibrate(const QpProblem& pb, int iters)
{
  const Eigen::Index d = pb.num_vars(), m = pb.num_rows();

  ScaledProblem sp;
  sp.P = Matrix(pb.P);
  sp.q = pb.q;
  sp.A = pb.A;
  sp.A.makeCompressed();
  sp.b = pb.b;
  sp.D = Vector::Ones(d);
  sp.E = Vector::Ones(m);

  for (int it = 0; it < iters; ++it) {
    Vector col(d), row(m);
    for (Eigen::Index j = 0; j < d; ++j) { col(j) = sp.P.col(j).cwiseAbs().maxCoeff(); }
    row.setZero();
    for (Eigen::Index i = 0; i < m; ++i) {
      for (SparseRowMatrix::InnerIterator a(sp.A, i); a; ++a) {
        const double v = std::abs(a.value());
        row(i)         = std::max(row(i), v);
        col(a.col())   = std::max(col(a.col()), v);
      }
    }
    Vector dD = col.unaryExpr([](double v) { return 1.0 / std::sqrt(clamp_scaling(v)); });
    Vector dE = row.unaryExpr([](double v) { return 1.0 / std::sqrt(clamp_scaling(v)); });

    sp.P = dD.asDiagonal() * sp.P * dD.asDiagonal();
    sp.q = sp.q.cwiseProduct(dD);
    for (Eigen::Index i = 0; i < m; ++i) {
      for (SparseRowMatrix::InnerIterator a(sp.A, i); a; ++a) { a.valueRef() *= dE(i) * dD(a.col()); }
    }
    sp.b = sp.b.cwiseProduct(dE);
    sp.D = sp.D.cwiseProduct(dD);
    sp.E = sp.E.cwiseProduct(dE);

    // cost scaling
    double pmean = 0;
    for (Eigen::Index j = 0; j < d; ++j) { pmean += sp.P.col(j).cwiseAbs().maxCoeff(); }
    pmean = d > 0 ? pmean / static_cast<double>(d) : 0.0;
    const double gamma = 1.0 / clamp_scaling(std::max(pmean, inf_norm(sp.q)));
    sp.P *= gamma;
    sp.q *= gamma;
    sp.c *= gamma;
  }
  return sp;
}

struct Candidate
{
  Vector z;
  Vector y;
  KktResiduals kkt;
};

bool meets(const KktResiduals& r, const SolverSettings& s)
{
  return r.primal <= s.eps_prim && r.dual <= s.eps_dual && r.comp <= s.eps_comp;
}

/**
 * Solve the equality-constrained problem on a guessed active set, in scaled
 * space, with a regularized reduced KKT system and iterative refinement.
 * Returns the scaled primal x and the multipliers of the active rows.
 */
bool solve_on_active_set(
  const ScaledProblem& sp, const std::vector<Eigen::Index>& active, const SolverSettings& s, Vector& x, Vector& ya)
{
  const Eigen::Index d = sp.q.size();
  const auto k         = static_cast<Eigen::Index>(active.size());
  const double delta   = s.polish_delta;

  std::vector<Eigen::Triplet<double>> trips;
  Vector ba(k);
  for (Eigen::Index r = 0; r < k; ++r) {
    for (SparseRowMatrix::InnerIterator a(sp.A, active[r]); a; ++a) { trips.emplace_back(r, a.col(), a.value()); }
    ba(r) = sp.b(active[r]);
  }
  SparseRowMatrix Aa(k, d);
  Aa.setFromTriplets(trips.begin(), trips.end());

  Matrix M = sp.P;
  M.diagonal().array() += delta;
  if (k > 0) { M += Matrix(SparseMatrix(Aa.transpose() * Aa)) / delta; }
  Eigen::LLT<Matrix> llt(M);
  if (llt.info() != Eigen::Success) { return false; }

  // K0 [x; ya] = [-q; ba] with K0 = [P A'; A 0], refined through K_delta.
  x  = Vector::Zero(d);
  ya = Vector::Zero(k);
  for (int it = 0; it <= s.polish_refine_iters; ++it) {
    const Vector r1 = -sp.q - sp.P * x - Aa.transpose() * ya;
    const Vector r2 = ba - Aa * x;
    const Vector dx = llt.solve(r1 + Aa.transpose() * r2 / delta);
    const Vector dy = (Aa * dx - r2) / delta;
    x += dx;
    ya += dy;
    if (!x.allFinite() || !ya.allFinite()) { return false; }
  }
  return true;
}

/**
 * Polishing: starting from the active set identified by ADMM, alternately
 * solve the equality-constrained problem, add violated rows and drop rows
 * with negative multipliers, until the unscaled KKT residuals are met.
 */
std::optional<Candidate> polish(
  const QpProblem& pb, const ScaledProblem& sp, std::vector<Eigen::Index> active, const SolverSettings& s)
{
  const Eigen::Index m = sp.b.size();
  Vector row_norm(m);
  row_norm.setOnes();
  for (Eigen::Index i = 0; i < m; ++i) {
    for (SparseRowMatrix::InnerIterator a(pb.A, i); a; ++a) { row_norm(i) = std::max(row_norm(i), std::abs(a.value())); }
  }

  constexpr int max_rounds = 12;
  Vector x, ya;
  for (int round = 0; round < max_rounds; ++round) {
    if (!solve_on_active_set(sp, active, s, x, ya)) { return std::nullopt; }

    Vector y = Vector::Zero(m);
    for (std::size_t r = 0; r < active.size(); ++r) { y(active[r]) = ya(static_cast<Eigen::Index>(r)); }

    Candidate cand;
    cand.z = sp.D.cwiseProduct(x);
    cand.y = sp.E.cwiseProduct(y) / sp.c;

    const Vector slack = pb.A * cand.z - pb.b;
    std::vector<char> in_set(static_cast<std::size_t>(m), 0);
    for (auto i : active) { in_set[static_cast<std::size_t>(i)] = 1; }

    std::vector<Eigen::Index> added, dropped;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (!in_set[static_cast<std::size_t>(i)] && slack(i) > 0.5 * s.eps_prim) { added.push_back(i); }
      if (in_set[static_cast<std::size_t>(i)] && cand.y(i) * row_norm(i) < -0.5 * s.eps_dual) { dropped.push_back(i); }
    }

    cand.y   = cand.y.cwiseMax(0.0);
    cand.kkt = kkt_residuals(pb, cand.z, cand.y);
    if (s.verbose) {
      std::fprintf(stderr, "polish round %d |act| %zu  +%zu -%zu  prim %.3e  dual %.3e  comp %.3e\n", round,
                   active.size(), added.size(), dropped.size(), cand.kkt.primal, cand.kkt.dual, cand.kkt.comp);
    }
    if (meets(cand.kkt, s)) { return cand; }
    if (added.empty() && dropped.empty()) { return std::nullopt; }

    // new violations take priority; rows are dropped only once the point is feasible
    if (!added.empty()) {
      for (auto i : added) { in_set[static_cast<std::size_t>(i)] = 1; }
    } else {
      for (auto i : dropped) { in_set[static_cast<std::size_t>(i)] = 0; }
    }
    active.clear();
    for (Eigen::Index i = 0; i < m; ++i) {
      if (in_set[static_cast<std::size_t>(i)]) { active.push_back(i); }
    }
  }
  return std::nullopt;
}

/// Rejects indefinite curvature up front; both methods would otherwise return a stationary point.
/// P is accepted when P + delta I admits a Cholesky factor, delta a small multiple of its scale.
bool is_psd(const Matrix& P)
{
  if (P.size() == 0) { return true; }
  Matrix shifted = P;
  shifted.diagonal().array() += 1e-10 * std::max(1.0, P.cwiseAbs().maxCoeff());
  Eigen::LLT<Matrix> llt(shifted);
  return llt.info() == Eigen::Success;
}

/// Fills residuals and objective; Solved is downgraded when the certificate fails.
QpSolution finalize(const QpProblem& problem, const SolverSettings& settings, QpSolution sol, const Vector& z,
                    const Vector& y, SolveStatus status, long iters)
{
  sol.z          = z;
  sol.y          = y;
  sol.iterations = iters;
  sol.objective  = problem.objective(z);
  const auto kkt = kkt_residuals(problem, z, y);
  sol.primal_residual = kkt.primal;
  sol.dual_residual   = kkt.dual;
  sol.comp_slackness  = kkt.comp;
  sol.status          = status;
  if (status == SolveStatus::Solved && !meets(kkt, settings)) { sol.status = SolveStatus::MaxIters; }
  return sol;
}

/// Largest step in (0, 1] keeping v + t dv strictly positive, with a fraction-to-boundary factor.
double max_step(const Vector& v, const Vector& dv, double frac)
{
  double t = 1.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (dv(i) < 0) { t = std::min(t, -frac * v(i) / dv(i)); }
  }
  return t;
}

/**
 * Primal-dual interior point (Mehrotra predictor-corrector) in scaled space.
 * With slacks s = b - Ax >= 0 and multipliers y >= 0 each Newton step reduces to
 *
 *   (P + A' W A) dx = rhs,   W = diag(y / s),
 *
 * which is dense d x d but cheap to assemble because every row of A has only a
 * handful of nonzeros. Degenerate active sets do not matter here: the
 * multipliers follow the central path instead of being solved for on a guessed
 * active set.
 */
QpSolution solve_ipm(const QpProblem& problem, const SolverSettings& settings, const ScaledProblem& sp)
{
  const Eigen::Index d = problem.num_vars(), m = problem.num_rows();
  const SparseRowMatrix& A = sp.A;
  const SparseMatrix At    = A.transpose();

  QpSolution sol;
  auto finish = [&](const Vector& z, const Vector& y, SolveStatus status, long iters) {
    return finalize(problem, settings, sol, z, y, status, iters);
  };
  auto unscaled_z = [&](const Vector& xs) -> Vector { return sp.D.cwiseProduct(xs); };
  auto unscaled_y = [&](const Vector& ys) -> Vector { return sp.E.cwiseProduct(ys) / sp.c; };

  const double pscale   = std::max(1.0, sp.P.cwiseAbs().maxCoeff());
  const double base_reg = 1e-13 * pscale;
  double reg            = base_reg;
  Eigen::LLT<Matrix> llt;

  // singular P + A'WA (free directions, e.g. unregularized heights) gets a growing diagonal shift
  auto factor = [&](const Vector& w) {
    reg = base_reg;
    for (int attempt = 0; attempt < 10; ++attempt) {
      Matrix M = sp.P;
      for (Eigen::Index i = 0; i < m; ++i) {
        for (SparseRowMatrix::InnerIterator a(A, i); a; ++a) {
          const double wa = w(i) * a.value();
          for (SparseRowMatrix::InnerIterator c(A, i); c; ++c) { M(a.col(), c.col()) += wa * c.value(); }
        }
      }
      M.diagonal().array() += reg;
      llt.compute(M);
      if (llt.info() == Eigen::Success) { return true; }
      reg = std::max(reg * 100, 1e-12);
    }
    return false;
  };

  // start from the least-squares point of the relaxed system, slacks and multipliers pushed inside
  Vector x = Vector::Zero(d);
  if (!factor(Vector::Ones(m))) { return finish(Vector::Zero(d), Vector::Zero(m), SolveStatus::NumericalFailure, 0); }
  x = llt.solve(-sp.q + At * sp.b);
  Vector s = (sp.b - A * x).cwiseMax(1.0);
  Vector y = Vector::Ones(m);

  if (m == 0) {
    // unconstrained: one Newton step from x = 0 is exact up to the regularization
    const Vector zu = unscaled_z(x);
    return finish(zu, Vector::Zero(0), SolveStatus::Solved, 1);
  }

  Vector best_z = unscaled_z(x), best_y = unscaled_y(y);
  double best_score = std::numeric_limits<double>::infinity();
  int stall         = 0;

  auto score_of = [&](const KktResiduals& r) {
    return std::max({r.primal / settings.eps_prim, r.dual / settings.eps_dual, r.comp / settings.eps_comp});
  };

  // Degenerate problems (active rows with zero multipliers, as in exact fits) only
  // pin the iterate to about sqrt(eps). An equality solve on the rows whose
  // multiplier dominates their slack lands on the face exactly; it is kept only
  // when its own certificate is tighter.
  auto finish_polished = [&](const Vector& zu, const Vector& yu, SolveStatus status, long k) {
    if (settings.polish) {
      std::vector<Eigen::Index> act;
      for (Eigen::Index i = 0; i < m; ++i) {
        if (y(i) > s(i)) { act.push_back(i); }
      }
      if (auto cand = polish(problem, sp, act, settings)) {
        if (score_of(cand->kkt) < score_of(kkt_residuals(problem, zu, yu))) {
          sol.polished = true;
          return finish(cand->z, cand->y, SolveStatus::Solved, k);
        }
      }
    }
    return finish(zu, yu, status, k);
  };

  for (long k = 1; k <= settings.ipm_max_iters; ++k) {
    const Vector rd = sp.P * x + sp.q + At * y;
    const Vector rp = A * x + s - sp.b;
    const double mu = s.dot(y) / static_cast<double>(m);

    const Vector zu = unscaled_z(x), yu = unscaled_y(y);
    const auto kkt  = kkt_residuals(problem, zu, yu);
    if (settings.verbose) {
      std::fprintf(stderr, "ipm %3ld  prim %.3e  dual %.3e  comp %.3e  mu %.3e  reg %.1e\n", k, kkt.primal, kkt.dual,
                   kkt.comp, mu, reg);
    }
    if (meets(kkt, settings)) { return finish_polished(zu, yu, SolveStatus::Solved, k); }
    if (!x.allFinite() || !y.allFinite() || !s.allFinite()) {
      return finish(best_z, best_y, SolveStatus::NumericalFailure, k);
    }
    const double score = score_of(kkt);
    if (score < best_score) {
      stall      = 0;
      best_score = score;
      best_z     = zu;
      best_y     = yu;
    } else {
      ++stall;
    }
    if (stall >= 15) { return finish(best_z, best_y, SolveStatus::NumericalFailure, k); }

    const Vector w = y.cwiseQuotient(s);
    if (!factor(w)) { return finish(best_z, best_y, SolveStatus::NumericalFailure, k); }

    // Newton direction for a complementarity target rc = S Y e + corr
    auto direction = [&](const Vector& rc, Vector& dx, Vector& dy, Vector& ds) {
      const Vector sinv_rc = rc.cwiseQuotient(s);
      const Vector rhs     = -rd - At * (w.cwiseProduct(rp) - sinv_rc);
      dx                   = llt.solve(rhs);
      // refine against the unregularized operator; late iterates are badly conditioned
      for (int r = 0; r < 3; ++r) {
        const Vector res = rhs - sp.P * dx - At * w.cwiseProduct(A * dx);
        if (inf_norm(res) <= 1e-14 * (1 + inf_norm(rhs))) { break; }
        dx += llt.solve(res);
      }
      dy = w.cwiseProduct(A * dx + rp) - sinv_rc;
      ds = -(rc + s.cwiseProduct(dy)).cwiseQuotient(y);
    };

    Vector dx, dy, ds;
    const Vector sy = s.cwiseProduct(y);
    direction(sy, dx, dy, ds);
    const double ta     = std::min(max_step(s, ds, 1.0), max_step(y, dy, 1.0));
    const double mu_aff = (s + ta * ds).dot(y + ta * dy) / static_cast<double>(m);
    const double sigma  = std::pow(mu_aff / mu, 3);

    const Vector rc = sy + ds.cwiseProduct(dy) - Vector::Constant(m, sigma * mu);
    direction(rc, dx, dy, ds);

    const double frac = 0.995;
    // one step length for both sides: with P != 0 separate lengths break the decrease of rd
    const double t = std::min(max_step(s, ds, frac), max_step(y, dy, frac));
    x += t * dx;
    s += t * ds;
    y += t * dy;
  }
  return finish(best_z, best_y, SolveStatus::MaxIters, settings.ipm_max_iters);
}

QpSolution solve_admm(const QpProblem& problem, const SolverSettings& settings, const ScaledProblem& sp)
{
  const Eigen::Index d = problem.num_vars(), m = problem.num_rows();

  QpSolution sol;
  sol.z = Vector::Zero(d);
  sol.y = Vector::Zero(m);

  auto finish = [&](const Vector& z, const Vector& y, SolveStatus status, long iters) {
    return finalize(problem, settings, sol, z, y, status, iters);
  };

  const Matrix AtA = m > 0 ? Matrix(SparseMatrix(sp.A.transpose() * sp.A)) : Matrix::Zero(d, d);

  double rho = settings.penalty_init;
  Eigen::LLT<Matrix> llt;
  auto factor = [&]() {
    Matrix K = sp.P + rho * AtA;
    K.diagonal().array() += settings.sigma;
    llt.compute(K);
    return llt.info() == Eigen::Success;
  };
  if (!factor()) { return finish(sol.z, sol.y, SolveStatus::NumericalFailure, 0); }

  Vector x = Vector::Zero(d), z = Vector::Zero(m), y = Vector::Zero(m);
  const double a = settings.alpha, sigma = settings.sigma;

  auto unscaled_z = [&](const Vector& xs) -> Vector { return sp.D.cwiseProduct(xs); };
  auto unscaled_y = [&](const Vector& ys) -> Vector { return sp.E.cwiseProduct(ys) / sp.c; };

  // polishing is attempted on a doubling iteration schedule
  long next_polish = 4L * settings.check_interval;
  std::vector<Eigen::Index> last_polished;
  bool polished_once = false;

  auto active_set = [&]() {
    std::vector<Eigen::Index> act;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (y(i) > 0 && sp.b(i) - z(i) < y(i)) { act.push_back(i); }
    }
    return act;
  };

  auto try_polish = [&](const std::vector<Eigen::Index>& act) -> std::optional<Candidate> {
    last_polished = act;
    polished_once = true;
    auto cand     = polish(problem, sp, act, settings);
    if (cand && meets(cand->kkt, settings)) { return cand; }
    return std::nullopt;
  };

  for (long k = 1; k <= settings.max_iters; ++k) {
    const Vector rhs = sigma * x - sp.q + sp.A.transpose() * (rho * z - y);
    const Vector xt  = llt.solve(rhs);
    const Vector zt  = sp.A * xt;

    x             = a * xt + (1 - a) * x;
    const Vector v = a * zt + (1 - a) * z;
    const Vector znew = (v + y / rho).cwiseMin(sp.b);
    y += rho * (v - znew);
    z = znew;

    if (k % settings.check_interval != 0 && k != settings.max_iters) { continue; }

    if (!x.allFinite() || !y.allFinite()) {
      return finish(Vector::Zero(d), Vector::Zero(m), SolveStatus::NumericalFailure, k);
    }

    const Vector zu = unscaled_z(x), yu = unscaled_y(y);
    const auto kkt  = kkt_residuals(problem, zu, yu);
    if (settings.verbose) {
      std::fprintf(stderr, "iter %7ld  prim %.3e  dual %.3e  comp %.3e  rho %.3e\n", k, kkt.primal, kkt.dual, kkt.comp, rho);
    }
    if (meets(kkt, settings)) { return finish(zu, yu, SolveStatus::Solved, k); }

    if (settings.polish && k >= next_polish) {
      next_polish *= 2;
      auto act = active_set();
      if (!polished_once || act != last_polished) {
        if (auto cand = try_polish(act)) {
          sol.polished = true;
          return finish(cand->z, cand->y, SolveStatus::Solved, k);
        }
      }
    }

    if (settings.penalty_adapt && m > 0) {
      const Vector Ax  = sp.A * x;
      const Vector Px  = sp.P * x;
      const Vector Aty = sp.A.transpose() * y;
      const double prim = inf_norm(Ax - z) / (std::max(inf_norm(Ax), inf_norm(z)) + 1e-30);
      const double dual = inf_norm(Px + sp.q + Aty)
                        / (std::max({inf_norm(Px), inf_norm(Aty), inf_norm(sp.q)}) + 1e-30);
      double rho_new = rho * std::sqrt(prim / (dual + 1e-30));
      rho_new        = std::clamp(rho_new, 1e-6, 1e6);
      if (rho_new > 5 * rho || rho_new < rho / 5) {
        rho = rho_new;
        if (!factor()) { return finish(zu, yu, SolveStatus::NumericalFailure, k); }
      }
    }
  }

  if (settings.polish) {
    auto act = active_set();
    if (!polished_once || act != last_polished) {
      if (auto cand = try_polish(act)) {
        sol.polished = true;
        return finish(cand->z, cand->y, SolveStatus::Solved, settings.max_iters);
      }
    }
  }
  return finish(unscaled_z(x), unscaled_y(y), SolveStatus::MaxIters, settings.max_iters);
}

}  // namespace

std::string to_string(SolveStatus status)
{
  switch (status) {
  case SolveStatus::Solved: return "Solved";
  case SolveStatus::MaxIters: return "MaxIters";
  case SolveStatus::NumericalFailure: return "NumericalFailure";
  }
  return "Unknown";
}

void QpProblem::validate() const
{
  const Eigen::Index d = num_vars(), m = num_rows();
  if (P.rows() != d || P.cols() != d) {
    throw Error(ErrorKind::DimensionMismatch, "P must be d x d with d = size(q)");
  }
  if (A.cols() != d || A.rows() != m) {
    throw Error(ErrorKind::DimensionMismatch, "A must be m x d with m = size(b)");
  }
  if (!names.empty() && static_cast<Eigen::Index>(names.size()) != d) {
    throw Error(ErrorKind::DimensionMismatch, "names must be empty or have one entry per variable");
  }
  if (!q.allFinite() || !b.allFinite() || !all_finite(P) || !all_finite(A)) {
    throw Error(ErrorKind::InvalidProblem, "non-finite problem data");
  }
  const SparseMatrix Pt = P.transpose();
  const SparseMatrix diff = P - Pt;
  double asym = 0, pmax = 0;
  for (Eigen::Index k = 0; k < diff.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(diff, k); it; ++it) { asym = std::max(asym, std::abs(it.value())); }
  }
  for (Eigen::Index k = 0; k < P.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(P, k); it; ++it) { pmax = std::max(pmax, std::abs(it.value())); }
  }
  if (asym > 1e-12 * std::max(1.0, pmax)) { throw Error(ErrorKind::InvalidProblem, "P is not symmetric"); }
  for (Eigen::Index i = 0; i < m; ++i) {
    bool nonzero = false;
    for (SparseRowMatrix::InnerIterator it(A, i); it; ++it) { nonzero = nonzero || it.value() != 0.0; }
    if (!nonzero) { throw Error(ErrorKind::InvalidProblem, "constraint row " + std::to_string(i) + " is empty"); }
  }
}

double QpProblem::objective(const Vector& z) const { return 0.5 * z.dot(P * z) + q.dot(z); }

void SolverSettings::validate() const
{
  if (!(eps_prim > 0 && eps_dual > 0 && eps_comp > 0)) {
    throw Error(ErrorKind::InvalidArgument, "solver tolerances must be strictly positive");
  }
  if (max_iters < 1 || ipm_max_iters < 1 || penalty_init <= 0 || sigma <= 0 || alpha <= 0 || alpha >= 2 || check_interval < 1
      || scaling_iters < 0 || polish_delta <= 0) {
    throw Error(ErrorKind::InvalidArgument, "invalid solver settings");
  }
}

KktResiduals kkt_residuals(const QpProblem& problem, const Vector& z, const Vector& y)
{
  if (z.size() != problem.num_vars() || y.size() != problem.num_rows()) {
    throw Error(ErrorKind::DimensionMismatch, "kkt_residuals: z or y has the wrong size");
  }
  KktResiduals r;
  if (problem.num_rows() > 0) {
    const Vector slack = problem.A * z - problem.b;
    r.primal           = std::max(0.0, slack.maxCoeff());
    r.comp             = y.cwiseProduct(slack).cwiseAbs().maxCoeff();
  }
  r.dual = inf_norm(problem.P * z + problem.q + problem.A.transpose() * y);
  return r;
}

QpSolution solve_qp(const QpProblem& problem, const SolverSettings& settings)
{
  problem.validate();
  settings.validate();

  const ScaledProblem sp = equilibrate(problem, settings.scaling_iters);
  if (!is_psd(sp.P)) {
    if (settings.verbose) { std::fprintf(stderr, "cost curvature is not positive semidefinite\n"); }
    return finalize(problem, settings, QpSolution{}, Vector::Zero(problem.num_vars()), Vector::Zero(problem.num_rows()),
                    SolveStatus::NumericalFailure, 0);
  }
  if (settings.method == QpMethod::Admm) { return solve_admm(problem, settings, sp); }
  return solve_ipm(problem, settings, sp);
}

nlohmann::json qp_to_json(const QpProblem& problem)
{
  nlohmann::json doc;
  doc["d"] = problem.num_vars();
  doc["m"] = problem.num_rows();
  auto P   = nlohmann::json::array();
  for (Eigen::Index k = 0; k < problem.P.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(problem.P, k); it; ++it) {
      P.push_back({it.row(), it.col(), it.value()});
    }
  }
  auto A = nlohmann::json::array();
  for (Eigen::Index k = 0; k < problem.A.outerSize(); ++k) {
    for (SparseRowMatrix::InnerIterator it(problem.A, k); it; ++it) {
      A.push_back({it.row(), it.col(), it.value()});
    }
  }
  doc["P"] = std::move(P);
  doc["A"] = std::move(A);
  doc["q"] = std::vector<double>(problem.q.data(), problem.q.data() + problem.q.size());
  doc["b"] = std::vector<double>(problem.b.data(), problem.b.data() + problem.b.size());
  if (!problem.names.empty()) { doc["names"] = problem.names; }
  return doc;
}

QpProblem qp_from_json(const nlohmann::json& doc)
{
  try {
    const auto d = doc.at("d").get<Eigen::Index>();
    const auto m = doc.at("m").get<Eigen::Index>();
    QpProblem pb;
    const auto q = doc.at("q").get<std::vector<double>>();
    const auto b = doc.at("b").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(q.size()) != d || static_cast<Eigen::Index>(b.size()) != m) {
      throw Error(ErrorKind::SchemaError, "qp json: q/b lengths disagree with d/m");
    }
    pb.q = Eigen::Map<const Vector>(q.data(), d);
    pb.b = Eigen::Map<const Vector>(b.data(), m);

    auto triplets = [](const nlohmann::json& arr, Eigen::Index rows, Eigen::Index cols) {
      std::vector<Eigen::Triplet<double>> t;
      for (const auto& e : arr) {
        const auto i = e.at(0).get<Eigen::Index>(), j = e.at(1).get<Eigen::Index>();
        if (i < 0 || j < 0 || i >= rows || j >= cols) {
          throw Error(ErrorKind::SchemaError, "qp json: entry index out of range");
        }
        t.emplace_back(i, j, e.at(2).get<double>());
      }
      return t;
    };
    const auto tp = triplets(doc.at("P"), d, d);
    const auto ta = triplets(doc.at("A"), m, d);
    pb.P.resize(d, d);
    pb.P.setFromTriplets(tp.begin(), tp.end());
    pb.A.resize(m, d);
    pb.A.setFromTriplets(ta.begin(), ta.end());
    if (doc.contains("names")) { pb.names = doc.at("names").get<std::vector<std::string>>(); }
    return pb;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::SchemaError, std::string("qp json: ") + e.what());
  }
}

}  // namespace gradflow
