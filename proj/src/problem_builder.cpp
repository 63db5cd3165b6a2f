#include "gradflow/problem_builder.hpp"

#include "gradflow/error.hpp"

#include <cmath>

namespace gradflow {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using Triplets = std::vector<Eigen::Triplet<double>>;

namespace {

bool is_concave(Variant v) { return v == Variant::Concave || v == Variant::StronglyConcave; }
bool is_strong(Variant v) { return v == Variant::StronglyConvex || v == Variant::StronglyConcave; }

std::string theta_name(int piece, Index i)
{
  return (piece == 0 ? "theta[" : "theta" + std::to_string(piece) + "[") + std::to_string(i) + "]";
}

std::string xi_name(int piece, Index i, Index k)
{
  return (piece == 0 ? "xi[" : "xi" + std::to_string(piece) + "[") + std::to_string(i) + "," + std::to_string(k) + "]";
}

/// Rows theta_i - theta_j + <xi_i, x_j - x_i> <= -mu/2 |x_j - x_i|^2 for all ordered pairs i != j.
void add_pairwise_rows(
  const Dataset& data, const VariableLayout::Block& theta, const VariableLayout::Block& xi, double mu, Triplets& trips,
  std::vector<double>& rhs)
{
  const Index ns = data.size(), n = data.dim();
  for (Index i = 0; i < ns; ++i) {
    for (Index j = 0; j < ns; ++j) {
      if (i == j) { continue; }
      const auto row = static_cast<Index>(rhs.size());
      trips.emplace_back(row, theta.offset + i, 1.0);
      trips.emplace_back(row, theta.offset + j, -1.0);
      double dist2 = 0;
      for (Index k = 0; k < n; ++k) {
        const double dx = data.x(j, k) - data.x(i, k);
        dist2 += dx * dx;
        if (dx != 0.0) { trips.emplace_back(row, xi.offset + i * n + k, dx); }
      }
      rhs.push_back(-0.5 * mu * dist2);
    }
  }
}

QpProblem assemble(Index d, const Triplets& ptrips, VectorXd q, const Triplets& atrips, const std::vector<double>& rhs)
{
  QpProblem qp;
  qp.P.resize(d, d);
  qp.P.setFromTriplets(ptrips.begin(), ptrips.end());
  qp.P.makeCompressed();
  qp.q = std::move(q);
  qp.A.resize(static_cast<Index>(rhs.size()), d);
  qp.A.setFromTriplets(atrips.begin(), atrips.end());
  qp.A.makeCompressed();
  qp.b = Eigen::Map<const VectorXd>(rhs.data(), static_cast<Index>(rhs.size()));
  return qp;
}

void check_layout(const QpSolution& sol, const VariableLayout& layout, const Dataset& data, bool dc)
{
  if (is_dc(layout.variant) != dc) { throw Error(ErrorKind::LayoutMismatch, "layout belongs to a different variant family"); }
  if (sol.z.size() != layout.num_vars() || layout.num_samples != data.size() || layout.dim != data.dim()) {
    throw Error(ErrorKind::LayoutMismatch, "solution/layout/dataset sizes disagree");
  }
}

}  // namespace

std::string to_string(Variant v)
{
  switch (v) {
  case Variant::Convex: return "convex";
  case Variant::Concave: return "concave";
  case Variant::StronglyConvex: return "strongly-convex";
  case Variant::StronglyConcave: return "strongly-concave";
  case Variant::ConvexWithEquilibrium: return "equilibrium";
  case Variant::DC: return "dc";
  case Variant::DCParametric: return "dc-parametric";
  }
  return "unknown";
}

Variant parse_variant(const std::string& s)
{
  for (auto v : {Variant::Convex, Variant::Concave, Variant::StronglyConvex, Variant::StronglyConcave,
                 Variant::ConvexWithEquilibrium, Variant::DC, Variant::DCParametric}) {
    if (to_string(v) == s) { return v; }
  }
  throw Error(ErrorKind::InvalidArgument, "unknown variant '" + s + "'");
}

bool is_dc(Variant v) { return v == Variant::DC || v == Variant::DCParametric; }

void FitConfig::validate(Index n) const
{
  if (!(lambda >= 0) || !std::isfinite(lambda)) { throw Error(ErrorKind::InvalidArgument, "lambda must be >= 0"); }
  if (is_strong(variant) && !(mu > 0 && std::isfinite(mu))) {
    throw Error(ErrorKind::InvalidArgument, "strong variants need mu > 0");
  }
  if (variant == Variant::ConvexWithEquilibrium && (x0.size() != n || !x0.allFinite())) {
    throw Error(ErrorKind::DimensionMismatch, "equilibrium variant needs a finite x0 of dimension n");
  }
  if (variant == Variant::DCParametric && basis.empty()) {
    throw Error(ErrorKind::InvalidArgument, "dc-parametric needs at least one basis field");
  }
}

Index VariableLayout::num_vars() const { return theta1.size + xi1.size + theta2.size + xi2.size + alpha.size; }

VectorXd block_vector(const VectorXd& z, const VariableLayout::Block& blk) { return z.segment(blk.offset, blk.size); }

MatrixXd block_slopes(const VectorXd& z, const VariableLayout::Block& blk, Index n)
{
  const Index rows = blk.size / n;
  MatrixXd xi(rows, n);
  for (Index i = 0; i < rows; ++i) {
    for (Index k = 0; k < n; ++k) { xi(i, k) = z(blk.offset + i * n + k); }
  }
  return xi;
}

FitProblem build_convex_fit(const Dataset& data, const FitConfig& cfg)
{
  if (is_dc(cfg.variant)) { throw Error(ErrorKind::VariantMismatch, "build_convex_fit: DC variant requested"); }
  data.validate();
  cfg.validate(data.dim());

  const Index ns = data.size(), n = data.dim();
  FitProblem fp;
  auto& L       = fp.layout;
  L.variant     = cfg.variant;
  L.num_samples = ns;
  L.dim         = n;
  L.theta1      = {0, ns};
  L.xi1         = {ns, ns * n};
  const Index d = L.num_vars();

  const double s  = is_concave(cfg.variant) ? -1.0 : 1.0;
  const double mu = is_strong(cfg.variant) ? cfg.mu : 0.0;

  // sum_i |y_i + s xi_i|^2 + lambda |theta|^2  ->  0.5 z'Pz + q'z + |y|^2
  Triplets ptrips;
  VectorXd q = VectorXd::Zero(d);
  for (Index i = 0; i < ns; ++i) {
    if (cfg.lambda > 0) { ptrips.emplace_back(i, i, 2 * cfg.lambda); }
    for (Index k = 0; k < n; ++k) {
      const Index idx = L.xi1.offset + i * n + k;
      ptrips.emplace_back(idx, idx, 2.0 + (cfg.tikhonov ? 2 * cfg.lambda : 0.0));
      q(idx) = 2 * s * data.y(i, k);
    }
  }
  fp.loss_offset  = data.y.squaredNorm();
  fp.theta_unique = cfg.lambda > 0;

  Triplets atrips;
  std::vector<double> rhs;
  add_pairwise_rows(data, L.theta1, L.xi1, mu, atrips, rhs);

  if (cfg.variant == Variant::ConvexWithEquilibrium) {
    // virtual sample (x0, theta0 = 0, xi0 = 0) substituted into the pairwise rows
    for (Index j = 0; j < ns; ++j) {
      const auto row = static_cast<Index>(rhs.size());
      atrips.emplace_back(row, L.theta1.offset + j, -1.0);
      rhs.push_back(0.0);
    }
    for (Index i = 0; i < ns; ++i) {
      const auto row = static_cast<Index>(rhs.size());
      atrips.emplace_back(row, L.theta1.offset + i, 1.0);
      for (Index k = 0; k < n; ++k) {
        const double dx = cfg.x0(k) - data.x(i, k);
        if (dx != 0.0) { atrips.emplace_back(row, L.xi1.offset + i * n + k, dx); }
      }
      rhs.push_back(0.0);
    }
  }

  fp.qp = assemble(d, ptrips, std::move(q), atrips, rhs);
  fp.qp.names.reserve(d);
  for (Index i = 0; i < ns; ++i) { fp.qp.names.push_back(theta_name(0, i)); }
  for (Index i = 0; i < ns; ++i) {
    for (Index k = 0; k < n; ++k) { fp.qp.names.push_back(xi_name(0, i, k)); }
  }
  return fp;
}

FitProblem build_dc_fit(const Dataset& data, const FitConfig& cfg)
{
  if (!is_dc(cfg.variant)) { throw Error(ErrorKind::VariantMismatch, "build_dc_fit: non-DC variant requested"); }
  data.validate();
  cfg.validate(data.dim());

  const Index ns = data.size(), n = data.dim();
  const Index p  = cfg.variant == Variant::DCParametric ? static_cast<Index>(cfg.basis.size()) : 0;

  FitProblem fp;
  auto& L       = fp.layout;
  L.variant     = cfg.variant;
  L.num_samples = ns;
  L.dim         = n;
  L.theta1      = {0, ns};
  L.theta2      = {ns, ns};
  L.xi1         = {2 * ns, ns * n};
  L.xi2         = {2 * ns + ns * n, ns * n};
  L.alpha       = {2 * ns + 2 * ns * n, p};
  const Index d = L.num_vars();

  // basis values H_i(:, k) = h_k(x_i)
  std::vector<MatrixXd> H(static_cast<std::size_t>(ns), MatrixXd(n, p));
  for (Index i = 0; i < ns; ++i) {
    const VectorXd xi = data.x.row(i).transpose();
    for (Index k = 0; k < p; ++k) {
      const VectorXd h = cfg.basis[static_cast<std::size_t>(k)].eval(xi);
      if (h.size() != n || !h.allFinite()) {
        throw Error(
          ErrorKind::BasisEvaluationError,
          "basis field '" + cfg.basis[static_cast<std::size_t>(k)].name + "' is invalid at sample " + std::to_string(i));
      }
      H[static_cast<std::size_t>(i)].col(k) = h;
    }
  }

  // sum_i |y_i + xi1_i - xi2_i - H_i alpha|^2 + lambda (|theta1|^2 + |theta2|^2 + |xi1 + xi2|^2)
  const double lam = cfg.lambda;
  Triplets ptrips;
  VectorXd q = VectorXd::Zero(d);
  for (Index i = 0; i < ns; ++i) {
    if (lam > 0) {
      ptrips.emplace_back(L.theta1.offset + i, L.theta1.offset + i, 2 * lam);
      ptrips.emplace_back(L.theta2.offset + i, L.theta2.offset + i, 2 * lam);
    }
    const MatrixXd& Hi = H[static_cast<std::size_t>(i)];
    for (Index c = 0; c < n; ++c) {
      const Index a = L.xi1.offset + i * n + c;
      const Index b = L.xi2.offset + i * n + c;
      ptrips.emplace_back(a, a, 2 * (1 + lam));
      ptrips.emplace_back(b, b, 2 * (1 + lam));
      ptrips.emplace_back(a, b, 2 * (lam - 1));
      ptrips.emplace_back(b, a, 2 * (lam - 1));
      q(a) = 2 * data.y(i, c);
      q(b) = -2 * data.y(i, c);
      for (Index k = 0; k < p; ++k) {
        const double h = Hi(c, k);
        if (h == 0.0) { continue; }
        const Index al = L.alpha.offset + k;
        ptrips.emplace_back(a, al, -2 * h);
        ptrips.emplace_back(al, a, -2 * h);
        ptrips.emplace_back(b, al, 2 * h);
        ptrips.emplace_back(al, b, 2 * h);
      }
    }
    if (p > 0) {
      const MatrixXd HtH = Hi.transpose() * Hi;
      const VectorXd Hty = Hi.transpose() * data.y.row(i).transpose();
      for (Index k = 0; k < p; ++k) {
        q(L.alpha.offset + k) -= 2 * Hty(k);
        for (Index l = 0; l < p; ++l) {
          if (HtH(k, l) != 0.0) { ptrips.emplace_back(L.alpha.offset + k, L.alpha.offset + l, 2 * HtH(k, l)); }
        }
      }
    }
  }
  fp.loss_offset  = data.y.squaredNorm();
  fp.theta_unique = lam > 0;

  Triplets atrips;
  std::vector<double> rhs;
  add_pairwise_rows(data, L.theta1, L.xi1, 0.0, atrips, rhs);
  add_pairwise_rows(data, L.theta2, L.xi2, 0.0, atrips, rhs);

  fp.qp = assemble(d, ptrips, std::move(q), atrips, rhs);
  fp.qp.names.reserve(d);
  for (int piece = 1; piece <= 2; ++piece) {
    for (Index i = 0; i < ns; ++i) { fp.qp.names.push_back(theta_name(piece, i)); }
  }
  for (int piece = 1; piece <= 2; ++piece) {
    for (Index i = 0; i < ns; ++i) {
      for (Index k = 0; k < n; ++k) { fp.qp.names.push_back(xi_name(piece, i, k)); }
    }
  }
  for (Index k = 0; k < p; ++k) { fp.qp.names.push_back("alpha[" + std::to_string(k) + "]"); }
  return fp;
}

FitProblem build_fit(const Dataset& data, const FitConfig& cfg)
{
  return is_dc(cfg.variant) ? build_dc_fit(data, cfg) : build_convex_fit(data, cfg);
}

MaxAffinePotential extract_convex_model(
  const QpSolution& sol, const VariableLayout& layout, const Dataset& data, const FitConfig& cfg)
{
  check_layout(sol, layout, data, false);
  const Index ns = data.size(), n = data.dim();
  VectorXd theta = block_vector(sol.z, layout.theta1);
  MatrixXd xi    = block_slopes(sol.z, layout.xi1, n);
  MatrixXd anchors = data.x;
  const int sign   = is_concave(layout.variant) ? -1 : 1;

  if (layout.variant == Variant::ConvexWithEquilibrium) {
    if (cfg.x0.size() != n) { throw Error(ErrorKind::LayoutMismatch, "equilibrium layout without a matching x0"); }
    // Same arithmetic as MaxAffinePotential::plane_value, so a clipped plane evaluates to exactly 0 at x0.
    for (Index i = 0; i < ns; ++i) {
      double acc = 0;
      for (Index k = 0; k < n; ++k) { acc += xi(i, k) * (cfg.x0(k) - anchors(i, k)); }
      if (acc + theta(i) > 0) { theta(i) = -acc; }
    }
    anchors.conservativeResize(ns + 1, n);
    anchors.row(ns) = cfg.x0.transpose();
    theta.conservativeResize(ns + 1);
    theta(ns) = 0.0;
    xi.conservativeResize(ns + 1, n);
    xi.row(ns).setZero();
  }
  return MaxAffinePotential(std::move(anchors), std::move(theta), std::move(xi), sign);
}

DcPotential extract_dc_model(
  const QpSolution& sol, const VariableLayout& layout, const Dataset& data, const FitConfig& cfg)
{
  check_layout(sol, layout, data, true);
  const Index n = data.dim();
  MaxAffinePotential phi1(data.x, block_vector(sol.z, layout.theta1), block_slopes(sol.z, layout.xi1, n));
  MaxAffinePotential phi2(data.x, block_vector(sol.z, layout.theta2), block_slopes(sol.z, layout.xi2, n));
  VectorXd alpha = block_vector(sol.z, layout.alpha);
  Basis basis;
  if (layout.alpha.size > 0) {
    if (static_cast<Index>(cfg.basis.size()) != layout.alpha.size) {
      throw Error(ErrorKind::LayoutMismatch, "basis size does not match the alpha block");
    }
    basis = cfg.basis;
  }
  return DcPotential(std::move(phi1), std::move(phi2), std::move(alpha), std::move(basis));
}

double max_pairwise_violation(const Dataset& data, const VectorXd& theta, const MatrixXd& xi, double mu)
{
  const Index ns = data.size();
  double worst   = 0;
  for (Index i = 0; i < ns; ++i) {
    for (Index j = 0; j < ns; ++j) {
      if (i == j) { continue; }
      const VectorXd dx = (data.x.row(j) - data.x.row(i)).transpose();
      const double lhs  = theta(i) - theta(j) + xi.row(i).dot(dx) + 0.5 * mu * dx.squaredNorm();
      worst             = std::max(worst, lhs);
    }
  }
  return worst;
}

ConvexFit fit_convex(const Dataset& data, const FitConfig& cfg, const SolverSettings& settings)
{
  ConvexFit fit;
  fit.problem  = build_convex_fit(data, cfg);
  fit.solution = solve_qp(fit.problem.qp, settings);
  fit.loss     = fit.solution.objective + fit.problem.loss_offset;
  if (fit.solution.status == SolveStatus::Solved) {
    fit.model = extract_convex_model(fit.solution, fit.problem.layout, data, cfg);
  }
  return fit;
}

DcFit fit_dc(const Dataset& data, const FitConfig& cfg, const SolverSettings& settings)
{
  DcFit fit;
  fit.problem  = build_dc_fit(data, cfg);
  fit.solution = solve_qp(fit.problem.qp, settings);
  fit.loss     = fit.solution.objective + fit.problem.loss_offset;
  if (fit.solution.status == SolveStatus::Solved) {
    fit.model = extract_dc_model(fit.solution, fit.problem.layout, data, cfg);
  }
  return fit;
}

}  // namespace gradflow
