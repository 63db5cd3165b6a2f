#include "gradflow/evaluation.hpp"

#include "gradflow/error.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <thread>

namespace gradflow {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

double r_squared(const MatrixXd& predicted, const MatrixXd& truth)
{
  if (predicted.rows() != truth.rows() || predicted.cols() != truth.cols()) {
    throw Error(ErrorKind::DimensionMismatch, "r_squared: predicted and truth differ in shape");
  }
  if (truth.size() == 0) { throw Error(ErrorKind::InvalidArgument, "r_squared: empty input"); }
  const double mean   = truth.mean();
  const double ss_tot = (truth.array() - mean).square().sum();
  if (!(ss_tot > 0)) { throw Error(ErrorKind::DegenerateTruth, "r_squared: truth is constant"); }
  const double ss_res = (predicted - truth).squaredNorm();
  return 1.0 - ss_res / ss_tot;
}

VectorXd predict_field(const FittedModel& model, double tau, const VectorXd& x)
{
  return std::visit([&](const auto& m) -> VectorXd { return predict_field(m, tau, x); }, model);
}

MatrixXd predict_field(const FittedModel& model, double tau, const MatrixXd& points)
{
  MatrixXd out(points.rows(), points.cols());
  for (Index i = 0; i < points.rows(); ++i) { out.row(i) = predict_field(model, tau, VectorXd(points.row(i).transpose())).transpose(); }
  return out;
}

nlohmann::json to_json(const FittedModel& model)
{
  return std::visit([](const auto& m) { return to_json(m); }, model);
}

FittedModel model_from_json(const nlohmann::json& doc)
{
  if (!doc.is_object() || !doc.contains("kind")) { throw Error(ErrorKind::SchemaError, "model json: missing 'kind'"); }
  const auto kind = doc.at("kind").get<std::string>();
  if (kind == "maxaffine") { return max_affine_from_json(doc); }
  if (kind == "dc") { return dc_from_json(doc); }
  throw Error(ErrorKind::SchemaError, "model json: unknown kind '" + kind + "'");
}

FitOutcome fit_model(const Dataset& data, const FitConfig& cfg, const SolverSettings& settings)
{
  FitOutcome out;
  auto take = [&](auto&& fit) {
    if (fit.model) { out.model = std::move(*fit.model); }
    out.solution = std::move(fit.solution);
    out.loss     = fit.loss;
    out.num_vars = fit.problem.qp.num_vars();
    out.num_rows = fit.problem.qp.num_rows();
  };
  if (is_dc(cfg.variant)) {
    take(fit_dc(data, cfg, settings));
  } else {
    take(fit_convex(data, cfg, settings));
  }
  return out;
}

SolverDiagnostics diagnostics_of(const QpSolution& sol)
{
  return {to_string(sol.status), sol.iterations, sol.objective, sol.primal_residual, sol.dual_residual, sol.comp_slackness};
}

namespace {

nlohmann::json to_json(const SolverDiagnostics& d)
{
  return {{"status", d.status},
          {"iterations", d.iterations},
          {"objective", d.objective},
          {"primal_residual", d.primal_residual},
          {"dual_residual", d.dual_residual},
          {"comp_slackness", d.comp_slackness}};
}

nlohmann::json rows_json(const MatrixXd& M)
{
  auto arr = nlohmann::json::array();
  for (Index i = 0; i < M.rows(); ++i) {
    std::vector<double> row(static_cast<std::size_t>(M.cols()));
    for (Index j = 0; j < M.cols(); ++j) { row[static_cast<std::size_t>(j)] = M(i, j); }
    arr.push_back(std::move(row));
  }
  return arr;
}

double seconds_since(std::chrono::steady_clock::time_point t0)
{
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

/// Strictly better, or equal score with larger lambda, or equal lambda with larger tau.
bool preferred(const GridPoint& a, const GridPoint& b)
{
  if (a.score != b.score) { return a.score > b.score; }
  if (a.lambda != b.lambda) { return a.lambda > b.lambda; }
  return a.tau > b.tau;
}

/// Runs fn(i) for i in [0, n) on up to `jobs` threads.
template <typename Fn>
void parallel_for(std::size_t n, int jobs, Fn&& fn)
{
  const auto workers = static_cast<std::size_t>(std::max(1, std::min<int>(jobs, static_cast<int>(n))));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) { fn(i); }
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) { fn(i); }
    });
  }
  for (auto& t : pool) { t.join(); }
}

struct LambdaFit
{
  std::optional<FittedModel> model;
  QpSolution solution;
  std::string note;
};

std::vector<LambdaFit> fit_lambda_grid(const Dataset& train, const std::vector<double>& lambda_grid, const CvOptions& options)
{
  std::vector<LambdaFit> fits(lambda_grid.size());
  parallel_for(lambda_grid.size(), options.jobs, [&](std::size_t i) {
    FitConfig cfg = options.fit;
    cfg.lambda    = lambda_grid[i];
    try {
      auto out        = fit_model(train, cfg, options.solver);
      fits[i].model   = std::move(out.model);
      fits[i].solution = std::move(out.solution);
      fits[i].note    = to_string(fits[i].solution.status);
    } catch (const Error& e) {
      fits[i].note = std::string(to_string(e.kind())) + ": " + e.what();
    }
  });
  return fits;
}

void check_grids(const std::vector<double>& lambda_grid, const std::vector<double>& tau_grid)
{
  if (lambda_grid.empty() || tau_grid.empty()) { throw Error(ErrorKind::InvalidArgument, "cross_validate: empty grid"); }
  for (double l : lambda_grid) {
    if (!(l >= 0) || !std::isfinite(l)) { throw Error(ErrorKind::InvalidArgument, "cross_validate: lambda must be >= 0"); }
  }
  for (double t : tau_grid) {
    if (!(t > 0) || !std::isfinite(t)) { throw Error(ErrorKind::InvalidArgument, "cross_validate: tau must be positive"); }
  }
}

}  // namespace

nlohmann::json to_json(const FitReport& report)
{
  nlohmann::json doc;
  doc["r_squared"] = report.r_squared;
  doc["lambda"]    = report.lambda;
  doc["tau"]       = report.tau;
  doc["solver"]    = to_json(report.solver);
  doc["seconds"]   = report.seconds;
  doc["residuals"] = rows_json(report.residuals);
  auto grid        = nlohmann::json::array();
  for (const auto& g : report.grid) {
    nlohmann::json e{{"lambda", g.lambda}, {"tau", g.tau}, {"ok", g.ok}, {"note", g.note}};
    e["r_squared"] = g.ok ? nlohmann::json(g.score) : nlohmann::json(nullptr);
    grid.push_back(std::move(e));
  }
  doc["grid"] = std::move(grid);
  return doc;
}

CvResult cross_validate(const Dataset& train, const Dataset& holdout, const std::vector<double>& lambda_grid,
                        const std::vector<double>& tau_grid, const CvOptions& options)
{
  const auto t0 = std::chrono::steady_clock::now();
  check_grids(lambda_grid, tau_grid);
  train.validate();
  holdout.validate();
  if (train.dim() != holdout.dim()) { throw Error(ErrorKind::DimensionMismatch, "cross_validate: train and holdout differ in dimension"); }

  const auto fits = fit_lambda_grid(train, lambda_grid, options);

  std::vector<GridPoint> grid;
  std::optional<std::size_t> best;
  std::size_t best_fit = 0;
  for (std::size_t i = 0; i < lambda_grid.size(); ++i) {
    for (double tau : tau_grid) {
      GridPoint g{lambda_grid[i], tau, false, 0.0, fits[i].note};
      if (fits[i].model) {
        g.score = r_squared(predict_field(*fits[i].model, tau, holdout.x), holdout.y);
        g.ok    = std::isfinite(g.score);
      }
      grid.push_back(g);
      if (g.ok && (!best || preferred(g, grid[*best]))) {
        best     = grid.size() - 1;
        best_fit = i;
      }
    }
  }
  if (!best) { throw Error(ErrorKind::AllFitsFailed, "cross_validate: every grid point failed"); }

  CvResult res{grid[*best].lambda, grid[*best].tau, FitReport{}, *fits[best_fit].model};
  res.report.lambda    = res.lambda;
  res.report.tau       = res.tau;
  res.report.r_squared = grid[*best].score;
  res.report.residuals = predict_field(res.model, res.tau, holdout.x) - holdout.y;
  res.report.solver    = diagnostics_of(fits[best_fit].solution);
  res.report.grid      = std::move(grid);
  res.report.seconds   = seconds_since(t0);
  return res;
}

CvResult cross_validate_kfold(const Dataset& data, int folds, std::uint64_t seed, const std::vector<double>& lambda_grid,
                              const std::vector<double>& tau_grid, const CvOptions& options)
{
  const auto t0 = std::chrono::steady_clock::now();
  check_grids(lambda_grid, tau_grid);
  data.validate();
  if (folds < 2 || folds > data.size()) { throw Error(ErrorKind::DegenerateSplit, "kfold: need 2 <= folds <= n_s"); }

  std::vector<Index> perm(static_cast<std::size_t>(data.size()));
  std::iota(perm.begin(), perm.end(), Index{0});
  std::mt19937_64 rng(seed);
  for (Index i = data.size() - 1; i > 0; --i) {
    std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(rng() % static_cast<std::uint64_t>(i + 1))]);
  }

  const std::size_t npairs = lambda_grid.size() * tau_grid.size();
  std::vector<double> total(npairs, 0.0);
  std::vector<int> failures(npairs, 0);
  std::vector<std::string> notes(npairs);
  for (int f = 0; f < folds; ++f) {
    std::vector<Index> tr, ho;
    for (std::size_t k = 0; k < perm.size(); ++k) { (static_cast<int>(k % static_cast<std::size_t>(folds)) == f ? ho : tr).push_back(perm[k]); }
    std::sort(tr.begin(), tr.end());
    std::sort(ho.begin(), ho.end());
    const Dataset train = data.subset(tr), holdout = data.subset(ho);
    const auto fits     = fit_lambda_grid(train, lambda_grid, options);
    for (std::size_t i = 0; i < lambda_grid.size(); ++i) {
      for (std::size_t j = 0; j < tau_grid.size(); ++j) {
        const std::size_t p = i * tau_grid.size() + j;
        if (!fits[i].model) {
          ++failures[p];
          notes[p] = fits[i].note;
          continue;
        }
        total[p] += r_squared(predict_field(*fits[i].model, tau_grid[j], holdout.x), holdout.y);
      }
    }
  }

  std::vector<GridPoint> grid;
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < lambda_grid.size(); ++i) {
    for (std::size_t j = 0; j < tau_grid.size(); ++j) {
      const std::size_t p = i * tau_grid.size() + j;
      GridPoint g{lambda_grid[i], tau_grid[j], failures[p] == 0, total[p] / folds, failures[p] ? notes[p] : "Solved"};
      grid.push_back(g);
      if (g.ok && (!best || preferred(g, grid[*best]))) { best = p; }
    }
  }
  if (!best) { throw Error(ErrorKind::AllFitsFailed, "kfold: every grid point failed in some fold"); }

  FitConfig cfg = options.fit;
  cfg.lambda    = grid[*best].lambda;
  auto refit    = fit_model(data, cfg, options.solver);
  if (!refit.model) {
    throw Error(ErrorKind::AllFitsFailed, "kfold: refit at the selected lambda ended with " + to_string(refit.solution.status));
  }
  CvResult res{grid[*best].lambda, grid[*best].tau, FitReport{}, *refit.model};
  res.report.lambda    = res.lambda;
  res.report.tau       = res.tau;
  res.report.r_squared = grid[*best].score;
  res.report.residuals = predict_field(res.model, res.tau, data.x) - data.y;
  res.report.solver    = diagnostics_of(refit.solution);
  res.report.grid      = std::move(grid);
  res.report.seconds   = seconds_since(t0);
  return res;
}

ExperimentResult reproduce_quartic_experiment(const ExperimentConfig& cfg, std::uint64_t seed, int jobs,
                                              const SolverSettings& solver)
{
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentResult res;
  res.config = cfg;
  res.seed   = seed;
  res.data   = generate_experiment_data(cfg, seed);

  // the split draws from its own stream so changing the data protocol does not reshuffle it
  std::seed_seq seq{seed, std::uint64_t{0x5eed5b17}};
  std::uint64_t split_seed = 0;
  seq.generate(reinterpret_cast<std::uint32_t*>(&split_seed), reinterpret_cast<std::uint32_t*>(&split_seed) + 2);
  res.split = split_dataset(res.data.dataset, cfg.train_fraction, split_seed);

  CvOptions options;
  options.fit.variant = Variant::DC;
  options.solver      = solver;
  options.jobs        = jobs;
  res.cv = cross_validate(res.split.train, res.split.test, cfg.lambda_grid, cfg.tau_grid, options);

  const MatrixXd holdout_pred = predict_field(res.cv.model, res.cv.tau, res.split.test.x);
  const MatrixXd holdout_true = res.data.true_field(res.split.test_rows, Eigen::all);
  res.r2_holdout_true         = r_squared(holdout_pred, holdout_true);
  res.r2_holdout_est          = r_squared(holdout_pred, res.split.test.y);
  res.r2_all_true = r_squared(predict_field(res.cv.model, res.cv.tau, res.data.dataset.x), res.data.true_field);

  constexpr int side = 41;
  res.surface.resize(side * side, 6);
  for (int i = 0; i < side; ++i) {
    for (int j = 0; j < side; ++j) {
      VectorXd x(2);
      x(0) = cfg.domain_lo(0) + (cfg.domain_hi(0) - cfg.domain_lo(0)) * i / (side - 1);
      x(1) = cfg.domain_lo(1) + (cfg.domain_hi(1) - cfg.domain_lo(1)) * j / (side - 1);
      // the surfaces are the potential's partial derivatives, i.e. minus the field
      const VectorXd truth = -res.data.field.field(x);
      const VectorXd est   = -predict_field(res.cv.model, res.cv.tau, x);
      res.surface.row(i * side + j) << x(0), x(1), truth(0), est(0), truth(1), est(1);
    }
  }
  res.seconds = seconds_since(t0);
  return res;
}

nlohmann::json to_json(const ExperimentResult& result)
{
  nlohmann::json doc;
  doc["seed"]             = result.seed;
  doc["config"]           = to_json(result.config);
  doc["n_samples"]        = result.data.dataset.size();
  doc["n_train"]          = result.split.train.size();
  doc["n_holdout"]        = result.split.test.size();
  doc["r2_holdout_true"]  = result.r2_holdout_true;
  doc["r2_holdout_est"]   = result.r2_holdout_est;
  doc["r2_all_true"]      = result.r2_all_true;
  doc["seconds"]          = result.seconds;
  doc["fit_report"]       = to_json(result.cv.report);
  auto starts             = nlohmann::json::array();
  for (const auto& t : result.data.clean) { starts.push_back({t.x0(0), t.x0(1)}); }
  doc["initial_points"] = std::move(starts);
  return doc;
}

void write_experiment_outputs(const std::string& dir, const ExperimentResult& result)
{
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) { throw Error(ErrorKind::IoError, "cannot create directory '" + dir + "': " + ec.message()); }
  const fs::path root(dir);

  auto open = [](const fs::path& p) {
    std::ofstream out(p);
    if (!out) { throw Error(ErrorKind::IoError, "cannot open '" + p.string() + "' for writing"); }
    return out;
  };

  open(root / "report.json") << to_json(result).dump(2) << '\n';
  open(root / "model.json") << to_json(result.cv.model).dump(2) << '\n';
  write_dataset_csv((root / "dataset.csv").string(), result.data.dataset);

  auto surface = open(root / "surface.csv");
  surface << "x1,x2,true1,est1,true2,est2\n" << std::setprecision(17);
  for (Index i = 0; i < result.surface.rows(); ++i) {
    for (Index j = 0; j < result.surface.cols(); ++j) { surface << (j ? "," : "") << result.surface(i, j); }
    surface << '\n';
  }
  for (std::size_t k = 0; k < result.data.noisy.size(); ++k) {
    write_trajectory_csv((root / ("trajectory_" + std::to_string(k + 1) + ".csv")).string(), result.data.noisy[k]);
  }
}

}  // namespace gradflow
