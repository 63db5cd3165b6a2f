#pragma once

/**
 * @brief Fit quality, hyperparameter selection and the end-to-end quartic
 * experiment.
 */

#include "gradflow/data_pipeline.hpp"
#include "gradflow/problem_builder.hpp"

#include <nlohmann/json_fwd.hpp>

#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace gradflow {

/// 1 - SS_res / SS_tot over all components pooled; SS_tot is centered at the
/// pooled mean of truth. Rows are samples. Throws DegenerateTruth when truth is
/// constant, DimensionMismatch / InvalidArgument on shape problems.
double r_squared(const Eigen::MatrixXd& predicted, const Eigen::MatrixXd& truth);

using FittedModel = std::variant<MaxAffinePotential, DcPotential>;

Eigen::VectorXd predict_field(const FittedModel& model, double tau, const Eigen::VectorXd& x);
/// One row per point.
Eigen::MatrixXd predict_field(const FittedModel& model, double tau, const Eigen::MatrixXd& points);
nlohmann::json to_json(const FittedModel& model);
/// Dispatches on the "kind" key.
FittedModel model_from_json(const nlohmann::json& doc);

struct FitOutcome
{
  std::optional<FittedModel> model;
  QpSolution solution;
  double loss = 0;
  Eigen::Index num_vars = 0;
  Eigen::Index num_rows = 0;
};

/// Convex or DC fit depending on cfg.variant.
FitOutcome fit_model(const Dataset& data, const FitConfig& cfg, const SolverSettings& settings = {});

struct SolverDiagnostics
{
  std::string status;
  long iterations        = 0;
  double objective       = 0;
  double primal_residual = 0;
  double dual_residual   = 0;
  double comp_slackness  = 0;
};

SolverDiagnostics diagnostics_of(const QpSolution& sol);

/// Result of one (lambda, tau) grid point.
struct GridPoint
{
  double lambda = 0;
  double tau    = 0;
  bool ok       = false;
  double score  = 0;
  /// solver status or error message when !ok
  std::string note;
};

struct FitReport
{
  double r_squared = 0;
  /// per-sample residual rows (prediction - reference) on the evaluation set
  Eigen::MatrixXd residuals;
  double lambda = 0;
  double tau    = 0;
  SolverDiagnostics solver;
  double seconds = 0;
  std::vector<GridPoint> grid;
};

nlohmann::json to_json(const FitReport& report);

struct CvOptions
{
  FitConfig fit;
  SolverSettings solver;
  /// worker threads for the lambda loop; the selection does not depend on it
  int jobs = 1;
};

struct CvResult
{
  double lambda = 0;
  double tau    = 0;
  /// scored on the holdout against its y values
  FitReport report;
  /// the train fit at the selected lambda
  FittedModel model;
};

/**
 * @brief Holdout selection of (lambda, tau).
 *
 * Fits once per lambda on `train`, scores every tau on `holdout`, and keeps the
 * pair with the best holdout R^2. Ties go to the larger lambda, then the larger
 * tau. Failed fits are recorded in the report grid; Error(AllFitsFailed) when
 * none succeeds.
 */
CvResult cross_validate(const Dataset& train, const Dataset& holdout, const std::vector<double>& lambda_grid,
                        const std::vector<double>& tau_grid, const CvOptions& options);

/// k-fold variant: the score of a pair is its mean holdout R^2 over k seeded folds.
/// The returned model is refitted on all of `data` at the selected lambda.
CvResult cross_validate_kfold(const Dataset& data, int folds, std::uint64_t seed, const std::vector<double>& lambda_grid,
                              const std::vector<double>& tau_grid, const CvOptions& options);

struct ExperimentResult
{
  ExperimentConfig config;
  std::uint64_t seed = 0;
  ExperimentData data;
  DatasetSplit split;
  CvResult cv;
  /// holdout R^2 of the estimated field against the true field at the noisy states
  double r2_holdout_true = 0;
  /// holdout R^2 against the estimated derivatives (the selection criterion)
  double r2_holdout_est = 0;
  /// all samples (train + holdout) against the true field
  double r2_all_true = 0;
  /// 41 x 41 grid rows: x1, x2, true dphi/dx1, est dphi/dx1, true dphi/dx2, est dphi/dx2
  Eigen::MatrixXd surface;
  double seconds = 0;
};

/// Simulate, differentiate, split, cross-validate a DC fit and score it.
ExperimentResult reproduce_quartic_experiment(const ExperimentConfig& cfg, std::uint64_t seed, int jobs = 1,
                                              const SolverSettings& solver = {});

nlohmann::json to_json(const ExperimentResult& result);

/// Writes report.json, surface.csv, dataset.csv, model.json and one
/// trajectory CSV per trajectory into `dir` (created if needed).
void write_experiment_outputs(const std::string& dir, const ExperimentResult& result);

}  // namespace gradflow
