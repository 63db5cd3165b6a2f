#pragma once

/**
 * @file
 * @brief Trajectory data: simulate gradient flows, perturb the sampled states,
 * estimate time derivatives, and assemble / split / persist datasets.
 */

#include "gradflow/dataset.hpp"

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace gradflow {

struct Trajectory
{
  /// strictly increasing sample instants
  std::vector<double> times;
  /// one row per instant
  Eigen::MatrixXd states;
  /// initial condition the trajectory was generated from (may be empty for loaded data)
  Eigen::VectorXd x0;

  Eigen::Index dim() const { return states.cols(); }
  Eigen::Index size() const { return states.rows(); }

  /// Throws DimensionMismatch / InvalidArgument on inconsistent shape or
  /// non-finite entries, DegenerateTimes when times are not strictly increasing.
  void validate() const;
};

/// A vector field, optionally with the potential it descends (f = -grad phi).
struct FieldSpec
{
  std::string name;
  Eigen::Index dim = 0;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> field;
  /// empty when no analytic potential is known
  std::function<double(const Eigen::VectorXd&)> potential;
};

/// phi = a x1^2 + b x1 x2 + a x2^2 - c x1^4 - c x2^4 and its gradient flow.
FieldSpec quartic_example_field(double a = 0.7, double b = -0.5, double c = 0.15);

/// f = -rate x, phi = rate/2 |x|^2.
FieldSpec linear_decay_field(Eigen::Index n, double rate = 1.0);

struct StepControl
{
  /// largest RK4 substep
  double h_max = 1e-3;
  /// states with a larger norm count as diverged
  double blowup_norm = 1e8;
};

/**
 * @brief Fixed-substep classical RK4 between consecutive output instants.
 *
 * t_grid must start at 0 and be strictly increasing. Each interval is split
 * into ceil(dt / h_max) equal substeps. Throws Error(NonFiniteState) when the
 * state leaves the finite range.
 */
Trajectory simulate_gradient_flow(
  const FieldSpec& field, const Eigen::VectorXd& x0, const std::vector<double>& t_grid, const StepControl& step = {});

/// i.i.d. N(0, sigma_w^2) added to every state coordinate; seeded.
Trajectory add_state_noise(const Trajectory& traj, double sigma_w, std::uint64_t seed);

struct DerivativeEstimate
{
  double t = 0;
  Eigen::VectorXd x;
  Eigen::VectorXd y;
  /// weighted RMS residual of the local fit, largest over coordinates
  double residual = 0;
  /// the window was shifted off-center at a trajectory end
  bool clamped = false;
};

/**
 * @brief Local polynomial derivative estimates with tricube weights.
 *
 * For each instant a window of `window` consecutive samples is centered on it
 * (shifted inward at the ends) and a weighted least-squares polynomial of the
 * given degree is fitted per coordinate; y is its derivative at the instant.
 * Polynomials up to `degree` are reproduced exactly.
 *
 * Requires window odd, degree in {2, 3} and degree + 1 <= window. Throws
 * WindowTooLarge when window exceeds the trajectory length, DegenerateTimes
 * when the window instants are not distinct.
 */
std::vector<DerivativeEstimate> estimate_derivatives(const Trajectory& traj, int window = 7, int degree = 3);

/// Concatenates in (trajectory, time) order. Throws DimensionMismatch across trajectories.
Dataset assemble_dataset(const std::vector<std::vector<DerivativeEstimate>>& per_trajectory);

struct DatasetSplit
{
  Dataset train;
  Dataset test;
  /// row indices into the source dataset, ascending
  std::vector<Eigen::Index> train_rows;
  std::vector<Eigen::Index> test_rows;
};

/// Seeded uniform split; the train side gets round(fraction * n_s) rows.
/// Throws DegenerateSplit when either side would be empty.
DatasetSplit split_dataset(const Dataset& data, double train_fraction, std::uint64_t seed);

// CSV files: header row, comma separated, 17 significant digits.

void write_trajectory_csv(std::ostream& out, const Trajectory& traj);
Trajectory read_trajectory_csv(std::istream& in);
void write_dataset_csv(std::ostream& out, const Dataset& data);
Dataset read_dataset_csv(std::istream& in);
/// Plain point lists, header x1..xn.
void write_points_csv(std::ostream& out, const Eigen::MatrixXd& points, const std::string& prefix = "x");
Eigen::MatrixXd read_points_csv(std::istream& in);

void write_trajectory_csv(const std::string& path, const Trajectory& traj);
Trajectory read_trajectory_csv(const std::string& path);
void write_dataset_csv(const std::string& path, const Dataset& data);
Dataset read_dataset_csv(const std::string& path);

/// Protocol of the two-dimensional quartic experiment. Every choice the
/// original description leaves open is a field here.
struct ExperimentConfig
{
  Eigen::Vector2d domain_lo{-1.9, -1.9};
  Eigen::Vector2d domain_hi{1.9, 1.9};
  int n_traj     = 18;
  int n_samples  = 118;
  double sigma_w = 0.01;
  /// sampling interval along each trajectory
  double dt  = 0.15;
  int window = 7;
  int degree = 3;
  std::uint64_t seed = 1;
  std::vector<double> lambda_grid;
  std::vector<double> tau_grid;
  double train_fraction = 0.8;
  double a = 0.7, b = -0.5, c = 0.15;
  double h_max = 1e-3;
  /// redraws allowed per initial point before giving up
  int max_redraws = 1000;

  ExperimentConfig();
  void validate() const;
};

nlohmann::json to_json(const ExperimentConfig& cfg);
/// Missing keys keep their defaults; unknown keys are a SchemaError.
ExperimentConfig experiment_config_from_json(const nlohmann::json& doc);

struct ExperimentData
{
  FieldSpec field;
  std::vector<Trajectory> clean;
  std::vector<Trajectory> noisy;
  /// x = noisy states, y = estimated derivatives
  Dataset dataset;
  /// f evaluated at the noisy states, for scoring
  Eigen::MatrixXd true_field;
};

/**
 * @brief Simulate, perturb and differentiate the experiment trajectories.
 *
 * Initial points are drawn uniformly in the domain and redrawn until every
 * sampled state of the trajectory stays inside it (the quartic potential is
 * unbounded below, so trajectories outside the basin of the origin escape).
 * Samples are spread as evenly as possible: n_samples mod n_traj trajectories
 * get one extra instant. The derivative window is clamped to the largest odd
 * length a trajectory supports.
 */
ExperimentData generate_experiment_data(const ExperimentConfig& cfg, std::uint64_t seed);

}  // namespace gradflow
