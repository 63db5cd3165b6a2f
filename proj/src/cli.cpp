#include "gradflow/cli.hpp"

#include "gradflow/data_pipeline.hpp"
#include "gradflow/error.hpp"
#include "gradflow/evaluation.hpp"
#include "gradflow/problem_builder.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

namespace gradflow {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Raised for flag combinations CLI11 cannot express; reported as a usage error.
struct UsageError : std::runtime_error
{
  using std::runtime_error::runtime_error;
};

VectorXd parse_point(const std::string& text, const std::string& flag)
{
  std::vector<double> values;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      values.push_back(std::stod(item, &used));
      if (used != item.size()) { throw std::invalid_argument(item); }
    } catch (const std::exception&) {
      throw UsageError(flag + ": expected comma-separated numbers, got '" + text + "'");
    }
  }
  if (values.empty()) { throw UsageError(flag + ": empty point"); }
  return Eigen::Map<const VectorXd>(values.data(), static_cast<Index>(values.size()));
}

nlohmann::json read_json_file(const std::string& path)
{
  std::ifstream in(path);
  if (!in) { throw Error(ErrorKind::IoError, "cannot open '" + path + "' for reading"); }
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::ParseError, path + ": " + e.what());
  }
}

void write_text(const std::string& path, const std::string& text, std::ostream& fallback)
{
  if (path.empty() || path == "-") {
    fallback << text;
    return;
  }
  std::ofstream out(path);
  if (!out) { throw Error(ErrorKind::IoError, "cannot open '" + path + "' for writing"); }
  out << text;
}

std::string fmt(double v)
{
  std::ostringstream s;
  s << std::setprecision(6) << v;
  return s.str();
}

struct Options
{
  bool json_errors = false;

  // shared
  std::string dataset, out, config, model_path, points, variant = "convex";
  std::optional<std::uint64_t> seed;
  int jobs = 1;

  // simulate
  std::string field = "quartic", x0_text;
  double t_end = 1.0, dt = 0.1, h_max = 1e-3, sigma_w = 0.0;

  // derivatives
  std::vector<std::string> trajectories;
  int window = 7, degree = 3;

  // fit
  double lambda = 0.0, mu = 0.0, eps = 1e-8;
  std::vector<std::string> basis;
  bool tikhonov = false;

  // predict
  double tau = 0.16;

  // crossval / reproduce
  std::vector<double> lambda_grid, tau_grid;
  double train_fraction = 0.8;
  int kfold = 0;
  std::optional<double> sigma_override, dt_override;
};

FitConfig fit_config_from(const Options& o, Index n)
{
  FitConfig cfg;
  cfg.variant  = parse_variant(o.variant);
  cfg.lambda   = o.lambda;
  cfg.mu       = o.mu;
  cfg.tikhonov = o.tikhonov;
  if (!o.x0_text.empty()) { cfg.x0 = parse_point(o.x0_text, "--x0"); }
  if (cfg.variant == Variant::ConvexWithEquilibrium && o.x0_text.empty()) {
    throw UsageError("--variant equilibrium requires --x0");
  }
  if (cfg.variant == Variant::DCParametric) {
    if (o.basis.empty()) { throw UsageError("--variant dc-parametric requires --basis"); }
    cfg.basis = make_basis(o.basis, n);
  }
  cfg.validate(n);
  return cfg;
}

SolverSettings solver_from(const Options& o)
{
  SolverSettings s;
  s.eps_prim = s.eps_dual = s.eps_comp = o.eps;
  return s;
}

ExperimentConfig experiment_from(const Options& o)
{
  ExperimentConfig cfg = o.config.empty() ? ExperimentConfig{} : experiment_config_from_json(read_json_file(o.config));
  if (!o.lambda_grid.empty()) { cfg.lambda_grid = o.lambda_grid; }
  if (!o.tau_grid.empty()) { cfg.tau_grid = o.tau_grid; }
  if (o.sigma_override) { cfg.sigma_w = *o.sigma_override; }
  if (o.dt_override) { cfg.dt = *o.dt_override; }
  if (o.seed) { cfg.seed = *o.seed; }
  cfg.validate();
  return cfg;
}

int cmd_simulate(const Options& o, std::ostream& out, std::ostream& err)
{
  if (o.x0_text.empty()) { throw UsageError("simulate requires --x0"); }
  if (o.sigma_w > 0 && !o.seed) { throw UsageError("simulate with --sigma-w > 0 requires --seed"); }
  if (!(o.t_end > 0) || !(o.dt > 0)) { throw UsageError("--t-end and --dt must be positive"); }

  FieldSpec field;
  const VectorXd x0 = parse_point(o.x0_text, "--x0");
  if (o.field == "quartic") {
    ExperimentConfig cfg = o.config.empty() ? ExperimentConfig{} : experiment_config_from_json(read_json_file(o.config));
    field                = quartic_example_field(cfg.a, cfg.b, cfg.c);
  } else if (o.field == "linear") {
    field = linear_decay_field(x0.size());
  } else {
    throw UsageError("--field must be quartic or linear");
  }

  std::vector<double> grid;
  const auto steps = static_cast<long>(std::floor(o.t_end / o.dt + 1e-9));
  for (long k = 0; k <= steps; ++k) { grid.push_back(static_cast<double>(k) * o.dt); }
  Trajectory traj = simulate_gradient_flow(field, x0, grid, StepControl{o.h_max});
  if (o.sigma_w > 0) { traj = add_state_noise(traj, o.sigma_w, *o.seed); }

  std::ostringstream csv;
  write_trajectory_csv(csv, traj);
  write_text(o.out, csv.str(), out);
  if (!o.out.empty()) { err << "wrote " << traj.size() << " instants to " << o.out << '\n'; }
  return kExitOk;
}

int cmd_derivatives(const Options& o, std::ostream& out, std::ostream& err)
{
  if (o.trajectories.empty()) { throw UsageError("derivatives requires --trajectory"); }
  std::vector<std::vector<DerivativeEstimate>> all;
  std::size_t clamped = 0;
  for (const auto& path : o.trajectories) {
    all.push_back(estimate_derivatives(read_trajectory_csv(path), o.window, o.degree));
    for (const auto& e : all.back()) { clamped += e.clamped ? 1 : 0; }
  }
  const Dataset data = assemble_dataset(all);
  std::ostringstream csv;
  write_dataset_csv(csv, data);
  write_text(o.out, csv.str(), out);
  err << "samples " << data.size() << " (" << clamped << " with one-sided windows)\n";
  return kExitOk;
}

int cmd_fit(const Options& o, std::ostream& out, std::ostream& err)
{
  if (o.dataset.empty()) { throw UsageError("fit requires --dataset"); }
  const Dataset data   = read_dataset_csv(o.dataset);
  const FitConfig cfg  = fit_config_from(o, data.dim());
  const FitOutcome fit = fit_model(data, cfg, solver_from(o));
  const auto& s        = fit.solution;

  out << "status " << to_string(s.status) << '\n'
      << "objective " << fmt(fit.loss) << '\n'
      << "primal_residual " << fmt(s.primal_residual) << '\n'
      << "dual_residual " << fmt(s.dual_residual) << '\n'
      << "comp_slackness " << fmt(s.comp_slackness) << '\n'
      << "iterations " << s.iterations << '\n';
  if (!fit.model) {
    err << "fit did not reach the requested tolerances; no model written\n";
    return kExitRuntime;
  }
  if (!o.out.empty()) { write_text(o.out, to_json(*fit.model).dump(2) + "\n", out); }
  return kExitOk;
}

int cmd_predict(const Options& o, std::ostream& out, std::ostream&)
{
  if (o.model_path.empty() || o.points.empty()) { throw UsageError("predict requires --model and --points"); }
  const FittedModel model = model_from_json(read_json_file(o.model_path));
  std::ifstream in(o.points);
  if (!in) { throw Error(ErrorKind::IoError, "cannot open '" + o.points + "' for reading"); }
  const MatrixXd pts = read_points_csv(in);
  const Index n      = std::visit([](const auto& m) { return m.dim(); }, model);
  if (pts.cols() != n) { throw Error(ErrorKind::DimensionMismatch, "points dimension differs from the model"); }
  if (!(o.tau > 0)) { throw UsageError("--tau must be positive"); }

  const MatrixXd f = predict_field(model, o.tau, pts);
  MatrixXd table(pts.rows(), 2 * n);
  table << pts, f;
  std::ostringstream csv;
  csv << std::setprecision(17);
  for (Index j = 1; j <= n; ++j) { csv << (j > 1 ? "," : "") << 'x' << j; }
  for (Index j = 1; j <= n; ++j) { csv << ",f" << j; }
  csv << '\n';
  for (Index i = 0; i < table.rows(); ++i) {
    for (Index j = 0; j < table.cols(); ++j) { csv << (j ? "," : "") << table(i, j); }
    csv << '\n';
  }
  write_text(o.out, csv.str(), out);
  return kExitOk;
}

int cmd_crossval(const Options& o, std::ostream& out, std::ostream& err)
{
  if (o.dataset.empty()) { throw UsageError("crossval requires --dataset"); }
  if (!o.seed) { throw UsageError("crossval requires --seed"); }
  const Dataset data = read_dataset_csv(o.dataset);
  ExperimentConfig grids = o.config.empty() ? ExperimentConfig{} : experiment_config_from_json(read_json_file(o.config));
  if (!o.lambda_grid.empty()) { grids.lambda_grid = o.lambda_grid; }
  if (!o.tau_grid.empty()) { grids.tau_grid = o.tau_grid; }

  CvOptions options;
  options.fit    = fit_config_from(o, data.dim());
  options.solver = solver_from(o);
  options.jobs   = o.jobs;

  CvResult res = [&] {
    if (o.kfold > 0) { return cross_validate_kfold(data, o.kfold, *o.seed, grids.lambda_grid, grids.tau_grid, options); }
    const DatasetSplit split = split_dataset(data, o.train_fraction, *o.seed);
    return cross_validate(split.train, split.test, grids.lambda_grid, grids.tau_grid, options);
  }();

  out << "lambda " << fmt(res.lambda) << '\n' << "tau " << fmt(res.tau) << '\n' << "r_squared " << fmt(res.report.r_squared) << '\n';
  if (!o.out.empty()) {
    nlohmann::json doc = to_json(res.report);
    doc["model"]       = to_json(res.model);
    write_text(o.out, doc.dump(2) + "\n", out);
    err << "wrote report to " << o.out << '\n';
  }
  return kExitOk;
}

int cmd_reproduce(const Options& o, std::ostream& out, std::ostream& err)
{
  if (!o.seed) { throw UsageError("reproduce-paper requires --seed"); }
  const ExperimentConfig cfg = experiment_from(o);
  const ExperimentResult res = reproduce_quartic_experiment(cfg, *o.seed, o.jobs);

  out << "samples " << res.data.dataset.size() << " (train " << res.split.train.size() << ", holdout "
      << res.split.test.size() << ")\n"
      << "selected lambda " << fmt(res.cv.lambda) << ", tau " << fmt(res.cv.tau) << '\n'
      << "R2 holdout vs true field " << fmt(res.r2_holdout_true) << '\n'
      << "R2 holdout vs estimated derivatives " << fmt(res.r2_holdout_est) << '\n'
      << "R2 all samples vs true field " << fmt(res.r2_all_true) << '\n'
      << "seconds " << fmt(res.seconds) << '\n';
  if (!o.out.empty()) {
    write_experiment_outputs(o.out, res);
    err << "wrote report, model, dataset, surface and trajectories to " << o.out << '\n';
  }
  return kExitOk;
}

int cmd_inspect(const Options& o, std::ostream& out, std::ostream&)
{
  if (o.model_path.empty()) { throw UsageError("inspect-model requires --model"); }
  const FittedModel model = model_from_json(read_json_file(o.model_path));
  nlohmann::json info;
  std::visit(
    [&](const auto& m) {
      using M = std::decay_t<decltype(m)>;
      info["dim"] = m.dim();
      if constexpr (std::is_same_v<M, MaxAffinePotential>) {
        info["kind"]   = "maxaffine";
        info["sign"]   = m.sign();
        info["planes"] = m.num_planes();
        if (m.num_planes() >= 2) { info["tau_for_accuracy_1e-2"] = tau_for_accuracy(1e-2, m.num_planes(), false); }
      } else {
        info["kind"]          = "dc";
        info["planes_phi1"]   = m.phi1().num_planes();
        info["planes_phi2"]   = m.phi2().num_planes();
        info["basis"]         = basis_names(m.basis());
        info["alpha"]         = std::vector<double>(m.alpha().data(), m.alpha().data() + m.alpha().size());
        const Index planes    = std::max(m.phi1().num_planes(), m.phi2().num_planes());
        if (planes >= 2) { info["tau_for_accuracy_1e-2"] = tau_for_accuracy(1e-2, planes, true); }
      }
    },
    model);
  out << info.dump(2) << '\n';
  return kExitOk;
}

void report_error(std::ostream& err, bool as_json, const std::string& kind, const std::string& message)
{
  if (as_json) {
    err << nlohmann::json{{"error", kind}, {"message", message}}.dump() << '\n';
  } else {
    err << "error (" << kind << "): " << message << '\n';
  }
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
  CLI::App app{"Identify gradient-flow dynamics from trajectory samples", "gradflow"};
  app.require_subcommand(1);
  app.fallthrough();
  Options o;
  app.add_flag("--json-errors", o.json_errors, "Print errors as a JSON object on stderr");

  auto add_seed = [&](CLI::App* sub) { sub->add_option("--seed", o.seed, "Random seed"); };
  auto add_fit_flags = [&](CLI::App* sub) {
    sub->add_option("--variant", o.variant, "convex, concave, strongly-convex, strongly-concave, equilibrium, dc, dc-parametric")
      ->capture_default_str();
    sub->add_option("--lambda", o.lambda, "Regularization weight")->capture_default_str();
    sub->add_option("--mu", o.mu, "Strong convexity modulus (strong variants)");
    sub->add_option("--x0", o.x0_text, "Known equilibrium, comma separated (equilibrium variant)");
    sub->add_option("--basis", o.basis, "Parametric fields for dc-parametric, e.g. rotation:0:1 const:0");
    sub->add_flag("--tikhonov", o.tikhonov, "Also penalize the slopes (convex variants)");
    sub->add_option("--eps", o.eps, "Solver tolerance on all KKT residuals")->capture_default_str();
  };

  auto* simulate = app.add_subcommand("simulate", "Integrate a gradient flow and write a trajectory CSV");
  simulate->add_option("--field", o.field, "quartic or linear")->capture_default_str();
  simulate->add_option("--x0", o.x0_text, "Initial state, comma separated")->required();
  simulate->add_option("--t-end", o.t_end, "Final time")->capture_default_str();
  simulate->add_option("--dt", o.dt, "Output sampling interval")->capture_default_str();
  simulate->add_option("--h-max", o.h_max, "Largest RK4 substep")->capture_default_str();
  simulate->add_option("--sigma-w", o.sigma_w, "State noise standard deviation")->capture_default_str();
  simulate->add_option("--config", o.config, "Experiment config JSON (quartic coefficients)");
  simulate->add_option("--out", o.out, "Output CSV (stdout if omitted)");
  add_seed(simulate);

  auto* derivs = app.add_subcommand("derivatives", "Estimate time derivatives and write a dataset CSV");
  derivs->add_option("--trajectory", o.trajectories, "Trajectory CSV (repeatable)")->required();
  derivs->add_option("--window", o.window, "Odd window length")->capture_default_str();
  derivs->add_option("--degree", o.degree, "Local polynomial degree (2 or 3)")->capture_default_str();
  derivs->add_option("--out", o.out, "Output CSV (stdout if omitted)");

  auto* fit = app.add_subcommand("fit", "Fit a potential to a dataset and write the model JSON");
  fit->add_option("--dataset", o.dataset, "Dataset CSV")->required();
  add_fit_flags(fit);
  fit->add_option("--out", o.out, "Model JSON");

  auto* predict = app.add_subcommand("predict", "Evaluate the estimated field at points");
  predict->add_option("--model", o.model_path, "Model JSON")->required();
  predict->add_option("--tau", o.tau, "Smoothing parameter")->capture_default_str();
  predict->add_option("--points", o.points, "Points CSV with header x1..xn")->required();
  predict->add_option("--out", o.out, "Output CSV (stdout if omitted)");

  auto* crossval = app.add_subcommand("crossval", "Select lambda and tau on a holdout split");
  crossval->add_option("--dataset", o.dataset, "Dataset CSV")->required();
  add_fit_flags(crossval);
  crossval->add_option("--config", o.config, "Experiment config JSON (grids)");
  crossval->add_option("--lambda-grid", o.lambda_grid, "Lambda values");
  crossval->add_option("--tau-grid", o.tau_grid, "Tau values");
  crossval->add_option("--train-fraction", o.train_fraction, "Share of samples used for fitting")->capture_default_str();
  crossval->add_option("--kfold", o.kfold, "Use k-fold selection instead of a single holdout");
  crossval->add_option("--jobs", o.jobs, "Parallel fits")->capture_default_str();
  crossval->add_option("--out", o.out, "Report JSON");
  add_seed(crossval);

  auto* repro = app.add_subcommand("reproduce-paper", "Run the quartic-potential experiment end to end");
  repro->add_option("--config", o.config, "Experiment config JSON; flags override it");
  repro->add_option("--lambda-grid", o.lambda_grid, "Lambda values");
  repro->add_option("--tau-grid", o.tau_grid, "Tau values");
  repro->add_option("--sigma-w", o.sigma_override, "State noise standard deviation");
  repro->add_option("--dt", o.dt_override, "Sampling interval");
  repro->add_option("--jobs", o.jobs, "Parallel fits")->capture_default_str();
  repro->add_option("--out", o.out, "Output directory");
  add_seed(repro);

  auto* inspect = app.add_subcommand("inspect-model", "Summarize a model JSON");
  inspect->add_option("--model", o.model_path, "Model JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    report_error(err, o.json_errors, "UsageError", e.what());
    return kExitUsage;
  }

  try {
    if (*simulate) { return cmd_simulate(o, out, err); }
    if (*derivs) { return cmd_derivatives(o, out, err); }
    if (*fit) { return cmd_fit(o, out, err); }
    if (*predict) { return cmd_predict(o, out, err); }
    if (*crossval) { return cmd_crossval(o, out, err); }
    if (*repro) { return cmd_reproduce(o, out, err); }
    if (*inspect) { return cmd_inspect(o, out, err); }
  } catch (const UsageError& e) {
    report_error(err, o.json_errors, "UsageError", e.what());
    return kExitUsage;
  } catch (const Error& e) {
    report_error(err, o.json_errors, std::string(to_string(e.kind())), e.what());
    return kExitRuntime;
  } catch (const std::exception& e) {
    report_error(err, o.json_errors, "InternalError", e.what());
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace gradflow
