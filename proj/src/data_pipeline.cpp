#include "gradflow/data_pipeline.hpp"

#include "gradflow/error.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>

namespace gradflow {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

void Trajectory::validate() const
{
  if (states.rows() != static_cast<Index>(times.size())) {
    throw Error(ErrorKind::DimensionMismatch, "trajectory: one state row per instant required");
  }
  if (states.rows() == 0 || states.cols() == 0) { throw Error(ErrorKind::InvalidArgument, "trajectory is empty"); }
  if (!states.allFinite() || !std::all_of(times.begin(), times.end(), [](double t) { return std::isfinite(t); })) {
    throw Error(ErrorKind::InvalidArgument, "trajectory has non-finite entries");
  }
  for (std::size_t k = 1; k < times.size(); ++k) {
    if (!(times[k] > times[k - 1])) {
      throw Error(ErrorKind::DegenerateTimes, "trajectory times must be strictly increasing (at row " + std::to_string(k) + ")");
    }
  }
}

FieldSpec quartic_example_field(double a, double b, double c)
{
  FieldSpec spec;
  spec.name  = "quartic";
  spec.dim   = 2;
  spec.field = [a, b, c](const VectorXd& x) {
    VectorXd f(2);
    f(0) = -2 * a * x(0) - b * x(1) + 4 * c * x(0) * x(0) * x(0);
    f(1) = -b * x(0) - 2 * a * x(1) + 4 * c * x(1) * x(1) * x(1);
    return f;
  };
  spec.potential = [a, b, c](const VectorXd& x) {
    const double x1 = x(0), x2 = x(1);
    return a * x1 * x1 + b * x1 * x2 + a * x2 * x2 - c * std::pow(x1, 4) - c * std::pow(x2, 4);
  };
  return spec;
}

FieldSpec linear_decay_field(Index n, double rate)
{
  FieldSpec spec;
  spec.name      = "linear-decay";
  spec.dim       = n;
  spec.field     = [rate](const VectorXd& x) -> VectorXd { return -rate * x; };
  spec.potential = [rate](const VectorXd& x) { return 0.5 * rate * x.squaredNorm(); };
  return spec;
}

Trajectory simulate_gradient_flow(const FieldSpec& field, const VectorXd& x0, const std::vector<double>& t_grid,
                                  const StepControl& step)
{
  if (!field.field) { throw Error(ErrorKind::InvalidArgument, "simulate: field has no evaluator"); }
  if (x0.size() != field.dim) { throw Error(ErrorKind::DimensionMismatch, "simulate: x0 dimension differs from the field"); }
  if (t_grid.empty() || t_grid.front() != 0.0) { throw Error(ErrorKind::InvalidArgument, "simulate: t_grid must start at 0"); }
  for (std::size_t k = 1; k < t_grid.size(); ++k) {
    if (!(t_grid[k] > t_grid[k - 1])) { throw Error(ErrorKind::InvalidArgument, "simulate: t_grid must be strictly increasing"); }
  }
  if (!(step.h_max > 0)) { throw Error(ErrorKind::InvalidArgument, "simulate: h_max must be positive"); }

  Trajectory traj;
  traj.times = t_grid;
  traj.x0    = x0;
  traj.states.resize(static_cast<Index>(t_grid.size()), field.dim);

  VectorXd x = x0;
  auto check = [&](const VectorXd& v, double t) {
    if (!v.allFinite() || v.norm() > step.blowup_norm) {
      std::ostringstream msg;
      msg << "simulate: state diverged near t = " << t;
      throw Error(ErrorKind::NonFiniteState, msg.str());
    }
  };
  check(x, 0.0);
  traj.states.row(0) = x.transpose();

  for (std::size_t k = 1; k < t_grid.size(); ++k) {
    const double span = t_grid[k] - t_grid[k - 1];
    const auto nsub   = static_cast<long>(std::ceil(span / step.h_max - 1e-9));
    const double h    = span / static_cast<double>(std::max(1L, nsub));
    for (long s = 0; s < std::max(1L, nsub); ++s) {
      const VectorXd k1 = field.field(x);
      const VectorXd k2 = field.field(x + 0.5 * h * k1);
      const VectorXd k3 = field.field(x + 0.5 * h * k2);
      const VectorXd k4 = field.field(x + h * k3);
      x += (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4);
      check(x, t_grid[k - 1] + static_cast<double>(s + 1) * h);
    }
    traj.states.row(static_cast<Index>(k)) = x.transpose();
  }
  return traj;
}

Trajectory add_state_noise(const Trajectory& traj, double sigma_w, std::uint64_t seed)
{
  if (!(sigma_w >= 0)) { throw Error(ErrorKind::InvalidArgument, "noise: sigma_w must be >= 0"); }
  Trajectory out = traj;
  if (sigma_w == 0) { return out; }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, sigma_w);
  for (Index k = 0; k < out.states.rows(); ++k) {
    for (Index j = 0; j < out.states.cols(); ++j) { out.states(k, j) += noise(rng); }
  }
  return out;
}

std::vector<DerivativeEstimate> estimate_derivatives(const Trajectory& traj, int window, int degree)
{
  if (degree != 2 && degree != 3) { throw Error(ErrorKind::InvalidArgument, "derivatives: degree must be 2 or 3"); }
  if (window % 2 == 0 || window < degree + 1) {
    throw Error(ErrorKind::InvalidArgument, "derivatives: window must be odd and at least degree + 1");
  }
  if (traj.states.rows() != static_cast<Index>(traj.times.size())) {
    throw Error(ErrorKind::DimensionMismatch, "derivatives: one state row per instant required");
  }
  const Index N = traj.size(), n = traj.dim();
  if (window > N) {
    throw Error(ErrorKind::WindowTooLarge,
                "derivatives: window " + std::to_string(window) + " exceeds trajectory length " + std::to_string(N));
  }

  const Index w = window, half = window / 2, p = degree;
  std::vector<DerivativeEstimate> out(static_cast<std::size_t>(N));

  for (Index k = 0; k < N; ++k) {
    const Index start = std::clamp<Index>(k - half, 0, N - w);
    const double tk   = traj.times[static_cast<std::size_t>(k)];

    double reach = 0;
    for (Index j = start; j < start + w; ++j) { reach = std::max(reach, std::abs(traj.times[static_cast<std::size_t>(j)] - tk)); }
    for (Index j = start + 1; j < start + w; ++j) {
      if (!(traj.times[static_cast<std::size_t>(j)] > traj.times[static_cast<std::size_t>(j - 1)])) {
        throw Error(ErrorKind::DegenerateTimes, "derivatives: window instants are not distinct");
      }
    }
    if (!(reach > 0)) { throw Error(ErrorKind::DegenerateTimes, "derivatives: window instants are not distinct"); }
    // bandwidth a little wider than the window so the farthest sample keeps some weight
    const double bandwidth = 1.25 * reach;

    MatrixXd V(w, p + 1);
    VectorXd sw(w);
    for (Index r = 0; r < w; ++r) {
      const double u = (traj.times[static_cast<std::size_t>(start + r)] - tk) / reach;
      const double d = std::abs(traj.times[static_cast<std::size_t>(start + r)] - tk) / bandwidth;
      const double c = 1 - d * d * d;
      sw(r)          = std::sqrt(c * c * c);
      double pw      = 1;
      for (Index e = 0; e <= p; ++e) {
        V(r, e) = sw(r) * pw;
        pw *= u;
      }
    }
    const Eigen::ColPivHouseholderQR<MatrixXd> qr(V);
    if (qr.rank() < p + 1) { throw Error(ErrorKind::DegenerateTimes, "derivatives: local design is rank deficient"); }

    DerivativeEstimate& est = out[static_cast<std::size_t>(k)];
    est.t       = tk;
    est.x       = traj.states.row(k).transpose();
    est.y.resize(n);
    est.clamped = (start != k - half);
    for (Index j = 0; j < n; ++j) {
      const VectorXd rhs   = sw.cwiseProduct(traj.states.block(start, j, w, 1));
      const VectorXd coeff = qr.solve(rhs);
      est.y(j)             = coeff(1) / reach;
      const double rms     = std::sqrt((V * coeff - rhs).squaredNorm() / static_cast<double>(w));
      est.residual         = std::max(est.residual, rms);
    }
  }
  return out;
}

Dataset assemble_dataset(const std::vector<std::vector<DerivativeEstimate>>& per_trajectory)
{
  Index total = 0, n = -1;
  for (const auto& traj : per_trajectory) {
    for (const auto& e : traj) {
      if (n < 0) { n = e.x.size(); }
      if (e.x.size() != n || e.y.size() != n) {
        throw Error(ErrorKind::DimensionMismatch, "assemble: trajectories differ in dimension");
      }
      ++total;
    }
  }
  if (total == 0) { throw Error(ErrorKind::InvalidArgument, "assemble: no samples"); }
  Dataset data;
  data.x.resize(total, n);
  data.y.resize(total, n);
  Index row = 0;
  for (const auto& traj : per_trajectory) {
    for (const auto& e : traj) {
      data.x.row(row) = e.x.transpose();
      data.y.row(row) = e.y.transpose();
      ++row;
    }
  }
  return data;
}

DatasetSplit split_dataset(const Dataset& data, double train_fraction, std::uint64_t seed)
{
  if (!(train_fraction > 0 && train_fraction < 1)) {
    throw Error(ErrorKind::InvalidArgument, "split: train fraction must lie in (0, 1)");
  }
  const Index ns     = data.size();
  const auto n_train = static_cast<Index>(std::llround(train_fraction * static_cast<double>(ns)));
  if (n_train < 1 || n_train >= ns) {
    throw Error(ErrorKind::DegenerateSplit, "split: " + std::to_string(ns) + " samples leave one side empty");
  }

  std::vector<Index> perm(static_cast<std::size_t>(ns));
  std::iota(perm.begin(), perm.end(), Index{0});
  // Fisher-Yates with an explicit draw so the order does not depend on std::shuffle internals
  std::mt19937_64 rng(seed);
  for (Index i = ns - 1; i > 0; --i) {
    const auto j = static_cast<Index>(rng() % static_cast<std::uint64_t>(i + 1));
    std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
  }

  DatasetSplit split;
  split.train_rows.assign(perm.begin(), perm.begin() + n_train);
  split.test_rows.assign(perm.begin() + n_train, perm.end());
  std::sort(split.train_rows.begin(), split.train_rows.end());
  std::sort(split.test_rows.begin(), split.test_rows.end());
  split.train = data.subset(split.train_rows);
  split.test  = data.subset(split.test_rows);
  return split;
}

// ---------------------------------------------------------------- CSV

namespace {

std::string format_number(double v)
{
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

void write_row(std::ostream& out, const std::vector<double>& values)
{
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) { out << ','; }
    out << format_number(values[i]);
  }
  out << '\n';
}

std::string parse_error_at(std::size_t line, std::size_t column, const std::string& what)
{
  return "line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + what;
}

std::vector<std::string> split_fields(const std::string& line)
{
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  fields.push_back(cur);
  return fields;
}

/// Parsed numeric table: header names and row-major values.
struct Table
{
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

Table read_table(std::istream& in)
{
  Table table;
  std::string line;
  std::size_t lineno = 0;
  bool have_header   = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') { line.pop_back(); }
    if (line.empty()) { continue; }
    const auto fields = split_fields(line);
    if (!have_header) {
      table.header = fields;
      have_header  = true;
      continue;
    }
    if (fields.size() != table.header.size()) {
      throw Error(ErrorKind::ParseError, parse_error_at(lineno, 1,
                  "expected " + std::to_string(table.header.size()) + " fields, found " + std::to_string(fields.size())));
    }
    std::vector<double> row(fields.size());
    std::size_t column = 1;
    for (std::size_t i = 0; i < fields.size(); ++i) {
      const std::string& f = fields[i];
      std::size_t b = 0, e = f.size();
      while (b < e && f[b] == ' ') { ++b; }
      while (e > b && f[e - 1] == ' ') { --e; }
      const char* first = f.data() + b;
      const char* last  = f.data() + e;
      if (first != last && *first == '+') { ++first; }
      const auto res = std::from_chars(first, last, row[i]);
      if (first == last || res.ec != std::errc() || res.ptr != last || !std::isfinite(row[i])) {
        throw Error(ErrorKind::ParseError, parse_error_at(lineno, column, "not a finite number: '" + f + "'"));
      }
      column += f.size() + 1;
    }
    table.rows.push_back(std::move(row));
  }
  if (!have_header) { throw Error(ErrorKind::ParseError, parse_error_at(std::max<std::size_t>(lineno, 1), 1, "empty file")); }
  return table;
}

void expect_header(const std::vector<std::string>& header, const std::vector<std::string>& expected)
{
  if (header != expected) {
    std::string want;
    for (const auto& h : expected) { want += (want.empty() ? "" : ",") + h; }
    throw Error(ErrorKind::SchemaError, "unexpected CSV header, want '" + want + "'");
  }
}

std::vector<std::string> numbered(const std::string& prefix, Index n)
{
  std::vector<std::string> names;
  for (Index i = 1; i <= n; ++i) { names.push_back(prefix + std::to_string(i)); }
  return names;
}

std::ifstream open_in(const std::string& path)
{
  std::ifstream in(path);
  if (!in) { throw Error(ErrorKind::IoError, "cannot open '" + path + "' for reading"); }
  return in;
}

std::ofstream open_out(const std::string& path)
{
  std::ofstream out(path);
  if (!out) { throw Error(ErrorKind::IoError, "cannot open '" + path + "' for writing"); }
  return out;
}

template <typename F>
auto with_path(const std::string& path, F&& f)
{
  try {
    return f();
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::ParseError || e.kind() == ErrorKind::SchemaError) {
      throw Error(e.kind(), path + ": " + e.what());
    }
    throw;
  }
}

}  // namespace

void write_trajectory_csv(std::ostream& out, const Trajectory& traj)
{
  traj.validate();
  auto header = numbered("x", traj.dim());
  header.insert(header.begin(), "t");
  for (std::size_t i = 0; i < header.size(); ++i) { out << (i ? "," : "") << header[i]; }
  out << '\n';
  for (Index k = 0; k < traj.size(); ++k) {
    std::vector<double> row{traj.times[static_cast<std::size_t>(k)]};
    for (Index j = 0; j < traj.dim(); ++j) { row.push_back(traj.states(k, j)); }
    write_row(out, row);
  }
}

Trajectory read_trajectory_csv(std::istream& in)
{
  const Table table = read_table(in);
  if (table.header.size() < 2) { throw Error(ErrorKind::SchemaError, "trajectory CSV needs columns t,x1,..."); }
  auto expected = numbered("x", static_cast<Index>(table.header.size()) - 1);
  expected.insert(expected.begin(), "t");
  expect_header(table.header, expected);
  if (table.rows.empty()) { throw Error(ErrorKind::ParseError, "trajectory CSV has no rows"); }

  Trajectory traj;
  const auto n = static_cast<Index>(table.header.size()) - 1;
  traj.states.resize(static_cast<Index>(table.rows.size()), n);
  for (std::size_t k = 0; k < table.rows.size(); ++k) {
    traj.times.push_back(table.rows[k][0]);
    for (Index j = 0; j < n; ++j) { traj.states(static_cast<Index>(k), j) = table.rows[k][static_cast<std::size_t>(j + 1)]; }
  }
  traj.x0 = traj.states.row(0).transpose();
  traj.validate();
  return traj;
}

void write_dataset_csv(std::ostream& out, const Dataset& data)
{
  data.validate();
  auto header = numbered("x", data.dim());
  const auto ys = numbered("y", data.dim());
  header.insert(header.end(), ys.begin(), ys.end());
  for (std::size_t i = 0; i < header.size(); ++i) { out << (i ? "," : "") << header[i]; }
  out << '\n';
  for (Index k = 0; k < data.size(); ++k) {
    std::vector<double> row;
    for (Index j = 0; j < data.dim(); ++j) { row.push_back(data.x(k, j)); }
    for (Index j = 0; j < data.dim(); ++j) { row.push_back(data.y(k, j)); }
    write_row(out, row);
  }
}

Dataset read_dataset_csv(std::istream& in)
{
  const Table table = read_table(in);
  if (table.header.size() < 2 || table.header.size() % 2 != 0) {
    throw Error(ErrorKind::SchemaError, "dataset CSV needs columns x1..xn,y1..yn");
  }
  const auto n  = static_cast<Index>(table.header.size() / 2);
  auto expected = numbered("x", n);
  const auto ys = numbered("y", n);
  expected.insert(expected.end(), ys.begin(), ys.end());
  expect_header(table.header, expected);
  if (table.rows.empty()) { throw Error(ErrorKind::ParseError, "dataset CSV has no rows"); }

  Dataset data;
  data.x.resize(static_cast<Index>(table.rows.size()), n);
  data.y.resize(static_cast<Index>(table.rows.size()), n);
  for (std::size_t k = 0; k < table.rows.size(); ++k) {
    for (Index j = 0; j < n; ++j) {
      data.x(static_cast<Index>(k), j) = table.rows[k][static_cast<std::size_t>(j)];
      data.y(static_cast<Index>(k), j) = table.rows[k][static_cast<std::size_t>(n + j)];
    }
  }
  return data;
}

void write_points_csv(std::ostream& out, const MatrixXd& points, const std::string& prefix)
{
  const auto header = numbered(prefix, points.cols());
  for (std::size_t i = 0; i < header.size(); ++i) { out << (i ? "," : "") << header[i]; }
  out << '\n';
  for (Index k = 0; k < points.rows(); ++k) {
    std::vector<double> row(static_cast<std::size_t>(points.cols()));
    for (Index j = 0; j < points.cols(); ++j) { row[static_cast<std::size_t>(j)] = points(k, j); }
    write_row(out, row);
  }
}

MatrixXd read_points_csv(std::istream& in)
{
  const Table table = read_table(in);
  if (table.header.empty()) { throw Error(ErrorKind::SchemaError, "points CSV needs columns x1..xn"); }
  expect_header(table.header, numbered("x", static_cast<Index>(table.header.size())));
  if (table.rows.empty()) { throw Error(ErrorKind::ParseError, "points CSV has no rows"); }
  MatrixXd pts(static_cast<Index>(table.rows.size()), static_cast<Index>(table.header.size()));
  for (std::size_t k = 0; k < table.rows.size(); ++k) {
    for (std::size_t j = 0; j < table.header.size(); ++j) { pts(static_cast<Index>(k), static_cast<Index>(j)) = table.rows[k][j]; }
  }
  return pts;
}

void write_trajectory_csv(const std::string& path, const Trajectory& traj)
{
  auto out = open_out(path);
  write_trajectory_csv(out, traj);
}

Trajectory read_trajectory_csv(const std::string& path)
{
  auto in = open_in(path);
  return with_path(path, [&] { return read_trajectory_csv(in); });
}

void write_dataset_csv(const std::string& path, const Dataset& data)
{
  auto out = open_out(path);
  write_dataset_csv(out, data);
}

Dataset read_dataset_csv(const std::string& path)
{
  auto in = open_in(path);
  return with_path(path, [&] { return read_dataset_csv(in); });
}

// ---------------------------------------------------------------- experiment protocol

ExperimentConfig::ExperimentConfig()
{
  for (int k = -10; k <= -2; ++k) { lambda_grid.push_back(std::pow(10.0, k)); }
  for (double tau = 0.01; tau < 0.65; tau *= 2) { tau_grid.push_back(tau); }
}

void ExperimentConfig::validate() const
{
  auto fail = [](const std::string& what) { throw Error(ErrorKind::InvalidArgument, "experiment config: " + what); };
  if (!(domain_lo.array() < domain_hi.array()).all()) { fail("domain bounds must satisfy lo < hi"); }
  if (n_traj < 1 || n_samples < n_traj) { fail("need n_traj >= 1 and n_samples >= n_traj"); }
  if (!(sigma_w >= 0)) { fail("sigma_w must be >= 0"); }
  if (!(dt > 0)) { fail("dt must be positive"); }
  if (window < 3 || window % 2 == 0) { fail("window must be odd and >= 3"); }
  if (degree != 2 && degree != 3) { fail("degree must be 2 or 3"); }
  if (lambda_grid.empty() || tau_grid.empty()) { fail("lambda_grid and tau_grid must be nonempty"); }
  for (double l : lambda_grid) {
    if (!(l >= 0)) { fail("lambda values must be >= 0"); }
  }
  for (double t : tau_grid) {
    if (!(t > 0)) { fail("tau values must be positive"); }
  }
  if (!(train_fraction > 0 && train_fraction < 1)) { fail("train_fraction must lie in (0, 1)"); }
  if (!(h_max > 0)) { fail("h_max must be positive"); }
  if (max_redraws < 1) { fail("max_redraws must be >= 1"); }
}

nlohmann::json to_json(const ExperimentConfig& cfg)
{
  nlohmann::json doc;
  doc["domain_lo"]      = {cfg.domain_lo(0), cfg.domain_lo(1)};
  doc["domain_hi"]      = {cfg.domain_hi(0), cfg.domain_hi(1)};
  doc["n_traj"]         = cfg.n_traj;
  doc["n_samples"]      = cfg.n_samples;
  doc["sigma_w"]        = cfg.sigma_w;
  doc["dt"]             = cfg.dt;
  doc["window"]         = cfg.window;
  doc["degree"]         = cfg.degree;
  doc["seed"]           = cfg.seed;
  doc["lambda_grid"]    = cfg.lambda_grid;
  doc["tau_grid"]       = cfg.tau_grid;
  doc["train_fraction"] = cfg.train_fraction;
  doc["a"]              = cfg.a;
  doc["b"]              = cfg.b;
  doc["c"]              = cfg.c;
  doc["h_max"]          = cfg.h_max;
  doc["max_redraws"]    = cfg.max_redraws;
  return doc;
}

ExperimentConfig experiment_config_from_json(const nlohmann::json& doc)
{
  if (!doc.is_object()) { throw Error(ErrorKind::SchemaError, "experiment config must be a JSON object"); }
  ExperimentConfig cfg;
  try {
    for (const auto& [key, value] : doc.items()) {
      if (key == "domain_lo" || key == "domain_hi") {
        const auto v = value.get<std::vector<double>>();
        if (v.size() != 2) { throw Error(ErrorKind::SchemaError, "experiment config: " + key + " needs 2 entries"); }
        (key == "domain_lo" ? cfg.domain_lo : cfg.domain_hi) = Eigen::Vector2d(v[0], v[1]);
      } else if (key == "n_traj") {
        cfg.n_traj = value.get<int>();
      } else if (key == "n_samples") {
        cfg.n_samples = value.get<int>();
      } else if (key == "sigma_w") {
        cfg.sigma_w = value.get<double>();
      } else if (key == "dt") {
        cfg.dt = value.get<double>();
      } else if (key == "window") {
        cfg.window = value.get<int>();
      } else if (key == "degree") {
        cfg.degree = value.get<int>();
      } else if (key == "seed") {
        cfg.seed = value.get<std::uint64_t>();
      } else if (key == "lambda_grid") {
        cfg.lambda_grid = value.get<std::vector<double>>();
      } else if (key == "tau_grid") {
        cfg.tau_grid = value.get<std::vector<double>>();
      } else if (key == "train_fraction") {
        cfg.train_fraction = value.get<double>();
      } else if (key == "a") {
        cfg.a = value.get<double>();
      } else if (key == "b") {
        cfg.b = value.get<double>();
      } else if (key == "c") {
        cfg.c = value.get<double>();
      } else if (key == "h_max") {
        cfg.h_max = value.get<double>();
      } else if (key == "max_redraws") {
        cfg.max_redraws = value.get<int>();
      } else {
        throw Error(ErrorKind::SchemaError, "experiment config: unknown key '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::SchemaError, std::string("experiment config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

ExperimentData generate_experiment_data(const ExperimentConfig& cfg, std::uint64_t seed)
{
  cfg.validate();
  ExperimentData out;
  out.field = quartic_example_field(cfg.a, cfg.b, cfg.c);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const StepControl step{cfg.h_max};

  auto inside = [&](const MatrixXd& states) {
    for (Index k = 0; k < states.rows(); ++k) {
      if ((states.row(k).transpose().array() < cfg.domain_lo.array()).any()
          || (states.row(k).transpose().array() > cfg.domain_hi.array()).any()) {
        return false;
      }
    }
    return true;
  };

  const int base = cfg.n_samples / cfg.n_traj, extra = cfg.n_samples % cfg.n_traj;
  std::vector<std::vector<DerivativeEstimate>> estimates;
  for (int i = 0; i < cfg.n_traj; ++i) {
    const int len = base + (i < extra ? 1 : 0);
    std::vector<double> grid(static_cast<std::size_t>(len));
    for (int k = 0; k < len; ++k) { grid[static_cast<std::size_t>(k)] = k * cfg.dt; }

    Trajectory clean;
    bool accepted = false;
    for (int attempt = 0; attempt < cfg.max_redraws && !accepted; ++attempt) {
      VectorXd x0(2);
      for (Index j = 0; j < 2; ++j) { x0(j) = cfg.domain_lo(j) + (cfg.domain_hi(j) - cfg.domain_lo(j)) * u01(rng); }
      try {
        clean = simulate_gradient_flow(out.field, x0, grid, step);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::NonFiniteState) { throw; }
        continue;
      }
      accepted = inside(clean.states);
    }
    if (!accepted) {
      throw Error(ErrorKind::DomainError, "experiment: no initial point kept its trajectory inside the domain after "
                                            + std::to_string(cfg.max_redraws) + " draws");
    }
    const Trajectory noisy = add_state_noise(clean, cfg.sigma_w, rng());

    int window = std::min(cfg.window, len % 2 == 1 ? len : len - 1);
    const int degree = std::min(cfg.degree, window - 1);
    if (degree < 2) {
      throw Error(ErrorKind::WindowTooLarge, "experiment: trajectories of " + std::to_string(len) + " samples are too short");
    }
    estimates.push_back(estimate_derivatives(noisy, window, degree));
    out.clean.push_back(clean);
    out.noisy.push_back(noisy);
  }

  out.dataset = assemble_dataset(estimates);
  out.true_field.resize(out.dataset.size(), 2);
  for (Index k = 0; k < out.dataset.size(); ++k) {
    out.true_field.row(k) = out.field.field(out.dataset.x.row(k).transpose()).transpose();
  }
  return out;
}

}  // namespace gradflow
