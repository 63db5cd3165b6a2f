#include "gradflow/potential_model.hpp"

#include "gradflow/error.hpp"

#include <nlohmann/json.hpp>

#include <cmath>

namespace gradflow {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

void check_tau(double tau)
{
  if (!(tau > 0) || !std::isfinite(tau)) { throw Error(ErrorKind::InvalidArgument, "tau must be positive"); }
}

nlohmann::json rows_to_json(const MatrixXd& M)
{
  auto arr = nlohmann::json::array();
  for (Index i = 0; i < M.rows(); ++i) {
    std::vector<double> row(M.cols());
    for (Index j = 0; j < M.cols(); ++j) { row[j] = M(i, j); }
    arr.push_back(std::move(row));
  }
  return arr;
}

MatrixXd rows_from_json(const nlohmann::json& arr, Index cols)
{
  MatrixXd M(static_cast<Index>(arr.size()), cols);
  for (Index i = 0; i < M.rows(); ++i) {
    const auto row = arr.at(i).get<std::vector<double>>();
    if (static_cast<Index>(row.size()) != cols) { throw Error(ErrorKind::SchemaError, "model json: row length != n"); }
    for (Index j = 0; j < cols; ++j) { M(i, j) = row[j]; }
  }
  return M;
}

VectorXd vector_from_json(const nlohmann::json& arr)
{
  const auto v = arr.get<std::vector<double>>();
  return Eigen::Map<const VectorXd>(v.data(), static_cast<Index>(v.size()));
}

}  // namespace

MaxAffinePotential::MaxAffinePotential(MatrixXd anchors, VectorXd heights, MatrixXd slopes, int sign)
    : anchors_(std::move(anchors)), heights_(std::move(heights)), slopes_(std::move(slopes)), sign_(sign)
{
  if (sign_ != 1 && sign_ != -1) { throw Error(ErrorKind::InvalidArgument, "model sign must be +1 or -1"); }
  if (anchors_.rows() < 1 || anchors_.rows() != heights_.size() || anchors_.rows() != slopes_.rows()
      || anchors_.cols() != slopes_.cols() || anchors_.cols() < 1) {
    throw Error(ErrorKind::DimensionMismatch, "max-affine model: inconsistent anchors/heights/slopes");
  }
  if (!anchors_.allFinite() || !heights_.allFinite() || !slopes_.allFinite()) {
    throw Error(ErrorKind::InvalidArgument, "max-affine model: non-finite entries");
  }
}

bool MaxAffinePotential::operator==(const MaxAffinePotential& other) const
{
  return sign_ == other.sign_ && anchors_.rows() == other.anchors_.rows() && anchors_.cols() == other.anchors_.cols()
      && anchors_ == other.anchors_ && heights_ == other.heights_ && slopes_ == other.slopes_;
}

void MaxAffinePotential::check_point(const VectorXd& x) const
{
  if (x.size() != dim()) { throw Error(ErrorKind::DimensionMismatch, "point dimension does not match the model"); }
}

double MaxAffinePotential::plane_value(Index i, const VectorXd& x) const
{
  double acc = 0;
  for (Index k = 0; k < dim(); ++k) { acc += slopes_(i, k) * (x(k) - anchors_(i, k)); }
  return acc + heights_(i);
}

VectorXd MaxAffinePotential::plane_values(const VectorXd& x) const
{
  check_point(x);
  VectorXd v(num_planes());
  for (Index i = 0; i < num_planes(); ++i) { v(i) = plane_value(i, x); }
  return v;
}

double MaxAffinePotential::eval(const VectorXd& x) const { return sign_ * plane_values(x).maxCoeff(); }

std::vector<Index> MaxAffinePotential::active_planes(const VectorXd& x, double tol) const
{
  if (!(tol >= 0)) { throw Error(ErrorKind::InvalidArgument, "active_planes: tol must be >= 0"); }
  const VectorXd v  = plane_values(x);
  const double vmax = v.maxCoeff();
  std::vector<Index> idx;
  for (Index i = 0; i < v.size(); ++i) {
    if (v(i) >= vmax - tol) { idx.push_back(i); }
  }
  return idx;
}

double MaxAffinePotential::eval_smoothed(double tau, const VectorXd& x) const
{
  check_tau(tau);
  const VectorXd v  = plane_values(x);
  const double vmax = v.maxCoeff();
  const double sum  = ((v.array() - vmax) / tau).exp().sum();
  return sign_ * (vmax + tau * std::log(sum / static_cast<double>(num_planes())));
}

VectorXd MaxAffinePotential::softmax_weights(double tau, const VectorXd& x) const
{
  check_tau(tau);
  const VectorXd v  = plane_values(x);
  const double vmax = v.maxCoeff();
  VectorXd w        = ((v.array() - vmax) / tau).exp().matrix();
  return w / w.sum();
}

VectorXd MaxAffinePotential::grad_smoothed(double tau, const VectorXd& x) const
{
  const VectorXd w = softmax_weights(tau, x);
  return sign_ * (slopes_.transpose() * w);
}

MatrixXd MaxAffinePotential::hessian_smoothed(double tau, const VectorXd& x) const
{
  const VectorXd w = softmax_weights(tau, x);
  const VectorXd g = slopes_.transpose() * w;
  MatrixXd H       = slopes_.transpose() * w.asDiagonal() * slopes_ - g * g.transpose();
  H                = 0.5 * (H + H.transpose());
  return (sign_ / tau) * H;
}

DcPotential::DcPotential(MaxAffinePotential phi1, MaxAffinePotential phi2, VectorXd alpha, Basis basis)
    : phi1_(std::move(phi1)), phi2_(std::move(phi2)), alpha_(std::move(alpha)), basis_(std::move(basis))
{
  if (phi1_.dim() != phi2_.dim()) { throw Error(ErrorKind::DimensionMismatch, "dc model: pieces differ in dimension"); }
  if (alpha_.size() != static_cast<Index>(basis_.size())) {
    throw Error(ErrorKind::DimensionMismatch, "dc model: alpha and basis lengths differ");
  }
  if (!alpha_.allFinite()) { throw Error(ErrorKind::InvalidArgument, "dc model: non-finite alpha"); }
}

double DcPotential::eval(const VectorXd& x) const { return phi1_.eval(x) - phi2_.eval(x); }

double DcPotential::eval_smoothed(double tau, const VectorXd& x) const
{
  return phi1_.eval_smoothed(tau, x) - phi2_.eval_smoothed(tau, x);
}

VectorXd DcPotential::grad_smoothed(double tau, const VectorXd& x) const
{
  return phi1_.grad_smoothed(tau, x) - phi2_.grad_smoothed(tau, x);
}

VectorXd DcPotential::parametric_field(const VectorXd& x) const
{
  if (x.size() != dim()) { throw Error(ErrorKind::DimensionMismatch, "point dimension does not match the model"); }
  VectorXd f = VectorXd::Zero(dim());
  for (std::size_t k = 0; k < basis_.size(); ++k) { f += alpha_(static_cast<Index>(k)) * basis_[k].eval(x); }
  return f;
}

VectorXd predict_field(const MaxAffinePotential& model, double tau, const VectorXd& x)
{
  return -model.grad_smoothed(tau, x);
}

VectorXd predict_field(const DcPotential& model, double tau, const VectorXd& x)
{
  return -model.grad_smoothed(tau, x) + model.parametric_field(x);
}

double tau_for_accuracy(double epsilon, Index num_planes, bool dc)
{
  if (!(epsilon > 0)) { throw Error(ErrorKind::DomainError, "tau_for_accuracy: epsilon must be positive"); }
  if (num_planes < 2) {
    throw Error(ErrorKind::DomainError, "tau_for_accuracy: needs n_s >= 2 (single planes are exact at any tau)");
  }
  const double tau = 0.99 * epsilon / std::log(static_cast<double>(num_planes));
  return dc ? tau / 2 : tau;
}

nlohmann::json to_json(const MaxAffinePotential& model)
{
  nlohmann::json doc;
  doc["kind"]    = "maxaffine";
  doc["n"]       = model.dim();
  doc["sign"]    = model.sign();
  doc["anchors"] = rows_to_json(model.anchors());
  doc["heights"] = std::vector<double>(model.heights().data(), model.heights().data() + model.heights().size());
  doc["slopes"]  = rows_to_json(model.slopes());
  return doc;
}

nlohmann::json to_json(const DcPotential& model)
{
  nlohmann::json doc;
  doc["kind"]  = "dc";
  doc["n"]     = model.dim();
  doc["sign"]  = 1;
  doc["phi1"]  = to_json(model.phi1());
  doc["phi2"]  = to_json(model.phi2());
  doc["alpha"] = std::vector<double>(model.alpha().data(), model.alpha().data() + model.alpha().size());
  doc["basis"] = basis_names(model.basis());
  return doc;
}

MaxAffinePotential max_affine_from_json(const nlohmann::json& doc)
{
  try {
    if (doc.at("kind").get<std::string>() != "maxaffine") {
      throw Error(ErrorKind::SchemaError, "model json: expected kind 'maxaffine'");
    }
    const auto n = doc.at("n").get<Index>();
    return MaxAffinePotential(
      rows_from_json(doc.at("anchors"), n), vector_from_json(doc.at("heights")), rows_from_json(doc.at("slopes"), n),
      doc.at("sign").get<int>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::SchemaError, std::string("model json: ") + e.what());
  }
}

DcPotential dc_from_json(const nlohmann::json& doc)
{
  try {
    if (doc.at("kind").get<std::string>() != "dc") { throw Error(ErrorKind::SchemaError, "model json: expected kind 'dc'"); }
    auto phi1 = max_affine_from_json(doc.at("phi1"));
    auto phi2 = max_affine_from_json(doc.at("phi2"));
    if (phi1.dim() != doc.at("n").get<Index>()) { throw Error(ErrorKind::SchemaError, "model json: n mismatch"); }
    VectorXd alpha = doc.contains("alpha") ? vector_from_json(doc.at("alpha")) : VectorXd();
    std::vector<std::string> names;
    if (doc.contains("basis")) { names = doc.at("basis").get<std::vector<std::string>>(); }
    return DcPotential(std::move(phi1), std::move(phi2), std::move(alpha), make_basis(names, doc.at("n").get<Index>()));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::SchemaError, std::string("model json: ") + e.what());
  }
}

}  // namespace gradflow
