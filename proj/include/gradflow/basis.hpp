#pragma once

#include <Eigen/Dense>

#include <functional>
#include <string>
#include <vector>

namespace gradflow {

/// A named vector field h(x), used for the parametric part of a DC fit.
struct BasisField
{
  std::string name;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> eval;
};

using Basis = std::vector<BasisField>;

/**
 * @brief Build a basis field from its name, for state dimension n.
 *
 * Recognized names (indices are zero-based):
 *   const:i        h(x) = e_i
 *   linear:i:j     h(x) = x_j e_i
 *   rotation:i:j   h(x) = x_j e_i - x_i e_j   (divergence-free, curl-carrying)
 *
 * Throws Error(InvalidArgument) for unknown names or out-of-range indices.
 */
BasisField make_basis_field(const std::string& name, Eigen::Index n);

Basis make_basis(const std::vector<std::string>& names, Eigen::Index n);

std::vector<std::string> basis_names(const Basis& basis);

}  // namespace gradflow
