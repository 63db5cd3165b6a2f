#pragma once

// Shared fixtures for the test binaries: random problem generators and
// finite-difference oracles that do not go through the code under test.

#include "gradflow/dataset.hpp"
#include "gradflow/potential_model.hpp"
#include "gradflow/qp_solver.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <random>

namespace testing {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

inline MatrixXd random_matrix(std::mt19937_64& rng, Index rows, Index cols, double lo = -1, double hi = 1)
{
  std::uniform_real_distribution<double> u(lo, hi);
  MatrixXd M(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) { M(i, j) = u(rng); }
  }
  return M;
}

inline VectorXd random_vector(std::mt19937_64& rng, Index n, double lo = -1, double hi = 1)
{
  return random_matrix(rng, n, 1, lo, hi).col(0);
}

/// Strictly convex QP, feasible by construction: a random point z0 satisfies
/// every row, about a third of them with equality.
inline gradflow::QpProblem random_strictly_convex_qp(std::mt19937_64& rng, Index d, Index m)
{
  const MatrixXd M = random_matrix(rng, d, d);
  MatrixXd P       = M.transpose() * M;
  P.diagonal().array() += 0.1;
  const MatrixXd A  = random_matrix(rng, m, d);
  const VectorXd z0 = random_vector(rng, d);
  std::uniform_real_distribution<double> u(0, 1);
  VectorXd b = A * z0;
  for (Index i = 0; i < m; ++i) {
    if (u(rng) > 0.33) { b(i) += u(rng); }
  }
  gradflow::QpProblem pb;
  pb.P = P.sparseView();
  pb.q = random_vector(rng, d, -3, 3);
  pb.A = A.sparseView();
  pb.b = b;
  return pb;
}

/// Central differences of a scalar function.
inline VectorXd fd_gradient(const std::function<double(const VectorXd&)>& f, const VectorXd& x, double h)
{
  VectorXd g(x.size());
  for (Index k = 0; k < x.size(); ++k) {
    VectorXd xp = x, xm = x;
    xp(k) += h;
    xm(k) -= h;
    g(k) = (f(xp) - f(xm)) / (2 * h);
  }
  return g;
}

/// Central differences of a vector function; column k is the derivative along e_k.
inline MatrixXd fd_jacobian(const std::function<VectorXd(const VectorXd&)>& f, const VectorXd& x, double h)
{
  const Index n = x.size();
  MatrixXd J(f(x).size(), n);
  for (Index k = 0; k < n; ++k) {
    VectorXd xp = x, xm = x;
    xp(k) += h;
    xm(k) -= h;
    J.col(k) = (f(xp) - f(xm)) / (2 * h);
  }
  return J;
}

/// Max-affine model with random anchors/slopes and heights that keep every
/// plane relevant somewhere (well-scaled for finite differences).
inline gradflow::MaxAffinePotential random_model(std::mt19937_64& rng, Index planes, Index n)
{
  return gradflow::MaxAffinePotential(random_matrix(rng, planes, n, -2, 2), random_vector(rng, planes, -0.5, 0.5),
                                      random_matrix(rng, planes, n, -2, 2));
}

/// Samples of phi(x) = sum_k c_k x_k^2 with exact y = -grad phi.
inline gradflow::Dataset quadratic_bowl_data(std::mt19937_64& rng, Index ns, Index n, double scale = 1.0)
{
  gradflow::Dataset d;
  d.x = random_matrix(rng, ns, n, -1.5, 1.5);
  d.y = -2 * scale * d.x;
  return d;
}

/// phi(x) = max_k <a_k, x> with a_k = (cos 2 pi k/8, sin 2 pi k/8), sampled with
/// five points per sector laid out identically in every sector, so every sample
/// lies strictly inside its own plane's region. y = -a_k exactly.
inline gradflow::Dataset octagon_cone_data()
{
  constexpr int planes = 8;
  const double pi      = std::acos(-1.0);
  const double offsets[5] = {-0.6, -0.3, 0.0, 0.3, 0.6};  // fractions of the half-sector width
  const double radii[5]   = {0.5, 0.8, 1.1, 1.4, 1.7};
  gradflow::Dataset d;
  d.x.resize(planes * 5, 2);
  d.y.resize(planes * 5, 2);
  for (int k = 0; k < planes; ++k) {
    const double center = 2 * pi * k / planes;
    for (int j = 0; j < 5; ++j) {
      const double angle = center + offsets[j] * pi / planes;
      const Index row    = k * 5 + j;
      d.x(row, 0)        = radii[j] * std::cos(angle);
      d.x(row, 1)        = radii[j] * std::sin(angle);
      d.y(row, 0)        = -std::cos(center);
      d.y(row, 1)        = -std::sin(center);
    }
  }
  return d;
}

}  // namespace testing
