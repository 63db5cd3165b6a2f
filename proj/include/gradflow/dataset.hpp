#pragma once

#include <Eigen/Dense>

#include <vector>

namespace gradflow {

/// Sample pairs (x_j, y_j): states and derivative estimates, one row per sample.
struct Dataset
{
  Eigen::MatrixXd x;
  Eigen::MatrixXd y;

  Eigen::Index dim() const { return x.cols(); }
  Eigen::Index size() const { return x.rows(); }

  /// Throws Error(DimensionMismatch / InvalidArgument) on inconsistent shape,
  /// empty data or non-finite entries.
  void validate() const;

  /// Rows selected by index, in the given order.
  Dataset subset(const std::vector<Eigen::Index>& rows) const;
};

}  // namespace gradflow
