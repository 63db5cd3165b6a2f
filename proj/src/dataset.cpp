#include "gradflow/dataset.hpp"

#include "gradflow/error.hpp"

namespace gradflow {

void Dataset::validate() const
{
  if (x.rows() != y.rows() || x.cols() != y.cols()) {
    throw Error(ErrorKind::DimensionMismatch, "dataset: x and y must have the same shape");
  }
  if (x.rows() < 1 || x.cols() < 1) { throw Error(ErrorKind::InvalidArgument, "dataset: needs n >= 1 and n_s >= 1"); }
  if (!x.allFinite() || !y.allFinite()) { throw Error(ErrorKind::InvalidArgument, "dataset: non-finite entries"); }
}

Dataset Dataset::subset(const std::vector<Eigen::Index>& rows) const
{
  Dataset out;
  out.x.resize(static_cast<Eigen::Index>(rows.size()), x.cols());
  out.y.resize(static_cast<Eigen::Index>(rows.size()), y.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] < 0 || rows[r] >= x.rows()) { throw Error(ErrorKind::InvalidArgument, "dataset: row out of range"); }
    out.x.row(static_cast<Eigen::Index>(r)) = x.row(rows[r]);
    out.y.row(static_cast<Eigen::Index>(r)) = y.row(rows[r]);
  }
  return out;
}

}  // namespace gradflow
