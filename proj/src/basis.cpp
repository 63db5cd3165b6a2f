#include "gradflow/basis.hpp"

#include "gradflow/error.hpp"

#include <sstream>

namespace gradflow {

namespace {

std::vector<std::string> split(const std::string& s, char sep)
{
  std::vector<std::string> parts;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) { parts.push_back(item); }
  return parts;
}

Eigen::Index parse_index(const std::string& s, Eigen::Index n, const std::string& name)
{
  try {
    std::size_t used = 0;
    const long v     = std::stol(s, &used);
    if (used == s.size() && v >= 0 && v < n) { return v; }
  } catch (const std::exception&) {
  }
  throw Error(ErrorKind::InvalidArgument, "basis field '" + name + "': bad index '" + s + "'");
}

}  // namespace

BasisField make_basis_field(const std::string& name, Eigen::Index n)
{
  const auto parts = split(name, ':');
  if (parts.size() == 2 && parts[0] == "const") {
    const auto i = parse_index(parts[1], n, name);
    return {name, [n, i](const Eigen::VectorXd&) {
              Eigen::VectorXd h = Eigen::VectorXd::Zero(n);
              h(i)              = 1.0;
              return h;
            }};
  }
  if (parts.size() == 3 && parts[0] == "linear") {
    const auto i = parse_index(parts[1], n, name), j = parse_index(parts[2], n, name);
    return {name, [n, i, j](const Eigen::VectorXd& x) {
              Eigen::VectorXd h = Eigen::VectorXd::Zero(n);
              h(i)              = x(j);
              return h;
            }};
  }
  if (parts.size() == 3 && parts[0] == "rotation") {
    const auto i = parse_index(parts[1], n, name), j = parse_index(parts[2], n, name);
    if (i == j) { throw Error(ErrorKind::InvalidArgument, "basis field '" + name + "': i == j"); }
    return {name, [n, i, j](const Eigen::VectorXd& x) {
              Eigen::VectorXd h = Eigen::VectorXd::Zero(n);
              h(i)              = x(j);
              h(j)              = -x(i);
              return h;
            }};
  }
  throw Error(ErrorKind::InvalidArgument, "unknown basis field '" + name + "'");
}

Basis make_basis(const std::vector<std::string>& names, Eigen::Index n)
{
  Basis basis;
  basis.reserve(names.size());
  for (const auto& name : names) { basis.push_back(make_basis_field(name, n)); }
  return basis;
}

std::vector<std::string> basis_names(const Basis& basis)
{
  std::vector<std::string> names;
  names.reserve(basis.size());
  for (const auto& h : basis) { names.push_back(h.name); }
  return names;
}

}  // namespace gradflow
