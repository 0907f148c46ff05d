#include "zin/theory/counterpart.hpp"

#include <set>

#include "zin/common/errors.hpp"
#include "zin/theory/table_index.hpp"

namespace zin::theory {

namespace {

std::vector<std::vector<double>> conditional(const scm::JointTable& t, const std::vector<std::string>& given,
                                             const std::string& var) {
  const TableIndex g(t, given);
  const TableIndex v(t, {var});
  std::vector<std::vector<double>> rows(g.size(), std::vector<double>(v.size(), 0.0));
  std::vector<int> a(t.num_axes(), 0);
  for (std::size_t i = 0; i < t.size(); ++i) {
    rows[g.of(a)][v.of(a)] += t[i];
    advance(t, a);
  }
  for (auto& row : rows) {
    double s = 0.0;
    for (double p : row) s += p;
    for (double& p : row) p = s > 0.0 ? p / s : 1.0 / static_cast<double>(row.size());
  }
  return rows;
}

std::vector<double> flatten(const std::vector<std::vector<double>>& rows) {
  std::vector<double> out;
  for (const auto& r : rows) out.insert(out.end(), r.begin(), r.end());
  return out;
}

}  // namespace

int inverse_cdf(const std::vector<double>& row, double u) {
  double acc = 0.0;
  for (std::size_t i = 0; i < row.size(); ++i) {
    acc += row[i];
    if (u < acc) return static_cast<int>(i);
  }
  for (std::size_t i = row.size(); i-- > 0;)
    if (row[i] > 0.0) return static_cast<int>(i);
  return static_cast<int>(row.size()) - 1;
}

scm::DiscreteScm construct_counterpart(const scm::JointTable& table, const std::string& xv, const std::string& xs,
                                       const std::string& y) {
  if (table.num_axes() != 3) throw DimensionError("counterpart needs a table over exactly (X_v, X_s, Y)");
  if (std::set<std::string>{xv, xs, y}.size() != 3) throw ConfigError("roles must name three distinct axes");
  table.validate(1e-9);
  const int ixv = static_cast<int>(table.axis(xv));
  const int ixs = static_cast<int>(table.axis(xs));
  const int iy = static_cast<int>(table.axis(y));

  scm::DiscreteScm out;
  out.alpha = {1.0};
  out.variables.resize(3);
  for (std::size_t i = 0; i < 3; ++i) {
    out.variables[i].name = table.names()[i];
    out.variables[i].card = table.cards()[i];
  }
  auto& new_parent = out.variables[static_cast<std::size_t>(ixs)];
  new_parent.cpt = {conditional(table, {}, xs).front()};
  auto& label = out.variables[static_cast<std::size_t>(iy)];
  label.parents = {ixs};
  label.cpt = {flatten(conditional(table, {xs}, y))};
  auto& child = out.variables[static_cast<std::size_t>(ixv)];
  child.parents = {ixs, iy};
  child.cpt = {flatten(conditional(table, {xs, y}, xv))};
  out.invariant = {ixs};
  out.spurious = {ixv};
  out.label = iy;
  out.validate();
  return out;
}

}  // namespace zin::theory
