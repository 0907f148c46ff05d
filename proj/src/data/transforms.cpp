#include "zin/data/transforms.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <map>
#include <sstream>

#include "zin/common/errors.hpp"

namespace zin::data {

bool Interval::contains(double v) const {
  const bool above = lo_closed ? v >= lo : v > lo;
  const bool below = hi_closed ? v <= hi : v < hi;
  return above && below;
}

bool Interval::empty() const {
  if (lo < hi) return false;
  return !(lo == hi && lo_closed && hi_closed);
}

Interval Interval::parse(const std::string& text) {
  std::string t;
  for (char c : text)
    if (c != ' ') t += c;
  const auto comma = t.find(',');
  if (t.size() < 5 || comma == std::string::npos || (t.front() != '[' && t.front() != '(') ||
      (t.back() != ']' && t.back() != ')')) {
    throw ConfigError("cannot parse interval '" + text + "' (expected e.g. [1900,1950])");
  }
  Interval iv;
  iv.lo_closed = t.front() == '[';
  iv.hi_closed = t.back() == ']';
  try {
    iv.lo = std::stod(t.substr(1, comma - 1));
    iv.hi = std::stod(t.substr(comma + 1, t.size() - comma - 2));
  } catch (const std::exception&) {
    throw ConfigError("cannot parse interval '" + text + "'");
  }
  return iv;
}

std::string Interval::to_string() const {
  std::ostringstream os;
  os << (lo_closed ? '[' : '(') << lo << ',' << hi << (hi_closed ? ']' : ')');
  return os.str();
}

bool overlaps(const Interval& a, const Interval& b) {
  if (a.empty() || b.empty()) return false;
  // Disjoint when one ends before the other starts, honouring closure at a
  // shared endpoint.
  auto before = [](const Interval& x, const Interval& y) {
    return x.hi < y.lo || (x.hi == y.lo && !(x.hi_closed && y.lo_closed));
  };
  return !(before(a, b) || before(b, a));
}

RangeSplit split_by_range(const Dataset& ds, const std::string& column,
                          const std::vector<Interval>& ranges) {
  for (std::size_t i = 0; i < ranges.size(); ++i)
    for (std::size_t j = i + 1; j < ranges.size(); ++j)
      if (overlaps(ranges[i], ranges[j])) {
        throw ConfigError("ranges " + ranges[i].to_string() + " and " + ranges[j].to_string() + " overlap");
      }
  auto values = ds.column(column);
  if (!values) throw SchemaError("no numeric column named '" + column + "'");

  std::vector<std::vector<std::size_t>> rows(ranges.size());
  RangeSplit out;
  for (std::size_t r = 0; r < values->size(); ++r) {
    bool placed = false;
    for (std::size_t k = 0; k < ranges.size() && !placed; ++k) {
      if (ranges[k].contains((*values)[r])) {
        rows[k].push_back(r);
        placed = true;
      }
    }
    if (!placed) ++out.dropped;
  }
  for (const auto& idx : rows) out.parts.push_back(ds.subset(idx));
  if (out.dropped > 0) {
    std::cerr << "split_by_range: " << out.dropped << " row(s) outside every range on '" << column << "'\n";
  }
  return out;
}

Dataset normalize_within_groups(const Dataset& ds, const std::string& group_column) {
  auto keys = ds.column(group_column);
  if (!keys) throw SchemaError("no column named '" + group_column + "' to group by");
  std::map<double, std::vector<std::size_t>> groups;
  for (std::size_t r = 0; r < keys->size(); ++r) groups[(*keys)[r]].push_back(r);

  Dataset out = ds;
  for (const auto& [key, rows] : groups) {
    const double n = static_cast<double>(rows.size());
    double mean = 0.0;
    for (std::size_t r : rows) mean += ds.y[r];
    mean /= n;
    double var = 0.0;
    for (std::size_t r : rows) var += (ds.y[r] - mean) * (ds.y[r] - mean);
    const double sd = std::sqrt(var / n);
    for (std::size_t r : rows) out.y[r] = sd > 0.0 ? (ds.y[r] - mean) / sd : 0.0;
  }
  return out;
}

Dataset segment_env_labels(const Dataset& ds, const std::string& column, int n_segments,
                           std::optional<std::pair<double, double>> range) {
  if (n_segments < 2) throw ConfigError("segment_env_labels needs at least 2 segments");
  auto values = ds.column(column);
  if (!values) throw SchemaError("no numeric column named '" + column + "'");
  double lo = 0.0;
  double hi = 0.0;
  if (range) {
    std::tie(lo, hi) = *range;
  } else if (!values->empty()) {
    auto [mn, mx] = std::minmax_element(values->begin(), values->end());
    lo = *mn;
    hi = *mx;
  }
  if (hi < lo) throw ConfigError("segment range has hi < lo");
  const double width = (hi - lo) / n_segments;
  Dataset out = ds;
  out.env.assign(ds.size(), 0);
  for (std::size_t r = 0; r < values->size(); ++r) {
    int seg = 0;
    if (width > 0.0) {
      seg = static_cast<int>(std::floor(((*values)[r] - lo) / width));
      seg = std::clamp(seg, 0, n_segments - 1);
    }
    out.env[r] = seg;
  }
  compact_env_ids(out.env);
  return out;
}

}  // namespace zin::data
