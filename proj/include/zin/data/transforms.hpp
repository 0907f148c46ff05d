#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "zin/data/dataset.hpp"

namespace zin::data {

/// Interval with configurable endpoint closure, e.g. [1900,1950] or (1950,2000].
struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool lo_closed = true;
  bool hi_closed = false;

  bool contains(double v) const;
  bool empty() const;
  /// Parses "[a,b]", "(a,b]", "[a,b)" or "(a,b)".
  static Interval parse(const std::string& text);
  std::string to_string() const;
};

bool overlaps(const Interval& a, const Interval& b);

struct RangeSplit {
  std::vector<Dataset> parts;
  std::size_t dropped = 0;
};

/// Row partition by interval membership on a numeric column. Rows outside
/// every interval are dropped and counted. ConfigError on overlapping ranges.
RangeSplit split_by_range(const Dataset& ds, const std::string& column,
                          const std::vector<Interval>& ranges);

/// Standardises the label within each group of equal `group_column` value,
/// using the population (1/n) standard deviation. Singleton groups and
/// constant groups map to 0.
Dataset normalize_within_groups(const Dataset& ds, const std::string& group_column);

/// Environment ids from equal-width segments of `range` (defaults to the
/// column's min/max). The top edge belongs to the last segment; values outside
/// the range are clamped. Ids are compacted over occupied segments.
Dataset segment_env_labels(const Dataset& ds, const std::string& column, int n_segments,
                           std::optional<std::pair<double, double>> range = std::nullopt);

}  // namespace zin::data
