#pragma once

#include <string>
#include <vector>

namespace zin::harness {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

/// Grouped bars: values[s][c] is series s at category c. The data is embedded
/// as a JSON comment.
std::string bar_chart(const std::string& title, const std::string& y_label, const std::vector<std::string>& categories,
                      const std::vector<Series>& series);

/// Polyline per series with point markers.
std::string line_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                       const std::vector<Series>& series);

}  // namespace zin::harness
