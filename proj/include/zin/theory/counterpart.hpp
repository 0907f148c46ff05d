#pragma once

#include <string>

#include "zin/scm/discrete_scm.hpp"

namespace zin::theory {

/// Builds the role-swapped SCM for a joint over (xv, xs, y): `xs` becomes the
/// parent of `y` and `xv` is generated from (xs, y). Each mechanism is the
/// discrete inverse-CDF of the table's conditional, so the induced joint
/// equals the input. Rows with zero conditioning mass get a uniform
/// distribution. Variables keep the table's axis order.
scm::DiscreteScm construct_counterpart(const scm::JointTable& table, const std::string& xv, const std::string& xs,
                                       const std::string& y);

/// Draws a value from a discrete distribution by inverting its CDF at u in [0,1).
int inverse_cdf(const std::vector<double>& row, double u);

}  // namespace zin::theory
