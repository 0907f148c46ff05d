#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "zin/scm/discrete_scm.hpp"
#include "zin/theory/entropy.hpp"
#include "json.hpp"

namespace zin::theory {

/// Discrete identification problem: a joint table plus the roles of its axes.
/// Z variables may overlap features or the target (e.g. Z = Y).
struct OracleProblem {
  JointTable table;
  std::string target;
  std::vector<std::string> features;
  std::vector<std::string> z_vars;
  std::vector<std::string> invariant;
  std::vector<std::string> spurious;

  void validate() const;
};

/// Table over (E, features..., label) with Z = E for a DiscreteScm.
OracleProblem problem_from_scm(const scm::DiscreteScm& model);

/// Bit vector over `features`.
using FeatureMask = std::vector<bool>;

struct MaskEntry {
  FeatureMask mask;
  std::vector<std::string> names;
  double entropy = 0.0;
  double penalty = 0.0;
  double objective = 0.0;
  HardPartition witness;
};

struct ConditionVerdict {
  bool holds = false;
  double gap = 0.0;
  std::string detail;
};

struct OracleReport {
  double lambda = 0.0;
  int k = 2;
  std::vector<MaskEntry> masks;
  std::size_t argmin = 0;
  bool argmin_is_invariant = false;
  double h_y = 0.0;
  double c = 0.0;
  double c_prime = 0.0;
  double gamma = 0.0;
  double delta_disjoint = 0.0;
  double delta_inclusive = 0.0;
  double lambda_lo = std::numeric_limits<double>::infinity();
  double lambda_hi = std::numeric_limits<double>::infinity();
  ConditionVerdict condition1;
  ConditionVerdict condition2;

  const MaskEntry& best() const { return masks.at(argmin); }
  bool lambda_in_window() const { return lambda >= lambda_lo && lambda <= lambda_hi; }
  nlohmann::json to_json() const;
};

/// Gaps used by the identifiability window, measured by enumeration.
struct Gaps {
  double c = 0.0;        // min over spurious coordinates of the max penalty
  double c_prime = 0.0;  // max penalty of the invariant mask
  double gamma = 0.0;    // min over disjoint A, B of H(Y|A) - H(Y|A,B)
  double delta_disjoint = 0.0;
  double delta_inclusive = 0.0;
};

Gaps measure_gaps(const OracleProblem& problem, int k);

/// Lower end of the λ window with ε = 0; +inf when δC is not positive.
double lambda_lower_bound(double h_y, double delta, double c);

/// Enumerates every nonempty mask; L(Φ) = H(Y|Φ) + λ·max_penalty(Φ).
OracleReport mask_oracle(const OracleProblem& problem, double lambda, int k);

/// Sufficient test H(Y|X_v,Z) == H(Y|X_v) (1e-10) and exhaustive partition check.
ConditionVerdict check_condition1(const OracleProblem& problem, int k);
/// Each spurious coordinate must reach a positive max penalty; gap is the smallest.
ConditionVerdict check_condition2(const OracleProblem& problem, int k);

/// Empirical table of `n` ancestral samples with one Z value per sample
/// (axis "index"), each of mass 1/n.
OracleProblem sample_index_problem(const scm::DiscreteScm& model, std::size_t n, std::uint64_t seed);

/// Replaces Z by the listed existing axes.
OracleProblem with_z(OracleProblem problem, std::vector<std::string> z_vars);

/// Adds an independent uniform axis "noise" of the given cardinality and uses it as Z.
OracleProblem with_independent_z(OracleProblem problem, int card);

}  // namespace zin::theory
