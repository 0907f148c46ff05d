#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "zin/data/dataset.hpp"
#include "zin/scm/joint_table.hpp"

namespace zin::scm {

/// One tabular mechanism. `cpt[e]` holds one row per parent configuration
/// (first parent most significant), each row a distribution over the
/// variable's support. A single table is shared by every environment.
struct ScmVariable {
  std::string name;
  int card = 2;
  std::vector<int> parents;
  std::vector<std::vector<double>> cpt;
};

/// Tabular structural causal model with per-environment mechanisms.
struct DiscreteScm {
  std::vector<ScmVariable> variables;
  std::vector<double> alpha;
  std::vector<int> invariant;
  std::vector<int> spurious;
  int label = -1;

  int num_envs() const { return static_cast<int>(alpha.size()); }
  int index(const std::string& name) const;
  std::vector<std::string> names() const;
  std::vector<int> cards() const;

  /// ConstructionError on a cycle.
  std::vector<int> topological_order() const;
  /// Checks parents, CPT shapes, row sums (1e-12), acyclicity and mixture weights.
  void validate() const;

  /// Probability row of `var` in environment `env` given a full assignment.
  const double* cpt_row(int var, int env, const std::vector<int>& assignment) const;
};

/// Adds a variable; `cpt` holds either one shared table or one per environment.
int add_variable(DiscreteScm& scm, const std::string& name, int card, std::vector<int> parents,
                 std::vector<std::vector<double>> cpt);

/// Exact mixed joint over the variables in declared order. With `keep_env`
/// the table gains a leading axis "E" holding α_e·P(X^e, Y^e).
/// An empty `alpha` means the model's own mixture weights.
JointTable enumerate_joint(const DiscreteScm& scm, const std::vector<double>& alpha = {},
                           bool keep_env = false);

/// Cell cap for enumerate_joint.
inline constexpr std::size_t kMaxJointCells = 10'000'000;

/// The 8-cell joint over (X1, X2, Y) from the impossibility example.
JointTable counterexample_joint();

/// X1 invariant (Y copies X1 w.p. 0.75), X2 copies Y w.p. p_s in {0.8, 0.9}.
DiscreteScm build_scm_A();
/// X2 invariant (Y copies X2 w.p. 0.85), X1 copies Y w.p. p_s in {0.8, 0.7}.
DiscreteScm build_scm_B();

/// Ancestral sampling. Features are the invariant then spurious variables,
/// the label is `scm.label`, and the environment id is recorded.
data::Dataset sample_discrete(const DiscreteScm& scm, std::size_t n, std::uint64_t seed);

}  // namespace zin::scm
