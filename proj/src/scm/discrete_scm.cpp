#include "zin/scm/discrete_scm.hpp"

#include <cmath>
#include <random>

#include "zin/common/errors.hpp"

namespace zin::scm {

namespace {

std::size_t parent_rows(const DiscreteScm& scm, const ScmVariable& v) {
  std::size_t rows = 1;
  for (int p : v.parents) rows *= static_cast<std::size_t>(scm.variables[static_cast<std::size_t>(p)].card);
  return rows;
}

int draw(const double* row, int card, double u) {
  double acc = 0.0;
  for (int k = 0; k < card; ++k) {
    acc += row[k];
    if (u < acc) return k;
  }
  return card - 1;
}

}  // namespace

int DiscreteScm::index(const std::string& name) const {
  for (std::size_t i = 0; i < variables.size(); ++i)
    if (variables[i].name == name) return static_cast<int>(i);
  throw SchemaError("SCM has no variable '" + name + "'");
}

std::vector<std::string> DiscreteScm::names() const {
  std::vector<std::string> out;
  for (const auto& v : variables) out.push_back(v.name);
  return out;
}

std::vector<int> DiscreteScm::cards() const {
  std::vector<int> out;
  for (const auto& v : variables) out.push_back(v.card);
  return out;
}

std::vector<int> DiscreteScm::topological_order() const {
  const std::size_t n = variables.size();
  std::vector<int> state(n, 0);
  std::vector<int> order;
  std::vector<std::pair<int, std::size_t>> stack;
  for (std::size_t root = 0; root < n; ++root) {
    if (state[root]) continue;
    stack.push_back({static_cast<int>(root), 0});
    state[root] = 1;
    while (!stack.empty()) {
      auto& [v, next] = stack.back();
      const auto& parents = variables[static_cast<std::size_t>(v)].parents;
      if (next < parents.size()) {
        const int p = parents[next++];
        if (p < 0 || static_cast<std::size_t>(p) >= n) throw ConstructionError("parent index out of range");
        if (state[static_cast<std::size_t>(p)] == 1) {
          throw ConstructionError("SCM graph has a cycle through '" + variables[static_cast<std::size_t>(p)].name + "'");
        }
        if (state[static_cast<std::size_t>(p)] == 0) {
          state[static_cast<std::size_t>(p)] = 1;
          stack.push_back({p, 0});
        }
      } else {
        state[static_cast<std::size_t>(v)] = 2;
        order.push_back(v);
        stack.pop_back();
      }
    }
  }
  return order;
}

void DiscreteScm::validate() const {
  if (alpha.empty()) throw ConstructionError("SCM needs at least one environment");
  double mass = 0.0;
  for (double a : alpha) {
    if (!(a >= 0.0)) throw ConstructionError("mixture weights must be non-negative");
    mass += a;
  }
  if (std::abs(mass - 1.0) > 1e-12) throw ConstructionError("mixture weights must sum to 1");
  topological_order();
  for (const auto& v : variables) {
    if (v.card < 1) throw ConstructionError("variable '" + v.name + "' has empty support");
    if (v.cpt.size() != 1 && v.cpt.size() != alpha.size()) {
      throw ConstructionError("variable '" + v.name + "' needs one shared CPT or one per environment");
    }
    const std::size_t rows = parent_rows(*this, v);
    for (const auto& table : v.cpt) {
      if (table.size() != rows * static_cast<std::size_t>(v.card)) {
        throw ConstructionError("CPT of '" + v.name + "' has wrong size");
      }
      for (std::size_t r = 0; r < rows; ++r) {
        double s = 0.0;
        for (int k = 0; k < v.card; ++k) {
          const double p = table[r * static_cast<std::size_t>(v.card) + static_cast<std::size_t>(k)];
          if (!(p >= 0.0)) throw ConstructionError("CPT of '" + v.name + "' has a negative entry");
          s += p;
        }
        if (std::abs(s - 1.0) > 1e-12) {
          throw ConstructionError("CPT row " + std::to_string(r) + " of '" + v.name + "' sums to " + std::to_string(s));
        }
      }
    }
  }
  if (label >= static_cast<int>(variables.size())) throw ConstructionError("label index out of range");
}

const double* DiscreteScm::cpt_row(int var, int env, const std::vector<int>& assignment) const {
  const ScmVariable& v = variables[static_cast<std::size_t>(var)];
  std::size_t row = 0;
  for (int p : v.parents) {
    row = row * static_cast<std::size_t>(variables[static_cast<std::size_t>(p)].card) +
          static_cast<std::size_t>(assignment[static_cast<std::size_t>(p)]);
  }
  const auto& table = v.cpt.size() == 1 ? v.cpt[0] : v.cpt[static_cast<std::size_t>(env)];
  return table.data() + row * static_cast<std::size_t>(v.card);
}

int add_variable(DiscreteScm& scm, const std::string& name, int card, std::vector<int> parents,
                 std::vector<std::vector<double>> cpt) {
  scm.variables.push_back({name, card, std::move(parents), std::move(cpt)});
  return static_cast<int>(scm.variables.size()) - 1;
}

JointTable enumerate_joint(const DiscreteScm& scm, const std::vector<double>& alpha_in, bool keep_env) {
  scm.validate();
  const std::vector<double>& alpha = alpha_in.empty() ? scm.alpha : alpha_in;
  if (alpha.size() != scm.alpha.size()) throw DimensionError("mixture has the wrong number of environments");
  double mass = 0.0;
  for (double a : alpha) {
    if (!(a >= 0.0)) throw DomainError("mixture weights must be non-negative");
    mass += a;
  }
  if (std::abs(mass - 1.0) > 1e-12) throw DomainError("mixture weights must sum to 1");

  std::vector<std::string> names = scm.names();
  std::vector<int> cards = scm.cards();
  double cells = keep_env ? static_cast<double>(alpha.size()) : 1.0;
  for (int c : cards) cells *= c;
  if (cells > static_cast<double>(kMaxJointCells)) {
    throw CapacityError("joint table would have " + std::to_string(static_cast<long long>(cells)) +
                        " cells (limit 10^7); reduce supports or variables");
  }
  if (keep_env) {
    names.insert(names.begin(), "E");
    cards.insert(cards.begin(), static_cast<int>(alpha.size()));
  }
  JointTable out(names, cards);
  const std::size_t nv = scm.variables.size();
  std::vector<int> a(nv, 0);
  std::vector<int> full(keep_env ? nv + 1 : nv);
  const std::size_t vars_cells = static_cast<std::size_t>(cells / (keep_env ? alpha.size() : 1.0));
  for (std::size_t cell = 0; cell < vars_cells; ++cell) {
    for (std::size_t e = 0; e < alpha.size(); ++e) {
      if (alpha[e] == 0.0) continue;
      double p = alpha[e];
      for (std::size_t v = 0; v < nv && p > 0.0; ++v) {
        p *= scm.cpt_row(static_cast<int>(v), static_cast<int>(e), a)[a[v]];
      }
      if (keep_env) {
        full[0] = static_cast<int>(e);
        std::copy(a.begin(), a.end(), full.begin() + 1);
        out.at(full) += p;
      } else {
        out.at(a) += p;
      }
    }
    for (std::size_t d = nv; d-- > 0;) {
      if (++a[d] < scm.variables[d].card) break;
      a[d] = 0;
    }
  }
  return out;
}

JointTable counterexample_joint() {
  JointTable t({"X1", "X2", "Y"}, {2, 2, 2});
  for (int y = 0; y < 2; ++y) {
    const int n = 1 - y;
    const int all_agree[] = {y, y, y};
    const int x2_differs[] = {y, n, y};
    const int x1_differs[] = {n, y, y};
    const int y_differs[] = {n, n, y};
    t.at(all_agree) = 0.6375 / 2;
    t.at(x2_differs) = 0.1125 / 2;
    t.at(x1_differs) = 0.2125 / 2;
    t.at(y_differs) = 0.0375 / 2;
  }
  return t;
}

namespace {

std::vector<double> copy_cpt(double p_copy) { return {p_copy, 1.0 - p_copy, 1.0 - p_copy, p_copy}; }

DiscreteScm two_feature_scm(bool x1_invariant, double p_v, double ps1, double ps2) {
  DiscreteScm scm;
  scm.alpha = {0.5, 0.5};
  const std::vector<double> fair{0.5, 0.5};
  // Declared order X1, X2, Y so the joint's axes match the counterexample.
  const int x1 = 0, x2 = 1, y = 2;
  if (x1_invariant) {
    add_variable(scm, "X1", 2, {}, {fair});
    add_variable(scm, "X2", 2, {y}, {copy_cpt(ps1), copy_cpt(ps2)});
    add_variable(scm, "Y", 2, {x1}, {copy_cpt(p_v)});
    scm.invariant = {x1};
    scm.spurious = {x2};
  } else {
    add_variable(scm, "X1", 2, {y}, {copy_cpt(ps1), copy_cpt(ps2)});
    add_variable(scm, "X2", 2, {}, {fair});
    add_variable(scm, "Y", 2, {x2}, {copy_cpt(p_v)});
    scm.invariant = {x2};
    scm.spurious = {x1};
  }
  scm.label = y;
  scm.validate();
  return scm;
}

}  // namespace

DiscreteScm build_scm_A() { return two_feature_scm(true, 0.75, 0.8, 0.9); }
DiscreteScm build_scm_B() { return two_feature_scm(false, 0.85, 0.8, 0.7); }

data::Dataset sample_discrete(const DiscreteScm& scm, std::size_t n, std::uint64_t seed) {
  scm.validate();
  if (scm.label < 0) throw ConstructionError("SCM has no designated label");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::discrete_distribution<int> env_dist(scm.alpha.begin(), scm.alpha.end());
  const std::vector<int> order = scm.topological_order();
  std::vector<int> features = scm.invariant;
  features.insert(features.end(), scm.spurious.begin(), scm.spurious.end());

  data::Dataset ds;
  ds.x = ad::Tensor(n, features.size());
  ds.y = ad::Tensor(n, 1);
  ds.z = ad::Tensor(n, 0);
  ds.keys = ad::Tensor(n, 0);
  for (int f : features) ds.x_names.push_back(scm.variables[static_cast<std::size_t>(f)].name);
  ds.y_name = scm.variables[static_cast<std::size_t>(scm.label)].name;
  ds.env.resize(n);
  std::vector<int> a(scm.variables.size());
  for (std::size_t i = 0; i < n; ++i) {
    const int e = env_dist(rng);
    for (int v : order) {
      a[static_cast<std::size_t>(v)] = draw(scm.cpt_row(v, e, a), scm.variables[static_cast<std::size_t>(v)].card, u(rng));
    }
    for (std::size_t j = 0; j < features.size(); ++j) ds.x(i, j) = a[static_cast<std::size_t>(features[j])];
    ds.y[i] = a[static_cast<std::size_t>(scm.label)];
    ds.env[i] = e;
  }
  data::compact_env_ids(ds.env);
  return ds;
}

}  // namespace zin::scm
