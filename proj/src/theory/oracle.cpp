#include "zin/theory/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "zin/common/errors.hpp"

namespace zin::theory {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<std::string> select(const std::vector<std::string>& features, std::uint64_t bits) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < features.size(); ++i)
    if (bits >> i & 1U) out.push_back(features[i]);
  return out;
}

std::vector<std::string> join(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

std::uint64_t bits_of(const std::vector<std::string>& features, const std::vector<std::string>& names) {
  std::uint64_t bits = 0;
  for (const auto& n : names) {
    const auto it = std::find(features.begin(), features.end(), n);
    if (it == features.end()) throw SchemaError("'" + n + "' is not a feature");
    bits |= std::uint64_t{1} << static_cast<std::size_t>(it - features.begin());
  }
  return bits;
}

nlohmann::json number(double v) {
  if (std::isfinite(v)) return v;
  return v > 0 ? "inf" : "-inf";
}

}  // namespace

void OracleProblem::validate() const {
  table.validate(1e-9);
  if (!table.has_axis(target)) throw SchemaError("target '" + target + "' is not a table axis");
  if (features.empty()) throw ConfigError("at least one feature is required");
  if (features.size() > 20) throw CapacityError("mask enumeration is limited to 20 features");
  std::set<std::string> seen;
  for (const auto& f : features) {
    table.axis(f);
    if (f == target) throw ConfigError("the target cannot be a feature");
    if (!seen.insert(f).second) throw ConfigError("duplicate feature '" + f + "'");
  }
  for (const auto& z : z_vars) table.axis(z);
  bits_of(features, invariant);
  bits_of(features, spurious);
}

OracleProblem problem_from_scm(const scm::DiscreteScm& model) {
  OracleProblem p;
  p.table = scm::enumerate_joint(model, {}, true);
  p.target = model.variables.at(static_cast<std::size_t>(model.label)).name;
  for (int v : model.invariant) p.invariant.push_back(model.variables[static_cast<std::size_t>(v)].name);
  for (int v : model.spurious) p.spurious.push_back(model.variables[static_cast<std::size_t>(v)].name);
  p.features = join(p.invariant, p.spurious);
  p.z_vars = {"E"};
  return p;
}

double lambda_lower_bound(double h_y, double delta, double c) {
  const double dc = delta * c;
  if (!(dc > 0.0)) return kInf;
  return (h_y + 0.5 * dc) / dc - 0.5;
}

Gaps measure_gaps(const OracleProblem& p, int k) {
  Gaps g;
  const auto& t = p.table;
  g.c_prime = p.invariant.empty() ? 0.0 : max_penalty(t, p.target, p.invariant, p.z_vars, k).value;

  g.c = kInf;
  g.delta_disjoint = kInf;
  for (const auto& s : p.spurious) {
    const PenaltyResult base = max_penalty(t, p.target, {s}, p.z_vars, k);
    g.c = std::min(g.c, base.value);
    const std::uint64_t sbit = bits_of(p.features, {s});
    const std::uint64_t all = (std::uint64_t{1} << p.features.size()) - 1;
    for (std::uint64_t a = 1; a <= all; ++a) {
      if (a & sbit) continue;
      const double pen = partition_penalty(t, p.target, join({s}, select(p.features, a)), base.witness);
      g.delta_disjoint = std::min(g.delta_disjoint, base.value > 0.0 ? pen / base.value : 0.0);
    }
  }
  if (p.spurious.empty()) g.c = 0.0;
  if (!std::isfinite(g.delta_disjoint)) g.delta_disjoint = p.spurious.empty() ? 0.0 : 1.0;
  g.delta_inclusive = std::min(1.0, g.delta_disjoint);

  g.gamma = kInf;
  const std::uint64_t all = (std::uint64_t{1} << p.features.size()) - 1;
  for (std::uint64_t a = 1; a <= all; ++a) {
    const double ha = cond_entropy(t, p.target, select(p.features, a));
    for (std::uint64_t b = 1; b <= all; ++b) {
      if (a & b) continue;
      g.gamma = std::min(g.gamma, ha - cond_entropy(t, p.target, select(p.features, a | b)));
    }
  }
  return g;
}

OracleReport mask_oracle(const OracleProblem& p, double lambda, int k) {
  p.validate();
  if (lambda < 0.0) throw ConfigError("lambda must be non-negative");
  OracleReport r;
  r.lambda = lambda;
  r.k = k;
  const std::uint64_t all = (std::uint64_t{1} << p.features.size()) - 1;
  const std::uint64_t inv = bits_of(p.features, p.invariant);
  double best = kInf;
  for (std::uint64_t bits = 1; bits <= all; ++bits) {
    MaskEntry e;
    for (std::size_t i = 0; i < p.features.size(); ++i) e.mask.push_back(bits >> i & 1U);
    e.names = select(p.features, bits);
    e.entropy = cond_entropy(p.table, p.target, e.names);
    if (p.z_vars.empty()) {
      e.penalty = 0.0;
      e.witness.num_groups = 1;
    } else {
      const PenaltyResult pr = max_penalty(p.table, p.target, e.names, p.z_vars, k);
      e.penalty = pr.value;
      e.witness = pr.witness;
    }
    e.objective = e.entropy + lambda * e.penalty;
    // Ties within 1e-12 go to the larger mask.
    if (e.objective < best - 1e-12 || (e.objective <= best + 1e-12 && !r.masks.empty() &&
                                       e.names.size() > r.masks[r.argmin].names.size())) {
      best = std::min(best, e.objective);
      r.argmin = r.masks.size();
    }
    r.masks.push_back(std::move(e));
  }
  std::uint64_t arg_bits = 0;
  for (std::size_t i = 0; i < p.features.size(); ++i)
    if (r.masks[r.argmin].mask[i]) arg_bits |= std::uint64_t{1} << i;
  r.argmin_is_invariant = inv != 0 && arg_bits == inv;

  r.h_y = cond_entropy(p.table, p.target, {});
  if (!p.z_vars.empty()) {
    const Gaps g = measure_gaps(p, k);
    r.c = g.c;
    r.c_prime = g.c_prime;
    r.gamma = g.gamma;
    r.delta_disjoint = g.delta_disjoint;
    r.delta_inclusive = g.delta_inclusive;
    r.lambda_lo = lambda_lower_bound(r.h_y, r.delta_inclusive, r.c);
    r.condition1 = check_condition1(p, k);
    r.condition2 = check_condition2(p, k);
  }
  return r;
}

ConditionVerdict check_condition1(const OracleProblem& p, int k) {
  ConditionVerdict v;
  if (p.invariant.empty()) throw ConfigError("no invariant features declared");
  const double h = cond_entropy(p.table, p.target, p.invariant);
  const double hz = cond_entropy(p.table, p.target, join(p.invariant, p.z_vars));
  const bool sufficient = std::abs(h - hz) <= 1e-10;
  const PenaltyResult pen = max_penalty(p.table, p.target, p.invariant, p.z_vars, k);
  v.gap = pen.value;
  v.holds = pen.value <= 1e-12;
  std::ostringstream os;
  os << "H(Y|Xv)-H(Y|Xv,Z)=" << h - hz << (sufficient ? " (sufficient test passes)" : " (sufficient test fails)")
     << "; max penalty " << pen.value << " at " << pen.witness.to_string();
  v.detail = os.str();
  return v;
}

ConditionVerdict check_condition2(const OracleProblem& p, int k) {
  ConditionVerdict v;
  v.holds = true;
  v.gap = p.spurious.empty() ? 0.0 : kInf;
  std::ostringstream os;
  for (const auto& s : p.spurious) {
    const PenaltyResult pen = max_penalty(p.table, p.target, {s}, p.z_vars, k);
    v.gap = std::min(v.gap, pen.value);
    if (pen.value <= 1e-12) v.holds = false;
    os << s << ": C=" << pen.value << " at " << pen.witness.to_string() << "; ";
  }
  v.detail = p.spurious.empty() ? "no spurious features" : os.str();
  return v;
}

nlohmann::json OracleReport::to_json() const {
  nlohmann::json j;
  j["lambda"] = lambda;
  j["K"] = k;
  j["masks"] = nlohmann::json::array();
  for (const auto& m : masks) {
    j["masks"].push_back({{"features", m.names},
                          {"entropy", m.entropy},
                          {"penalty", m.penalty},
                          {"objective", m.objective},
                          {"witness", m.witness.to_string()}});
  }
  j["argmin"] = masks.empty() ? nlohmann::json() : nlohmann::json(masks[argmin].names);
  j["argmin_is_invariant"] = argmin_is_invariant;
  j["H_Y"] = h_y;
  j["C"] = number(c);
  j["C_prime"] = number(c_prime);
  j["gamma"] = number(gamma);
  j["delta_disjoint"] = number(delta_disjoint);
  j["delta_inclusive"] = number(delta_inclusive);
  j["lambda_window"] = {number(lambda_lo), number(lambda_hi)};
  j["lambda_in_window"] = lambda_in_window();
  j["condition1"] = {{"holds", condition1.holds}, {"gap", number(condition1.gap)}, {"detail", condition1.detail}};
  j["condition2"] = {{"holds", condition2.holds}, {"gap", number(condition2.gap)}, {"detail", condition2.detail}};
  return j;
}

OracleProblem sample_index_problem(const scm::DiscreteScm& model, std::size_t n, std::uint64_t seed) {
  if (n < 2) throw ConfigError("need at least two samples");
  const data::Dataset ds = scm::sample_discrete(model, n, seed);
  OracleProblem p;
  std::vector<std::string> names = ds.x_names;
  std::vector<int> cards;
  for (const auto& nm : ds.x_names) cards.push_back(model.variables[static_cast<std::size_t>(model.index(nm))].card);
  names.push_back(ds.y_name);
  cards.push_back(model.variables[static_cast<std::size_t>(model.label)].card);
  names.push_back("index");
  cards.push_back(static_cast<int>(n));
  JointTable t(names, cards);
  std::vector<int> a(names.size());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < ds.x_names.size(); ++j) a[j] = static_cast<int>(ds.x(i, j));
    a[ds.x_names.size()] = static_cast<int>(ds.y[i]);
    a.back() = static_cast<int>(i);
    t.at(a) += 1.0 / static_cast<double>(n);
  }
  p.table = std::move(t);
  p.target = ds.y_name;
  for (int v : model.invariant) p.invariant.push_back(model.variables[static_cast<std::size_t>(v)].name);
  for (int v : model.spurious) p.spurious.push_back(model.variables[static_cast<std::size_t>(v)].name);
  p.features = ds.x_names;
  p.z_vars = {"index"};
  return p;
}

OracleProblem with_z(OracleProblem problem, std::vector<std::string> z_vars) {
  for (const auto& z : z_vars) problem.table.axis(z);
  problem.z_vars = std::move(z_vars);
  return problem;
}

OracleProblem with_independent_z(OracleProblem problem, int card) {
  if (card < 1) throw ConfigError("cardinality must be positive");
  const JointTable& t = problem.table;
  std::vector<std::string> names = t.names();
  std::vector<int> cards = t.cards();
  names.push_back("noise");
  cards.push_back(card);
  JointTable out(names, cards);
  for (std::size_t i = 0; i < t.size(); ++i)
    for (int c = 0; c < card; ++c) out[i * static_cast<std::size_t>(card) + static_cast<std::size_t>(c)] = t[i] / card;
  problem.table = std::move(out);
  problem.z_vars = {"noise"};
  return problem;
}

}  // namespace zin::theory
