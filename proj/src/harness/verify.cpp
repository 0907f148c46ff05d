#include "zin/harness/verify.hpp"

#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>

#include "zin/common/errors.hpp"
#include "zin/scm/discrete_scm.hpp"
#include "zin/scm/samplers.hpp"
#include "zin/theory/counterpart.hpp"
#include "zin/theory/linear.hpp"
#include "zin/theory/oracle.hpp"

namespace zin::harness {

namespace {

using scm::JointTable;
using namespace zin::theory;

constexpr double kExactTol = 1e-12;

std::string g(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string names(const std::vector<std::string>& v) {
  std::string out = "{";
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + v[i];
  return out + "}";
}

JointTable random_table(std::mt19937_64& rng) {
  JointTable t({"V", "S", "Y"}, {3, 3, 2});
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double s = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) s += t[i] = u(rng);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] /= s;
  return t;
}

double window_lambda(const OracleProblem& p) { return 2.0 * mask_oracle(p, 0.0, 2).lambda_lo; }

const MaskEntry* invariant_entry(const OracleReport& r, const OracleProblem& p) {
  for (const auto& m : r.masks)
    if (m.names == p.invariant) return &m;
  return nullptr;
}

void impossibility(VerifyReport& rep) {
  const JointTable ref = scm::counterexample_joint();
  const double da = scm::max_abs_diff(scm::enumerate_joint(scm::build_scm_A()), ref);
  const double db = scm::max_abs_diff(scm::enumerate_joint(scm::build_scm_B()), ref);
  rep.checks.push_back({"impossibility", "impossibility", da <= kExactTol && db <= kExactTol,
                        "counterexample = SCM-A = SCM-B joints, max |diff| " + g(std::max(da, db))});
  double worst = scm::max_abs_diff(scm::enumerate_joint(construct_counterpart(ref, "X1", "X2", "Y")), ref);
  std::mt19937_64 rng(99);
  for (int rep_i = 0; rep_i < 100; ++rep_i) {
    const JointTable t = random_table(rng);
    worst = std::max(worst, scm::max_abs_diff(scm::enumerate_joint(construct_counterpart(t, "V", "S", "Y")), t));
  }
  rep.checks.push_back({"impossibility", "counterpart", worst <= kExactTol,
                        "role-swapped SCM reproduces the counterexample and 100 random joints, max |diff| " + g(worst)});
}

void identifiability(VerifyReport& rep) {
  struct Case {
    const char* label;
    scm::DiscreteScm model;
    std::string expect;
  };
  for (const Case& c : {Case{"SCM-A", scm::build_scm_A(), "X1"}, Case{"SCM-B", scm::build_scm_B(), "X2"}}) {
    const OracleProblem p = problem_from_scm(c.model);
    const OracleReport r = mask_oracle(p, window_lambda(p), 2);
    const bool ok = r.lambda_in_window() && r.argmin_is_invariant && r.best().names == std::vector{c.expect};
    rep.checks.push_back({"identifiability", std::string("identifiability ") + c.label, ok,
                          "Z = E, K = 2, lambda = " + g(r.lambda) + " in [" + g(r.lambda_lo) + ", " +
                              g(r.lambda_hi) + "], argmin = " + names(r.best().names)});
    const ConditionVerdict c1 = check_condition1(p, 2);
    const ConditionVerdict c2 = check_condition2(p, 2);
    rep.checks.push_back({"identifiability", std::string("conditions ") + c.label, c1.holds && c2.holds,
                          "Condition 1 " + std::string(c1.holds ? "holds" : "VIOLATED") + " (gap " + g(c1.gap) +
                              "), Condition 2 " + (c2.holds ? "holds" : "VIOLATED") + " (C = " + g(c2.gap) + ")"});
  }
}

void necessity(VerifyReport& rep) {
  const OracleProblem base = problem_from_scm(scm::build_scm_A());
  const double lambda = window_lambda(base);
  struct Case {
    std::string label;
    OracleProblem problem;
  };
  const std::vector<Case> cases = {{"Z=h(Y)", with_z(base, {"Y"})},
                                   {"Z=(X,Y)", with_z(base, {"X1", "X2", "Y"})},
                                   {"Z=sample index", sample_index_problem(scm::build_scm_A(), 16, 4)}};
  for (const auto& c : cases) {
    const OracleReport r = mask_oracle(c.problem, lambda, 2);
    const MaskEntry* inv = invariant_entry(r, c.problem);
    std::ostringstream os;
    os << "Condition 1 " << (r.condition1.holds ? "holds" : "VIOLATED") << " (C′ = " << g(r.c_prime);
    if (inv) os << ", witness " << inv->witness.to_string();
    os << "), argmin = " << names(r.best().names) << " at lambda " << g(lambda);
    rep.checks.push_back({"necessity", c.label, !r.argmin_is_invariant, os.str()});
  }
}

void linear(VerifyReport& rep) {
  const scm::LinearScmSpec spec = scm::random_linear_spec(2, 2, 6, 100000, 0);
  const data::Dataset ds = scm::sample_linear(spec);
  LinearZinConfig cfg;
  cfg.r = 2;
  LinearZinResult r = train_linear_zin(ds, cfg);
  score_against_truth(r, spec);
  double worst = 0.0;
  for (double v : r.env_residuals) worst = std::max(worst, v);
  const bool ok = r.general_position.holds && r.predictor_error < 1e-2 && worst < 1e-6 && !r.env_residuals.empty();
  rep.checks.push_back({"linear", "linear", ok,
                        "d = 4, K = " + std::to_string(r.num_groups) + ", general position " +
                            (r.general_position.holds ? "holds" : "fails") + ", max normal-equation residual " +
                            g(worst) + ", predictor error " + g(r.predictor_error)});
}

}  // namespace

bool VerifyReport::all_pass() const {
  for (const auto& c : checks)
    if (!c.pass) return false;
  return true;
}

std::vector<std::string> VerifyReport::failures() const {
  std::vector<std::string> out;
  for (const auto& c : checks)
    if (!c.pass) out.push_back(c.name);
  return out;
}

std::string VerifyReport::render() const {
  std::ostringstream os;
  std::string block;
  for (const auto& c : checks) {
    if (c.block != block) {
      if (!block.empty()) os << '\n';
      os << "[" << c.block << "]\n";
      block = c.block;
    }
    os << c.name << ": " << (c.pass ? "PASS" : "FAIL") << " (" << c.detail << ")\n";
  }
  return os.str();
}

nlohmann::json VerifyReport::to_json() const {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& c : checks)
    out.push_back({{"block", c.block}, {"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
  return out;
}

VerifyReport run_verify() {
  VerifyReport rep;
  auto guarded = [&](const char* block, void (*fn)(VerifyReport&)) {
    try {
      fn(rep);
    } catch (const Error& e) {
      rep.checks.push_back({block, block, false, std::string("error: ") + e.what()});
    }
  };
  guarded("impossibility", impossibility);
  guarded("identifiability", identifiability);
  guarded("necessity", necessity);
  guarded("linear", linear);
  return rep;
}

}  // namespace zin::harness
