#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "zin/autodiff/mlp.hpp"
#include "zin/common/errors.hpp"
#include "zin/harness/experiment.hpp"
#include "zin/harness/suites.hpp"
#include "zin/invariance/invariance.hpp"
#include "zin/scm/discrete_scm.hpp"
#include "zin/scm/samplers.hpp"
#include "zin/theory/counterpart.hpp"
#include "zin/theory/entropy.hpp"
#include "zin/theory/linear.hpp"
#include "zin/theory/oracle.hpp"

using namespace zin;
using harness::json;

namespace {

// Tolerances and limits.
constexpr double kExactTol = 1e-12;
constexpr double kFdTol = 1e-5;
constexpr double kFdStep = 1e-5;
constexpr double kPoint = 0.01;
constexpr double kTemporalGap = 3 * kPoint;
constexpr double kErmDrop = 15 * kPoint;
constexpr double kSpatialSlack = 2 * kPoint;
constexpr double kAblationNear = 3 * kPoint;
constexpr double kAblationFar = 25 * kPoint;
constexpr double kFeatureNear = 5 * kPoint;
constexpr double kCollapse = 0.5;
constexpr double kLinearPredictorTol = 1e-2;
constexpr double kLinearResidualTol = 1e-6;
constexpr double kUnityTol = 1e-10;
constexpr double kCmnistBayes = 0.75;
constexpr double kMcolorBayes = 0.85;
const std::vector<std::uint64_t> kSeeds = {0, 1, 2, 3, 4};

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * v);
  return buf;
}

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

// Every accuracy evaluation seen by the benchmark criteria, for the worst <= mean check.
std::vector<std::pair<double, double>> g_accuracy_results;

std::vector<json> run_cells(const std::vector<harness::RunConfig>& configs) {
  harness::ExecOptions opt;
  opt.on_record = [](const json& r) {
    std::cerr << "  " << r["experiment"].get<std::string>() << " " << r["setting"].get<std::string>() << " "
              << r["method"].get<std::string>() << " seed " << r["seed"].get<std::uint64_t>() << ": ";
    if (r["status"] == "ok") {
      std::cerr << "worst " << pct(r["test"]["worst"].get<double>()) << " mean "
                << pct(r["test"]["mean"].get<double>()) << " (" << r["wall_seconds"].get<double>() << " s)\n";
    } else {
      std::cerr << "failed: " << r["error"].get<std::string>() << "\n";
    }
  };
  std::vector<json> records = harness::execute(configs, opt);
  for (const auto& r : records) {
    if (r["status"] != "ok") throw Error("run failed: " + r["error"].get<std::string>());
    if (r["metric"] == "accuracy") {
      g_accuracy_results.emplace_back(r["test"]["worst"].get<double>(), r["test"]["mean"].get<double>());
      g_accuracy_results.emplace_back(r["train"]["worst"].get<double>(), r["train"]["mean"].get<double>());
    }
  }
  return records;
}

// Seed-averaged test metric per (setting, method).
std::map<std::pair<std::string, std::string>, std::pair<double, double>> averages(const std::vector<json>& records) {
  std::map<std::pair<std::string, std::string>, std::pair<double, double>> sum;
  std::map<std::pair<std::string, std::string>, int> count;
  for (const auto& r : records) {
    const auto key = std::make_pair(r["setting"].get<std::string>(), r["method"].get<std::string>());
    sum[key].first += r["test"]["worst"].get<double>();
    sum[key].second += r["test"]["mean"].get<double>();
    ++count[key];
  }
  for (auto& [key, v] : sum) {
    v.first /= count[key];
    v.second /= count[key];
  }
  return sum;
}

void require(Outcome& o, bool ok, const std::string& what) {
  if (!ok) o.pass = false;
  if (!o.detail.empty()) o.detail += "; ";
  o.detail += what + (ok ? "" : " [violated]");
}

scm::JointTable random_table(std::mt19937_64& rng) {
  scm::JointTable t({"V", "S", "Y"}, {3, 3, 2});
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double s = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) s += t[i] = u(rng);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] /= s;
  return t;
}

Outcome impossibility() {
  Outcome o;
  const scm::JointTable ref = scm::counterexample_joint();
  const double da = scm::max_abs_diff(scm::enumerate_joint(scm::build_scm_A()), ref);
  const double db = scm::max_abs_diff(scm::enumerate_joint(scm::build_scm_B()), ref);
  require(o, da <= kExactTol && db <= kExactTol, "SCM-A/SCM-B vs counterexample max diff " + sci(std::max(da, db)));
  std::mt19937_64 rng(99);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const scm::JointTable t = random_table(rng);
    worst = std::max(worst, scm::max_abs_diff(scm::enumerate_joint(theory::construct_counterpart(t, "V", "S", "Y")), t));
  }
  require(o, worst <= kExactTol, "counterpart over 100 random joints max diff " + sci(worst));
  return o;
}

Outcome identifiability() {
  using namespace theory;
  Outcome o;
  auto window = [](const OracleProblem& p) { return 2.0 * mask_oracle(p, 0.0, 2).lambda_lo; };
  const OracleProblem a = problem_from_scm(scm::build_scm_A());
  const OracleProblem b = problem_from_scm(scm::build_scm_B());
  const OracleReport ra = mask_oracle(a, window(a), 2);
  const OracleReport rb = mask_oracle(b, window(b), 2);
  require(o, ra.lambda_in_window() && ra.best().names == std::vector<std::string>{"X1"},
          "SCM-A argmin {X1} at lambda " + sci(ra.lambda));
  require(o, rb.lambda_in_window() && rb.best().names == std::vector<std::string>{"X2"},
          "SCM-B argmin {X2} at lambda " + sci(rb.lambda));
  const double lambda = ra.lambda;
  const std::vector<std::pair<std::string, OracleProblem>> swaps = {
      {"Z=Y", with_z(a, {"Y"})},
      {"Z=(X,Y)", with_z(a, {"X1", "X2", "Y"})},
      {"Z=sample index", sample_index_problem(scm::build_scm_A(), 16, 4)}};
  for (const auto& [name, p] : swaps) {
    const OracleReport r = mask_oracle(p, lambda, 2);
    require(o, !r.argmin_is_invariant, name + " flips argmin");
  }
  return o;
}

Outcome gradients() {
  Outcome o;
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_int_distribution<int> width(2, 8);
  double worst = 0.0;
  int models = 0;
  for (int m = 0; m < 20; ++m) {
    const std::size_t in = static_cast<std::size_t>(width(rng));
    std::vector<std::size_t> widths = {in};
    for (int h = 0, depth = m % 3; h < depth; ++h) widths.push_back(static_cast<std::size_t>(width(rng)));
    widths.push_back(1);
    const ad::Mlp model(widths, m % 2 ? ad::Activation::kTanh : ad::Activation::kRelu, rng);
    const std::size_t n = 12;
    ad::Tensor x(n, in), y_sq(n, 1), y_ce(n, 1);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < in; ++j) x(i, j) = g(rng);
      y_sq(i, 0) = g(rng);
      y_ce(i, 0) = g(rng) > 0 ? 1.0 : 0.0;
    }
    worst = std::max(worst, ad::finite_diff_check(model, x, y_sq, ad::LossKind::kSquared, kFdStep));
    worst = std::max(worst, ad::finite_diff_check(model, x, y_ce, ad::LossKind::kCrossEntropy, kFdStep));
    ++models;
  }
  require(o, worst < kFdTol, std::to_string(models) + " models x 2 losses, max relative error " + sci(worst));
  return o;
}

Outcome temporal() {
  Outcome o;
  harness::RunConfig c = harness::temporal_config({0.999, 0.7}, 0.9);
  c.methods = {inv::Method::kErm, inv::Method::kZin, inv::Method::kIrmOracle};
  c.seeds = kSeeds;
  const auto avg = averages(run_cells({c}));
  const double bayes = scm::bayes_invariant_accuracy(0.9);
  const auto zin = avg.at({c.setting, "zin"}), irm = avg.at({c.setting, "irm_oracle"}), erm = avg.at({c.setting, "erm"});
  require(o, std::abs(zin.first - irm.first) <= kTemporalGap,
          "(a) ZIN worst " + pct(zin.first) + " vs IRM worst " + pct(irm.first));
  require(o, std::abs(zin.first - bayes) <= kTemporalGap && std::abs(irm.first - bayes) <= kTemporalGap,
          "(b) Bayes-invariant " + pct(bayes));
  require(o, erm.second - erm.first >= kErmDrop, "(c) ERM mean " + pct(erm.second) + " worst " + pct(erm.first));
  require(o, zin.first - erm.first >= kErmDrop, "(d) ZIN worst minus ERM worst " + pct(zin.first - erm.first));
  return o;
}

Outcome spatial() {
  Outcome o;
  harness::RunConfig c = harness::spatial_config({0.999, 0.999, 0.7, 0.7}, 0.9);
  c.methods = {inv::Method::kZin, inv::Method::kIrmOracle};
  c.seeds = kSeeds;
  const auto avg = averages(run_cells({c}));
  const auto zin = avg.at({c.setting, "zin"}), irm = avg.at({c.setting, "irm_oracle"});
  require(o, zin.first >= irm.first - kSpatialSlack,
          "ZIN worst " + pct(zin.first) + " vs IRM worst " + pct(irm.first));
  return o;
}

Outcome ablation_z() {
  Outcome o;
  std::vector<harness::RunConfig> configs;
  for (const char* z : {"r", "r2", "r1", "X", "(X,Y)"}) {
    configs.push_back(harness::ablation_z_config(z));
    configs.back().seeds = kSeeds;
  }
  const auto avg = averages(run_cells(configs));
  const double bayes = scm::bayes_invariant_accuracy(0.8);
  for (const char* z : {"r", "r2"}) {
    const double w = avg.at({std::string("Z=") + z, "zin"}).first;
    require(o, std::abs(w - bayes) <= kAblationNear, std::string("Z=") + z + " worst " + pct(w));
  }
  for (const char* z : {"r1", "X", "(X,Y)"}) {
    const double w = avg.at({std::string("Z=") + z, "zin"}).first;
    require(o, bayes - w >= kAblationFar, std::string("Z=") + z + " worst " + pct(w));
  }
  o.detail += "; Bayes-invariant " + pct(bayes);
  return o;
}

Outcome feature_level() {
  Outcome o;
  std::vector<harness::RunConfig> configs = {harness::feature_level_config(harness::SourceKind::kCmnist),
                                             harness::feature_level_config(harness::SourceKind::kMcolor)};
  for (auto& c : configs) c.seeds = kSeeds;
  const auto avg = averages(run_cells(configs));
  const double irm_c = avg.at({"cmnist", "irm_oracle"}).first, irm_m = avg.at({"mcolor", "irm_oracle"}).first;
  const double eiil_c = avg.at({"cmnist", "eiil"}).first, eiil_m = avg.at({"mcolor", "eiil"}).first;
  const double erm_c = avg.at({"cmnist", "erm"}).first;
  require(o, std::abs(irm_c - kCmnistBayes) <= kFeatureNear, "IRM CMNIST " + pct(irm_c));
  require(o, std::abs(irm_m - kMcolorBayes) <= kFeatureNear, "IRM MCOLOR " + pct(irm_m));
  require(o, std::abs(eiil_c - kCmnistBayes) <= kFeatureNear, "EIIL CMNIST " + pct(eiil_c));
  require(o, eiil_m < kCollapse, "EIIL MCOLOR " + pct(eiil_m));
  require(o, erm_c < kCollapse, "ERM CMNIST " + pct(erm_c));
  return o;
}

Outcome linear() {
  Outcome o;
  const scm::LinearScmSpec spec = scm::random_linear_spec(2, 2, 6, 100000, 0);
  const data::Dataset ds = scm::sample_linear(spec);
  theory::LinearZinConfig cfg;
  cfg.r = 2;
  theory::LinearZinResult r = theory::train_linear_zin(ds, cfg);
  theory::score_against_truth(r, spec);
  double res = 0.0;
  for (double v : r.env_residuals) res = std::max(res, v);
  const std::size_t d = ds.feature_dim();
  require(o, r.num_groups == d + 2 && r.general_position.holds,
          "d = " + std::to_string(d) + ", K = " + std::to_string(r.num_groups) + ", general position");
  require(o, r.predictor_error < kLinearPredictorTol, "predictor error " + sci(r.predictor_error));
  require(o, !r.env_residuals.empty() && res < kLinearResidualTol, "max normal-equation residual " + sci(res));
  return o;
}

Outcome reductions() {
  Outcome o;
  const data::Dataset ds = scm::sample_temporal(scm::TemporalSpec::two_env(0.999, 0.7, 0.9, 400, 7));
  inv::TrainConfig cfg;
  cfg.epochs = 60;
  cfg.anneal_epochs = 30;
  cfg.rho_warmup = 0;
  cfg.hidden = {8};
  cfg.lambda = 0.0;
  cfg.seed = 3;
  const inv::RunResult zin = inv::train_zin(ds, cfg);
  const inv::RunResult erm = inv::train_erm(ds, cfg);
  bool same = zin.model.parameters().size() == erm.model.parameters().size();
  for (std::size_t p = 0; same && p < zin.model.parameters().size(); ++p) {
    const auto a = zin.model.parameters()[p].values(), b = erm.model.parameters()[p].values();
    same = std::equal(a.begin(), a.end(), b.begin(), b.end());
  }
  require(o, same, "lambda = 0 ZIN equals ERM bit for bit");
  std::vector<data::Dataset> tests;
  for (double ps : {0.999, 0.5, 0.1}) tests.push_back(scm::sample_fixed_ps(0.9, ps, 0.5, 1000, 70 + tests.size()));
  for (const inv::RunResult* r : {&zin, &erm}) {
    const inv::Evaluation ev = inv::evaluate(r->model, tests, ad::LossKind::kCrossEntropy);
    g_accuracy_results.emplace_back(ev.worst, ev.mean);
    g_accuracy_results.emplace_back(r->train.worst, r->train.mean);
  }

  std::mt19937_64 rng(5);
  const ad::Mlp model({2, 6, 1}, ad::Activation::kRelu, rng);
  const inv::PartitionModel rho(ds.z, 4, {5}, ad::Activation::kTanh, rng);
  const ad::Tensor w = rho.weights(ds.z);
  const std::vector<double> ones(ds.size(), 1.0);
  const double full = inv::weighted_risk(model, ds, ones, ad::LossKind::kCrossEntropy);
  double sum = 0.0;
  std::vector<double> col(ds.size());
  for (std::size_t k = 0; k < 4; ++k) {
    for (std::size_t i = 0; i < ds.size(); ++i) col[i] = w(i, k);
    sum += inv::weighted_risk(model, ds, col, ad::LossKind::kCrossEntropy);
  }
  require(o, std::abs(sum - full) <= kUnityTol, "partition-of-unity gap " + sci(std::abs(sum - full)));

  const theory::OracleProblem p = theory::problem_from_scm(scm::build_scm_A());
  double k1 = 0.0;
  for (const std::vector<std::string>& mask :
       {std::vector<std::string>{"X1"}, std::vector<std::string>{"X2"}, std::vector<std::string>{"X1", "X2"}})
    k1 = std::max(k1, theory::max_penalty(p.table, p.target, mask, p.z_vars, 1).value);
  require(o, k1 == 0.0, "K = 1 oracle penalty " + sci(k1));

  std::size_t bad = 0;
  for (const auto& [worst, mean] : g_accuracy_results) bad += worst > mean;
  require(o, bad == 0,
          "worst <= mean on " + std::to_string(g_accuracy_results.size()) + " accuracy results");
  return o;
}

struct Criterion {
  int id;
  const char* name;
  double limit_seconds;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> only;
  for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));
  const std::vector<Criterion> criteria = {
      {1, "impossibility", 1.0, impossibility},
      {2, "identifiability oracle", 1.0, identifiability},
      {3, "gradient correctness", 10.0, gradients},
      {4, "temporal benchmark", 600.0, temporal},
      {5, "spatial benchmark", 600.0, spatial},
      {6, "ablation on Z", 0.0, ablation_z},
      {7, "feature-level MCOLOR/CMNIST", 0.0, feature_level},
      {8, "linear case", 60.0, linear},
      {9, "reductions and identities", 0.0, reductions},
  };
  std::vector<std::string> lines;
  int failed = 0;
  std::size_t ran = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    ++ran;
    std::cerr << "criterion " << c.id << ": " << c.name << "\n";
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("error: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::ostringstream time;
    time.precision(3);
    time << secs << " s";
    if (c.limit_seconds > 0) {
      time << " (limit " << c.limit_seconds << " s)";
      if (secs >= c.limit_seconds) o.pass = false;
    }
    std::ostringstream line;
    line << "criterion " << c.id << " " << c.name << ": " << (o.pass ? "PASS" : "FAIL") << " (" << o.detail << "; "
         << time.str() << ")";
    lines.push_back(line.str());
    std::cout << line.str() << std::endl;
    failed += !o.pass;
  }
  std::cout << "\nsummary\n";
  for (const auto& l : lines) std::cout << l << "\n";
  std::cout << (ran - failed) << " of " << ran << " criteria passed\n";
  return failed ? 1 : 0;
}
