#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "zin/common/errors.hpp"
#include "zin/invariance/invariance.hpp"
#include "zin/scm/samplers.hpp"

namespace zin::inv {
namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Linear model on identity inputs so the output of sample i is logits[i].
struct FixedOutputs {
  Mlp model;
  Dataset ds;
};

FixedOutputs fixed_outputs(const std::vector<double>& logits, const std::vector<double>& targets) {
  const std::size_t n = logits.size();
  FixedOutputs f;
  f.model = Mlp({Tensor(n, 1, logits), Tensor(1, 1)}, ad::Activation::kRelu);
  f.ds.x = Tensor::identity(n);
  f.ds.y = Tensor::column(targets);
  f.ds.z = Tensor(n, 0);
  return f;
}

Dataset small_temporal(std::size_t n, std::uint64_t seed) {
  return scm::sample_temporal(scm::TemporalSpec::two_env(0.999, 0.7, 0.9, n, seed));
}

TrainConfig quick_config(long epochs) {
  TrainConfig cfg;
  cfg.epochs = epochs;
  cfg.anneal_epochs = epochs / 2;
  cfg.rho_warmup = 0;
  cfg.hidden = {8};
  cfg.rho_hidden = {8};
  cfg.eiil_steps = 200;
  cfg.log_every = 1;
  return cfg;
}

TEST(MethodTest, ParseRoundTrip) {
  for (Method m : {Method::kErm, Method::kIrmOracle, Method::kGroupDro, Method::kEiil, Method::kZin})
    EXPECT_EQ(parse_method(to_string(m)), m);
  EXPECT_EQ(parse_method("irm"), Method::kIrmOracle);
  EXPECT_THROW(parse_method("hrm"), ConfigError);
}

TEST(ConfigTest, RejectsBadValues) {
  TrainConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.k = 1;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = TrainConfig{};
  cfg.anneal_epochs = cfg.epochs + 1;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = TrainConfig{};
  cfg.lambda = -1.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = TrainConfig{};
  cfg.rho_restarts = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(WeightedRiskTest, OnesGiveErmRisk) {
  const Dataset ds = small_temporal(300, 1);
  std::mt19937_64 rng(2);
  const Mlp model({2, 6, 1}, ad::Activation::kTanh, rng);
  const std::vector<double> ones(ds.size(), 1.0), zeros(ds.size(), 0.0);
  EXPECT_NEAR(weighted_risk(model, ds, ones, LossKind::kCrossEntropy),
              ad::loss(model.forward(ds.x), ds.y, LossKind::kCrossEntropy), 1e-12);
  EXPECT_EQ(weighted_risk(model, ds, zeros, LossKind::kCrossEntropy), 0.0);
}

TEST(WeightedRiskTest, PartitionOfUnity) {
  const Dataset ds = small_temporal(400, 3);
  std::mt19937_64 rng(4);
  const Mlp model({2, 6, 1}, ad::Activation::kRelu, rng);
  const PartitionModel rho(ds.z, 3, {5}, ad::Activation::kTanh, rng);
  const Tensor w = rho.weights(ds.z);
  const std::vector<double> ones(ds.size(), 1.0);
  const double full = weighted_risk(model, ds, ones, LossKind::kCrossEntropy);
  double sum = 0.0;
  std::vector<double> col(ds.size());
  for (std::size_t k = 0; k < 3; ++k) {
    for (std::size_t i = 0; i < ds.size(); ++i) col[i] = w(i, k);
    sum += weighted_risk(model, ds, col, LossKind::kCrossEntropy);
  }
  EXPECT_NEAR(sum, full, 1e-10);

  double hard = 0.0;
  for (int e = 0; e < 2; ++e) {
    for (std::size_t i = 0; i < ds.size(); ++i) col[i] = ds.env[i] == e ? 1.0 : 0.0;
    hard += weighted_risk(model, ds, col, LossKind::kCrossEntropy);
  }
  EXPECT_NEAR(hard, full, 1e-10);
}

TEST(WeightedRiskTest, NegativeWeightThrows) {
  const auto f = fixed_outputs({0.5, -0.5}, {1, 0});
  EXPECT_THROW(weighted_risk(f.model, f.ds, std::vector<double>{1.0, -0.1}, LossKind::kCrossEntropy), DomainError);
  EXPECT_THROW(weighted_risk(f.model, f.ds, std::vector<double>{1.0}, LossKind::kCrossEntropy), DimensionError);
}

TEST(PartitionModelTest, RowsOnSimplex) {
  const Dataset ds = scm::sample_spatial(scm::SpatialSpec::four_blocks({0.9, 0.8, 0.7, 0.6}, 0.9, 200, 5));
  std::mt19937_64 rng(6);
  const PartitionModel rho(ds.z, 4, {7}, ad::Activation::kRelu, rng);
  const Tensor w = rho.weights(ds.z);
  ASSERT_EQ(w.cols(), 4u);
  for (std::size_t i = 0; i < w.rows(); ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < 4; ++k) {
      EXPECT_GE(w(i, k), 0.0);
      s += w(i, k);
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
  EXPECT_EQ(rho.assign(ds.z).size(), ds.size());
}

TEST(PartitionModelTest, NeedsAuxiliaryColumns) {
  std::mt19937_64 rng(0);
  EXPECT_THROW(PartitionModel(Tensor(5, 0), 2, {4}, ad::Activation::kRelu, rng), ConfigError);
}

TEST(IrmPenaltyTest, TwoSampleClosedForm) {
  const auto f = fixed_outputs({1.0, -1.0}, {1.0, 0.0});
  const double g1 = (sigmoid(1.0) - 1.0) * 1.0;
  const double g2 = (sigmoid(-1.0) - 0.0) * -1.0;
  const double expected = std::pow((g1 + g2) / 2.0, 2);
  const std::vector<double> ones{1.0, 1.0};
  EXPECT_NEAR(irm_penalty(f.model, f.ds, ones, LossKind::kCrossEntropy).value, expected, 1e-15);
  EXPECT_NEAR(expected, 0.0723295, 1e-6);
}

TEST(IrmPenaltyTest, ZeroWeightsGiveZero) {
  const auto f = fixed_outputs({2.0, -0.3, 0.7}, {1, 1, 0});
  const std::vector<double> zeros(3, 0.0);
  const PenaltyValue p = irm_penalty(f.model, f.ds, zeros, LossKind::kCrossEntropy, true);
  EXPECT_EQ(p.value, 0.0);
  for (double g : p.output_grad.values()) EXPECT_EQ(g, 0.0);
}

TEST(IrmPenaltyTest, NonNegativeOnRandomInputs) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> unit;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> logits(6), targets(6), w(6);
    for (int i = 0; i < 6; ++i) {
      logits[i] = 3.0 * gauss(rng);
      targets[i] = unit(rng) < 0.5 ? 0.0 : 1.0;
      w[i] = unit(rng);
    }
    const auto f = fixed_outputs(logits, targets);
    EXPECT_GE(irm_penalty(f.model, f.ds, w, LossKind::kCrossEntropy).value, 0.0);
  }
}

class IrmPenaltyGradTest : public ::testing::TestWithParam<LossKind> {};

TEST_P(IrmPenaltyGradTest, OutputGradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> unit;
  const std::size_t n = 7;
  std::vector<double> logits(n), targets(n), w(n);
  for (std::size_t i = 0; i < n; ++i) {
    logits[i] = gauss(rng);
    targets[i] = GetParam() == LossKind::kCrossEntropy ? (unit(rng) < 0.5 ? 0.0 : 1.0) : gauss(rng);
    w[i] = unit(rng);
  }
  auto f = fixed_outputs(logits, targets);
  const PenaltyValue p = irm_penalty(f.model, f.ds, w, GetParam(), true);
  ASSERT_EQ(p.output_grad.rows(), n);
  const double h = 1e-6;
  for (std::size_t i = 0; i < n; ++i) {
    auto up = fixed_outputs(logits, targets);
    auto down = fixed_outputs(logits, targets);
    up.model.parameters()[0][i] += h;
    down.model.parameters()[0][i] -= h;
    const double fd = (irm_penalty(up.model, up.ds, w, GetParam()).value -
                       irm_penalty(down.model, down.ds, w, GetParam()).value) / (2.0 * h);
    EXPECT_NEAR(p.output_grad[i], fd, 1e-7 + 1e-5 * std::abs(fd));
  }
}

INSTANTIATE_TEST_SUITE_P(Losses, IrmPenaltyGradTest,
                         ::testing::Values(LossKind::kCrossEntropy, LossKind::kSquared));

TEST(IrmPenaltyTest, CalibratedModelHasSmallPenalty) {
  const Dataset ds = scm::sample_fixed_ps(0.9, 0.9, 0.5, 400, 10);
  TrainConfig cfg = quick_config(1500);
  cfg.lr = 1e-2;
  const RunResult r = train_erm(ds, cfg);
  const std::vector<double> ones(ds.size(), 1.0);
  EXPECT_LT(irm_penalty(r.model, ds, ones, LossKind::kCrossEntropy).value, 1e-4);
}

TEST(ZinObjectiveTest, LambdaZeroIsRisk) {
  const Dataset ds = small_temporal(200, 11);
  std::mt19937_64 rng(12);
  const Mlp model({2, 4, 1}, ad::Activation::kRelu, rng);
  const PartitionModel rho(ds.z, 2, {4}, ad::Activation::kRelu, rng);
  const std::vector<double> ones(ds.size(), 1.0);
  EXPECT_DOUBLE_EQ(zin_objective(model, rho, ds, 0.0, LossKind::kCrossEntropy),
                   weighted_risk(model, ds, ones, LossKind::kCrossEntropy));
}

TEST(ZinObjectiveTest, UniformPartitionScaling) {
  const Dataset ds = small_temporal(200, 13);
  std::mt19937_64 rng(14);
  const Mlp model({2, 4, 1}, ad::Activation::kRelu, rng);
  for (int k : {1, 2, 3}) {
    PartitionModel rho(ds.z, k, {4}, ad::Activation::kRelu, rng);
    auto& params = rho.net().parameters();
    for (double& v : params[params.size() - 2].values()) v = 0.0;
    for (double& v : params.back().values()) v = 0.0;
    const std::vector<double> ones(ds.size(), 1.0);
    const std::vector<double> share(ds.size(), 1.0 / k);
    const double risk = weighted_risk(model, ds, ones, LossKind::kCrossEntropy);
    const double full = irm_penalty(model, ds, ones, LossKind::kCrossEntropy).value;
    const double each = irm_penalty(model, ds, share, LossKind::kCrossEntropy).value;
    const double lambda = 7.0;
    const double obj = zin_objective(model, rho, ds, lambda, LossKind::kCrossEntropy);
    EXPECT_NEAR(obj, risk + lambda * k * each, 1e-12);
    EXPECT_NEAR(obj, risk + lambda * full / k, 1e-12);
  }
}

TEST(ZinObjectiveTest, NoAuxiliaryThrows) {
  Dataset ds = small_temporal(50, 15);
  std::mt19937_64 rng(16);
  const Mlp model({2, 4, 1}, ad::Activation::kRelu, rng);
  const PartitionModel rho(ds.z, 2, {4}, ad::Activation::kRelu, rng);
  ds.z = Tensor(ds.size(), 0);
  ds.z_names.clear();
  EXPECT_THROW(zin_objective(model, rho, ds, 1.0, LossKind::kCrossEntropy), ConfigError);
  EXPECT_THROW(train_zin(ds, quick_config(4)), ConfigError);
}

TEST(TrainTest, ZinWithZeroLambdaMatchesErmExactly) {
  const Dataset ds = small_temporal(300, 17);
  TrainConfig cfg = quick_config(60);
  cfg.lambda = 0.0;
  cfg.seed = 3;
  const RunResult erm = train_erm(ds, cfg);
  const RunResult zin = train_zin(ds, cfg);
  ASSERT_EQ(erm.model.parameters().size(), zin.model.parameters().size());
  for (std::size_t p = 0; p < erm.model.parameters().size(); ++p) {
    const auto a = erm.model.parameters()[p].values();
    const auto b = zin.model.parameters()[p].values();
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i], b[i]);
  }
  ASSERT_EQ(erm.history.size(), zin.history.size());
  for (std::size_t i = 0; i < erm.history.size(); ++i) EXPECT_EQ(erm.history[i].risk, zin.history[i].risk);
}

TEST(TrainTest, DeterministicUnderSeed) {
  const Dataset ds = small_temporal(200, 18);
  const TrainConfig cfg = quick_config(40);
  const RunResult a = train_zin(ds, cfg);
  const RunResult b = train_zin(ds, cfg);
  EXPECT_EQ(a.model.parameters().back()[0], b.model.parameters().back()[0]);
  EXPECT_EQ(a.inferred_env, b.inferred_env);
}

TEST(TrainTest, AdversaryStepsMostlyIncreasePenalty) {
  const Dataset ds = small_temporal(400, 19);
  TrainConfig cfg = quick_config(300);
  cfg.anneal_epochs = 300;
  cfg.rho_lr = 1e-4;
  cfg.track_adversary = true;
  const RunResult r = train_zin(ds, cfg);
  ASSERT_EQ(r.adversary.size(), 300u);
  std::size_t up = 0;
  for (const auto& [before, after] : r.adversary)
    if (after >= before) ++up;
  EXPECT_GE(static_cast<double>(up) / static_cast<double>(r.adversary.size()), 0.8);
}

TEST(TrainTest, WarmupDelaysAdversary) {
  const Dataset ds = small_temporal(200, 20);
  TrainConfig cfg = quick_config(40);
  cfg.anneal_epochs = 40;
  cfg.rho_warmup = 15;
  cfg.track_adversary = true;
  EXPECT_EQ(train_zin(ds, cfg).adversary.size(), 25u);
}

TEST(TrainTest, ErmSeparatesSeparableData) {
  Dataset ds;
  const std::size_t n = 40;
  ds.x = Tensor(n, 1);
  ds.y = Tensor(n, 1);
  ds.z = Tensor(n, 0);
  ds.x_names = {"x"};
  for (std::size_t i = 0; i < n; ++i) {
    ds.x[i] = static_cast<double>(i) - 19.5;
    ds.y[i] = i >= n / 2 ? 1.0 : 0.0;
  }
  TrainConfig cfg = quick_config(500);
  cfg.lr = 1e-2;
  const RunResult r = train_erm(ds, cfg);
  EXPECT_DOUBLE_EQ(r.train.accuracy ? r.train.worst : 0.0, 1.0);
}

TEST(TrainTest, IrmNeedsEnvironments) {
  Dataset ds = small_temporal(50, 21);
  ds.env.clear();
  EXPECT_THROW(train_irm_oracle(ds, quick_config(4)), ConfigError);
  EXPECT_THROW(train_group_dro(ds, quick_config(4)), ConfigError);
  EXPECT_NO_THROW(train_eiil(ds, quick_config(4)));
}

TEST(TrainTest, DivergenceNamesEpoch) {
  Dataset ds = small_temporal(50, 22);
  for (double& v : ds.y.values()) v = 1e200;
  TrainConfig cfg = quick_config(4);
  cfg.loss = LossKind::kSquared;
  try {
    train_erm(ds, cfg);
    FAIL() << "expected TrainingError";
  } catch (const TrainingError& e) {
    EXPECT_EQ(e.epoch(), 0);
  }
}

TEST(GroupDroTest, IdenticalGroupsStayUniform) {
  const Dataset half = small_temporal(100, 23);
  Dataset a = half, b = half;
  std::fill(a.env.begin(), a.env.end(), 0);
  std::fill(b.env.begin(), b.env.end(), 1);
  const Dataset ds = data::concat({a, b});
  const RunResult r = train_group_dro(ds, quick_config(50));
  ASSERT_EQ(r.group_weights.size(), 2u);
  EXPECT_NEAR(r.group_weights[0], 0.5, 1e-6);
  EXPECT_NEAR(r.group_weights[1], 0.5, 1e-6);
}

TEST(GroupDroTest, HarderGroupGainsWeight) {
  Dataset a = small_temporal(100, 24);
  Dataset b = a;
  std::fill(a.env.begin(), a.env.end(), 0);
  std::fill(b.env.begin(), b.env.end(), 1);
  for (double& v : b.y.values()) v += 5.0;
  const Dataset ds = data::concat({a, b});
  TrainConfig cfg = quick_config(1);
  cfg.loss = LossKind::kSquared;
  double prev = 0.5;
  for (long epochs : {1L, 2L, 3L, 5L}) {
    cfg.epochs = epochs;
    cfg.anneal_epochs = 0;
    const RunResult r = train_group_dro(ds, cfg);
    EXPECT_GT(r.group_weights[1], prev);
    prev = r.group_weights[1];
  }
}

TEST(EiilTest, FourPointAssignmentsFollowResidualSign) {
  // g_i = (σ(f)-y)·f: samples 0 and 2 positive, 1 and 3 negative.
  const auto f = fixed_outputs({2.0, 1.5, -1.0, -2.5}, {0.0, 0.0, 0.0, 1.0});
  std::vector<double> g(4);
  for (std::size_t i = 0; i < 4; ++i) {
    const double z = f.model.parameters()[0][i];
    g[i] = (sigmoid(z) - f.ds.y[i]) * z;
  }
  double best = -1.0;
  int best_mask = 0;
  for (int mask = 0; mask < 16; ++mask) {
    double d0 = 0.0, d1 = 0.0;
    for (int i = 0; i < 4; ++i) ((mask >> i) & 1 ? d1 : d0) += g[i] / 4.0;
    if (d0 * d0 + d1 * d1 > best) best = d0 * d0 + d1 * d1, best_mask = mask;
  }

  TrainConfig cfg = quick_config(2);
  cfg.eiil_steps = 3000;
  cfg.eiil_lr = 0.05;
  const Tensor soft = infer_assignments(f.model, f.ds, cfg);
  int mask = 0;
  for (int i = 0; i < 4; ++i)
    if (soft(i, 1) > soft(i, 0)) mask |= 1 << i;
  EXPECT_TRUE(mask == best_mask || mask == (15 ^ best_mask));
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      if ((g[i] > 0) == (g[j] > 0)) {
        EXPECT_EQ((mask >> i) & 1, (mask >> j) & 1);
      }
}

TEST(EvaluateTest, ConstantHalfPredictorIsChance) {
  const auto f = fixed_outputs({0.0, 0.0, 0.0, 0.0}, {1, 0, 1, 0});
  Mlp zero({Tensor(4, 1), Tensor(1, 1)}, ad::Activation::kRelu);
  Dataset a = f.ds, b = f.ds;
  const Evaluation ev = evaluate(zero, {a, b}, LossKind::kCrossEntropy);
  ASSERT_EQ(ev.per_env.size(), 2u);
  EXPECT_DOUBLE_EQ(ev.per_env[0], 0.5);
  EXPECT_DOUBLE_EQ(ev.mean, 0.5);
  EXPECT_DOUBLE_EQ(ev.worst, 0.5);
}

TEST(EvaluateTest, AggregatesAndErrors) {
  const auto f = fixed_outputs({1.0, -1.0, 1.0, 1.0}, {1, 0, 0, 1});
  const Evaluation one = evaluate(f.model, {f.ds}, LossKind::kCrossEntropy);
  EXPECT_DOUBLE_EQ(one.mean, one.worst);
  EXPECT_DOUBLE_EQ(one.worst, 0.75);

  const Dataset good = f.ds.subset(std::vector<std::size_t>{0, 1});
  const Dataset bad = f.ds.subset(std::vector<std::size_t>{2, 3});
  const Evaluation acc = evaluate(f.model, {good, bad}, LossKind::kCrossEntropy);
  EXPECT_LE(acc.worst, acc.mean);
  const Evaluation mse = evaluate(f.model, {good, bad}, LossKind::kSquared);
  EXPECT_FALSE(mse.accuracy);
  EXPECT_GE(mse.worst, mse.mean);

  EXPECT_THROW(evaluate(f.model, {}, LossKind::kCrossEntropy), EvaluationError);
  EXPECT_THROW(evaluate(f.model, {f.ds.subset(std::vector<std::size_t>{})}, LossKind::kCrossEntropy),
               EvaluationError);
}

TEST(EvaluateTest, SplitByEnv) {
  const Dataset ds = small_temporal(100, 26);
  const auto parts = split_by_env(ds);
  ASSERT_EQ(parts.size(), 2u);
  EXPECT_EQ(parts[0].size() + parts[1].size(), ds.size());
}

TEST(TrainTest, AllMethodsSatisfyWorstBelowMean) {
  const Dataset ds = small_temporal(200, 27);
  for (Method m : {Method::kErm, Method::kIrmOracle, Method::kGroupDro, Method::kEiil, Method::kZin}) {
    const RunResult r = train(m, ds, quick_config(20));
    EXPECT_EQ(r.method, m);
    EXPECT_LE(r.train.worst, r.train.mean + 1e-15);
  }
}

}  // namespace
}  // namespace zin::inv
