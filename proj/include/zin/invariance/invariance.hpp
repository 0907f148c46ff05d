#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "zin/autodiff/mlp.hpp"
#include "zin/data/dataset.hpp"

namespace zin::inv {

using ad::LossKind;
using ad::Mlp;
using ad::Tensor;
using data::Dataset;

enum class Method { kErm, kIrmOracle, kGroupDro, kEiil, kZin };

Method parse_method(const std::string& name);
std::string to_string(Method m);

/// Soft environment assignment ρ: standardised Z -> MLP -> softmax over K.
class PartitionModel {
 public:
  PartitionModel() = default;
  /// Standardisation statistics are taken from `z`.
  PartitionModel(const Tensor& z, int k, const std::vector<std::size_t>& hidden, ad::Activation act,
                 std::mt19937_64& rng);

  int k() const { return k_; }
  Mlp& net() { return net_; }
  const Mlp& net() const { return net_; }
  const std::vector<double>& z_mean() const { return mean_; }
  const std::vector<double>& z_scale() const { return scale_; }

  Tensor standardize(const Tensor& z) const;
  /// n x K weights, rows on the simplex.
  Tensor weights(const Tensor& z) const;
  /// Hard assignment by argmax (ties to the lower index).
  std::vector<int> assign(const Tensor& z) const;
  /// Records the weights on `tape`; parameters are appended to `params`.
  ad::Var forward(ad::Tape& tape, ad::Var z_standardized, std::vector<ad::Var>& params) const;

 private:
  Mlp net_;
  int k_ = 2;
  std::vector<double> mean_;
  std::vector<double> scale_;
};

struct TrainConfig {
  double lambda = 10000.0;
  int k = 2;
  long epochs = 4000;
  long anneal_epochs = 2000;
  double lr = 1e-3;
  double rho_lr = 1e-3;
  /// Independent ρ initialisations ascended together; the one with the largest penalty is frozen.
  int rho_restarts = 1;
  /// Stage-1 epochs before ρ starts ascending.
  long rho_warmup = 300;
  std::uint64_t seed = 0;
  LossKind loss = LossKind::kCrossEntropy;
  /// 0 means full batch.
  std::size_t batch_size = 0;
  std::vector<std::size_t> hidden = {32, 32};
  std::vector<std::size_t> rho_hidden = {32};
  ad::Activation activation = ad::Activation::kRelu;
  double dro_eta = 0.01;
  long eiil_steps = 10000;
  double eiil_lr = 1e-3;
  long log_every = 100;
  /// Records the penalty before and after every ρ step during stage 1.
  bool track_adversary = false;

  void validate() const;
};

struct Evaluation {
  bool accuracy = true;
  std::vector<double> per_env;
  double mean = 0.0;
  double worst = 0.0;
};

struct HistoryEntry {
  long epoch = 0;
  double risk = 0.0;
  double penalty = 0.0;
  double lambda = 0.0;
};

struct RunResult {
  Method method = Method::kErm;
  std::uint64_t seed = 0;
  Mlp model;
  std::optional<PartitionModel> rho;
  /// Hard training-set environments used by the invariance stage, if any.
  std::vector<int> inferred_env;
  Evaluation train;
  Evaluation test;
  std::vector<HistoryEntry> history;
  /// Pairs (before, after) of the penalty around each stage-1 ρ step.
  std::vector<std::pair<double, double>> adversary;
  std::vector<double> group_weights;
  double wall_seconds = 0.0;
};

/// (1/n)·Σ w_i ℓ_i; DomainError on a negative weight.
double weighted_risk(const Mlp& model, const Dataset& ds, std::span<const double> weights, LossKind loss);

struct PenaltyValue {
  double value = 0.0;
  /// dP/d(output_i), n x 1; filled when requested.
  Tensor output_grad;
};

/// (∂R_w/∂s at s = 1)² where s scales the network output.
PenaltyValue irm_penalty(const Mlp& model, const Dataset& ds, std::span<const double> weights, LossKind loss,
                         bool with_grad = false);

/// R + λ·Σ_k irm_penalty(weights ρ_k(z)); ConfigError when Z is empty.
double zin_objective(const Mlp& model, const PartitionModel& rho, const Dataset& ds, double lambda, LossKind loss);

RunResult train_erm(const Dataset& ds, const TrainConfig& config);
RunResult train_zin(const Dataset& ds, const TrainConfig& config);
RunResult train_irm_oracle(const Dataset& ds, const TrainConfig& config);
RunResult train_group_dro(const Dataset& ds, const TrainConfig& config);
RunResult train_eiil(const Dataset& ds, const TrainConfig& config);

RunResult train(Method method, const Dataset& ds, const TrainConfig& config);

/// Per-sample soft assignments maximising the penalty of a frozen model; n x K.
Tensor infer_assignments(const Mlp& reference, const Dataset& ds, const TrainConfig& config);

/// Accuracy (logit ≥ 0 predicts 1) or MSE per environment; EvaluationError on an empty env.
Evaluation evaluate(const Mlp& model, const std::vector<Dataset>& test_envs, LossKind loss);

/// Splits `ds` by its environment ids.
std::vector<Dataset> split_by_env(const Dataset& ds);

}  // namespace zin::inv
