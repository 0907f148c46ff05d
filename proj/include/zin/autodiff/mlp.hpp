#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "zin/autodiff/tape.hpp"
#include "zin/autodiff/tensor.hpp"

namespace zin::ad {

enum class Activation { kRelu, kTanh };
enum class LossKind { kCrossEntropy, kSquared };

Activation parse_activation(const std::string& name);
std::string to_string(Activation a);
LossKind parse_loss_kind(const std::string& name);
std::string to_string(LossKind k);

/// Per-parameter gradients, aligned one-to-one with Mlp::parameters().
struct GradientBundle {
  std::vector<Tensor> grads;
};

/// Feed-forward network f_w(Phi(x)). Every layer but the last is the feature
/// extractor; the last linear layer is the classifier head.
///
/// Parameters are stored flat as [W0, b0, W1, b1, ...] with W_i of shape
/// in_i x out_i (so a layer computes x W + b) and b_i of shape 1 x out_i.
class Mlp {
 public:
  Mlp() = default;
  /// widths = {input, hidden..., output}. Weights use the uniform
  /// +-1/sqrt(fan_in) initialisation.
  Mlp(const std::vector<std::size_t>& widths, Activation activation, std::mt19937_64& rng);
  /// Builds from explicit layers; throws DimensionError if they do not compose.
  Mlp(std::vector<Tensor> parameters, Activation activation);

  std::size_t input_dim() const;
  std::size_t output_dim() const;
  std::size_t num_layers() const { return params_.size() / 2; }
  Activation activation() const { return activation_; }
  std::vector<std::size_t> widths() const;

  std::vector<Tensor>& parameters() { return params_; }
  const std::vector<Tensor>& parameters() const { return params_; }
  std::size_t parameter_count() const;

  /// Eager evaluation without recording.
  Tensor forward(const Tensor& x) const;

  /// Records the evaluation on `tape`. The parameter handles are appended to
  /// `param_vars` in parameters() order so gradients can be collected.
  Var forward(Tape& tape, Var x, std::vector<Var>& param_vars) const;

  static GradientBundle collect(const Tape& tape, const std::vector<Var>& param_vars);

 private:
  void check_composition() const;

  std::vector<Tensor> params_;
  Activation activation_ = Activation::kRelu;
};

/// Per-sample loss column (n x 1) on the tape.
Var per_sample_loss(Tape& tape, Var outputs, Var targets, LossKind kind);

/// Mean per-sample loss. Cross-entropy expects one logit column and targets in
/// {0,1}; DomainError otherwise.
double loss(const Tensor& outputs, const Tensor& targets, LossKind kind);

/// Throws DomainError unless every target is exactly 0 or 1.
void check_binary_targets(const Tensor& targets);

/// Max over parameters of |analytic - central difference| / (|analytic| + 1e-12)
/// for the mean loss of `model` on (x, y). Zero for a parameterless model.
double finite_diff_check(const Mlp& model, const Tensor& x, const Tensor& y, LossKind kind,
                         double h);

}  // namespace zin::ad
