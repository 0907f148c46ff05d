#include "zin/autodiff/mlp.hpp"

#include <algorithm>
#include <cmath>

#include "zin/common/errors.hpp"

namespace zin::ad {

Activation parse_activation(const std::string& name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "tanh") return Activation::kTanh;
  throw ConfigError("unknown activation '" + name + "' (expected relu|tanh)");
}

std::string to_string(Activation a) { return a == Activation::kRelu ? "relu" : "tanh"; }

LossKind parse_loss_kind(const std::string& name) {
  if (name == "cross_entropy") return LossKind::kCrossEntropy;
  if (name == "squared") return LossKind::kSquared;
  throw ConfigError("unknown loss '" + name + "' (expected cross_entropy|squared)");
}

std::string to_string(LossKind k) {
  return k == LossKind::kCrossEntropy ? "cross_entropy" : "squared";
}

Mlp::Mlp(const std::vector<std::size_t>& widths, Activation activation, std::mt19937_64& rng)
    : activation_(activation) {
  if (widths.size() < 2) throw DimensionError("an Mlp needs at least input and output widths");
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    const std::size_t fan_in = widths[i];
    const std::size_t fan_out = widths[i + 1];
    if (fan_in == 0 || fan_out == 0) throw DimensionError("Mlp layer widths must be positive");
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> init(-bound, bound);
    Tensor w(fan_in, fan_out);
    for (double& v : w.values()) v = init(rng);
    Tensor b(1, fan_out);
    for (double& v : b.values()) v = init(rng);
    params_.push_back(std::move(w));
    params_.push_back(std::move(b));
  }
}

Mlp::Mlp(std::vector<Tensor> parameters, Activation activation)
    : params_(std::move(parameters)), activation_(activation) {
  check_composition();
}

void Mlp::check_composition() const {
  if (params_.size() % 2 != 0) throw DimensionError("Mlp parameters must come in (W, b) pairs");
  for (std::size_t i = 0; i < params_.size(); i += 2) {
    const Tensor& w = params_[i];
    const Tensor& b = params_[i + 1];
    if (b.rows() != 1 || b.cols() != w.cols()) {
      throw DimensionError("layer " + std::to_string(i / 2) + " bias " + b.shape_string() +
                           " does not match weight " + w.shape_string());
    }
    if (i + 2 < params_.size() && params_[i + 2].rows() != w.cols()) {
      throw DimensionError("layer " + std::to_string(i / 2) + " output width " +
                           std::to_string(w.cols()) + " does not feed layer input " +
                           std::to_string(params_[i + 2].rows()));
    }
  }
}

std::size_t Mlp::input_dim() const { return params_.empty() ? 0 : params_.front().rows(); }
std::size_t Mlp::output_dim() const { return params_.empty() ? 0 : params_.back().cols(); }

std::vector<std::size_t> Mlp::widths() const {
  std::vector<std::size_t> out;
  if (params_.empty()) return out;
  out.push_back(input_dim());
  for (std::size_t i = 0; i < params_.size(); i += 2) out.push_back(params_[i].cols());
  return out;
}

std::size_t Mlp::parameter_count() const {
  std::size_t total = 0;
  for (const Tensor& p : params_) total += p.size();
  return total;
}

Tensor Mlp::forward(const Tensor& x) const {
  if (params_.empty()) return x;
  if (x.cols() != input_dim()) {
    throw DimensionError("input has " + std::to_string(x.cols()) + " columns, model expects " +
                         std::to_string(input_dim()));
  }
  Tensor h = x;
  for (std::size_t i = 0; i < params_.size(); i += 2) {
    Tensor next = matmul(h, params_[i]);
    const Tensor& b = params_[i + 1];
    for (std::size_t r = 0; r < next.rows(); ++r)
      for (std::size_t j = 0; j < next.cols(); ++j) next(r, j) += b[j];
    if (i + 2 < params_.size()) {
      for (double& v : next.values()) v = activation_ == Activation::kRelu ? std::max(v, 0.0) : std::tanh(v);
    }
    h = std::move(next);
  }
  return h;
}

Var Mlp::forward(Tape& tape, Var x, std::vector<Var>& param_vars) const {
  const std::size_t cols = tape.value(x).cols();
  if (!params_.empty() && cols != input_dim()) {
    throw DimensionError("input has " + std::to_string(cols) + " columns, model expects " +
                         std::to_string(input_dim()));
  }
  Var h = x;
  for (std::size_t i = 0; i < params_.size(); i += 2) {
    Var w = tape.parameter(params_[i]);
    Var b = tape.parameter(params_[i + 1]);
    param_vars.push_back(w);
    param_vars.push_back(b);
    h = tape.add_bias(tape.matmul(h, w), b);
    if (i + 2 < params_.size()) {
      h = activation_ == Activation::kRelu ? tape.relu(h) : tape.tanh(h);
    }
  }
  return h;
}

GradientBundle Mlp::collect(const Tape& tape, const std::vector<Var>& param_vars) {
  GradientBundle bundle;
  bundle.grads.reserve(param_vars.size());
  for (Var v : param_vars) bundle.grads.push_back(tape.grad(v));
  return bundle;
}

void check_binary_targets(const Tensor& targets) {
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const double y = targets[i];
    if (y != 0.0 && y != 1.0) {
      throw DomainError("cross-entropy target at row " + std::to_string(i) + " is " +
                        std::to_string(y) + ", expected 0 or 1");
    }
  }
}

Var per_sample_loss(Tape& tape, Var outputs, Var targets, LossKind kind) {
  return kind == LossKind::kCrossEntropy ? tape.bce_with_logits(outputs, targets)
                                         : tape.squared_error(outputs, targets);
}

double loss(const Tensor& outputs, const Tensor& targets, LossKind kind) {
  if (outputs.rows() != targets.rows()) {
    throw DimensionError("loss: outputs " + outputs.shape_string() + " vs targets " +
                         targets.shape_string());
  }
  if (kind == LossKind::kCrossEntropy) check_binary_targets(targets);
  Tape tape;
  Var out = tape.constant(outputs);
  Var y = tape.constant(targets);
  return tape.value(tape.mean(per_sample_loss(tape, out, y, kind))).item();
}

double finite_diff_check(const Mlp& model, const Tensor& x, const Tensor& y, LossKind kind,
                         double h) {
  if (!(h > 0.0)) throw DomainError("finite difference step must be positive");
  if (kind == LossKind::kCrossEntropy) check_binary_targets(y);
  Tape tape;
  std::vector<Var> vars;
  Var xv = tape.constant(x);
  Var yv = tape.constant(y);
  Var out = model.forward(tape, xv, vars);
  Var total = tape.mean(per_sample_loss(tape, out, yv, kind));
  tape.backward(total);
  const GradientBundle analytic = Mlp::collect(tape, vars);

  auto eval = [&](const Mlp& m) { return loss(m.forward(x), y, kind); };

  double worst = 0.0;
  Mlp probe = model;
  for (std::size_t p = 0; p < probe.parameters().size(); ++p) {
    Tensor& param = probe.parameters()[p];
    for (std::size_t i = 0; i < param.size(); ++i) {
      const double saved = param[i];
      param[i] = saved + h;
      const double up = eval(probe);
      param[i] = saved - h;
      const double down = eval(probe);
      param[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic.grads[p][i];
      worst = std::max(worst, std::abs(a - numeric) / (std::abs(a) + 1e-12));
    }
  }
  return worst;
}

}  // namespace zin::ad
