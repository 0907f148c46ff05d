#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "zin/autodiff/tensor.hpp"

namespace zin::ad {

/// Handle to a node recorded on a Tape. Only meaningful for the tape that
/// produced it.
struct Var {
  std::size_t id = static_cast<std::size_t>(-1);
  bool valid() const { return id != static_cast<std::size_t>(-1); }
};

/// Reverse-mode tape over a fixed vocabulary of matrix ops.
///
/// Ops are evaluated eagerly as they are recorded. backward() walks the
/// recorded nodes in reverse and accumulates adjoints; it may be called
/// repeatedly on different scalar outputs of the same tape, each call
/// starting from cleared adjoints.
class Tape {
 public:
  Var constant(Tensor value);
  Var parameter(Tensor value);

  Var matmul(Var a, Var b);
  /// x [n x c] plus a broadcast row bias [1 x c].
  Var add_bias(Var x, Var bias);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double factor);
  Var relu(Var a);
  Var tanh(Var a);
  Var sigmoid(Var a);
  /// Row-wise softmax.
  Var softmax(Var a);
  Var square(Var a);
  /// Mean of all entries, 1 x 1.
  Var mean(Var a);
  /// Sum of all entries, 1 x 1.
  Var sum(Var a);
  /// Column j as an n x 1 tensor.
  Var column(Var a, std::size_t j);
  /// Per-entry logistic loss softplus(z) - y z in logit space. Targets are not
  /// differentiated.
  Var bce_with_logits(Var logits, Var targets);
  /// Per-entry (p - y)^2. Targets are not differentiated.
  Var squared_error(Var predictions, Var targets);

  const Tensor& value(Var v) const;
  void backward(Var scalar_output);
  /// Adjoint of v from the most recent backward() call.
  const Tensor& grad(Var v) const;

  std::size_t size() const { return nodes_.size(); }

 private:
  enum class Op : std::uint8_t {
    kLeaf, kMatMul, kAddBias, kAdd, kSub, kMul, kScale, kRelu, kTanh, kSigmoid,
    kSoftmax, kSquare, kMean, kSum, kColumn, kBceLogits, kSquaredError
  };

  struct Node {
    Op op = Op::kLeaf;
    std::size_t a = 0;
    std::size_t b = 0;
    double factor = 0.0;
    std::size_t index = 0;
    bool requires_grad = false;
    Tensor value;
    Tensor grad;
  };

  const Node& node(Var v) const;
  Var push(Node n);
  void accumulate(std::size_t target, const Tensor& delta);
  void propagate(const Node& n);

  std::vector<Node> nodes_;
  bool has_backward_ = false;
};

}  // namespace zin::ad
