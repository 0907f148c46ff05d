#include "zin/autodiff/tape.hpp"

#include <algorithm>
#include <cmath>
#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "zin/common/errors.hpp"

namespace zin::ad {

namespace {

// keep large tape buffers on the heap
[[maybe_unused]] const bool kAllocatorTuned = [] {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 256 << 20);
  mallopt(M_TRIM_THRESHOLD, 512 << 20);
#endif
  return true;
}();

double sigmoid_scalar(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw DimensionError(std::string(op) + ": " + a.shape_string() + " vs " + b.shape_string());
  }
}

}  // namespace

const Tape::Node& Tape::node(Var v) const {
  if (!v.valid() || v.id >= nodes_.size()) throw StateError("variable does not belong to this tape");
  return nodes_[v.id];
}

Var Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::parameter(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = true;
  return push(std::move(n));
}

Var Tape::matmul(Var a, Var b) {
  const Node& na = node(a);
  const Node& nb = node(b);
  Node n;
  n.op = Op::kMatMul;
  n.a = a.id;
  n.b = b.id;
  n.requires_grad = na.requires_grad || nb.requires_grad;
  n.value = ad::matmul(na.value, nb.value);
  return push(std::move(n));
}

Var Tape::add_bias(Var x, Var bias) {
  const Node& nx = node(x);
  const Node& nb = node(bias);
  if (nb.value.rows() != 1 || nb.value.cols() != nx.value.cols()) {
    throw DimensionError("add_bias: " + nx.value.shape_string() + " + " + nb.value.shape_string());
  }
  Node n;
  n.op = Op::kAddBias;
  n.a = x.id;
  n.b = bias.id;
  n.requires_grad = nx.requires_grad || nb.requires_grad;
  n.value = nx.value;
  const std::size_t c = n.value.cols();
  for (std::size_t r = 0; r < n.value.rows(); ++r)
    for (std::size_t j = 0; j < c; ++j) n.value(r, j) += nb.value[j];
  return push(std::move(n));
}

Var Tape::add(Var a, Var b) {
  const Node& na = node(a);
  const Node& nb = node(b);
  require_same_shape(na.value, nb.value, "add");
  Node n;
  n.op = Op::kAdd;
  n.a = a.id;
  n.b = b.id;
  n.requires_grad = na.requires_grad || nb.requires_grad;
  n.value = na.value;
  for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] += nb.value[i];
  return push(std::move(n));
}

Var Tape::sub(Var a, Var b) {
  const Node& na = node(a);
  const Node& nb = node(b);
  require_same_shape(na.value, nb.value, "sub");
  Node n;
  n.op = Op::kSub;
  n.a = a.id;
  n.b = b.id;
  n.requires_grad = na.requires_grad || nb.requires_grad;
  n.value = na.value;
  for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] -= nb.value[i];
  return push(std::move(n));
}

Var Tape::mul(Var a, Var b) {
  const Node& na = node(a);
  const Node& nb = node(b);
  require_same_shape(na.value, nb.value, "mul");
  Node n;
  n.op = Op::kMul;
  n.a = a.id;
  n.b = b.id;
  n.requires_grad = na.requires_grad || nb.requires_grad;
  n.value = na.value;
  for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] *= nb.value[i];
  return push(std::move(n));
}

Var Tape::scale(Var a, double factor) {
  const Node& na = node(a);
  Node n;
  n.op = Op::kScale;
  n.a = a.id;
  n.factor = factor;
  n.requires_grad = na.requires_grad;
  n.value = na.value;
  for (double& v : n.value.values()) v *= factor;
  return push(std::move(n));
}

Var Tape::relu(Var a) {
  const Node& na = node(a);
  Node n;
  n.op = Op::kRelu;
  n.a = a.id;
  n.requires_grad = na.requires_grad;
  n.value = na.value;
  for (double& v : n.value.values()) v = v > 0.0 ? v : 0.0;
  return push(std::move(n));
}

Var Tape::tanh(Var a) {
  const Node& na = node(a);
  Node n;
  n.op = Op::kTanh;
  n.a = a.id;
  n.requires_grad = na.requires_grad;
  n.value = na.value;
  for (double& v : n.value.values()) v = std::tanh(v);
  return push(std::move(n));
}

Var Tape::sigmoid(Var a) {
  const Node& na = node(a);
  Node n;
  n.op = Op::kSigmoid;
  n.a = a.id;
  n.requires_grad = na.requires_grad;
  n.value = na.value;
  for (double& v : n.value.values()) v = sigmoid_scalar(v);
  return push(std::move(n));
}

Var Tape::softmax(Var a) {
  const Node& na = node(a);
  Node n;
  n.op = Op::kSoftmax;
  n.a = a.id;
  n.requires_grad = na.requires_grad;
  n.value = na.value;
  const std::size_t c = n.value.cols();
  for (std::size_t r = 0; r < n.value.rows(); ++r) {
    double mx = n.value(r, 0);
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, n.value(r, j));
    double total = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      n.value(r, j) = std::exp(n.value(r, j) - mx);
      total += n.value(r, j);
    }
    for (std::size_t j = 0; j < c; ++j) n.value(r, j) /= total;
  }
  return push(std::move(n));
}

Var Tape::square(Var a) {
  const Node& na = node(a);
  Node n;
  n.op = Op::kSquare;
  n.a = a.id;
  n.requires_grad = na.requires_grad;
  n.value = na.value;
  for (double& v : n.value.values()) v *= v;
  return push(std::move(n));
}

Var Tape::mean(Var a) {
  const Node& na = node(a);
  if (na.value.empty()) throw DimensionError("mean of empty tensor");
  Node n;
  n.op = Op::kMean;
  n.a = a.id;
  n.requires_grad = na.requires_grad;
  double total = 0.0;
  for (double v : na.value.values()) total += v;
  n.value = Tensor::scalar(total / static_cast<double>(na.value.size()));
  return push(std::move(n));
}

Var Tape::sum(Var a) {
  const Node& na = node(a);
  Node n;
  n.op = Op::kSum;
  n.a = a.id;
  n.requires_grad = na.requires_grad;
  double total = 0.0;
  for (double v : na.value.values()) total += v;
  n.value = Tensor::scalar(total);
  return push(std::move(n));
}

Var Tape::column(Var a, std::size_t j) {
  const Node& na = node(a);
  if (j >= na.value.cols()) {
    throw DimensionError("column " + std::to_string(j) + " of " + na.value.shape_string());
  }
  Node n;
  n.op = Op::kColumn;
  n.a = a.id;
  n.index = j;
  n.requires_grad = na.requires_grad;
  n.value = Tensor(na.value.rows(), 1);
  for (std::size_t r = 0; r < na.value.rows(); ++r) n.value[r] = na.value(r, j);
  return push(std::move(n));
}

Var Tape::bce_with_logits(Var logits, Var targets) {
  const Node& nz = node(logits);
  const Node& ny = node(targets);
  require_same_shape(nz.value, ny.value, "bce_with_logits");
  Node n;
  n.op = Op::kBceLogits;
  n.a = logits.id;
  n.b = targets.id;
  n.requires_grad = nz.requires_grad;
  n.value = Tensor(nz.value.rows(), nz.value.cols());
  for (std::size_t i = 0; i < n.value.size(); ++i) {
    const double z = nz.value[i];
    // softplus(z) - y z written so that exp never overflows.
    n.value[i] = std::max(z, 0.0) - z * ny.value[i] + std::log1p(std::exp(-std::abs(z)));
  }
  return push(std::move(n));
}

Var Tape::squared_error(Var predictions, Var targets) {
  const Node& np = node(predictions);
  const Node& ny = node(targets);
  require_same_shape(np.value, ny.value, "squared_error");
  Node n;
  n.op = Op::kSquaredError;
  n.a = predictions.id;
  n.b = targets.id;
  n.requires_grad = np.requires_grad;
  n.value = Tensor(np.value.rows(), np.value.cols());
  for (std::size_t i = 0; i < n.value.size(); ++i) {
    const double r = np.value[i] - ny.value[i];
    n.value[i] = r * r;
  }
  return push(std::move(n));
}

const Tensor& Tape::value(Var v) const { return node(v).value; }

const Tensor& Tape::grad(Var v) const {
  const Node& n = node(v);
  if (!has_backward_) throw StateError("grad() requested before backward()");
  return n.grad;
}

void Tape::accumulate(std::size_t target, const Tensor& delta) {
  Node& t = nodes_[target];
  if (!t.requires_grad) return;
  for (std::size_t i = 0; i < delta.size(); ++i) t.grad[i] += delta[i];
}

void Tape::backward(Var scalar_output) {
  if (nodes_.empty() || !scalar_output.valid() || scalar_output.id >= nodes_.size()) {
    throw StateError("backward() without a recorded forward computation");
  }
  const Node& out = nodes_[scalar_output.id];
  if (out.value.size() != 1) {
    throw DimensionError("backward() needs a scalar output, got " + out.value.shape_string());
  }
  for (Node& n : nodes_) {
    if (!n.requires_grad) {
      n.grad = Tensor();
    } else if (n.grad.same_shape(n.value)) {
      n.grad.fill(0.0);
    } else {
      n.grad = Tensor(n.value.rows(), n.value.cols());
    }
  }
  nodes_[scalar_output.id].grad = Tensor(1, 1, 1.0);
  for (std::size_t i = scalar_output.id + 1; i-- > 0;) {
    const Node& n = nodes_[i];
    if (n.op == Op::kLeaf || !n.requires_grad) continue;
    propagate(n);
  }
  has_backward_ = true;
}

void Tape::propagate(const Node& n) {
  const Tensor& g = n.grad;
  switch (n.op) {
    case Op::kLeaf:
      break;
    case Op::kMatMul: {
      const Tensor& a = nodes_[n.a].value;
      const Tensor& b = nodes_[n.b].value;
      if (nodes_[n.a].requires_grad) accumulate(n.a, matmul_transpose_b(g, b));
      if (nodes_[n.b].requires_grad) accumulate(n.b, matmul_transpose_a(a, g));
      break;
    }
    case Op::kAddBias: {
      accumulate(n.a, g);
      if (nodes_[n.b].requires_grad) {
        Tensor db(1, g.cols());
        for (std::size_t r = 0; r < g.rows(); ++r)
          for (std::size_t j = 0; j < g.cols(); ++j) db[j] += g(r, j);
        accumulate(n.b, db);
      }
      break;
    }
    case Op::kAdd:
      accumulate(n.a, g);
      accumulate(n.b, g);
      break;
    case Op::kSub: {
      accumulate(n.a, g);
      if (nodes_[n.b].requires_grad) {
        Tensor neg = g;
        for (double& v : neg.values()) v = -v;
        accumulate(n.b, neg);
      }
      break;
    }
    case Op::kMul: {
      const Tensor& a = nodes_[n.a].value;
      const Tensor& b = nodes_[n.b].value;
      if (nodes_[n.a].requires_grad) {
        Tensor da = g;
        for (std::size_t i = 0; i < da.size(); ++i) da[i] *= b[i];
        accumulate(n.a, da);
      }
      if (nodes_[n.b].requires_grad) {
        Tensor db = g;
        for (std::size_t i = 0; i < db.size(); ++i) db[i] *= a[i];
        accumulate(n.b, db);
      }
      break;
    }
    case Op::kScale: {
      Tensor da = g;
      for (double& v : da.values()) v *= n.factor;
      accumulate(n.a, da);
      break;
    }
    case Op::kRelu: {
      const Tensor& x = nodes_[n.a].value;
      Tensor da = g;
      for (std::size_t i = 0; i < da.size(); ++i)
        if (!(x[i] > 0.0)) da[i] = 0.0;
      accumulate(n.a, da);
      break;
    }
    case Op::kTanh: {
      Tensor da = g;
      for (std::size_t i = 0; i < da.size(); ++i) da[i] *= 1.0 - n.value[i] * n.value[i];
      accumulate(n.a, da);
      break;
    }
    case Op::kSigmoid: {
      Tensor da = g;
      for (std::size_t i = 0; i < da.size(); ++i) da[i] *= n.value[i] * (1.0 - n.value[i]);
      accumulate(n.a, da);
      break;
    }
    case Op::kSoftmax: {
      // d x_j = s_j (g_j - sum_k g_k s_k) per row.
      Tensor da(g.rows(), g.cols());
      for (std::size_t r = 0; r < g.rows(); ++r) {
        double dot = 0.0;
        for (std::size_t j = 0; j < g.cols(); ++j) dot += g(r, j) * n.value(r, j);
        for (std::size_t j = 0; j < g.cols(); ++j) da(r, j) = n.value(r, j) * (g(r, j) - dot);
      }
      accumulate(n.a, da);
      break;
    }
    case Op::kSquare: {
      const Tensor& x = nodes_[n.a].value;
      Tensor da = g;
      for (std::size_t i = 0; i < da.size(); ++i) da[i] *= 2.0 * x[i];
      accumulate(n.a, da);
      break;
    }
    case Op::kMean: {
      const Tensor& x = nodes_[n.a].value;
      Tensor da(x.rows(), x.cols(), g[0] / static_cast<double>(x.size()));
      accumulate(n.a, da);
      break;
    }
    case Op::kSum: {
      const Tensor& x = nodes_[n.a].value;
      accumulate(n.a, Tensor(x.rows(), x.cols(), g[0]));
      break;
    }
    case Op::kColumn: {
      const Tensor& x = nodes_[n.a].value;
      Tensor da(x.rows(), x.cols());
      for (std::size_t r = 0; r < x.rows(); ++r) da(r, n.index) = g[r];
      accumulate(n.a, da);
      break;
    }
    case Op::kBceLogits: {
      const Tensor& z = nodes_[n.a].value;
      const Tensor& y = nodes_[n.b].value;
      Tensor da = g;
      for (std::size_t i = 0; i < da.size(); ++i) da[i] *= sigmoid_scalar(z[i]) - y[i];
      accumulate(n.a, da);
      break;
    }
    case Op::kSquaredError: {
      const Tensor& p = nodes_[n.a].value;
      const Tensor& y = nodes_[n.b].value;
      Tensor da = g;
      for (std::size_t i = 0; i < da.size(); ++i) da[i] *= 2.0 * (p[i] - y[i]);
      accumulate(n.a, da);
      break;
    }
  }
}

}  // namespace zin::ad
