#include "zin/autodiff/adam.hpp"

#include <cmath>

#include "zin/common/errors.hpp"

namespace zin::ad {

void adam_step(std::vector<Tensor>& params, const GradientBundle& grads, AdamState& state,
               double lr, bool ascend) {
  if (grads.grads.size() != params.size()) {
    throw DimensionError("gradient bundle has " + std::to_string(grads.grads.size()) +
                         " entries for " + std::to_string(params.size()) + " parameters");
  }
  for (std::size_t p = 0; p < params.size(); ++p) {
    if (!grads.grads[p].same_shape(params[p])) {
      throw DimensionError("gradient " + std::to_string(p) + " has shape " +
                           grads.grads[p].shape_string() + ", parameter has " +
                           params[p].shape_string());
    }
  }
  if (state.m.size() != params.size()) {
    state.m.clear();
    state.v.clear();
    for (const Tensor& p : params) {
      state.m.emplace_back(p.rows(), p.cols());
      state.v.emplace_back(p.rows(), p.cols());
    }
    state.step = 0;
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(state.beta1, t);
  const double bias2 = 1.0 - std::pow(state.beta2, t);
  const double sign = ascend ? 1.0 : -1.0;
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& param = params[p];
    Tensor& m = state.m[p];
    Tensor& v = state.v[p];
    const Tensor& g = grads.grads[p];
    for (std::size_t i = 0; i < param.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double m_hat = m[i] / bias1;
      const double v_hat = v[i] / bias2;
      param[i] += sign * lr * m_hat / (std::sqrt(v_hat) + state.eps);
    }
  }
}

}  // namespace zin::ad
