#pragma once

#include <vector>

#include "zin/autodiff/mlp.hpp"
#include "zin/autodiff/tensor.hpp"

namespace zin::ad {

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step = 0;
  std::vector<Tensor> m;
  std::vector<Tensor> v;
};

/// One Adam update of `params` in place. Descends along `grads`; pass
/// `ascend = true` to climb instead. Moment buffers are created lazily on the
/// first call.
void adam_step(std::vector<Tensor>& params, const GradientBundle& grads, AdamState& state,
               double lr, bool ascend = false);

inline void adam_step(Mlp& model, const GradientBundle& grads, AdamState& state, double lr,
                      bool ascend = false) {
  adam_step(model.parameters(), grads, state, lr, ascend);
}

}  // namespace zin::ad
