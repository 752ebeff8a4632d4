#pragma once

#include <cstddef>
#include <vector>

#include "stimgen/tensor.hpp"

namespace stimgen {

enum class OptimKind { Adam, Sgd, RmsProp };

// Per-network optimizer state. Moment buffers are lazily sized on the first
// step and afterwards must keep matching the parameter shapes.
struct OptimState {
  OptimKind kind = OptimKind::Adam;
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double rho = 0.9;  // RMSProp decay
  std::size_t step_count = 0;
  std::vector<Tensor> m;
  std::vector<Tensor> v;

  static OptimState adam(double lr = 2e-4, double beta1 = 0.5, double beta2 = 0.999,
                         double epsilon = 1e-8);
  static OptimState sgd(double lr);
  static OptimState rmsprop(double lr = 1e-2, double rho = 0.9, double epsilon = 1e-8);
};

// In-place update of params from grads. Gradients must be finite; a
// non-finite component aborts with an error naming the parameter.
void optim_step(std::vector<NamedTensor>& params, const std::vector<Tensor>& grads,
                OptimState& state);

// Bias-corrected Adam. Thin wrapper that insists state.kind == Adam.
void adam_step(std::vector<NamedTensor>& params, const std::vector<Tensor>& grads,
               OptimState& state);

}  // namespace stimgen
