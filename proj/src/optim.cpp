#include "stimgen/optim.hpp"

#include <cmath>
#include <string>

#include "stimgen/errors.hpp"

namespace stimgen {

OptimState OptimState::adam(double lr, double beta1, double beta2, double epsilon) {
  OptimState s;
  s.kind = OptimKind::Adam;
  s.lr = lr;
  s.beta1 = beta1;
  s.beta2 = beta2;
  s.epsilon = epsilon;
  return s;
}

OptimState OptimState::sgd(double lr) {
  OptimState s;
  s.kind = OptimKind::Sgd;
  s.lr = lr;
  return s;
}

OptimState OptimState::rmsprop(double lr, double rho, double epsilon) {
  OptimState s;
  s.kind = OptimKind::RmsProp;
  s.lr = lr;
  s.rho = rho;
  s.epsilon = epsilon;
  return s;
}

namespace {

void check_grads(const std::vector<NamedTensor>& params, const std::vector<Tensor>& grads) {
  if (params.size() != grads.size()) {
    throw ConfigError("optimizer got " + std::to_string(grads.size()) + " gradients for " +
                      std::to_string(params.size()) + " parameters");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].value.same_shape(grads[i])) {
      throw ShapeError("gradient for '" + params[i].name + "' has shape " +
                       shape_str(grads[i].shape) + ", parameter has " +
                       shape_str(params[i].value.shape));
    }
    if (!grads[i].all_finite()) {
      throw NumericError("non-finite gradient for parameter '" + params[i].name + "'");
    }
  }
}

void ensure_moments(std::vector<Tensor>& buf, const std::vector<NamedTensor>& params) {
  if (buf.empty()) {
    buf.reserve(params.size());
    for (const NamedTensor& p : params) buf.push_back(Tensor::zeros(p.value.shape));
    return;
  }
  if (buf.size() != params.size()) {
    throw ConfigError("optimizer state does not match parameter count");
  }
}

}  // namespace

void optim_step(std::vector<NamedTensor>& params, const std::vector<Tensor>& grads,
                OptimState& state) {
  check_grads(params, grads);
  state.step_count += 1;

  switch (state.kind) {
    case OptimKind::Sgd: {
      for (std::size_t i = 0; i < params.size(); ++i) {
        double* p = params[i].value.data.data();
        const double* g = grads[i].data.data();
        const std::size_t n = grads[i].numel();
        for (std::size_t j = 0; j < n; ++j) p[j] -= state.lr * g[j];
      }
      return;
    }

    case OptimKind::RmsProp: {
      ensure_moments(state.v, params);
      for (std::size_t i = 0; i < params.size(); ++i) {
        double* p = params[i].value.data.data();
        double* v = state.v[i].data.data();
        const double* g = grads[i].data.data();
        const std::size_t n = grads[i].numel();
        for (std::size_t j = 0; j < n; ++j) {
          v[j] = state.rho * v[j] + (1.0 - state.rho) * g[j] * g[j];
          p[j] -= state.lr * g[j] / (std::sqrt(v[j]) + state.epsilon);
        }
      }
      return;
    }

    case OptimKind::Adam: {
      ensure_moments(state.m, params);
      ensure_moments(state.v, params);
      const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
      const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
      for (std::size_t i = 0; i < params.size(); ++i) {
        double* p = params[i].value.data.data();
        double* m = state.m[i].data.data();
        double* v = state.v[i].data.data();
        const double* g = grads[i].data.data();
        const std::size_t n = grads[i].numel();
        for (std::size_t j = 0; j < n; ++j) {
          m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g[j];
          v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g[j] * g[j];
          const double mhat = m[j] / bc1;
          const double vhat = v[j] / bc2;
          p[j] -= state.lr * mhat / (std::sqrt(vhat) + state.epsilon);
        }
      }
      return;
    }
  }
}

void adam_step(std::vector<NamedTensor>& params, const std::vector<Tensor>& grads,
               OptimState& state) {
  if (state.kind != OptimKind::Adam) {
    throw ConfigError("adam_step called with a non-Adam optimizer state");
  }
  optim_step(params, grads, state);
}

}  // namespace stimgen
