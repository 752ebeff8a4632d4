#pragma once

#include <functional>
#include <string>

#include "stimgen/signal.hpp"
#include "stimgen/tensor.hpp"
#include "stimgen/vaegan.hpp"

namespace stimgen::metrics {

struct SsimParams {
  std::size_t window_length = 11;  // odd, <= T
  double data_range = 1.0;
  double c1 = 1e-4;  // (0.01 * data_range)^2
  double c2 = 9e-4;  // (0.03 * data_range)^2

  static SsimParams for_range(double range);
  void validate(std::size_t sequence_length) const;
};

// Sliding-window structural similarity along the time axis, averaged over
// windows and channels. Symmetric, at most 1, exactly 1 on identical inputs.
double ssim(const Tensor& a, const Tensor& b, const SsimParams& params = {});
double ssim(const SignalSequence& a, const SignalSequence& b, const SsimParams& params = {});

// Dynamic-time-warping alignment cost: per-step L1 distance across channels,
// steps {match, insert, delete}, unnormalized sum along the optimal path.
// Lengths may differ; channel counts must match.
double dtw(const Tensor& a, const Tensor& b);
double dtw(const SignalSequence& a, const SignalSequence& b);

// Total-variation ratio R = sum|db| / sum|da| with the reference in the
// denominator, both sums taken jointly over channels. A reference with zero
// total variation is an error, never an infinity.
double roughness(const Tensor& reference, const Tensor& candidate);
double roughness(const SignalSequence& reference, const SignalSequence& candidate);

// kappa * ssim + (1 - kappa) * roughness
double composite_msr(const Tensor& x_ref, const Tensor& x_bar, double kappa,
                     const SsimParams& params = {});
double composite_msr(const SignalSequence& x_ref, const SignalSequence& x_bar, double kappa,
                     const SsimParams& params = {});

enum class MetricDirection {
  HigherIsSimilar,  // ssim, composite
  LowerIsSimilar,   // dtw
  ScheduleTarget,   // roughness: navigation steers toward explicit target values
};

// A latent-space objective: evaluator(z) scores decode(model, z) against a
// fixed reference. Deterministic by construction.
struct MetricFn {
  std::string name;
  MetricDirection direction = MetricDirection::HigherIsSimilar;
  std::function<double(const Tensor& z)> evaluator;
};

// name is one of ssim | dtw | roughness | composite; kappa and ssim_params
// only affect the metrics that use them
MetricFn make_latent_metric(const std::string& name, const vaegan::VaeGanModel& model,
                            const SignalSequence& x_ref, double kappa = 0.5,
                            const SsimParams& ssim_params = {});

}  // namespace stimgen::metrics
