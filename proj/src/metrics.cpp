#include "stimgen/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "stimgen/errors.hpp"

namespace stimgen::metrics {

namespace {

void require_series(const Tensor& t, const char* op) {
  if (t.rank() != 2 || t.shape[0] == 0 || t.shape[1] == 0) {
    throw ShapeError(std::string(op) + ": expected a non-empty [CxT] series, got " +
                     shape_str(t.shape));
  }
}

}  // namespace

SsimParams SsimParams::for_range(double range) {
  if (!(range > 0.0)) throw ConfigError("ssim data_range must be positive");
  SsimParams p;
  p.data_range = range;
  p.c1 = (0.01 * range) * (0.01 * range);
  p.c2 = (0.03 * range) * (0.03 * range);
  return p;
}

void SsimParams::validate(std::size_t sequence_length) const {
  if (window_length == 0 || window_length % 2 == 0) {
    throw ConfigError("ssim window_length must be odd and positive, got " +
                      std::to_string(window_length));
  }
  if (window_length > sequence_length) {
    throw ConfigError("ssim window_length " + std::to_string(window_length) +
                      " exceeds sequence length " + std::to_string(sequence_length));
  }
  if (!(c1 > 0.0) || !(c2 > 0.0)) throw ConfigError("ssim constants c1, c2 must be positive");
  if (!(data_range > 0.0)) throw ConfigError("ssim data_range must be positive");
}

double ssim(const Tensor& a, const Tensor& b, const SsimParams& params) {
  require_series(a, "ssim");
  require_same_shape(a, b, "ssim");
  const std::size_t C = a.shape[0];
  const std::size_t T = a.shape[1];
  params.validate(T);
  const std::size_t W = params.window_length;
  const std::size_t windows = T - W + 1;
  const double n = static_cast<double>(W);

  double acc = 0.0;
  for (std::size_t c = 0; c < C; ++c) {
    const double* ra = a.data.data() + c * T;
    const double* rb = b.data.data() + c * T;
    for (std::size_t w = 0; w < windows; ++w) {
      double sum_a = 0.0, sum_b = 0.0;
      for (std::size_t i = 0; i < W; ++i) {
        sum_a += ra[w + i];
        sum_b += rb[w + i];
      }
      const double mu_a = sum_a / n;
      const double mu_b = sum_b / n;
      // biased (1/N) variance and covariance
      double var_a = 0.0, var_b = 0.0, cov = 0.0;
      for (std::size_t i = 0; i < W; ++i) {
        const double da = ra[w + i] - mu_a;
        const double db = rb[w + i] - mu_b;
        var_a += da * da;
        var_b += db * db;
        cov += da * db;
      }
      var_a /= n;
      var_b /= n;
      cov /= n;
      const double num = (2.0 * mu_a * mu_b + params.c1) * (2.0 * cov + params.c2);
      const double den = (mu_a * mu_a + mu_b * mu_b + params.c1) * (var_a + var_b + params.c2);
      acc += num / den;
    }
  }
  return acc / static_cast<double>(C * windows);
}

double ssim(const SignalSequence& a, const SignalSequence& b, const SsimParams& params) {
  return ssim(a.values, b.values, params);
}

double dtw(const Tensor& a, const Tensor& b) {
  require_series(a, "dtw");
  require_series(b, "dtw");
  if (a.shape[0] != b.shape[0]) {
    throw ShapeError("dtw: channel counts differ, " + shape_str(a.shape) + " vs " +
                     shape_str(b.shape));
  }
  const std::size_t C = a.shape[0];
  const std::size_t n = a.shape[1];
  const std::size_t m = b.shape[1];

  auto cost = [&](std::size_t i, std::size_t j) {
    double d = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
      d += std::abs(a.data[c * n + i] - b.data[c * m + j]);
    }
    return d;
  };

  // two-row DP over the full alignment lattice
  std::vector<double> prev(m), curr(m);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      double best;
      if (i == 0 && j == 0) {
        best = 0.0;
      } else if (i == 0) {
        best = curr[j - 1];
      } else if (j == 0) {
        best = prev[0];
      } else {
        best = std::min({prev[j - 1], prev[j], curr[j - 1]});
      }
      curr[j] = cost(i, j) + best;
    }
    std::swap(prev, curr);
  }
  return prev[m - 1];
}

double dtw(const SignalSequence& a, const SignalSequence& b) { return dtw(a.values, b.values); }

double roughness(const Tensor& reference, const Tensor& candidate) {
  require_series(reference, "roughness");
  require_same_shape(reference, candidate, "roughness");
  const std::size_t C = reference.shape[0];
  const std::size_t T = reference.shape[1];
  double denom = 0.0, numer = 0.0;
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t i = 0; i + 1 < T; ++i) {
      denom += std::abs(reference.data[c * T + i + 1] - reference.data[c * T + i]);
      numer += std::abs(candidate.data[c * T + i + 1] - candidate.data[c * T + i]);
    }
  }
  if (denom == 0.0) {
    throw DegenerateReferenceError(
        "roughness reference has zero total variation; the ratio is undefined");
  }
  return numer / denom;
}

double roughness(const SignalSequence& reference, const SignalSequence& candidate) {
  return roughness(reference.values, candidate.values);
}

double composite_msr(const Tensor& x_ref, const Tensor& x_bar, double kappa,
                     const SsimParams& params) {
  if (!(kappa >= 0.0) || !(kappa <= 1.0)) {
    throw ConfigError("composite kappa must lie in [0, 1]");
  }
  return kappa * ssim(x_ref, x_bar, params) + (1.0 - kappa) * roughness(x_ref, x_bar);
}

double composite_msr(const SignalSequence& x_ref, const SignalSequence& x_bar, double kappa,
                     const SsimParams& params) {
  return composite_msr(x_ref.values, x_bar.values, kappa, params);
}

MetricFn make_latent_metric(const std::string& name, const vaegan::VaeGanModel& model,
                            const SignalSequence& x_ref, double kappa,
                            const SsimParams& ssim_params) {
  x_ref.validate();
  if (x_ref.channels() != model.arch.channels || x_ref.length() != model.arch.sequence_length) {
    throw ShapeError("latent metric reference is " + shape_str(x_ref.values.shape) +
                     ", model decodes [" + std::to_string(model.arch.channels) + "x" +
                     std::to_string(model.arch.sequence_length) + "]");
  }

  MetricFn fn;
  fn.name = name;
  const Tensor ref = x_ref.values;
  if (name == "ssim") {
    fn.direction = MetricDirection::HigherIsSimilar;
    ssim_params.validate(model.arch.sequence_length);
    fn.evaluator = [model, ref, ssim_params](const Tensor& z) {
      return ssim(ref, vaegan::decode(model, z), ssim_params);
    };
  } else if (name == "dtw") {
    fn.direction = MetricDirection::LowerIsSimilar;
    fn.evaluator = [model, ref](const Tensor& z) { return dtw(ref, vaegan::decode(model, z)); };
  } else if (name == "roughness") {
    fn.direction = MetricDirection::ScheduleTarget;
    roughness(ref, ref);  // rejects a zero-variation reference up front
    fn.evaluator = [model, ref](const Tensor& z) {
      return roughness(ref, vaegan::decode(model, z));
    };
  } else if (name == "composite") {
    fn.direction = MetricDirection::HigherIsSimilar;
    if (!(kappa >= 0.0) || !(kappa <= 1.0)) {
      throw ConfigError("composite kappa must lie in [0, 1]");
    }
    ssim_params.validate(model.arch.sequence_length);
    roughness(ref, ref);
    fn.evaluator = [model, ref, kappa, ssim_params](const Tensor& z) {
      return composite_msr(ref, vaegan::decode(model, z), kappa, ssim_params);
    };
  } else {
    throw ConfigError("unknown metric '" + name +
                      "' (expected ssim, dtw, roughness, or composite)");
  }
  return fn;
}

}  // namespace stimgen::metrics
