#pragma once

#include <string>
#include <vector>

#include "stimgen/metrics.hpp"
#include "stimgen/signal.hpp"
#include "stimgen/tensor.hpp"
#include "stimgen/vaegan.hpp"

namespace stimgen::nav {

enum class ScheduleShape { Linear, Sigmoid, Custom };

ScheduleShape schedule_shape_from_name(const std::string& name);
std::string schedule_shape_name(ScheduleShape shape);

struct WaypointSchedule {
  ScheduleShape shape = ScheduleShape::Linear;
  std::size_t no_wps = 10;
  double start_metric = 0.0;
  double stop_metric = 1.0;
  std::vector<double> custom;  // the waypoints themselves when shape == Custom
};

// Endpoints are assigned exactly; interior points are monotone between them.
std::vector<double> make_waypoints(const WaypointSchedule& schedule);

// zs[i] = z0 + (i / (n-1)) * (z_end - z0)
std::vector<Tensor> lerp(const Tensor& z0, const Tensor& z_end, std::size_t n);

// max |achieved[i] - targets[i]|; lower means tighter schedule adherence
double smoothness_score(const std::vector<double>& achieved, const std::vector<double>& targets);

struct MlerpOptions {
  std::size_t no_wps = 10;
  double s = 15.0;  // candidates per waypoint; num_steps = ceil(s * no_wps)
  ScheduleShape schedule = ScheduleShape::Linear;
  std::vector<double> custom_waypoints;  // used when schedule == Custom
  // replace on "candidate metric < stored metric" instead of
  // "candidate closer to the waypoint target"; kept for comparison runs
  bool literal_replacement = false;
};

struct InterpolationResult {
  std::vector<Tensor> zs;
  std::vector<double> ts;  // position of each z along [z0, z_end], ascending
  std::vector<double> target_waypoints;
  std::vector<double> achieved_metrics;
  std::vector<SignalSequence> samples;  // decoded zs
  std::string metric_name;
  bool degenerate_endpoints = false;

  double smoothness() const { return smoothness_score(achieved_metrics, target_waypoints); }
};

// Metric-guided interpolation: scan uniformly spaced candidates along the
// straight line from z0 to z_end, keep for every waypoint the candidate
// whose metric lands closest to that waypoint's target, endpoints pinned,
// then order the kept positions by t. The schedule runs from f_m(z0) to
// f_m(z_end).
InterpolationResult mlerp(const Tensor& z0, const Tensor& z_end,
                          const vaegan::VaeGanModel& model, const metrics::MetricFn& f_m,
                          const MlerpOptions& opts = {});

// The naive baseline under the same schedule: latents from lerp, no search.
InterpolationResult lerp_baseline(const Tensor& z0, const Tensor& z_end,
                                  const vaegan::VaeGanModel& model, const metrics::MetricFn& f_m,
                                  const MlerpOptions& opts = {});

struct NeighborhoodEntry {
  std::size_t dimension = 0;
  InterpolationResult guided;
  InterpolationResult baseline;
  double guided_smoothness = 0.0;
  double baseline_smoothness = 0.0;
};

// For every latent dimension d: interpolate from z1 to z1 + delta * e_d,
// guided and baseline, under the shared metric.
std::vector<NeighborhoodEntry> neighborhood_search(const Tensor& z1, double delta,
                                                   const vaegan::VaeGanModel& model,
                                                   const metrics::MetricFn& f_m, double s = 30.0,
                                                   std::size_t no_wps = 10);

// sample_###.csv per decoded point, manifest.csv (index, t, target,
// achieved), and when plots is set one metric_curve.svg plus sample_###.svg
// per point. Returns the paths written.
std::vector<std::string> write_stimulus_set(const InterpolationResult& result,
                                            const std::string& dir, bool plots = true);

}  // namespace stimgen::nav
