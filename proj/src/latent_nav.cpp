#include "stimgen/latent_nav.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <string>
#include <vector>

#include "stimgen/errors.hpp"
#include "stimgen/signal_io.hpp"
#include "stimgen/svg.hpp"

namespace stimgen::nav {

namespace fs = std::filesystem;

ScheduleShape schedule_shape_from_name(const std::string& name) {
  if (name == "linear") return ScheduleShape::Linear;
  if (name == "sigmoid") return ScheduleShape::Sigmoid;
  if (name == "custom") return ScheduleShape::Custom;
  throw ConfigError("unknown schedule shape '" + name + "', expected linear, sigmoid or custom");
}

std::string schedule_shape_name(ScheduleShape shape) {
  switch (shape) {
    case ScheduleShape::Linear: return "linear";
    case ScheduleShape::Sigmoid: return "sigmoid";
    case ScheduleShape::Custom: return "custom";
  }
  throw ConfigError("invalid schedule shape value");
}

namespace {

void validate_monotone(const std::vector<double>& wps) {
  bool up = true;
  bool down = true;
  for (std::size_t i = 1; i < wps.size(); ++i) {
    if (wps[i] < wps[i - 1]) up = false;
    if (wps[i] > wps[i - 1]) down = false;
  }
  if (!up && !down) throw ConfigError("custom waypoints must be monotone");
}

}  // namespace

std::vector<double> make_waypoints(const WaypointSchedule& schedule) {
  const std::size_t n = schedule.no_wps;
  if (n < 2) throw ConfigError("waypoint schedule needs at least 2 waypoints");

  if (schedule.shape == ScheduleShape::Custom) {
    if (schedule.custom.size() != n) {
      throw ConfigError("custom waypoint list has " + std::to_string(schedule.custom.size()) +
                        " entries, schedule asks for " + std::to_string(n));
    }
    validate_monotone(schedule.custom);
    return schedule.custom;
  }

  const double start = schedule.start_metric;
  const double stop = schedule.stop_metric;
  std::vector<double> wps(n);

  if (schedule.shape == ScheduleShape::Linear) {
    for (std::size_t i = 0; i < n; ++i) {
      wps[i] = start + (stop - start) * (static_cast<double>(i) / static_cast<double>(n - 1));
    }
  } else {
    // logistic over [-5, 5]; mirrored so u[i] + u[n-1-i] = 1 holds exactly
    std::vector<double> u(n);
    for (std::size_t i = 0; i <= (n - 1) / 2; ++i) {
      const double x = -5.0 + 10.0 * static_cast<double>(i) / static_cast<double>(n - 1);
      u[i] = 1.0 / (1.0 + std::exp(-x));
      u[n - 1 - i] = 1.0 - u[i];
    }
    const double span = u[n - 1] - u[0];
    for (std::size_t i = 0; i < n; ++i) {
      wps[i] = start + (stop - start) * ((u[i] - u[0]) / span);
    }
  }

  wps[0] = start;
  wps[n - 1] = stop;
  return wps;
}

std::vector<Tensor> lerp(const Tensor& z0, const Tensor& z_end, std::size_t n) {
  if (n < 2) throw ConfigError("lerp needs at least 2 points");
  require_same_shape(z0, z_end, "lerp endpoints");
  std::vector<Tensor> zs;
  zs.reserve(n);
  zs.push_back(z0);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(n - 1);
    Tensor z = z0;
    for (std::size_t k = 0; k < z.numel(); ++k) {
      z.data[k] = z0.data[k] + t * (z_end.data[k] - z0.data[k]);
    }
    zs.push_back(std::move(z));
  }
  zs.push_back(z_end);  // t=1 must land on z_end bitwise, not within rounding
  return zs;
}

double smoothness_score(const std::vector<double>& achieved, const std::vector<double>& targets) {
  if (achieved.size() != targets.size()) {
    throw ShapeError("smoothness_score needs equal-length inputs, got " +
                     std::to_string(achieved.size()) + " and " + std::to_string(targets.size()));
  }
  if (achieved.size() < 2) throw ShapeError("smoothness_score needs at least 2 waypoints");
  double worst = 0.0;
  for (std::size_t i = 0; i < achieved.size(); ++i) {
    worst = std::max(worst, std::abs(achieved[i] - targets[i]));
  }
  return worst;
}

namespace {

void validate_latent(const Tensor& z, const vaegan::ArchitectureSpec& arch, const char* which) {
  if (z.rank() != 1 || z.shape[0] != arch.latent_dims) {
    throw ShapeError(std::string(which) + " must have shape [" +
                     std::to_string(arch.latent_dims) + "], got " + shape_str(z.shape));
  }
}

// Re-raise with position context, keeping the error category so callers can
// still tell configuration from data from numeric failures.
double eval_metric(const metrics::MetricFn& f_m, const Tensor& z, const std::string& where) {
  const std::string ctx = "metric '" + f_m.name + "' failed at " + where + ": ";
  try {
    return f_m.evaluator(z);
  } catch (const ConfigError& e) {
    throw ConfigError(ctx + e.what());
  } catch (const ShapeError& e) {
    throw ShapeError(ctx + e.what());
  } catch (const NumericError& e) {
    throw NumericError(ctx + e.what());
  } catch (const DegenerateReferenceError& e) {
    throw DegenerateReferenceError(ctx + e.what());
  } catch (const Error& e) {
    throw DataError(ctx + e.what());
  }
}

void validate_options(const MlerpOptions& opts) {
  if (opts.no_wps < 2) throw ConfigError("interpolation needs at least 2 waypoints");
  if (!(opts.s >= 1.0)) throw ConfigError("candidate rate s must be at least 1");
}

std::vector<double> schedule_targets(const MlerpOptions& opts, double m_start, double m_stop) {
  WaypointSchedule schedule;
  schedule.shape = opts.schedule;
  schedule.no_wps = opts.no_wps;
  schedule.start_metric = m_start;
  schedule.stop_metric = m_stop;
  schedule.custom = opts.custom_waypoints;
  return make_waypoints(schedule);
}

void decode_samples(InterpolationResult& result, const vaegan::VaeGanModel& model) {
  result.samples.clear();
  result.samples.reserve(result.zs.size());
  for (const Tensor& z : result.zs) {
    result.samples.push_back(SignalSequence::from_values(vaegan::decode(model, z)));
  }
}

// Shared setup: schedule from the endpoint metrics, latents from lerp,
// metrics evaluated at every point. mlerp continues with the candidate scan;
// the baseline stops here.
InterpolationResult init_result(const Tensor& z0, const Tensor& z_end,
                                const vaegan::VaeGanModel& model, const metrics::MetricFn& f_m,
                                const MlerpOptions& opts, bool* out_degenerate) {
  validate_options(opts);
  validate_latent(z0, model.arch, "z0");
  validate_latent(z_end, model.arch, "z_end");

  const std::size_t n = opts.no_wps;
  InterpolationResult result;
  result.metric_name = f_m.name;

  const double m_start = eval_metric(f_m, z0, "start point");
  const double m_stop = eval_metric(f_m, z_end, "stop point");
  result.target_waypoints = schedule_targets(opts, m_start, m_stop);

  const bool degenerate = z0.data == z_end.data;
  if (out_degenerate) *out_degenerate = degenerate;
  if (degenerate) {
    result.degenerate_endpoints = true;
    result.zs.assign(n, z0);
    result.achieved_metrics.assign(n, m_start);
    result.ts.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      result.ts[i] = static_cast<double>(i) / static_cast<double>(n - 1);
    }
    decode_samples(result, model);
    return result;
  }

  result.zs = lerp(z0, z_end, n);
  result.ts.resize(n);
  result.achieved_metrics.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    result.ts[i] = static_cast<double>(i) / static_cast<double>(n - 1);
    if (i == 0) {
      result.achieved_metrics[i] = m_start;
    } else if (i == n - 1) {
      result.achieved_metrics[i] = m_stop;
    } else {
      result.achieved_metrics[i] =
          eval_metric(f_m, result.zs[i], "initial waypoint " + std::to_string(i));
    }
  }
  return result;
}

void sort_by_t(InterpolationResult& result) {
  const std::size_t n = result.ts.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return result.ts[a] < result.ts[b]; });

  InterpolationResult sorted = result;
  for (std::size_t i = 0; i < n; ++i) {
    sorted.ts[i] = result.ts[order[i]];
    sorted.zs[i] = result.zs[order[i]];
    sorted.target_waypoints[i] = result.target_waypoints[order[i]];
    sorted.achieved_metrics[i] = result.achieved_metrics[order[i]];
  }
  result = std::move(sorted);
}

}  // namespace

InterpolationResult lerp_baseline(const Tensor& z0, const Tensor& z_end,
                                  const vaegan::VaeGanModel& model, const metrics::MetricFn& f_m,
                                  const MlerpOptions& opts) {
  InterpolationResult result = init_result(z0, z_end, model, f_m, opts, nullptr);
  if (result.samples.empty()) decode_samples(result, model);
  return result;
}

InterpolationResult mlerp(const Tensor& z0, const Tensor& z_end, const vaegan::VaeGanModel& model,
                          const metrics::MetricFn& f_m, const MlerpOptions& opts) {
  bool degenerate = false;
  InterpolationResult result = init_result(z0, z_end, model, f_m, opts, &degenerate);
  if (degenerate) return result;  // already decoded

  const std::size_t n = opts.no_wps;
  const auto& targets = result.target_waypoints;
  const std::size_t num_steps =
      static_cast<std::size_t>(std::ceil(opts.s * static_cast<double>(n)));

  for (std::size_t k = 0; k < num_steps; ++k) {
    const double t = static_cast<double>(k) / static_cast<double>(num_steps - 1);
    Tensor z_pos = z0;
    for (std::size_t d = 0; d < z_pos.numel(); ++d) {
      z_pos.data[d] = z0.data[d] + t * (z_end.data[d] - z0.data[d]);
    }
    const double m_pos = eval_metric(f_m, z_pos, "candidate " + std::to_string(k));

    std::size_t wp = 0;
    double best = std::abs(m_pos - targets[0]);
    for (std::size_t j = 1; j < n; ++j) {
      const double dist = std::abs(m_pos - targets[j]);
      if (dist < best) {
        best = dist;
        wp = j;
      }
    }
    if (wp == 0 || wp == n - 1) continue;  // endpoints stay pinned

    const bool take = opts.literal_replacement
                          ? m_pos < result.achieved_metrics[wp]
                          : std::abs(m_pos - targets[wp]) <
                                std::abs(result.achieved_metrics[wp] - targets[wp]);
    if (take) {
      result.zs[wp] = std::move(z_pos);
      result.ts[wp] = t;
      result.achieved_metrics[wp] = m_pos;
    }
  }

  sort_by_t(result);
  decode_samples(result, model);
  return result;
}

std::vector<NeighborhoodEntry> neighborhood_search(const Tensor& z1, double delta,
                                                   const vaegan::VaeGanModel& model,
                                                   const metrics::MetricFn& f_m, double s,
                                                   std::size_t no_wps) {
  validate_latent(z1, model.arch, "z1");
  MlerpOptions opts;
  opts.no_wps = no_wps;
  opts.s = s;

  std::vector<NeighborhoodEntry> entries;
  entries.reserve(z1.shape[0]);
  for (std::size_t d = 0; d < z1.shape[0]; ++d) {
    Tensor z_end = z1;
    z_end.data[d] += delta;

    NeighborhoodEntry entry;
    entry.dimension = d;
    entry.guided = mlerp(z1, z_end, model, f_m, opts);
    entry.baseline = lerp_baseline(z1, z_end, model, f_m, opts);
    entry.guided_smoothness = entry.guided.smoothness();
    entry.baseline_smoothness = entry.baseline.smoothness();
    entries.push_back(std::move(entry));
  }
  return entries;
}

namespace {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::vector<std::string> write_stimulus_set(const InterpolationResult& result,
                                            const std::string& dir, bool plots) {
  if (result.zs.empty()) throw DataError("interpolation result has no points to write");
  const std::size_t n = result.zs.size();
  if (result.samples.size() != n || result.ts.size() != n ||
      result.target_waypoints.size() != n || result.achieved_metrics.size() != n) {
    throw DataError("interpolation result fields disagree on the number of points");
  }

  fs::create_directories(dir);
  std::vector<std::string> written;

  for (std::size_t i = 0; i < n; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "sample_%03zu.csv", i);
    const std::string path = (fs::path(dir) / name).string();
    io::write_sequence_csv(result.samples[i], path);
    written.push_back(path);
  }

  {
    const std::string path = (fs::path(dir) / "manifest.csv").string();
    std::string text = "index,t,target_metric,achieved_metric\n";
    for (std::size_t i = 0; i < n; ++i) {
      text += std::to_string(i) + "," + format_double(result.ts[i]) + "," +
              format_double(result.target_waypoints[i]) + "," +
              format_double(result.achieved_metrics[i]) + "\n";
    }
    FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw DataError("cannot open '" + path + "' for writing");
    std::fwrite(text.data(), 1, text.size(), f);
    std::fclose(f);
    written.push_back(path);
  }

  if (plots) {
    double lo = result.target_waypoints[0];
    double hi = lo;
    for (std::size_t i = 0; i < n; ++i) {
      lo = std::min({lo, result.target_waypoints[i], result.achieved_metrics[i]});
      hi = std::max({hi, result.target_waypoints[i], result.achieved_metrics[i]});
    }
    const double pad = std::max(0.05 * (hi - lo), 1e-3);

    svg::ChartSpec spec;
    spec.title = result.metric_name.empty() ? "metric curve" : result.metric_name + " curve";
    spec.x_label = "waypoint";
    spec.y_label = result.metric_name.empty() ? "metric" : result.metric_name;
    spec.y_min = lo - pad;
    spec.y_max = hi + pad;
    std::vector<svg::Series> series(2);
    series[0].label = "target";
    series[0].ys = result.target_waypoints;
    series[1].label = "achieved";
    series[1].ys = result.achieved_metrics;

    const std::string curve_path = (fs::path(dir) / "metric_curve.svg").string();
    const std::string chart = svg::line_chart(series, spec);
    FILE* f = std::fopen(curve_path.c_str(), "wb");
    if (!f) throw DataError("cannot open '" + curve_path + "' for writing");
    std::fwrite(chart.data(), 1, chart.size(), f);
    std::fclose(f);
    written.push_back(curve_path);

    for (std::size_t i = 0; i < n; ++i) {
      char name[32];
      std::snprintf(name, sizeof(name), "sample_%03zu.svg", i);
      const std::string path = (fs::path(dir) / name).string();

      const SignalSequence& seq = result.samples[i];
      std::vector<svg::Series> chans(seq.channels());
      for (std::size_t c = 0; c < seq.channels(); ++c) {
        chans[c].label = seq.channel_names[c];
        chans[c].ys.resize(seq.length());
        for (std::size_t t = 0; t < seq.length(); ++t) {
          chans[c].ys[t] = seq.values.data[c * seq.length() + t];
        }
      }
      svg::ChartSpec sample_spec;
      char title[64];
      std::snprintf(title, sizeof(title), "sample %03zu (t=%.4f)", i, result.ts[i]);
      sample_spec.title = title;
      sample_spec.x_label = "sample";
      sample_spec.y_label = "value";
      sample_spec.y_min = 0.0;
      sample_spec.y_max = 1.0;

      const std::string sample_chart = svg::line_chart(chans, sample_spec);
      FILE* sf = std::fopen(path.c_str(), "wb");
      if (!sf) throw DataError("cannot open '" + path + "' for writing");
      std::fwrite(sample_chart.data(), 1, sample_chart.size(), sf);
      std::fclose(sf);
      written.push_back(path);
    }
  }

  return written;
}

}  // namespace stimgen::nav
