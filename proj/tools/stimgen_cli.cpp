// Command-line front end: corpus synthesis, training, model evaluation, and
// metric-guided latent-space navigation. Every command resolves its options
// from defaults, then an optional --config file, then explicit flags, and
// writes a run manifest that reproduces the run when passed back through
// --config.
#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "stimgen/checkpoint.hpp"
#include "stimgen/errors.hpp"
#include "stimgen/latent_nav.hpp"
#include "stimgen/metrics.hpp"
#include "stimgen/run_config.hpp"
#include "stimgen/signal_io.hpp"
#include "stimgen/svg.hpp"
#include "stimgen/trainer.hpp"
#include "stimgen/vaegan.hpp"

namespace fs = std::filesystem;
using namespace stimgen;
using cli::RunConfig;
using cli::RunManifest;

namespace {

constexpr const char* kManifestName = "run_manifest.txt";

void fail_lines(const std::string& command, const std::string& kind, int code,
                const std::string& message) {
  std::cerr << "stimgen " << command << ": " << message << "\n";
  const nlohmann::json j = {
      {"error",
       {{"kind", kind}, {"command", command}, {"message", message}, {"exit", code}}}};
  std::cerr << j.dump() << "\n";
}

int run_guarded(const std::string& command, const std::function<void()>& body) {
  try {
    body();
    return 0;
  } catch (const ConfigError& e) {
    fail_lines(command, "config", 1, e.what());
    return 1;
  } catch (const NumericError& e) {
    fail_lines(command, "numeric", 3, e.what());
    return 3;
  } catch (const DataError& e) {
    fail_lines(command, "data", 2, e.what());
    return 2;
  } catch (const Error& e) {
    fail_lines(command, "data", 2, e.what());
    return 2;
  } catch (const std::exception& e) {
    fail_lines(command, "internal", 2, e.what());
    return 2;
  }
}

void write_text_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw DataError("short write to '" + path.string() + "'");
}

std::string absolute_str(const std::string& path) {
  return fs::absolute(fs::path(path)).lexically_normal().string();
}

// Every regular file under dir except the manifest itself, checksummed,
// paths relative to dir, sorted for stable manifests.
std::vector<RunManifest::Artifact> collect_artifacts(const fs::path& dir) {
  std::vector<RunManifest::Artifact> artifacts;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const fs::path rel = entry.path().lexically_relative(dir);
    if (rel.filename() == kManifestName) continue;
    artifacts.push_back({rel.generic_string(), cli::crc32_file(entry.path().string())});
  }
  std::sort(artifacts.begin(), artifacts.end(),
            [](const auto& a, const auto& b) { return a.path < b.path; });
  return artifacts;
}

void require_set(const std::string& command, const std::string& flag, const std::string& value) {
  if (value.empty()) {
    throw ConfigError(command + ": --" + flag + " is required (flag or config key '" + flag +
                      "')");
  }
}

// A manifest written by one command must not silently drive another.
void check_command_stamp(const RunConfig& cfg, const std::string& command) {
  if (!cfg.command.empty() && cfg.command != command) {
    throw ConfigError("config was recorded by command '" + cfg.command +
                      "', refusing to run '" + command + "' from it");
  }
}

std::vector<std::pair<std::string, std::string>> train_keys(const RunConfig& cfg) {
  const train::TrainConfig& t = cfg.train;
  std::string stages;
  for (std::size_t i = 0; i < 4; ++i) {
    stages += (i ? "," : "") + std::to_string(cfg.stage_channels[i]);
  }
  return {
      {"beta", cli::format_double(t.beta)},
      {"gamma", cli::format_double(t.gamma)},
      {"latent_dims", std::to_string(t.latent_dims)},
      {"batch_size", std::to_string(t.batch_size)},
      {"kernel_size", std::to_string(t.kernel_size)},
      {"learning_rate", cli::format_double(t.learning_rate)},
      {"beta1", cli::format_double(t.beta1)},
      {"max_iterations", std::to_string(t.max_iterations)},
      {"calibration_interval", std::to_string(t.calibration_interval)},
      {"averaging_window", std::to_string(t.averaging_window)},
      {"rng_seed", std::to_string(t.rng_seed)},
      {"optimizer", t.optimizer},
      {"average_gradients", t.average_gradients ? "true" : "false"},
      {"stage_channels", stages},
  };
}

void write_manifest(const fs::path& path, RunManifest manifest) {
  write_text_file(path, manifest.render());
}

// ---- commands ----

void cmd_synth(const RunConfig& cfg) {
  require_set("synth", "out", cfg.out);
  const io::Corpus corpus = io::synth_corpus(cfg.n, cfg.len, cfg.seed);
  io::save_corpus(corpus, cfg.out);

  RunManifest m;
  m.command = "synth";
  m.keys = {{"n", std::to_string(cfg.n)},
            {"len", std::to_string(cfg.len)},
            {"seed", std::to_string(cfg.seed)},
            {"out", absolute_str(cfg.out)}};
  m.artifacts = collect_artifacts(cfg.out);
  write_manifest(fs::path(cfg.out) / kManifestName, std::move(m));
  std::cout << "synth: " << corpus.train.size() << " train + " << corpus.test.size()
            << " test sequences of " << cfg.len << " samples -> " << cfg.out << "\n";
}

void cmd_train(const RunConfig& cfg) {
  require_set("train", "data", cfg.data);
  require_set("train", "out", cfg.out);
  cfg.train.validate();

  const io::Corpus corpus = io::load_corpus(cfg.data);
  if (corpus.train.empty()) {
    throw DataError("corpus at '" + cfg.data + "' has an empty training split");
  }

  const vaegan::ArchitectureSpec arch =
      vaegan::ArchitectureSpec::make(corpus.length(), corpus.channels(),
                                     cfg.train.latent_dims, cfg.stage_channels,
                                     cfg.train.kernel_size);
  vaegan::VaeGanModel model = vaegan::VaeGanModel::init(arch, cfg.train.rng_seed);
  const train::TrainingHistory history = train::train(model, corpus, cfg.train);

  const fs::path out(cfg.out);
  fs::create_directories(out);
  vaegan::save_checkpoint(model, (out / "model.ckpt").string());
  write_text_file(out / "history.csv", history.to_csv());

  svg::Series ssim_series{"reconstruction ssim", {}};
  for (const auto& p : history.points) ssim_series.ys.push_back(p.cal_ssim);
  svg::ChartSpec chart;
  chart.title = "training calibration";
  chart.x_label = "history point";
  chart.y_label = "ssim";
  if (!history.points.empty()) {
    const auto& last = history.points.back();
    chart.annotations = {"final ssim " + cli::format_double(last.cal_ssim),
                         "final dtw " + cli::format_double(last.cal_dtw)};
  }
  write_text_file(out / "history.svg", svg::line_chart({ssim_series}, chart));

  RunManifest m;
  m.command = "train";
  m.keys = train_keys(cfg);
  m.keys.emplace_back("data", absolute_str(cfg.data));
  m.keys.emplace_back("out", absolute_str(cfg.out));
  m.artifacts = collect_artifacts(out);
  write_manifest(out / kManifestName, std::move(m));

  if (!history.points.empty()) {
    const auto& last = history.points.back();
    std::cout << "train: " << cfg.train.max_iterations << " iterations, calibration ssim "
              << cli::format_double(last.cal_ssim) << ", dtw "
              << cli::format_double(last.cal_dtw) << " -> " << cfg.out << "\n";
  }
}

void cmd_eval(const RunConfig& cfg) {
  if (cfg.ckpts.empty()) {
    throw ConfigError("eval: --ckpts needs at least one checkpoint (config key 'ckpts')");
  }
  require_set("eval", "data", cfg.data);
  require_set("eval", "report", cfg.report);

  const io::Corpus corpus = io::load_corpus(cfg.data);
  if (corpus.test.empty()) {
    throw DataError("corpus at '" + cfg.data + "' has an empty test split");
  }

  std::vector<std::pair<std::string, vaegan::VaeGanModel>> models;
  models.reserve(cfg.ckpts.size());
  for (const std::string& path : cfg.ckpts) {
    models.emplace_back(fs::path(path).stem().string(), vaegan::load_checkpoint(path));
  }
  const std::vector<train::ModelScore> scores = train::evaluate_models(models, corpus.test);

  std::string csv = "name,ssim_mean,dtw_mean\n";
  for (const train::ModelScore& s : scores) {
    csv += s.name + "," + cli::format_double(s.ssim_mean) + "," +
           cli::format_double(s.dtw_mean) + "\n";
  }
  write_text_file(cfg.report, csv);

  std::string joined;
  for (const std::string& path : cfg.ckpts) joined += (joined.empty() ? "" : ",") + absolute_str(path);
  RunManifest m;
  m.command = "eval";
  m.keys = {{"ckpts", joined},
            {"data", absolute_str(cfg.data)},
            {"report", absolute_str(cfg.report)}};
  m.artifacts = {{fs::path(cfg.report).filename().generic_string(),
                  cli::crc32_file(cfg.report)}};
  write_manifest(cfg.report + ".manifest", std::move(m));

  for (const train::ModelScore& s : scores) {
    std::cout << "eval: " << s.name << " ssim " << cli::format_double(s.ssim_mean) << " dtw "
              << cli::format_double(s.dtw_mean) << "\n";
  }
}

// Shared by interp and neighbors: load a reference sequence and locate it in
// latent space through the encoder mean.
SignalSequence load_reference(const std::string& path, const vaegan::VaeGanModel& model) {
  return io::read_sequence_csv(path, model.arch.channels);
}

// flag shape only; endpoint consistency needs metric evaluations and is
// checked separately once those exist
void check_direction_flag(const RunConfig& cfg) {
  if (cfg.metric != "roughness") {
    if (!cfg.direction.empty()) {
      throw ConfigError("--direction only applies to the roughness metric");
    }
    return;
  }
  if (cfg.direction.empty()) {
    throw ConfigError(
        "roughness runs must state --direction increasing or decreasing; it is "
        "checked against the endpoint scores, not inferred from them");
  }
  if (cfg.direction != "increasing" && cfg.direction != "decreasing") {
    throw ConfigError("--direction must be increasing or decreasing, got '" + cfg.direction +
                      "'");
  }
}

void check_roughness_direction(const RunConfig& cfg, double start_metric, double stop_metric) {
  if (cfg.metric != "roughness") return;
  const bool rising = stop_metric > start_metric;
  if (start_metric == stop_metric) {
    throw ConfigError("roughness endpoints score identically (" +
                      cli::format_double(start_metric) + "); no direction is satisfiable");
  }
  if (rising != (cfg.direction == "increasing")) {
    throw ConfigError("--direction " + cfg.direction + " contradicts the endpoints: start " +
                      cli::format_double(start_metric) + ", stop " +
                      cli::format_double(stop_metric));
  }
}

void cmd_interp(const RunConfig& cfg) {
  require_set("interp", "ckpt", cfg.ckpt);
  require_set("interp", "from", cfg.from);
  require_set("interp", "to", cfg.to);
  require_set("interp", "out", cfg.out);
  if (cfg.wps < 2) throw ConfigError("interp: wps must be at least 2");
  if (!(cfg.s > 0.0)) throw ConfigError("interp: s must be positive");
  check_direction_flag(cfg);

  const vaegan::VaeGanModel model = vaegan::load_checkpoint(cfg.ckpt);
  const SignalSequence from_seq = load_reference(cfg.from, model);
  const SignalSequence to_seq = load_reference(cfg.to, model);
  const Tensor z0 = vaegan::encode(model, from_seq.values).mu;
  const Tensor z_end = vaegan::encode(model, to_seq.values).mu;

  // the decoded stop point is the reference every candidate is scored against
  const SignalSequence x_ref =
      SignalSequence::from_values(vaegan::decode(model, z_end), to_seq.channel_names);
  const metrics::MetricFn f_m =
      metrics::make_latent_metric(cfg.metric, model, x_ref, cfg.kappa);

  check_roughness_direction(cfg, f_m.evaluator(z0), f_m.evaluator(z_end));

  nav::MlerpOptions opts;
  opts.no_wps = cfg.wps;
  opts.s = cfg.s;
  opts.schedule = nav::schedule_shape_from_name(cfg.schedule);
  const nav::InterpolationResult result = nav::mlerp(z0, z_end, model, f_m, opts);
  nav::write_stimulus_set(result, cfg.out, true);

  RunManifest m;
  m.command = "interp";
  m.keys = {{"ckpt", absolute_str(cfg.ckpt)},
            {"from", absolute_str(cfg.from)},
            {"to", absolute_str(cfg.to)},
            {"metric", cfg.metric},
            {"schedule", cfg.schedule},
            {"wps", std::to_string(cfg.wps)},
            {"s", cli::format_double(cfg.s)},
            {"kappa", cli::format_double(cfg.kappa)},
            {"out", absolute_str(cfg.out)}};
  if (!cfg.direction.empty()) m.keys.emplace_back("direction", cfg.direction);
  m.artifacts = collect_artifacts(cfg.out);
  write_manifest(fs::path(cfg.out) / kManifestName, std::move(m));

  std::cout << "interp: " << result.samples.size() << " waypoints, metric " << cfg.metric
            << ", schedule adherence " << cli::format_double(result.smoothness()) << " -> "
            << cfg.out << "\n";
  if (result.degenerate_endpoints) {
    std::cout << "interp: endpoints encode to the same latent point; the path is a single "
                 "fixed point\n";
  }
}

void cmd_neighbors(const RunConfig& cfg) {
  require_set("neighbors", "ckpt", cfg.ckpt);
  require_set("neighbors", "ref", cfg.ref);
  require_set("neighbors", "out", cfg.out);
  if (cfg.wps < 2) throw ConfigError("neighbors: wps must be at least 2");
  if (!(cfg.s > 0.0)) throw ConfigError("neighbors: s must be positive");

  const vaegan::VaeGanModel model = vaegan::load_checkpoint(cfg.ckpt);
  const SignalSequence ref_seq = load_reference(cfg.ref, model);
  const Tensor z1 = vaegan::encode(model, ref_seq.values).mu;
  const SignalSequence x_ref =
      SignalSequence::from_values(vaegan::decode(model, z1), ref_seq.channel_names);
  const metrics::MetricFn f_m = metrics::make_latent_metric("ssim", model, x_ref);

  const std::vector<nav::NeighborhoodEntry> entries =
      nav::neighborhood_search(z1, cfg.delta, model, f_m, cfg.s, cfg.wps);

  const fs::path out(cfg.out);
  fs::create_directories(out);
  std::string csv = "dimension,guided_smoothness,baseline_smoothness\n";
  for (const nav::NeighborhoodEntry& e : entries) {
    char dirname[32];
    std::snprintf(dirname, sizeof dirname, "dim_%02zu", e.dimension);
    nav::write_stimulus_set(e.guided, (out / dirname).string(), false);
    csv += std::to_string(e.dimension) + "," + cli::format_double(e.guided_smoothness) + "," +
           cli::format_double(e.baseline_smoothness) + "\n";
  }
  write_text_file(out / "smoothness.csv", csv);

  RunManifest m;
  m.command = "neighbors";
  m.keys = {{"ckpt", absolute_str(cfg.ckpt)},
            {"ref", absolute_str(cfg.ref)},
            {"delta", cli::format_double(cfg.delta)},
            {"s", cli::format_double(cfg.s)},
            {"wps", std::to_string(cfg.wps)},
            {"out", absolute_str(cfg.out)}};
  m.artifacts = collect_artifacts(out);
  write_manifest(out / kManifestName, std::move(m));

  for (const nav::NeighborhoodEntry& e : entries) {
    std::cout << "neighbors: dim " << e.dimension << " guided "
              << cli::format_double(e.guided_smoothness) << " baseline "
              << cli::format_double(e.baseline_smoothness) << "\n";
  }
}

// ---- option plumbing ----

// Tracks which flags the user actually set, so flag > config file > default
// resolves in that order.
struct FlagLayer {
  std::vector<std::pair<CLI::Option*, std::function<void(RunConfig&)>>> binds;
  std::string config_path;

  void bind(CLI::Option* opt, std::function<void(RunConfig&)> apply) {
    binds.emplace_back(opt, std::move(apply));
  }

  void resolve(RunConfig& cfg, const std::string& command) const {
    if (!config_path.empty()) {
      for (const auto& [key, value] : cli::load_config_file(config_path)) {
        cfg.apply(key, value);
      }
      check_command_stamp(cfg, command);
    }
    for (const auto& [opt, apply] : binds) {
      if (opt->count() > 0) apply(cfg);
    }
    cfg.command = command;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"generative time-series stimulus toolkit"};
  app.require_subcommand(1);

  struct Pending {
    std::string command;
    std::function<void()> body;
  } pending;

  RunConfig cfg;

  // synth
  {
    auto* sub = app.add_subcommand("synth", "write a synthetic two-channel corpus");
    auto layer = std::make_shared<FlagLayer>();
    sub->add_option("--config", layer->config_path, "config file");
    auto n = std::make_shared<std::size_t>(cfg.n);
    auto len = std::make_shared<std::size_t>(cfg.len);
    auto seed = std::make_shared<std::uint64_t>(cfg.seed);
    auto out = std::make_shared<std::string>();
    layer->bind(sub->add_option("--n", *n, "sequence count"),
                [n](RunConfig& c) { c.n = *n; });
    layer->bind(sub->add_option("--len", *len, "samples per sequence"),
                [len](RunConfig& c) { c.len = *len; });
    layer->bind(sub->add_option("--seed", *seed, "corpus seed"),
                [seed](RunConfig& c) { c.seed = *seed; });
    layer->bind(sub->add_option("--out", *out, "output directory"),
                [out](RunConfig& c) { c.out = *out; });
    sub->callback([&pending, &cfg, layer] {
      pending = {"synth", [&cfg, layer] {
                   layer->resolve(cfg, "synth");
                   cmd_synth(cfg);
                 }};
    });
  }

  // train
  {
    auto* sub = app.add_subcommand("train", "train a model on a corpus");
    auto layer = std::make_shared<FlagLayer>();
    sub->add_option("--config", layer->config_path, "config file with training keys");
    auto data = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    layer->bind(sub->add_option("--data", *data, "corpus directory"),
                [data](RunConfig& c) { c.data = *data; });
    layer->bind(sub->add_option("--out", *out, "output directory"),
                [out](RunConfig& c) { c.out = *out; });
    sub->callback([&pending, &cfg, layer] {
      pending = {"train", [&cfg, layer] {
                   layer->resolve(cfg, "train");
                   cmd_train(cfg);
                 }};
    });
  }

  // eval
  {
    auto* sub = app.add_subcommand("eval", "rank checkpoints by test-set reconstruction");
    auto layer = std::make_shared<FlagLayer>();
    sub->add_option("--config", layer->config_path, "config file");
    auto ckpts = std::make_shared<std::vector<std::string>>();
    auto data = std::make_shared<std::string>();
    auto report = std::make_shared<std::string>();
    layer->bind(sub->add_option("--ckpts", *ckpts, "checkpoints to compare")->expected(-1),
                [ckpts](RunConfig& c) { c.ckpts = *ckpts; });
    layer->bind(sub->add_option("--data", *data, "corpus directory"),
                [data](RunConfig& c) { c.data = *data; });
    layer->bind(sub->add_option("--report", *report, "ranked csv path"),
                [report](RunConfig& c) { c.report = *report; });
    sub->callback([&pending, &cfg, layer] {
      pending = {"eval", [&cfg, layer] {
                   layer->resolve(cfg, "eval");
                   cmd_eval(cfg);
                 }};
    });
  }

  // interp
  {
    auto* sub = app.add_subcommand("interp", "metric-guided interpolation between references");
    auto layer = std::make_shared<FlagLayer>();
    sub->add_option("--config", layer->config_path, "config file");
    auto ckpt = std::make_shared<std::string>();
    auto from = std::make_shared<std::string>();
    auto to = std::make_shared<std::string>();
    auto metric = std::make_shared<std::string>(cfg.metric);
    auto schedule = std::make_shared<std::string>(cfg.schedule);
    auto direction = std::make_shared<std::string>();
    auto wps = std::make_shared<std::size_t>(cfg.wps);
    auto s = std::make_shared<double>(cfg.s);
    auto kappa = std::make_shared<double>(cfg.kappa);
    auto out = std::make_shared<std::string>();
    layer->bind(sub->add_option("--ckpt", *ckpt, "model checkpoint"),
                [ckpt](RunConfig& c) { c.ckpt = *ckpt; });
    layer->bind(sub->add_option("--from", *from, "start reference csv"),
                [from](RunConfig& c) { c.from = *from; });
    layer->bind(sub->add_option("--to", *to, "stop reference csv"),
                [to](RunConfig& c) { c.to = *to; });
    layer->bind(sub->add_option("--metric", *metric, "ssim | dtw | roughness | composite"),
                [metric](RunConfig& c) { c.metric = *metric; });
    layer->bind(sub->add_option("--schedule", *schedule, "linear | sigmoid"),
                [schedule](RunConfig& c) { c.schedule = *schedule; });
    layer->bind(sub->add_option("--direction", *direction,
                                "roughness schedule direction: increasing | decreasing"),
                [direction](RunConfig& c) { c.direction = *direction; });
    layer->bind(sub->add_option("--wps", *wps, "waypoint count"),
                [wps](RunConfig& c) { c.wps = *wps; });
    layer->bind(sub->add_option("--s", *s, "scan density per waypoint"),
                [s](RunConfig& c) { c.s = *s; });
    layer->bind(sub->add_option("--kappa", *kappa, "composite metric weight"),
                [kappa](RunConfig& c) { c.kappa = *kappa; });
    layer->bind(sub->add_option("--out", *out, "output directory"),
                [out](RunConfig& c) { c.out = *out; });
    sub->callback([&pending, &cfg, layer] {
      pending = {"interp", [&cfg, layer] {
                   layer->resolve(cfg, "interp");
                   cmd_interp(cfg);
                 }};
    });
  }

  // neighbors
  {
    auto* sub = app.add_subcommand("neighbors", "guided walks along each latent dimension");
    auto layer = std::make_shared<FlagLayer>();
    sub->add_option("--config", layer->config_path, "config file");
    auto ckpt = std::make_shared<std::string>();
    auto ref = std::make_shared<std::string>();
    auto delta = std::make_shared<double>(cfg.delta);
    auto s = std::make_shared<double>(cfg.s);
    auto wps = std::make_shared<std::size_t>(cfg.wps);
    auto out = std::make_shared<std::string>();
    layer->bind(sub->add_option("--ckpt", *ckpt, "model checkpoint"),
                [ckpt](RunConfig& c) { c.ckpt = *ckpt; });
    layer->bind(sub->add_option("--ref", *ref, "centre reference csv"),
                [ref](RunConfig& c) { c.ref = *ref; });
    layer->bind(sub->add_option("--delta", *delta, "per-dimension step"),
                [delta](RunConfig& c) { c.delta = *delta; });
    layer->bind(sub->add_option("--s", *s, "scan density per waypoint"),
                [s](RunConfig& c) { c.s = *s; });
    layer->bind(sub->add_option("--wps", *wps, "waypoint count"),
                [wps](RunConfig& c) { c.wps = *wps; });
    layer->bind(sub->add_option("--out", *out, "output directory"),
                [out](RunConfig& c) { c.out = *out; });
    sub->callback([&pending, &cfg, layer] {
      pending = {"neighbors", [&cfg, layer] {
                   layer->resolve(cfg, "neighbors");
                   cmd_neighbors(cfg);
                 }};
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    fail_lines(e.get_name(), "usage", 1, e.what());
    return 1;
  }

  return run_guarded(pending.command, pending.body);
}
