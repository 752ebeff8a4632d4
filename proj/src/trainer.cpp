#include "stimgen/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <string>
#include <vector>

#include "stimgen/errors.hpp"
#include "stimgen/metrics.hpp"
#include "stimgen/tape.hpp"

namespace stimgen::train {

using vaegan::NetworkId;
using vaegan::VaeGanModel;

void TrainConfig::validate() const {
  if (beta < 0.0 || gamma < 0.0) throw ConfigError("beta and gamma must be non-negative");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (averaging_window < 1) throw ConfigError("averaging_window must be at least 1");
  if (calibration_interval < 1) throw ConfigError("calibration_interval must be at least 1");
  if (learning_rate < 0.0) throw ConfigError("learning_rate must be non-negative");
  if (beta1 < 0.0 || beta1 >= 1.0) throw ConfigError("beta1 must lie in [0, 1)");
  if (optimizer != "adam" && optimizer != "sgd" && optimizer != "rmsprop") {
    throw ConfigError("unknown optimizer '" + optimizer + "', expected adam, sgd or rmsprop");
  }
}

TrainerState TrainerState::make(const TrainConfig& config) {
  config.validate();
  auto one = [&]() {
    if (config.optimizer == "sgd") return OptimState::sgd(config.learning_rate);
    if (config.optimizer == "rmsprop") return OptimState::rmsprop(config.learning_rate);
    return OptimState::adam(config.learning_rate, config.beta1);
  };
  TrainerState state;
  state.encoder = one();
  state.decoder = one();
  state.discriminator = one();
  return state;
}

namespace {

void require_finite(double v, const char* term, const char* phase) {
  if (!std::isfinite(v)) {
    throw NumericError(std::string(term) + " is not finite in the " + phase + " update");
  }
}

void accumulate(std::vector<Tensor>& acc, const Tape& tape, const std::vector<Var>& vars) {
  if (acc.empty()) {
    acc.reserve(vars.size());
    for (Var v : vars) acc.push_back(tape.grad(v));
    return;
  }
  for (std::size_t i = 0; i < vars.size(); ++i) {
    const Tensor& g = tape.grad(vars[i]);
    for (std::size_t k = 0; k < g.numel(); ++k) acc[i].data[k] += g.data[k];
  }
}

void scale(std::vector<Tensor>& acc, double factor) {
  for (Tensor& t : acc) {
    for (double& v : t.data) v *= factor;
  }
}

// One full alternating update over a window of mini-batches. Each phase
// walks every batch, averages its gradient over the window, and applies a
// single optimizer step before the next phase begins, so later phases see
// the earlier phases' updates exactly as in the one-batch regime.
StepLosses run_window(VaeGanModel& model, const std::vector<Tensor>& batches,
                      const TrainConfig& config, TrainerState& state, Rng& rng,
                      const StepHooks& hooks) {
  const auto& arch = model.arch;
  const double inv = 1.0 / static_cast<double>(batches.size());
  StepLosses out;

  double lp_mean = 0.0;
  double ld_enc_mean = 0.0;

  // ---- encoder phase: descend l_disl + beta * l_prior ----
  {
    std::vector<Tensor> acc;
    for (const Tensor& batch : batches) {
      const std::size_t B = batch.shape[0];
      Tape tape;
      const auto enc_b = vaegan::bind_params(tape, model.encoder);
      const auto dec_b = vaegan::bind_params(tape, model.decoder);
      const auto disc_b = vaegan::bind_params(tape, model.discriminator);
      const Var x = tape.leaf(batch);

      const auto heads = vaegan::encoder_graph(tape, arch, enc_b, x);
      const Var eps = tape.leaf(rng.normal_tensor({B, arch.latent_dims}));
      const Var z = vaegan::reparam_graph(tape, heads.mu, heads.logvar, eps);
      const Var x_recon = vaegan::decoder_graph(tape, arch, dec_b, z);
      const auto d_real = vaegan::discriminator_graph(tape, arch, disc_b, x);
      const auto d_recon = vaegan::discriminator_graph(tape, arch, disc_b, x_recon);

      const Var l_disl = vaegan::feature_match_graph(tape, d_real.features, d_recon.features);
      const Var l_prior = vaegan::prior_loss_graph(tape, heads.mu, heads.logvar);
      const Var objective = tape.add(l_disl, tape.affine(l_prior, config.beta, 0.0));

      const double lp = tape.value(l_prior).item();
      const double ld = tape.value(l_disl).item();
      require_finite(lp, "l_prior", "encoder");
      require_finite(ld, "l_disl", "encoder");
      lp_mean += lp * inv;
      ld_enc_mean += ld * inv;

      tape.backward(objective);
      accumulate(acc, tape, enc_b.vars);
    }
    scale(acc, inv);
    optim_step(model.encoder, acc, state.encoder);
    if (hooks.after_update) hooks.after_update(NetworkId::Encoder);
  }
  out.enc_objective = ld_enc_mean + config.beta * lp_mean;

  // ---- decoder phase: descend gamma * l_disl + l_gan ----
  // Pushing l_gan down drives the discriminator toward calling the decoder's
  // outputs real. z and z_p are value-level leaves; gradients w.r.t. decoder
  // parameters do not depend on the encoder subgraph, so it is not rebuilt
  // here.
  {
    std::vector<Tensor> acc;
    double ld_mean = 0.0;
    double gan_mean = 0.0;
    for (const Tensor& batch : batches) {
      const std::size_t B = batch.shape[0];
      const auto enc_out = vaegan::encode(model, batch);
      const Tensor z_val = vaegan::sample_latent(enc_out.mu, enc_out.logvar, rng);
      const Tensor zp_val = rng.normal_tensor({B, arch.latent_dims});

      Tape tape;
      const auto dec_b = vaegan::bind_params(tape, model.decoder);
      const auto disc_b = vaegan::bind_params(tape, model.discriminator);
      const Var x = tape.leaf(batch);
      const Var z = tape.leaf(z_val);
      const Var zp = tape.leaf(zp_val);

      const Var x_recon = vaegan::decoder_graph(tape, arch, dec_b, z);
      const Var x_prior = vaegan::decoder_graph(tape, arch, dec_b, zp);
      const auto d_real = vaegan::discriminator_graph(tape, arch, disc_b, x);
      const auto d_recon = vaegan::discriminator_graph(tape, arch, disc_b, x_recon);
      const auto d_prior = vaegan::discriminator_graph(tape, arch, disc_b, x_prior);

      const Var l_disl = vaegan::feature_match_graph(tape, d_real.features, d_recon.features);
      const auto gan = vaegan::gan_loss_graph(tape, d_real.logit, d_recon.logit, d_prior.logit);
      const Var objective = tape.add(tape.affine(l_disl, config.gamma, 0.0), gan.full);

      const double ld = tape.value(l_disl).item();
      const double lg = tape.value(gan.full).item();
      require_finite(ld, "l_disl", "decoder");
      require_finite(lg, "l_gan", "decoder");
      ld_mean += ld * inv;
      gan_mean += lg * inv;

      tape.backward(objective);
      accumulate(acc, tape, dec_b.vars);
    }
    scale(acc, inv);
    optim_step(model.decoder, acc, state.decoder);
    if (hooks.after_update) hooks.after_update(NetworkId::Decoder);
    out.dec_objective = config.gamma * ld_mean + gan_mean;
  }

  // ---- discriminator phase: descend -l_gan ----
  // The classifier's proper objective: raising l_gan separates real from
  // generated and is self-limiting once the batch is classified, unlike
  // descending l_gan itself, which has no interior optimum and just inflates
  // the head without bound. Reconstructions and prior samples enter as value
  // leaves; the discriminator is the only network under gradient here.
  {
    std::vector<Tensor> acc;
    double star_mean = 0.0;
    double gan_mean = 0.0;
    for (const Tensor& batch : batches) {
      const std::size_t B = batch.shape[0];
      const auto enc_out = vaegan::encode(model, batch);
      const Tensor z_val = vaegan::sample_latent(enc_out.mu, enc_out.logvar, rng);
      const Tensor zp_val = rng.normal_tensor({B, arch.latent_dims});
      const Tensor x_recon_val = vaegan::decode(model, z_val);
      const Tensor x_prior_val = vaegan::decode(model, zp_val);

      Tape tape;
      const auto disc_b = vaegan::bind_params(tape, model.discriminator);
      const Var x = tape.leaf(batch);
      const Var xr = tape.leaf(x_recon_val);
      const Var xp = tape.leaf(x_prior_val);

      const auto d_real = vaegan::discriminator_graph(tape, arch, disc_b, x);
      const auto d_recon = vaegan::discriminator_graph(tape, arch, disc_b, xr);
      const auto d_prior = vaegan::discriminator_graph(tape, arch, disc_b, xp);
      const auto gan = vaegan::gan_loss_graph(tape, d_real.logit, d_recon.logit, d_prior.logit);

      const double star = tape.value(gan.star).item();
      const double lg = tape.value(gan.full).item();
      require_finite(lg, "l_gan", "discriminator");
      star_mean += star * inv;
      gan_mean += lg * inv;

      tape.backward(tape.affine(gan.full, -1.0, 0.0));
      accumulate(acc, tape, disc_b.vars);
    }
    scale(acc, inv);
    optim_step(model.discriminator, acc, state.discriminator);
    if (hooks.after_update) hooks.after_update(NetworkId::Discriminator);
    out.disc_objective = -gan_mean;
    out.bundle = vaegan::LossBundle::assemble(config.beta, config.gamma, lp_mean, ld_enc_mean,
                                              star_mean, gan_mean);
  }

  return out;
}

Tensor stack_batch(const std::vector<SignalSequence>& seqs, const std::vector<std::size_t>& order,
                   std::size_t offset, std::size_t batch_size) {
  const std::size_t C = seqs[order[offset]].channels();
  const std::size_t T = seqs[order[offset]].length();
  Tensor batch = Tensor::zeros({batch_size, C, T});
  for (std::size_t b = 0; b < batch_size; ++b) {
    const Tensor& v = seqs[order[offset + b]].values;
    std::copy(v.data.begin(), v.data.end(), batch.data.begin() + static_cast<long>(b * C * T));
  }
  return batch;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

StepLosses train_step(VaeGanModel& model, const Tensor& batch, const TrainConfig& config,
                      TrainerState& state, Rng& rng, const StepHooks& hooks) {
  config.validate();
  if (batch.rank() != 3) {
    throw ShapeError("train_step expects a [B, C, T] batch, got " + shape_str(batch.shape));
  }
  return run_window(model, {batch}, config, state, rng, hooks);
}

CalibrationPoint calibration_means(const VaeGanModel& model, const std::vector<SignalSequence>& xs,
                                   const std::vector<SignalSequence>& x_bars) {
  if (xs.empty()) throw DataError("calibration batch is empty");
  if (xs.size() != x_bars.size()) {
    throw DataError("calibration needs one reconstruction per sequence");
  }
  CalibrationPoint point;
  const double inv = 1.0 / static_cast<double>(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    point.ssim_mean += metrics::ssim(xs[i], x_bars[i]) * inv;
    point.dtw_mean += metrics::dtw(xs[i], x_bars[i]) * inv;
    point.disl_mean += vaegan::loss_disl(model, xs[i].values, x_bars[i].values) * inv;
  }
  return point;
}

CalibrationPoint calibrate(const VaeGanModel& model,
                           const std::vector<SignalSequence>& test_batch) {
  if (test_batch.empty()) throw DataError("calibration batch is empty");
  std::vector<SignalSequence> recon;
  recon.reserve(test_batch.size());
  for (const SignalSequence& seq : test_batch) {
    const auto heads = vaegan::encode(model, seq.values);
    recon.push_back(SignalSequence::from_values(vaegan::decode(model, heads.mu),
                                                seq.channel_names));
  }
  return calibration_means(model, test_batch, recon);
}

std::string TrainingHistory::to_csv() const {
  std::string text = "iteration,enc_obj,dec_obj,disc_obj,cal_ssim,cal_dtw\n";
  for (const HistoryPoint& p : points) {
    text += std::to_string(p.iteration) + "," + fmt(p.enc_objective) + "," +
            fmt(p.dec_objective) + "," + fmt(p.disc_objective) + "," + fmt(p.cal_ssim) + "," +
            fmt(p.cal_dtw) + "\n";
  }
  return text;
}

TrainingHistory train(VaeGanModel& model, const io::Corpus& corpus, const TrainConfig& config,
                      const StepHooks& hooks) {
  config.validate();
  if (corpus.train.empty()) throw DataError("training corpus is empty");
  if (corpus.test.empty()) throw DataError("no held-out calibration sequences");
  if (config.batch_size > corpus.train.size()) {
    throw DataError("batch size " + std::to_string(config.batch_size) +
                    " exceeds the training corpus size " + std::to_string(corpus.train.size()));
  }

  TrainerState state = TrainerState::make(config);
  Rng rng(config.rng_seed);

  const std::size_t cal_n = std::min<std::size_t>(config.batch_size, corpus.test.size());
  const std::vector<SignalSequence> cal_batch(corpus.test.begin(),
                                              corpus.test.begin() + static_cast<long>(cal_n));

  TrainingHistory history;
  CalibrationPoint cal = calibrate(model, cal_batch);

  // iteration-0 reference point: deterministic dry scoring of the untrained
  // model through the mean reconstruction (the prior-sample slot reuses it)
  {
    HistoryPoint p0;
    p0.iteration = 0;
    double lp = 0.0;
    double ld = 0.0;
    double lg = 0.0;
    const double inv = 1.0 / static_cast<double>(cal_n);
    for (std::size_t i = 0; i < cal_n; ++i) {
      const Tensor& x = cal_batch[i].values;
      const auto heads = vaegan::encode(model, x);
      const Tensor x_bar = vaegan::decode(model, heads.mu);
      lp += vaegan::loss_prior(heads.mu, heads.logvar) * inv;
      ld += vaegan::loss_disl(model, x, x_bar) * inv;
      lg += vaegan::loss_gan(model, x, x_bar, x_bar).l_gan * inv;
    }
    p0.enc_objective = ld + config.beta * lp;
    p0.dec_objective = config.gamma * ld + lg;
    p0.disc_objective = -lg;
    p0.cal_ssim = cal.ssim_mean;
    p0.cal_dtw = cal.dtw_mean;
    p0.cal_disl = cal.disl_mean;
    history.points.push_back(p0);
  }

  std::vector<std::size_t> order(corpus.train.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = corpus.train.size();  // forces a shuffle up front

  const std::size_t window = config.average_gradients ? config.averaging_window : 1;

  std::size_t iteration = 0;
  double enc_acc = 0.0;
  double dec_acc = 0.0;
  double disc_acc = 0.0;
  std::size_t acc_count = 0;

  while (iteration < config.max_iterations) {
    const std::size_t todo = std::min(window, config.max_iterations - iteration);
    std::vector<Tensor> batches;
    batches.reserve(todo);
    for (std::size_t b = 0; b < todo; ++b) {
      if (cursor + config.batch_size > corpus.train.size()) {
        rng.shuffle(order);  // new epoch; partial remainders are dropped
        cursor = 0;
      }
      batches.push_back(stack_batch(corpus.train, order, cursor, config.batch_size));
      cursor += config.batch_size;
    }

    const std::size_t prev_iteration = iteration;
    const StepLosses losses = run_window(model, batches, config, state, rng, hooks);
    iteration += todo;

    enc_acc += losses.enc_objective * static_cast<double>(todo);
    dec_acc += losses.dec_objective * static_cast<double>(todo);
    disc_acc += losses.disc_objective * static_cast<double>(todo);
    acc_count += todo;

    if (iteration / config.calibration_interval > prev_iteration / config.calibration_interval) {
      cal = calibrate(model, cal_batch);
    }

    if (iteration % config.averaging_window == 0) {
      HistoryPoint p;
      p.iteration = iteration;
      p.enc_objective = enc_acc / static_cast<double>(acc_count);
      p.dec_objective = dec_acc / static_cast<double>(acc_count);
      p.disc_objective = disc_acc / static_cast<double>(acc_count);
      p.cal_ssim = cal.ssim_mean;
      p.cal_dtw = cal.dtw_mean;
      p.cal_disl = cal.disl_mean;
      history.points.push_back(p);
      enc_acc = dec_acc = disc_acc = 0.0;
      acc_count = 0;
    }
  }

  return history;
}

std::vector<ModelScore> evaluate_models(
    const std::vector<std::pair<std::string, VaeGanModel>>& models,
    const std::vector<SignalSequence>& test_set) {
  if (models.empty()) throw ConfigError("evaluate_models needs at least one checkpoint");
  if (test_set.empty()) throw DataError("test set is empty");

  std::vector<ModelScore> scores;
  scores.reserve(models.size());
  for (const auto& [name, model] : models) {
    for (const SignalSequence& seq : test_set) {
      if (seq.channels() != model.arch.channels || seq.length() != model.arch.sequence_length) {
        throw ShapeError("model '" + name + "' expects [" + std::to_string(model.arch.channels) +
                         "x" + std::to_string(model.arch.sequence_length) +
                         "] sequences, test set has [" + std::to_string(seq.channels()) + "x" +
                         std::to_string(seq.length()) + "]");
      }
    }
    const CalibrationPoint point = calibrate(model, test_set);
    scores.push_back({name, point.ssim_mean, point.dtw_mean});
  }

  std::sort(scores.begin(), scores.end(), [](const ModelScore& a, const ModelScore& b) {
    if (a.ssim_mean != b.ssim_mean) return a.ssim_mean > b.ssim_mean;
    if (a.dtw_mean != b.dtw_mean) return a.dtw_mean < b.dtw_mean;
    return a.name < b.name;
  });
  return scores;
}

}  // namespace stimgen::train
