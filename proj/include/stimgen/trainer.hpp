#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "stimgen/optim.hpp"
#include "stimgen/rng.hpp"
#include "stimgen/signal_io.hpp"
#include "stimgen/tensor.hpp"
#include "stimgen/vaegan.hpp"

namespace stimgen::train {

struct TrainConfig {
  double beta = 1.0;
  double gamma = 100.0;
  std::size_t latent_dims = 10;
  std::size_t batch_size = 128;
  std::size_t kernel_size = 8;
  double learning_rate = 2e-4;
  double beta1 = 0.5;
  std::size_t max_iterations = 1000;
  std::size_t calibration_interval = 100;
  std::size_t averaging_window = 5;  // mini-batches per reported history point
  std::uint64_t rng_seed = 1;
  std::string optimizer = "adam";  // adam | sgd | rmsprop
  // Accumulate each phase's gradient over the averaging window and update
  // once per window, instead of updating every mini-batch and smoothing only
  // the reported losses.
  bool average_gradients = false;

  void validate() const;
};

struct TrainerState {
  OptimState encoder;
  OptimState decoder;
  OptimState discriminator;

  static TrainerState make(const TrainConfig& config);
};

struct StepHooks {
  // fires right after each network's optimizer update, in update order
  std::function<void(vaegan::NetworkId)> after_update;
};

struct StepLosses {
  // l_prior / l_disl observed in the encoder phase, gan terms in the
  // discriminator phase
  vaegan::LossBundle bundle;
  double enc_objective = 0.0;   // l_disl + beta * l_prior
  double dec_objective = 0.0;   // gamma * l_disl + l_gan (decoder-phase values)
  double disc_objective = 0.0;  // -l_gan (discriminator-phase value)
};

// One alternating update: encoder, then decoder, then discriminator, each
// descending its own objective with its own optimizer state. batch: [B, C, T].
StepLosses train_step(vaegan::VaeGanModel& model, const Tensor& batch, const TrainConfig& config,
                      TrainerState& state, Rng& rng, const StepHooks& hooks = {});

struct CalibrationPoint {
  double ssim_mean = 0.0;
  double dtw_mean = 0.0;
  double disl_mean = 0.0;
};

// Means over already-paired reconstructions; seam for monotonicity checks.
CalibrationPoint calibration_means(const vaegan::VaeGanModel& model,
                                   const std::vector<SignalSequence>& xs,
                                   const std::vector<SignalSequence>& x_bars);

// Reconstruct every sequence through the encoder mean (deterministic, no
// sampling) and score against the original.
CalibrationPoint calibrate(const vaegan::VaeGanModel& model,
                           const std::vector<SignalSequence>& test_batch);

struct HistoryPoint {
  std::size_t iteration = 0;
  double enc_objective = 0.0;
  double dec_objective = 0.0;
  double disc_objective = 0.0;
  double cal_ssim = 0.0;
  double cal_dtw = 0.0;
  double cal_disl = 0.0;
};

struct TrainingHistory {
  std::vector<HistoryPoint> points;

  // columns: iteration, enc_obj, dec_obj, disc_obj, cal_ssim, cal_dtw
  std::string to_csv() const;
};

// Shuffled mini-batch training to max_iterations (the only stop). Reports a
// history point every averaging_window iterations; calibrates on the first
// test sequences at iteration 0 and every calibration_interval iterations,
// each point carrying the latest calibration values.
TrainingHistory train(vaegan::VaeGanModel& model, const io::Corpus& corpus,
                      const TrainConfig& config, const StepHooks& hooks = {});

struct ModelScore {
  std::string name;
  double ssim_mean = 0.0;
  double dtw_mean = 0.0;
};

// Mean-reconstruction scores over the test set, ranked by SSIM descending,
// ties broken by lower DTW, then by name.
std::vector<ModelScore> evaluate_models(
    const std::vector<std::pair<std::string, vaegan::VaeGanModel>>& models,
    const std::vector<SignalSequence>& test_set);

}  // namespace stimgen::train
