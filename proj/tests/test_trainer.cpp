#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstddef>
#include <sstream>
#include <string>
#include <vector>

#include "stimgen/errors.hpp"
#include "stimgen/rng.hpp"
#include "stimgen/trainer.hpp"
#include "stimgen/vaegan.hpp"

using namespace stimgen;
using namespace stimgen::train;
using vaegan::NetworkId;
using vaegan::VaeGanModel;

namespace {

vaegan::ArchitectureSpec tiny_arch(std::size_t latent_dims = 2) {
  return vaegan::ArchitectureSpec::make(16, 1, latent_dims, {2, 3, 4, 5});
}

SignalSequence random_sequence(Rng& rng, std::size_t C, std::size_t T) {
  Tensor v = Tensor::zeros({C, T});
  for (double& x : v.data) x = rng.uniform(0.05, 0.95);
  return SignalSequence::from_values(std::move(v));
}

io::Corpus tiny_corpus(std::size_t n_train, std::size_t n_test, unsigned seed) {
  io::Corpus corpus;
  Rng rng(seed);
  for (std::size_t i = 0; i < n_train; ++i) {
    corpus.train.push_back(random_sequence(rng, 1, 16));
    corpus.train_files.push_back("train_" + std::to_string(i) + ".csv");
  }
  for (std::size_t i = 0; i < n_test; ++i) {
    corpus.test.push_back(random_sequence(rng, 1, 16));
    corpus.test_files.push_back("test_" + std::to_string(i) + ".csv");
  }
  corpus.scale = io::ScaleManifest::identity(corpus.train.front().channel_names);
  return corpus;
}

Tensor stack(const std::vector<SignalSequence>& seqs) {
  const std::size_t B = seqs.size();
  const std::size_t C = seqs[0].channels();
  const std::size_t T = seqs[0].length();
  Tensor batch = Tensor::zeros({B, C, T});
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t k = 0; k < C * T; ++k) batch.data[b * C * T + k] = seqs[b].values.data[k];
  }
  return batch;
}

std::vector<Tensor> snapshot(const std::vector<NamedTensor>& group) {
  std::vector<Tensor> copy;
  copy.reserve(group.size());
  for (const NamedTensor& nt : group) copy.push_back(nt.value);
  return copy;
}

bool same_params(const std::vector<NamedTensor>& group, const std::vector<Tensor>& snap) {
  if (group.size() != snap.size()) return false;
  for (std::size_t i = 0; i < group.size(); ++i) {
    if (group[i].value.data != snap[i].data) return false;
  }
  return true;
}

TrainConfig tiny_config() {
  TrainConfig config;
  config.beta = 1.0;
  config.gamma = 5.0;
  config.latent_dims = 2;
  config.batch_size = 4;
  config.learning_rate = 1e-3;
  config.max_iterations = 10;
  config.calibration_interval = 10;
  config.averaging_window = 5;
  config.rng_seed = 91;
  return config;
}

}  // namespace

TEST_CASE("a zero learning rate reports losses without touching parameters") {
  auto model = VaeGanModel::init(tiny_arch(), 3);
  Rng data_rng(4);
  std::vector<SignalSequence> seqs;
  for (int i = 0; i < 4; ++i) seqs.push_back(random_sequence(data_rng, 1, 16));
  const Tensor batch = stack(seqs);

  TrainConfig config = tiny_config();
  config.learning_rate = 0.0;
  TrainerState state = TrainerState::make(config);
  Rng rng(7);

  const auto enc0 = snapshot(model.encoder);
  const auto dec0 = snapshot(model.decoder);
  const auto disc0 = snapshot(model.discriminator);

  const StepLosses losses = train_step(model, batch, config, state, rng);

  CHECK(same_params(model.encoder, enc0));
  CHECK(same_params(model.decoder, dec0));
  CHECK(same_params(model.discriminator, disc0));

  CHECK(std::isfinite(losses.enc_objective));
  CHECK(std::isfinite(losses.dec_objective));
  CHECK(std::isfinite(losses.disc_objective));
  const auto& b = losses.bundle;
  CHECK(b.total == config.beta * b.l_prior + config.gamma * b.l_disl + b.l_gan);
  CHECK(b.l_gan <= b.l_gan_star);  // the reconstruction term only subtracts
}

TEST_CASE("updates run encoder, decoder, discriminator in order and stay partitioned") {
  auto model = VaeGanModel::init(tiny_arch(), 11);
  Rng data_rng(12);
  std::vector<SignalSequence> seqs;
  for (int i = 0; i < 4; ++i) seqs.push_back(random_sequence(data_rng, 1, 16));
  const Tensor batch = stack(seqs);

  TrainConfig config = tiny_config();
  TrainerState state = TrainerState::make(config);
  Rng rng(13);

  const auto enc0 = snapshot(model.encoder);
  const auto dec0 = snapshot(model.decoder);
  const auto disc0 = snapshot(model.discriminator);

  std::vector<NetworkId> order;
  std::vector<bool> partition_ok;
  std::vector<Tensor> enc_after_own, dec_after_own;
  StepHooks hooks;
  hooks.after_update = [&](NetworkId id) {
    order.push_back(id);
    switch (id) {
      case NetworkId::Encoder:
        // only the encoder may have moved so far
        partition_ok.push_back(same_params(model.decoder, dec0) &&
                               same_params(model.discriminator, disc0));
        enc_after_own = snapshot(model.encoder);
        break;
      case NetworkId::Decoder:
        // encoder untouched since its own update; discriminator still pristine
        partition_ok.push_back(same_params(model.encoder, enc_after_own) &&
                               same_params(model.discriminator, disc0));
        dec_after_own = snapshot(model.decoder);
        break;
      case NetworkId::Discriminator:
        partition_ok.push_back(same_params(model.encoder, enc_after_own) &&
                               same_params(model.decoder, dec_after_own));
        break;
    }
  };

  train_step(model, batch, config, state, rng, hooks);

  REQUIRE(order.size() == 3);
  CHECK(order[0] == NetworkId::Encoder);
  CHECK(order[1] == NetworkId::Decoder);
  CHECK(order[2] == NetworkId::Discriminator);
  for (bool ok : partition_ok) CHECK(ok);

  // each network did move under its own optimizer
  CHECK_FALSE(same_params(model.encoder, enc0));
  CHECK_FALSE(same_params(model.decoder, dec0));
  CHECK_FALSE(same_params(model.discriminator, disc0));
}

TEST_CASE("a fixed seed reproduces training bit-exactly") {
  const auto corpus = tiny_corpus(24, 6, 21);
  TrainConfig config = tiny_config();
  config.max_iterations = 10;

  auto model_a = VaeGanModel::init(tiny_arch(), 22);
  auto model_b = VaeGanModel::init(tiny_arch(), 22);
  const auto hist_a = train::train(model_a, corpus, config);
  const auto hist_b = train::train(model_b, corpus, config);

  REQUIRE(hist_a.points.size() == hist_b.points.size());
  for (std::size_t i = 0; i < hist_a.points.size(); ++i) {
    CHECK(hist_a.points[i].iteration == hist_b.points[i].iteration);
    CHECK(hist_a.points[i].enc_objective == hist_b.points[i].enc_objective);
    CHECK(hist_a.points[i].dec_objective == hist_b.points[i].dec_objective);
    CHECK(hist_a.points[i].disc_objective == hist_b.points[i].disc_objective);
    CHECK(hist_a.points[i].cal_ssim == hist_b.points[i].cal_ssim);
    CHECK(hist_a.points[i].cal_dtw == hist_b.points[i].cal_dtw);
  }
  for (auto id : {NetworkId::Encoder, NetworkId::Decoder, NetworkId::Discriminator}) {
    const auto& ga = model_a.group(id);
    const auto& gb = model_b.group(id);
    for (std::size_t i = 0; i < ga.size(); ++i) CHECK(ga[i].value.data == gb[i].value.data);
  }
}

TEST_CASE("the decoder objective falls on a frozen discriminator overfit task") {
  // seed chosen so the cold-start game is alive: the untrained decoder emits a
  // near-constant signal, and a zero-bias conv front can return exactly zero
  // features for it under an unlucky draw, killing every decoder gradient
  auto model = VaeGanModel::init(tiny_arch(), 11);
  Rng data_rng(32);
  std::vector<SignalSequence> seqs;
  for (int i = 0; i < 4; ++i) seqs.push_back(random_sequence(data_rng, 1, 16));
  const Tensor batch = stack(seqs);

  TrainConfig config = tiny_config();
  config.learning_rate = 2e-3;
  TrainerState state = TrainerState::make(config);
  Rng rng(33);

  const auto disc_frozen = snapshot(model.discriminator);
  std::vector<double> dec_obj;
  for (int step = 0; step < 50; ++step) {
    const StepLosses losses = train_step(model, batch, config, state, rng);
    dec_obj.push_back(losses.dec_objective);
    // freeze: undo whatever the discriminator phase applied
    for (std::size_t i = 0; i < model.discriminator.size(); ++i) {
      model.discriminator[i].value = disc_frozen[i];
    }
  }

  double head = 0.0;
  double tail = 0.0;
  for (int i = 0; i < 5; ++i) {
    head += dec_obj[static_cast<std::size_t>(i)] / 5.0;
    tail += dec_obj[dec_obj.size() - 5 + static_cast<std::size_t>(i)] / 5.0;
  }
  CHECK(tail < head);
}

TEST_CASE("train reports on the averaging grid with carried calibration values") {
  const auto corpus = tiny_corpus(24, 6, 41);
  TrainConfig config = tiny_config();
  config.max_iterations = 20;
  config.averaging_window = 5;
  config.calibration_interval = 10;

  auto model = VaeGanModel::init(tiny_arch(), 42);
  const auto history = train::train(model, corpus, config);

  REQUIRE(history.points.size() == 5);  // iteration 0 plus four windows
  const std::size_t expected_iters[5] = {0, 5, 10, 15, 20};
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(history.points[i].iteration == expected_iters[i]);
    CHECK(std::isfinite(history.points[i].enc_objective));
    CHECK(std::isfinite(history.points[i].dec_objective));
    CHECK(std::isfinite(history.points[i].disc_objective));
    CHECK(history.points[i].cal_ssim > 0.0);
    CHECK(history.points[i].cal_ssim <= 1.0);
    CHECK(history.points[i].cal_dtw >= 0.0);
  }
  // calibration ran at 0, 10 and 20; the window rows in between carry the
  // previous values unchanged
  CHECK(history.points[1].cal_ssim == history.points[0].cal_ssim);
  CHECK(history.points[1].cal_dtw == history.points[0].cal_dtw);
  CHECK(history.points[3].cal_ssim == history.points[2].cal_ssim);

  for (std::size_t i = 1; i < history.points.size(); ++i) {
    CHECK(history.points[i].iteration > history.points[i - 1].iteration);
  }
}

TEST_CASE("train validates corpus and configuration") {
  auto corpus = tiny_corpus(8, 2, 51);
  TrainConfig config = tiny_config();
  config.batch_size = 4;
  auto model = VaeGanModel::init(tiny_arch(), 52);

  SUBCASE("empty training split") {
    corpus.train.clear();
    CHECK_THROWS_AS(train::train(model, corpus, config), DataError);
  }
  SUBCASE("no calibration sequences") {
    corpus.test.clear();
    CHECK_THROWS_AS(train::train(model, corpus, config), DataError);
  }
  SUBCASE("batch larger than the corpus") {
    config.batch_size = 9;
    CHECK_THROWS_AS(train::train(model, corpus, config), DataError);
  }
  SUBCASE("unknown optimizer") {
    config.optimizer = "adagrad";
    CHECK_THROWS_AS(train::train(model, corpus, config), ConfigError);
  }
  SUBCASE("negative weights") {
    config.beta = -1.0;
    CHECK_THROWS_AS(train::train(model, corpus, config), ConfigError);
  }
  SUBCASE("zero iterations still yields the initial calibration point") {
    config.max_iterations = 0;
    const auto history = train::train(model, corpus, config);
    REQUIRE(history.points.size() == 1);
    CHECK(history.points[0].iteration == 0);
    CHECK(std::isfinite(history.points[0].enc_objective));
    CHECK(history.points[0].cal_ssim > 0.0);
  }
}

TEST_CASE("calibration scores injected identity reconstructions perfectly") {
  auto model = VaeGanModel::init(tiny_arch(), 61);
  Rng rng(62);
  std::vector<SignalSequence> xs;
  for (int i = 0; i < 4; ++i) xs.push_back(random_sequence(rng, 1, 16));

  const CalibrationPoint point = calibration_means(model, xs, xs);
  CHECK(point.ssim_mean == 1.0);
  CHECK(point.dtw_mean == 0.0);
  CHECK(point.disl_mean == 0.0);

  CHECK_THROWS_AS(calibration_means(model, {}, {}), DataError);
  CHECK_THROWS_AS(calibration_means(model, xs, std::vector<SignalSequence>(xs.begin(), xs.end() - 1)),
                  DataError);
  CHECK_THROWS_AS(calibrate(model, {}), DataError);
}

TEST_CASE("calibration metrics improve monotonically as reconstructions approach the target") {
  auto model = VaeGanModel::init(tiny_arch(), 71);
  Rng rng(72);
  std::vector<SignalSequence> xs;
  std::vector<Tensor> noise;
  for (int i = 0; i < 3; ++i) {
    xs.push_back(random_sequence(rng, 1, 16));
    Tensor n = Tensor::zeros({1, 16});
    for (double& v : n.data) v = rng.uniform(-0.2, 0.2);
    noise.push_back(n);
  }

  double prev_ssim = -1.0;
  double prev_dtw = 1e300;
  for (double alpha : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    std::vector<SignalSequence> recon;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      Tensor v = xs[i].values;
      for (std::size_t k = 0; k < v.numel(); ++k) {
        v.data[k] = std::min(1.0, std::max(0.0, v.data[k] + (1.0 - alpha) * noise[i].data[k]));
      }
      recon.push_back(SignalSequence::from_values(std::move(v)));
    }
    const CalibrationPoint point = calibration_means(model, xs, recon);
    CHECK(point.ssim_mean >= prev_ssim);
    CHECK(point.dtw_mean <= prev_dtw);
    prev_ssim = point.ssim_mean;
    prev_dtw = point.dtw_mean;
  }
  CHECK(prev_ssim == 1.0);
  CHECK(prev_dtw == 0.0);
}

TEST_CASE("history CSV carries the documented columns") {
  TrainingHistory history;
  history.points.push_back({0, 1.5, -2.25, -4.0, 0.25, 3.5, 0.125});
  history.points.push_back({5, 1.0, -2.0, -4.5, 0.5, 2.5, 0.0625});

  std::istringstream csv(history.to_csv());
  std::string line;
  std::getline(csv, line);
  CHECK(line == "iteration,enc_obj,dec_obj,disc_obj,cal_ssim,cal_dtw");
  std::getline(csv, line);
  CHECK(line == "0,1.5,-2.25,-4,0.25,3.5");
  std::getline(csv, line);
  CHECK(line == "5,1,-2,-4.5,0.5,2.5");
  CHECK_FALSE(std::getline(csv, line));
}

TEST_CASE("gradient averaging at window one matches the per-batch regime bit-exactly") {
  const auto corpus = tiny_corpus(16, 4, 81);

  TrainConfig per_batch = tiny_config();
  per_batch.max_iterations = 6;
  per_batch.averaging_window = 1;
  per_batch.average_gradients = false;

  TrainConfig windowed = per_batch;
  windowed.average_gradients = true;

  auto model_a = VaeGanModel::init(tiny_arch(), 82);
  auto model_b = VaeGanModel::init(tiny_arch(), 82);
  const auto hist_a = train::train(model_a, corpus, per_batch);
  const auto hist_b = train::train(model_b, corpus, windowed);

  REQUIRE(hist_a.points.size() == hist_b.points.size());
  for (std::size_t i = 0; i < hist_a.points.size(); ++i) {
    CHECK(hist_a.points[i].enc_objective == hist_b.points[i].enc_objective);
    CHECK(hist_a.points[i].cal_ssim == hist_b.points[i].cal_ssim);
  }
  for (auto id : {NetworkId::Encoder, NetworkId::Decoder, NetworkId::Discriminator}) {
    const auto& ga = model_a.group(id);
    const auto& gb = model_b.group(id);
    for (std::size_t i = 0; i < ga.size(); ++i) CHECK(ga[i].value.data == gb[i].value.data);
  }

  SUBCASE("wider windows still report on the grid") {
    TrainConfig wide = tiny_config();
    wide.max_iterations = 6;
    wide.averaging_window = 3;
    wide.average_gradients = true;
    auto model = VaeGanModel::init(tiny_arch(), 83);
    const auto history = train::train(model, corpus, wide);
    REQUIRE(history.points.size() == 3);  // 0, 3, 6
    CHECK(history.points[1].iteration == 3);
    CHECK(history.points[2].iteration == 6);
  }
}

TEST_CASE("alternative optimizers run the same loop") {
  const auto corpus = tiny_corpus(8, 2, 85);
  auto model = VaeGanModel::init(tiny_arch(), 86);

  for (const char* name : {"sgd", "rmsprop"}) {
    TrainConfig config = tiny_config();
    config.optimizer = name;
    config.learning_rate = 1e-3;
    config.max_iterations = 2;
    config.averaging_window = 1;
    auto m = model;
    const auto enc0 = snapshot(m.encoder);
    const auto history = train::train(m, corpus, config);
    CHECK(history.points.size() == 3);
    CHECK_FALSE(same_params(m.encoder, enc0));
    for (const auto& p : history.points) CHECK(std::isfinite(p.enc_objective));
  }
}

TEST_CASE("evaluate_models ranks by reconstruction quality with stable tie-breaks") {
  const auto corpus = tiny_corpus(8, 4, 91);
  auto model = VaeGanModel::init(tiny_arch(), 92);

  SUBCASE("a single model reproduces its calibration row") {
    const auto report = evaluate_models({{"only", model}}, corpus.test);
    REQUIRE(report.size() == 1);
    const auto point = calibrate(model, corpus.test);
    CHECK(report[0].name == "only");
    CHECK(report[0].ssim_mean == point.ssim_mean);
    CHECK(report[0].dtw_mean == point.dtw_mean);
  }
  SUBCASE("identical checkpoints tie and order by name") {
    const auto report = evaluate_models({{"zeta", model}, {"alpha", model}}, corpus.test);
    REQUIRE(report.size() == 2);
    CHECK(report[0].name == "alpha");
    CHECK(report[1].name == "zeta");
    CHECK(report[0].ssim_mean == report[1].ssim_mean);
    CHECK(report[0].dtw_mean == report[1].dtw_mean);
  }
  SUBCASE("incompatible test sequences are rejected") {
    auto wide = VaeGanModel::init(vaegan::ArchitectureSpec::make(32, 1, 2, {2, 3, 4, 5}), 93);
    CHECK_THROWS_AS(evaluate_models({{"wide", wide}}, corpus.test), ShapeError);
  }
  SUBCASE("empty inputs are rejected") {
    CHECK_THROWS_AS(evaluate_models({}, corpus.test), ConfigError);
    CHECK_THROWS_AS(evaluate_models({{"m", model}}, {}), DataError);
  }
}
