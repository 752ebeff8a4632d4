#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "stimgen/arch.hpp"
#include "stimgen/rng.hpp"
#include "stimgen/tape.hpp"
#include "stimgen/tensor.hpp"

namespace stimgen::vaegan {

enum class NetworkId { Encoder, Decoder, Discriminator };

// Canonical (name, shape) list for one architecture, encoder params first,
// then decoder, then discriminator. Checkpoints and init both follow it, so
// file order is never ambiguous.
std::vector<std::pair<std::string, Shape>> parameter_layout(const ArchitectureSpec& arch);

struct VaeGanModel {
  ArchitectureSpec arch;
  std::vector<NamedTensor> encoder;
  std::vector<NamedTensor> decoder;
  std::vector<NamedTensor> discriminator;

  // Weights ~ N(0, gain^2 * 2/fan_in) per parameter, biases zero, drawn in
  // layout order. fan_in scaling keeps activation magnitude roughly constant
  // through the four-stage stacks.
  static VaeGanModel init(const ArchitectureSpec& arch, std::uint64_t seed, double gain = 1.0);

  std::vector<NamedTensor>& group(NetworkId id);
  const std::vector<NamedTensor>& group(NetworkId id) const;
};

// ---- graph builders ----
// These append to a caller-owned tape so the trainer can compose phases and
// run one backward per objective. Parameter vars parallel the group vector.

struct BoundParams {
  std::vector<Var> vars;
};

BoundParams bind_params(Tape& tape, const std::vector<NamedTensor>& params);

struct EncoderHeads {
  Var mu;
  Var logvar;  // clamped to [-10, 10] inside the graph
};

// x: [B, C, T]
EncoderHeads encoder_graph(Tape& tape, const ArchitectureSpec& arch, const BoundParams& p, Var x);

// z: [B, D] -> [B, C, T], sigmoid output
Var decoder_graph(Tape& tape, const ArchitectureSpec& arch, const BoundParams& p, Var z);

struct DiscriminatorOut {
  Var prob;      // [B, 1], sigmoid
  Var logit;     // [B, 1], pre-sigmoid; GAN losses differentiate through this
  Var features;  // layer-feature_layer activations, [B, C_l, L_l]
};

DiscriminatorOut discriminator_graph(Tape& tape, const ArchitectureSpec& arch, const BoundParams& p,
                                     Var x);

// z = mu + exp(logvar / 2) * eps, eps a leaf of matching shape
Var reparam_graph(Tape& tape, Var mu, Var logvar, Var eps);

// closed-form Gaussian KL against N(0, I), averaged over the batch:
//   -0.5 * sum_d(1 + logvar - mu^2 - exp(logvar)) / B
Var prior_loss_graph(Tape& tape, Var mu, Var logvar);

// mean squared distance between two feature maps (batch and feature mean)
Var feature_match_graph(Tape& tape, Var features_a, Var features_b);

struct GanLossGraph {
  Var star;  // log D(x) + log(1 - D(dec(z_p)))
  Var full;  // star + log(1 - D(dec(enc(x))))
};

// Takes the discriminator logits, not the probabilities: the log terms are
// built with log_sigmoid so their values respect the [1e-7, 1 - 1e-7]
// probability floor while the gradients never vanish, no matter how far
// either player has pushed the head.
GanLossGraph gan_loss_graph(Tape& tape, Var logit_real, Var logit_recon, Var logit_prior);

// ---- value-level API ----
// Single sequences ([C, T] / [D]) promote to batch 1 and squeeze back.

struct EncodeResult {
  Tensor mu;
  Tensor logvar;
};

EncodeResult encode(const VaeGanModel& model, const Tensor& x);

Tensor sample_latent(const Tensor& mu, const Tensor& logvar, Rng& rng);

Tensor decode(const VaeGanModel& model, const Tensor& z);

struct DiscriminateResult {
  Tensor prob;      // scalar tensor for a single input, [B, 1] for a batch
  Tensor features;
};

DiscriminateResult discriminate(const VaeGanModel& model, const Tensor& x);

double loss_prior(const Tensor& mu, const Tensor& logvar);

// discriminator feature-space reconstruction distance between x and x_bar
double loss_disl(const VaeGanModel& model, const Tensor& x, const Tensor& x_bar);

double feature_mse(const Tensor& features_a, const Tensor& features_b);

struct GanLosses {
  double l_gan_star;
  double l_gan;
};

GanLosses loss_gan(const VaeGanModel& model, const Tensor& x, const Tensor& x_recon,
                   const Tensor& x_prior_gen);

// same arithmetic on already-computed discriminator probabilities
GanLosses gan_from_probs(const Tensor& prob_real, const Tensor& prob_recon,
                         const Tensor& prob_prior);

struct LossBundle {
  double l_prior = 0.0;
  double l_disl = 0.0;
  double l_gan_star = 0.0;
  double l_gan = 0.0;
  double total = 0.0;

  // total = beta * l_prior + gamma * l_disl + l_gan, exact over the stored fields
  static LossBundle assemble(double beta, double gamma, double l_prior, double l_disl,
                             double l_gan_star, double l_gan);
};

}  // namespace stimgen::vaegan
