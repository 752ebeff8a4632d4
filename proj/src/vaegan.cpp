#include "stimgen/vaegan.hpp"

#include <cmath>
#include <utility>

#include "stimgen/errors.hpp"

namespace stimgen::vaegan {

namespace {

constexpr double kLogvarMin = -10.0;
constexpr double kLogvarMax = 10.0;
constexpr double kProbEps = 1e-7;

Var apply_activation(Tape& t, Var h, Activation a, double leaky_slope) {
  switch (a) {
    case Activation::Relu: return t.relu(h);
    case Activation::LeakyRelu: return t.leaky_relu(h, leaky_slope);
    case Activation::Tanh: return t.tanh(h);
  }
  throw ConfigError("invalid activation enum value");
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

// [C,T] promotes to [1,C,T]; [D] to [1,D]. `batched` reports which came in.
Tensor promote_sequence(const Tensor& x, const ArchitectureSpec& arch, const char* op,
                        bool& batched) {
  const Shape want{arch.channels, arch.sequence_length};
  if (x.rank() == 2 && x.shape == want) {
    batched = false;
    Tensor b = x;
    b.shape = Shape{1, arch.channels, arch.sequence_length};
    return b;
  }
  if (x.rank() == 3 && x.shape[0] >= 1 && x.shape[1] == arch.channels &&
      x.shape[2] == arch.sequence_length) {
    batched = true;
    return x;
  }
  throw ShapeError(std::string(op) + ": expected " + shape_str(want) + " or batched [Bx" +
                   std::to_string(arch.channels) + "x" + std::to_string(arch.sequence_length) +
                   "], got " + shape_str(x.shape));
}

Tensor promote_latent(const Tensor& z, const ArchitectureSpec& arch, const char* op,
                      bool& batched) {
  if (z.rank() == 1 && z.shape[0] == arch.latent_dims) {
    batched = false;
    Tensor b = z;
    b.shape = Shape{1, arch.latent_dims};
    return b;
  }
  if (z.rank() == 2 && z.shape[0] >= 1 && z.shape[1] == arch.latent_dims) {
    batched = true;
    return z;
  }
  throw ShapeError(std::string(op) + ": expected [" + std::to_string(arch.latent_dims) +
                   "] or batched [Bx" + std::to_string(arch.latent_dims) + "], got " +
                   shape_str(z.shape));
}

Tensor squeeze_front(Tensor t) {
  Shape s(t.shape.begin() + 1, t.shape.end());
  t.shape = std::move(s);
  return t;
}

double mean_log_clamped(const Tensor& p, bool complement) {
  double acc = 0.0;
  for (double v : p.data) {
    double c = v;
    if (c < kProbEps) c = kProbEps;
    if (c > 1.0 - kProbEps) c = 1.0 - kProbEps;
    acc += std::log(complement ? 1.0 - c : c);
  }
  return acc / static_cast<double>(p.numel());
}

}  // namespace

std::vector<std::pair<std::string, Shape>> parameter_layout(const ArchitectureSpec& arch) {
  arch.validate();
  std::vector<std::pair<std::string, Shape>> out;
  const std::size_t flat = arch.flat_dim();
  const std::size_t D = arch.latent_dims;

  auto conv_stack = [&](const std::string& prefix) {
    std::size_t cin = arch.channels;
    for (std::size_t i = 0; i < 4; ++i) {
      const ConvStage& s = arch.stages[i];
      const std::string base = prefix + ".conv" + std::to_string(i + 1);
      out.emplace_back(base + ".weight", Shape{s.out_channels, cin, s.kernel});
      out.emplace_back(base + ".bias", Shape{s.out_channels});
      cin = s.out_channels;
    }
  };

  conv_stack("enc");
  out.emplace_back("enc.mu.weight", Shape{D, flat});
  out.emplace_back("enc.mu.bias", Shape{D});
  out.emplace_back("enc.logvar.weight", Shape{D, flat});
  out.emplace_back("enc.logvar.bias", Shape{D});

  out.emplace_back("dec.fc.weight", Shape{flat, D});
  out.emplace_back("dec.fc.bias", Shape{flat});
  // deconv j inverts encoder stage 5-j; kernels stay in forward-conv layout
  for (std::size_t j = 0; j < 4; ++j) {
    const std::size_t si = 3 - j;
    const ConvStage& s = arch.stages[si];
    const std::size_t cin_fwd = si == 0 ? arch.channels : arch.stages[si - 1].out_channels;
    const std::string base = "dec.deconv" + std::to_string(j + 1);
    out.emplace_back(base + ".weight", Shape{s.out_channels, cin_fwd, s.kernel});
    out.emplace_back(base + ".bias", Shape{cin_fwd});
  }

  conv_stack("disc");
  out.emplace_back("disc.fc.weight", Shape{1, flat});
  out.emplace_back("disc.fc.bias", Shape{1});
  return out;
}

VaeGanModel VaeGanModel::init(const ArchitectureSpec& arch, std::uint64_t seed, double gain) {
  VaeGanModel m;
  m.arch = arch;
  Rng rng(seed);
  for (const auto& [name, shape] : parameter_layout(arch)) {
    // fan_in = inputs feeding one output element: {out,in} dense weights and
    // {C_out,C_in,K} kernels both reduce to numel/shape[0]. A fixed std
    // attenuates activations ~1000x across the four stages and the game
    // never wakes up, so scale per parameter instead.
    std::size_t fan_in = 1;
    for (std::size_t i = 1; i < shape.size(); ++i) fan_in *= shape[i];
    const double std_dev = gain * std::sqrt(2.0 / static_cast<double>(fan_in));
    Tensor value = ends_with(name, ".bias") ? Tensor::zeros(shape)
                                            : rng.normal_tensor(shape, 0.0, std_dev);
    auto& g = name.rfind("enc.", 0) == 0   ? m.encoder
              : name.rfind("dec.", 0) == 0 ? m.decoder
                                           : m.discriminator;
    g.push_back(NamedTensor{name, std::move(value)});
  }
  return m;
}

std::vector<NamedTensor>& VaeGanModel::group(NetworkId id) {
  switch (id) {
    case NetworkId::Encoder: return encoder;
    case NetworkId::Decoder: return decoder;
    case NetworkId::Discriminator: return discriminator;
  }
  throw ConfigError("invalid network id");
}

const std::vector<NamedTensor>& VaeGanModel::group(NetworkId id) const {
  return const_cast<VaeGanModel*>(this)->group(id);
}

BoundParams bind_params(Tape& tape, const std::vector<NamedTensor>& params) {
  BoundParams p;
  p.vars.reserve(params.size());
  for (const NamedTensor& nt : params) p.vars.push_back(tape.leaf(nt.value));
  return p;
}

// Parameter var indices parallel parameter_layout per group:
//   encoder: conv{i}.weight/bias at 2i-2 / 2i-1, mu at 8/9, logvar at 10/11
//   decoder: fc at 0/1, deconv{j} at 2j / 2j+1
//   discriminator: convs like encoder, fc at 8/9

EncoderHeads encoder_graph(Tape& tape, const ArchitectureSpec& arch, const BoundParams& p,
                           Var x) {
  // copy, not reference: pushing ops can reallocate the tape's node storage
  const Shape xs = tape.value(x).shape;
  if (xs.size() != 3 || xs[1] != arch.channels || xs[2] != arch.sequence_length) {
    throw ShapeError("encoder: expected [Bx" + std::to_string(arch.channels) + "x" +
                     std::to_string(arch.sequence_length) + "], got " + shape_str(xs));
  }
  Var h = x;
  for (std::size_t i = 0; i < 4; ++i) {
    const ConvStage& s = arch.stages[i];
    h = tape.conv1d(h, p.vars[2 * i], s.stride, s.padding);
    h = tape.bias_add(h, p.vars[2 * i + 1]);
    h = apply_activation(tape, h, s.activation, arch.leaky_slope);
  }
  Var flat = tape.reshape(h, Shape{xs[0], arch.flat_dim()});
  Var mu = tape.dense(flat, p.vars[8], p.vars[9]);
  Var logvar = tape.clamp(tape.dense(flat, p.vars[10], p.vars[11]), kLogvarMin, kLogvarMax);
  return {mu, logvar};
}

Var decoder_graph(Tape& tape, const ArchitectureSpec& arch, const BoundParams& p, Var z) {
  const Shape zs = tape.value(z).shape;
  if (zs.size() != 2 || zs[1] != arch.latent_dims) {
    throw ShapeError("decoder: expected [Bx" + std::to_string(arch.latent_dims) + "], got " +
                     shape_str(zs));
  }
  const auto lengths = arch.stage_lengths();
  Var h = tape.dense(z, p.vars[0], p.vars[1]);
  h = apply_activation(tape, h, arch.stages[3].activation, arch.leaky_slope);
  h = tape.reshape(h, Shape{zs[0], arch.stages[3].out_channels, lengths[4]});
  for (std::size_t j = 0; j < 4; ++j) {
    const std::size_t si = 3 - j;  // encoder stage being inverted
    const ConvStage& s = arch.stages[si];
    h = tape.conv1d_transpose(h, p.vars[2 + 2 * j], s.stride, s.padding);
    h = tape.bias_add(h, p.vars[3 + 2 * j]);
    if (j < 3) {
      h = apply_activation(tape, h, arch.stages[si - 1].activation, arch.leaky_slope);
    } else {
      h = tape.sigmoid(h);
    }
  }
  return h;
}

DiscriminatorOut discriminator_graph(Tape& tape, const ArchitectureSpec& arch,
                                     const BoundParams& p, Var x) {
  const Shape xs = tape.value(x).shape;
  if (xs.size() != 3 || xs[1] != arch.channels || xs[2] != arch.sequence_length) {
    throw ShapeError("discriminator: expected [Bx" + std::to_string(arch.channels) + "x" +
                     std::to_string(arch.sequence_length) + "], got " + shape_str(xs));
  }
  Var h = x;
  Var features = x;
  for (std::size_t i = 0; i < 4; ++i) {
    const ConvStage& s = arch.stages[i];
    h = tape.conv1d(h, p.vars[2 * i], s.stride, s.padding);
    h = tape.bias_add(h, p.vars[2 * i + 1]);
    h = apply_activation(tape, h, s.activation, arch.leaky_slope);
    if (i + 1 == arch.feature_layer) features = h;
  }
  Var flat = tape.reshape(h, Shape{xs[0], arch.flat_dim()});
  Var logit = tape.dense(flat, p.vars[8], p.vars[9]);
  Var prob = tape.sigmoid(logit);
  return {prob, logit, features};
}

Var reparam_graph(Tape& tape, Var mu, Var logvar, Var eps) {
  Var std_dev = tape.exp(tape.affine(logvar, 0.5, 0.0));
  return tape.add(mu, tape.mul(std_dev, eps));
}

Var prior_loss_graph(Tape& tape, Var mu, Var logvar) {
  const Shape ms = tape.value(mu).shape;
  if (ms.size() != 2) {
    throw ShapeError("prior loss: expected [BxD] heads, got " + shape_str(ms));
  }
  require_same_shape(tape.value(mu), tape.value(logvar), "prior loss");
  // 1 + logvar - mu^2 - exp(logvar), summed, scaled by -1/2 per batch row
  Var inner = tape.affine(tape.sub(tape.sub(logvar, tape.square(mu)), tape.exp(logvar)), 1.0, 1.0);
  const double scale = -0.5 / static_cast<double>(ms[0]);
  return tape.affine(tape.sum_all(inner), scale, 0.0);
}

Var feature_match_graph(Tape& tape, Var features_a, Var features_b) {
  return tape.mse(features_a, features_b);
}

GanLossGraph gan_loss_graph(Tape& tape, Var logit_real, Var logit_recon, Var logit_prior) {
  // log D = log_sigmoid(logit), log(1 - D) = log_sigmoid(-logit)
  auto mean_log_d = [&](Var l) { return tape.mean_all(tape.log_sigmoid(l, kProbEps)); };
  auto mean_log_one_minus_d = [&](Var l) {
    return tape.mean_all(tape.log_sigmoid(tape.affine(l, -1.0, 0.0), kProbEps));
  };
  Var star = tape.add(mean_log_d(logit_real), mean_log_one_minus_d(logit_prior));
  Var full = tape.add(star, mean_log_one_minus_d(logit_recon));
  return {star, full};
}

EncodeResult encode(const VaeGanModel& model, const Tensor& x) {
  bool batched = false;
  Tensor xb = promote_sequence(x, model.arch, "encode", batched);
  Tape tape;
  BoundParams p = bind_params(tape, model.encoder);
  EncoderHeads heads = encoder_graph(tape, model.arch, p, tape.leaf(std::move(xb)));
  Tensor mu = tape.value(heads.mu);
  Tensor logvar = tape.value(heads.logvar);
  if (!batched) {
    mu = squeeze_front(std::move(mu));
    logvar = squeeze_front(std::move(logvar));
  }
  return {std::move(mu), std::move(logvar)};
}

Tensor sample_latent(const Tensor& mu, const Tensor& logvar, Rng& rng) {
  require_same_shape(mu, logvar, "sample_latent");
  Tensor z = mu;
  for (std::size_t i = 0; i < z.data.size(); ++i) {
    z.data[i] += std::exp(0.5 * logvar.data[i]) * rng.normal();
  }
  return z;
}

Tensor decode(const VaeGanModel& model, const Tensor& z) {
  bool batched = false;
  Tensor zb = promote_latent(z, model.arch, "decode", batched);
  Tape tape;
  BoundParams p = bind_params(tape, model.decoder);
  Var out = decoder_graph(tape, model.arch, p, tape.leaf(std::move(zb)));
  Tensor x = tape.value(out);
  return batched ? x : squeeze_front(std::move(x));
}

DiscriminateResult discriminate(const VaeGanModel& model, const Tensor& x) {
  bool batched = false;
  Tensor xb = promote_sequence(x, model.arch, "discriminate", batched);
  Tape tape;
  BoundParams p = bind_params(tape, model.discriminator);
  DiscriminatorOut out = discriminator_graph(tape, model.arch, p, tape.leaf(std::move(xb)));
  Tensor prob = tape.value(out.prob);
  Tensor features = tape.value(out.features);
  if (!batched) {
    prob = Tensor::scalar(prob.data[0]);
    features = squeeze_front(std::move(features));
  }
  return {std::move(prob), std::move(features)};
}

double loss_prior(const Tensor& mu, const Tensor& logvar) {
  require_same_shape(mu, logvar, "loss_prior");
  if (mu.rank() != 1 && mu.rank() != 2) {
    throw ShapeError("loss_prior: expected [D] or [BxD], got " + shape_str(mu.shape));
  }
  const std::size_t batch = mu.rank() == 2 ? mu.shape[0] : 1;
  double acc = 0.0;
  for (std::size_t i = 0; i < mu.data.size(); ++i) {
    const double m = mu.data[i];
    const double lv = logvar.data[i];
    acc += 1.0 + lv - m * m - std::exp(lv);
  }
  return -0.5 * acc / static_cast<double>(batch);
}

double loss_disl(const VaeGanModel& model, const Tensor& x, const Tensor& x_bar) {
  return feature_mse(discriminate(model, x).features, discriminate(model, x_bar).features);
}

double feature_mse(const Tensor& features_a, const Tensor& features_b) {
  require_same_shape(features_a, features_b, "feature_mse");
  double acc = 0.0;
  for (std::size_t i = 0; i < features_a.data.size(); ++i) {
    const double d = features_a.data[i] - features_b.data[i];
    acc += d * d;
  }
  return acc / static_cast<double>(features_a.numel());
}

GanLosses loss_gan(const VaeGanModel& model, const Tensor& x, const Tensor& x_recon,
                   const Tensor& x_prior_gen) {
  return gan_from_probs(discriminate(model, x).prob, discriminate(model, x_recon).prob,
                        discriminate(model, x_prior_gen).prob);
}

GanLosses gan_from_probs(const Tensor& prob_real, const Tensor& prob_recon,
                         const Tensor& prob_prior) {
  const double star = mean_log_clamped(prob_real, false) + mean_log_clamped(prob_prior, true);
  return {star, star + mean_log_clamped(prob_recon, true)};
}

LossBundle LossBundle::assemble(double beta, double gamma, double l_prior, double l_disl,
                                double l_gan_star, double l_gan) {
  LossBundle b;
  b.l_prior = l_prior;
  b.l_disl = l_disl;
  b.l_gan_star = l_gan_star;
  b.l_gan = l_gan;
  b.total = beta * l_prior + gamma * l_disl + l_gan;
  return b;
}

}  // namespace stimgen::vaegan
