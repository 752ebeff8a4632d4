#include "stimgen/arch.hpp"

#include <cstdio>

#include "stimgen/errors.hpp"

namespace stimgen::vaegan {

Activation activation_from_name(const std::string& name) {
  if (name == "relu") return Activation::Relu;
  if (name == "leaky_relu") return Activation::LeakyRelu;
  if (name == "tanh") return Activation::Tanh;
  throw ConfigError("unknown activation '" + name + "' (expected relu, leaky_relu, or tanh)");
}

std::string activation_name(Activation a) {
  switch (a) {
    case Activation::Relu: return "relu";
    case Activation::LeakyRelu: return "leaky_relu";
    case Activation::Tanh: return "tanh";
  }
  throw ConfigError("invalid activation enum value");
}

ArchitectureSpec ArchitectureSpec::make(std::size_t T, std::size_t C, std::size_t D,
                                        const std::array<std::size_t, 4>& stage_channels,
                                        std::size_t kernel, std::size_t stride) {
  if (kernel < stride || (kernel - stride) % 2 != 0) {
    throw ConfigError("kernel " + std::to_string(kernel) + " with stride " + std::to_string(stride) +
                      " admits no symmetric padding; kernel - stride must be even and non-negative");
  }
  ArchitectureSpec a;
  a.sequence_length = T;
  a.channels = C;
  a.latent_dims = D;
  const std::size_t padding = (kernel - stride) / 2;
  for (std::size_t i = 0; i < 4; ++i) {
    a.stages[i] = ConvStage{stage_channels[i], kernel, stride, padding, Activation::Relu};
  }
  a.validate();
  return a;
}

void ArchitectureSpec::validate() const {
  if (sequence_length == 0) throw ConfigError("sequence_length must be positive");
  if (channels == 0) throw ConfigError("channels must be positive");
  if (latent_dims == 0) throw ConfigError("latent_dims must be positive");
  if (feature_layer < 1 || feature_layer > 4) {
    throw ConfigError("feature_layer must be in 1..4, got " + std::to_string(feature_layer));
  }
  if (!(leaky_slope > 0.0) || leaky_slope >= 1.0) {
    throw ConfigError("leaky_slope must lie in (0, 1)");
  }
  for (std::size_t i = 0; i < 4; ++i) {
    const ConvStage& s = stages[i];
    const std::string where = "stage " + std::to_string(i + 1);
    if (s.out_channels == 0) throw ConfigError(where + ": out_channels must be positive");
    if (s.kernel == 0) throw ConfigError(where + ": kernel must be positive");
    if (s.stride == 0) throw ConfigError(where + ": stride must be positive");
  }
  stage_lengths();  // exact-divisibility check
}

std::array<std::size_t, 5> ArchitectureSpec::stage_lengths() const {
  std::array<std::size_t, 5> lengths{};
  lengths[0] = sequence_length;
  for (std::size_t i = 0; i < 4; ++i) {
    const ConvStage& s = stages[i];
    const std::size_t padded = lengths[i] + 2 * s.padding;
    const std::string where = "stage " + std::to_string(i + 1);
    if (padded < s.kernel) {
      throw ConfigError(where + ": kernel " + std::to_string(s.kernel) + " exceeds padded length " +
                        std::to_string(padded));
    }
    // Exact division keeps the transposed stack an exact mirror.
    if ((padded - s.kernel) % s.stride != 0) {
      throw ConfigError(where + ": length " + std::to_string(lengths[i]) + " with kernel " +
                        std::to_string(s.kernel) + ", stride " + std::to_string(s.stride) +
                        ", padding " + std::to_string(s.padding) + " does not divide exactly");
    }
    lengths[i + 1] = (padded - s.kernel) / s.stride + 1;
    if (lengths[i + 1] == 0) throw ConfigError(where + ": output length collapsed to zero");
  }
  return lengths;
}

std::size_t ArchitectureSpec::flat_dim() const {
  return stages[3].out_channels * stage_lengths()[4];
}

Shape ArchitectureSpec::feature_shape(std::size_t batch) const {
  const auto lengths = stage_lengths();
  return Shape{batch, stages[feature_layer - 1].out_channels, lengths[feature_layer]};
}

}  // namespace stimgen::vaegan
