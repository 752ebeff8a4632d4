#pragma once

#include <array>
#include <cstddef>
#include <string>

#include "stimgen/tensor.hpp"

namespace stimgen::vaegan {

enum class Activation { Relu, LeakyRelu, Tanh };

Activation activation_from_name(const std::string& name);
std::string activation_name(Activation a);

struct ConvStage {
  std::size_t out_channels = 0;
  std::size_t kernel = 8;
  std::size_t stride = 2;
  std::size_t padding = 3;
  Activation activation = Activation::Relu;

  bool operator==(const ConvStage&) const = default;
};

// Shared geometry for all three networks. The encoder runs the four stages
// top to bottom; the decoder mirrors them with transposed convolutions; the
// discriminator repeats the encoder stack with a scalar sigmoid head.
//
// Stage lengths must divide exactly (validated) so the decoder reproduces
// the encoder's spatial extents and the output is exactly C x T.
struct ArchitectureSpec {
  std::size_t sequence_length = 512;
  std::size_t channels = 2;
  std::size_t latent_dims = 10;
  std::array<ConvStage, 4> stages{
      ConvStage{32, 8, 2, 3, Activation::Relu},
      ConvStage{64, 8, 2, 3, Activation::Relu},
      ConvStage{128, 8, 2, 3, Activation::Relu},
      ConvStage{256, 8, 2, 3, Activation::Relu},
  };
  std::size_t feature_layer = 3;  // discriminator tap, 1-based
  double leaky_slope = 0.2;

  static ArchitectureSpec make(std::size_t T, std::size_t C, std::size_t D,
                               const std::array<std::size_t, 4>& stage_channels = {32, 64, 128, 256},
                               std::size_t kernel = 8, std::size_t stride = 2);

  void validate() const;

  // L0..L4 along the encoder; throws if any stage fails to divide exactly
  std::array<std::size_t, 5> stage_lengths() const;

  std::size_t flat_dim() const;

  // discriminator feature activations at feature_layer: [batch, C_l, L_l]
  Shape feature_shape(std::size_t batch) const;

  bool operator==(const ArchitectureSpec&) const = default;
};

}  // namespace stimgen::vaegan
