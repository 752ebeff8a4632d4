#pragma once

#include <cstdint>
#include <vector>

#include "stimgen/tensor.hpp"

namespace stimgen {

// Handle into a Tape. Only valid for the tape that created it.
struct Var {
  std::uint32_t id = UINT32_MAX;
};

// Reverse-mode tape. Operations append nodes, so node order is already a
// topological order and backward() is a single reverse sweep. One tape per
// forward pass; tapes are not reused across optimizer steps.
//
// All math is double precision. Forward evaluation is deterministic: the
// same inputs produce bit-identical outputs.
class Tape {
 public:
  Var leaf(Tensor value);

  const Tensor& value(Var v) const { return nodes_[v.id].value; }

  // Gradient of the last backward() loss w.r.t. v. Querying a node the
  // sweep never reached yields zeros and raises the detached flag.
  const Tensor& grad(Var v) const;
  bool reached_by_backward(Var v) const { return v.id < reached_.size() && reached_[v.id]; }
  bool detached_grad_queried() const { return detached_query_; }

  // x: [B,Cin,L], kernel: [Cout,Cin,K], zero padding both sides.
  // Output length is (L + 2*padding - K) / stride + 1, floor division.
  // Rank-1 x and kernel are promoted to a single batch and channel.
  Var conv1d(Var x, Var kernel, std::size_t stride = 1, std::size_t padding = 0);

  // Adjoint of conv1d with the same kernel layout: maps [B,Cout,L'] back to
  // [B,Cin,L] with L = (L'-1)*stride + K - 2*padding.
  Var conv1d_transpose(Var y, Var kernel, std::size_t stride = 1, std::size_t padding = 0);

  // x: [B,N], w: [M,N], b: [M] -> [B,M]
  Var dense(Var x, Var w, Var b);

  // x: [B,C,L], b: [C], broadcast over batch and length
  Var bias_add(Var x, Var b);

  Var relu(Var x);
  Var leaky_relu(Var x, double slope);
  Var tanh(Var x);
  Var sigmoid(Var x);
  Var exp(Var x);
  Var log(Var x);  // inputs must be positive; pair with clamp
  Var clamp(Var x, double lo, double hi);

  // log(sigmoid(x)) with the probability floored to [eps, 1-eps] before the
  // log, so a saturated head cannot emit -inf. The gradient is the exact
  // logsigmoid derivative sigmoid(-x) everywhere, including past the floor;
  // a zero-gradient floor would freeze adversarial training the moment one
  // side saturates.
  Var log_sigmoid(Var x, double eps);

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var affine(Var x, double scale, double shift);
  Var square(Var x);

  Var sum_all(Var x);   // -> scalar
  Var mean_all(Var x);  // -> scalar
  Var mse(Var a, Var b);  // mean squared difference -> scalar

  Var reshape(Var x, Shape s);

  // Seeds d(loss)/d(loss) = 1 and sweeps the recorded graph in reverse.
  // loss must be a scalar node.
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }

 private:
  enum class Op : std::uint8_t {
    Leaf, Conv, ConvT, Dense, BiasAdd, Relu, LeakyRelu, Tanh, Sigmoid,
    Exp, Log, Clamp, LogSigmoid, Add, Sub, Mul, Affine, Square, SumAll,
    MeanAll, Mse, Reshape,
  };

  struct Node {
    Tensor value;
    Tensor grad;
    Op op = Op::Leaf;
    std::uint32_t a = UINT32_MAX;
    std::uint32_t b = UINT32_MAX;
    std::uint32_t c = UINT32_MAX;
    std::uint32_t stride = 1;
    std::uint32_t padding = 0;
    double p0 = 0.0;
    double p1 = 0.0;
    bool squeeze = false;  // conv rank-1 promotion applied
  };

  Var push(Node n);
  void backprop(std::uint32_t id);
  Node& node(Var v) { return nodes_[v.id]; }

  std::vector<Node> nodes_;
  std::vector<std::uint8_t> reached_;
  mutable bool detached_query_ = false;
};

// Shared length arithmetic, also used by the architecture validator.
std::size_t conv_output_length(std::size_t L, std::size_t K, std::size_t stride,
                               std::size_t padding);
std::size_t conv_transpose_output_length(std::size_t Lp, std::size_t K, std::size_t stride,
                                         std::size_t padding);

}  // namespace stimgen
