#include "stimgen/tape.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "stimgen/errors.hpp"

namespace stimgen {

namespace {

// y[b,co,lp] (+)= sum_{ci,k} x[b,ci,lp*stride-padding+k] * w[co,ci,k]
// The k range is clipped so out-of-bounds input positions act as zeros.
void conv_apply(const double* x, std::size_t B, std::size_t Cin, std::size_t L,
                const double* w, std::size_t Cout, std::size_t K,
                std::size_t stride, std::size_t padding,
                double* y, std::size_t Lp, bool accumulate) {
  for (std::size_t b = 0; b < B; ++b) {
    const double* xb = x + b * Cin * L;
    double* yb = y + b * Cout * Lp;
    for (std::size_t co = 0; co < Cout; ++co) {
      const double* wco = w + co * Cin * K;
      double* yrow = yb + co * Lp;
      for (std::size_t lp = 0; lp < Lp; ++lp) {
        const std::ptrdiff_t start =
            static_cast<std::ptrdiff_t>(lp * stride) - static_cast<std::ptrdiff_t>(padding);
        const std::size_t k0 = start < 0 ? static_cast<std::size_t>(-start) : 0;
        const std::ptrdiff_t kmax = static_cast<std::ptrdiff_t>(L) - start;
        const std::size_t k1 =
            kmax <= 0 ? 0 : std::min(K, static_cast<std::size_t>(kmax));
        double acc = 0.0;
        for (std::size_t ci = 0; ci < Cin; ++ci) {
          const double* xrow = xb + ci * L;
          const double* wk = wco + ci * K;
          for (std::size_t k = k0; k < k1; ++k) {
            acc += xrow[start + static_cast<std::ptrdiff_t>(k)] * wk[k];
          }
        }
        if (accumulate) {
          yrow[lp] += acc;
        } else {
          yrow[lp] = acc;
        }
      }
    }
  }
}

// out[b,ci,lp*stride-padding+k] += in[b,co,lp] * w[co,ci,k]
void conv_scatter(const double* in, std::size_t B, std::size_t Cout, std::size_t Lp,
                  const double* w, std::size_t Cin, std::size_t K,
                  std::size_t stride, std::size_t padding,
                  double* out, std::size_t L) {
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t co = 0; co < Cout; ++co) {
      const double* inrow = in + (b * Cout + co) * Lp;
      const double* wco = w + co * Cin * K;
      for (std::size_t lp = 0; lp < Lp; ++lp) {
        const double g = inrow[lp];
        if (g == 0.0) continue;
        const std::ptrdiff_t start =
            static_cast<std::ptrdiff_t>(lp * stride) - static_cast<std::ptrdiff_t>(padding);
        const std::size_t k0 = start < 0 ? static_cast<std::size_t>(-start) : 0;
        const std::ptrdiff_t kmax = static_cast<std::ptrdiff_t>(L) - start;
        const std::size_t k1 =
            kmax <= 0 ? 0 : std::min(K, static_cast<std::size_t>(kmax));
        for (std::size_t ci = 0; ci < Cin; ++ci) {
          double* orow = out + (b * Cin + ci) * L;
          const double* wk = wco + ci * K;
          for (std::size_t k = k0; k < k1; ++k) {
            orow[start + static_cast<std::ptrdiff_t>(k)] += g * wk[k];
          }
        }
      }
    }
  }
}

// gw[co,ci,k] += sum_{b,lp} up[b,co,lp] * x[b,ci,lp*stride-padding+k]
void conv_kernel_grad(const double* x, std::size_t B, std::size_t Cin, std::size_t L,
                      const double* up, std::size_t Cout, std::size_t Lp,
                      std::size_t K, std::size_t stride, std::size_t padding,
                      double* gw) {
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t co = 0; co < Cout; ++co) {
      const double* uprow = up + (b * Cout + co) * Lp;
      for (std::size_t ci = 0; ci < Cin; ++ci) {
        const double* xrow = x + (b * Cin + ci) * L;
        double* gwrow = gw + (co * Cin + ci) * K;
        for (std::size_t lp = 0; lp < Lp; ++lp) {
          const double g = uprow[lp];
          if (g == 0.0) continue;
          const std::ptrdiff_t start =
              static_cast<std::ptrdiff_t>(lp * stride) - static_cast<std::ptrdiff_t>(padding);
          const std::size_t k0 = start < 0 ? static_cast<std::size_t>(-start) : 0;
          const std::ptrdiff_t kmax = static_cast<std::ptrdiff_t>(L) - start;
          const std::size_t k1 =
              kmax <= 0 ? 0 : std::min(K, static_cast<std::size_t>(kmax));
          for (std::size_t k = k0; k < k1; ++k) {
            gwrow[k] += g * xrow[start + static_cast<std::ptrdiff_t>(k)];
          }
        }
      }
    }
  }
}

// Logical conv dims with rank-1 promotion: a rank-1 tensor is one batch of
// one channel.
void conv_dims(const Tensor& x, const Tensor& w,
               std::size_t& B, std::size_t& Cin, std::size_t& L,
               std::size_t& Cout, std::size_t& K, bool transpose) {
  if (x.rank() == 1) {
    B = 1;
    Cin = 1;
    L = x.shape[0];
  } else if (x.rank() == 3) {
    B = x.shape[0];
    Cin = x.shape[1];
    L = x.shape[2];
  } else {
    throw ShapeError(std::string(transpose ? "conv1d_transpose" : "conv1d") +
                     ": input must be rank 1 or 3, got " + shape_str(x.shape));
  }
  if (w.rank() == 1) {
    Cout = 1;
    K = w.shape[0];
    if (Cin != 1) {
      throw ShapeError("conv kernel " + shape_str(w.shape) + " has 1 input channel, input " +
                       shape_str(x.shape) + " has " + std::to_string(Cin));
    }
  } else if (w.rank() == 3) {
    Cout = w.shape[0];
    K = w.shape[2];
    // transpose maps Cout-channel input back to Cin-channel output
    const std::size_t expect = transpose ? w.shape[0] : w.shape[1];
    if (expect != Cin) {
      throw ShapeError(std::string(transpose ? "conv1d_transpose" : "conv1d") + ": kernel " +
                       shape_str(w.shape) + " does not match input channels of " +
                       shape_str(x.shape));
    }
  } else {
    throw ShapeError("conv kernel must be rank 1 or 3, got " + shape_str(w.shape));
  }
  if (transpose) {
    // for the transpose, the "Cin/Cout" names follow the forward conv
    Cout = w.rank() == 3 ? w.shape[0] : 1;
  }
}

}  // namespace

std::size_t conv_output_length(std::size_t L, std::size_t K, std::size_t stride,
                               std::size_t padding) {
  if (stride == 0) throw ConfigError("conv stride must be >= 1");
  if (K > L + 2 * padding) {
    throw ShapeError("conv kernel length " + std::to_string(K) +
                     " exceeds padded input length " + std::to_string(L + 2 * padding));
  }
  return (L + 2 * padding - K) / stride + 1;
}

std::size_t conv_transpose_output_length(std::size_t Lp, std::size_t K, std::size_t stride,
                                         std::size_t padding) {
  if (stride == 0) throw ConfigError("conv stride must be >= 1");
  const std::size_t grown = (Lp - 1) * stride + K;
  if (Lp == 0 || grown <= 2 * padding) {
    throw ShapeError("conv1d_transpose output would be empty for input length " +
                     std::to_string(Lp));
  }
  return grown - 2 * padding;
}

Var Tape::push(Node n) {
  n.grad = Tensor::zeros(n.value.shape);
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::leaf(Tensor value) {
  Node n;
  n.op = Op::Leaf;
  n.value = std::move(value);
  return push(std::move(n));
}

const Tensor& Tape::grad(Var v) const {
  if (!reached_by_backward(v)) detached_query_ = true;
  return nodes_[v.id].grad;
}

Var Tape::conv1d(Var x, Var kernel, std::size_t stride, std::size_t padding) {
  const Tensor& xv = value(x);
  const Tensor& wv = value(kernel);
  std::size_t B, Cin, L, Cout, K;
  conv_dims(xv, wv, B, Cin, L, Cout, K, false);
  const std::size_t Lp = conv_output_length(L, K, stride, padding);

  Node n;
  n.op = Op::Conv;
  n.a = x.id;
  n.b = kernel.id;
  n.stride = static_cast<std::uint32_t>(stride);
  n.padding = static_cast<std::uint32_t>(padding);
  n.squeeze = xv.rank() == 1 && wv.rank() == 1;
  n.value = n.squeeze ? Tensor::zeros({Lp}) : Tensor::zeros({B, Cout, Lp});
  conv_apply(xv.data.data(), B, Cin, L, wv.data.data(), Cout, K, stride, padding,
             n.value.data.data(), Lp, false);
  return push(std::move(n));
}

Var Tape::conv1d_transpose(Var y, Var kernel, std::size_t stride, std::size_t padding) {
  const Tensor& yv = value(y);
  const Tensor& wv = value(kernel);
  std::size_t B, Cyin, Lp, Cout, K;
  conv_dims(yv, wv, B, Cyin, Lp, Cout, K, true);
  const std::size_t Cin = wv.rank() == 3 ? wv.shape[1] : 1;
  const std::size_t L = conv_transpose_output_length(Lp, K, stride, padding);

  Node n;
  n.op = Op::ConvT;
  n.a = y.id;
  n.b = kernel.id;
  n.stride = static_cast<std::uint32_t>(stride);
  n.padding = static_cast<std::uint32_t>(padding);
  n.squeeze = yv.rank() == 1 && wv.rank() == 1;
  n.value = n.squeeze ? Tensor::zeros({L}) : Tensor::zeros({B, Cin, L});
  conv_scatter(yv.data.data(), B, Cout, Lp, wv.data.data(), Cin, K, stride, padding,
               n.value.data.data(), L);
  return push(std::move(n));
}

Var Tape::dense(Var x, Var w, Var b) {
  const Tensor& xv = value(x);
  const Tensor& wv = value(w);
  const Tensor& bv = value(b);
  if (xv.rank() != 2 || wv.rank() != 2 || bv.rank() != 1) {
    throw ShapeError("dense: expected x [B,N], w [M,N], b [M], got " + shape_str(xv.shape) +
                     ", " + shape_str(wv.shape) + ", " + shape_str(bv.shape));
  }
  const std::size_t B = xv.shape[0], N = xv.shape[1], M = wv.shape[0];
  if (wv.shape[1] != N || bv.shape[0] != M) {
    throw ShapeError("dense: w " + shape_str(wv.shape) + " and b " + shape_str(bv.shape) +
                     " do not match input " + shape_str(xv.shape));
  }
  Node n;
  n.op = Op::Dense;
  n.a = x.id;
  n.b = w.id;
  n.c = b.id;
  n.value = Tensor::zeros({B, M});
  for (std::size_t bi = 0; bi < B; ++bi) {
    const double* xrow = xv.data.data() + bi * N;
    double* yrow = n.value.data.data() + bi * M;
    for (std::size_t m = 0; m < M; ++m) {
      const double* wrow = wv.data.data() + m * N;
      double acc = bv.data[m];
      for (std::size_t i = 0; i < N; ++i) acc += xrow[i] * wrow[i];
      yrow[m] = acc;
    }
  }
  return push(std::move(n));
}

Var Tape::bias_add(Var x, Var b) {
  const Tensor& xv = value(x);
  const Tensor& bv = value(b);
  if (xv.rank() != 3 || bv.rank() != 1 || bv.shape[0] != xv.shape[1]) {
    throw ShapeError("bias_add: bias " + shape_str(bv.shape) + " does not match input " +
                     shape_str(xv.shape));
  }
  Node n;
  n.op = Op::BiasAdd;
  n.a = x.id;
  n.b = b.id;
  n.value = xv;
  const std::size_t B = xv.shape[0], C = xv.shape[1], L = xv.shape[2];
  for (std::size_t bi = 0; bi < B; ++bi) {
    for (std::size_t c = 0; c < C; ++c) {
      double* row = n.value.data.data() + (bi * C + c) * L;
      const double add = bv.data[c];
      for (std::size_t l = 0; l < L; ++l) row[l] += add;
    }
  }
  return push(std::move(n));
}

Var Tape::relu(Var x) {
  Node n;
  n.op = Op::Relu;
  n.a = x.id;
  n.value = value(x);
  for (double& v : n.value.data) v = v > 0.0 ? v : 0.0;
  return push(std::move(n));
}

Var Tape::leaky_relu(Var x, double slope) {
  Node n;
  n.op = Op::LeakyRelu;
  n.a = x.id;
  n.p0 = slope;
  n.value = value(x);
  for (double& v : n.value.data) v = v > 0.0 ? v : slope * v;
  return push(std::move(n));
}

Var Tape::tanh(Var x) {
  Node n;
  n.op = Op::Tanh;
  n.a = x.id;
  n.value = value(x);
  for (double& v : n.value.data) v = std::tanh(v);
  return push(std::move(n));
}

Var Tape::sigmoid(Var x) {
  Node n;
  n.op = Op::Sigmoid;
  n.a = x.id;
  n.value = value(x);
  for (double& v : n.value.data) v = 1.0 / (1.0 + std::exp(-v));
  return push(std::move(n));
}

Var Tape::exp(Var x) {
  Node n;
  n.op = Op::Exp;
  n.a = x.id;
  n.value = value(x);
  for (double& v : n.value.data) v = std::exp(v);
  return push(std::move(n));
}

Var Tape::log(Var x) {
  Node n;
  n.op = Op::Log;
  n.a = x.id;
  n.value = value(x);
  for (double& v : n.value.data) v = std::log(v);
  return push(std::move(n));
}

Var Tape::clamp(Var x, double lo, double hi) {
  if (!(lo < hi)) throw ConfigError("clamp bounds must satisfy lo < hi");
  Node n;
  n.op = Op::Clamp;
  n.a = x.id;
  n.p0 = lo;
  n.p1 = hi;
  n.value = value(x);
  for (double& v : n.value.data) v = std::clamp(v, lo, hi);
  return push(std::move(n));
}

Var Tape::log_sigmoid(Var x, double eps) {
  if (!(eps > 0.0 && eps < 0.5)) throw ConfigError("log_sigmoid eps must be in (0, 0.5)");
  Node n;
  n.op = Op::LogSigmoid;
  n.a = x.id;
  n.p0 = eps;
  n.value = value(x);
  for (double& v : n.value.data) {
    const double p = 1.0 / (1.0 + std::exp(-v));
    v = std::log(std::clamp(p, eps, 1.0 - eps));
  }
  return push(std::move(n));
}

Var Tape::add(Var a, Var b) {
  require_same_shape(value(a), value(b), "add");
  Node n;
  n.op = Op::Add;
  n.a = a.id;
  n.b = b.id;
  n.value = value(a);
  const Tensor& bv = value(b);
  for (std::size_t i = 0; i < n.value.numel(); ++i) n.value.data[i] += bv.data[i];
  return push(std::move(n));
}

Var Tape::sub(Var a, Var b) {
  require_same_shape(value(a), value(b), "sub");
  Node n;
  n.op = Op::Sub;
  n.a = a.id;
  n.b = b.id;
  n.value = value(a);
  const Tensor& bv = value(b);
  for (std::size_t i = 0; i < n.value.numel(); ++i) n.value.data[i] -= bv.data[i];
  return push(std::move(n));
}

Var Tape::mul(Var a, Var b) {
  require_same_shape(value(a), value(b), "mul");
  Node n;
  n.op = Op::Mul;
  n.a = a.id;
  n.b = b.id;
  n.value = value(a);
  const Tensor& bv = value(b);
  for (std::size_t i = 0; i < n.value.numel(); ++i) n.value.data[i] *= bv.data[i];
  return push(std::move(n));
}

Var Tape::affine(Var x, double scale, double shift) {
  Node n;
  n.op = Op::Affine;
  n.a = x.id;
  n.p0 = scale;
  n.p1 = shift;
  n.value = value(x);
  for (double& v : n.value.data) v = scale * v + shift;
  return push(std::move(n));
}

Var Tape::square(Var x) {
  Node n;
  n.op = Op::Square;
  n.a = x.id;
  n.value = value(x);
  for (double& v : n.value.data) v *= v;
  return push(std::move(n));
}

Var Tape::sum_all(Var x) {
  Node n;
  n.op = Op::SumAll;
  n.a = x.id;
  double acc = 0.0;
  for (double v : value(x).data) acc += v;
  n.value = Tensor::scalar(acc);
  return push(std::move(n));
}

Var Tape::mean_all(Var x) {
  if (value(x).numel() == 0) throw ShapeError("mean_all: empty tensor");
  Node n;
  n.op = Op::MeanAll;
  n.a = x.id;
  double acc = 0.0;
  for (double v : value(x).data) acc += v;
  n.value = Tensor::scalar(acc / static_cast<double>(value(x).numel()));
  return push(std::move(n));
}

Var Tape::mse(Var a, Var b) {
  require_same_shape(value(a), value(b), "mse");
  if (value(a).numel() == 0) throw ShapeError("mse: empty tensor");
  Node n;
  n.op = Op::Mse;
  n.a = a.id;
  n.b = b.id;
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  double acc = 0.0;
  for (std::size_t i = 0; i < av.numel(); ++i) {
    const double d = av.data[i] - bv.data[i];
    acc += d * d;
  }
  n.value = Tensor::scalar(acc / static_cast<double>(av.numel()));
  return push(std::move(n));
}

Var Tape::reshape(Var x, Shape s) {
  const Tensor& xv = value(x);
  if (shape_numel(s) != xv.numel()) {
    throw ShapeError("reshape: cannot view " + shape_str(xv.shape) + " as " + shape_str(s));
  }
  Node n;
  n.op = Op::Reshape;
  n.a = x.id;
  n.value = Tensor(std::move(s), xv.data);
  return push(std::move(n));
}

void Tape::backward(Var loss) {
  if (value(loss).numel() != 1) {
    throw ShapeError("backward needs a scalar loss, got " + shape_str(value(loss).shape));
  }
  reached_.assign(nodes_.size(), 0);
  for (Node& n : nodes_) {
    std::fill(n.grad.data.begin(), n.grad.data.end(), 0.0);
  }
  nodes_[loss.id].grad.data[0] = 1.0;
  reached_[loss.id] = 1;
  detached_query_ = false;
  for (std::uint32_t id = loss.id + 1; id-- > 0;) {
    if (reached_[id]) backprop(id);
  }
}

void Tape::backprop(std::uint32_t id) {
  Node& n = nodes_[id];
  const Tensor& gy = n.grad;
  auto reach = [&](std::uint32_t in) { reached_[in] = 1; };

  switch (n.op) {
    case Op::Leaf:
      return;

    case Op::Conv: {
      const Tensor& xv = nodes_[n.a].value;
      const Tensor& wv = nodes_[n.b].value;
      std::size_t B, Cin, L, Cout, K;
      conv_dims(xv, wv, B, Cin, L, Cout, K, false);
      const std::size_t Lp = n.value.rank() == 1 ? n.value.shape[0] : n.value.shape[2];
      conv_scatter(gy.data.data(), B, Cout, Lp, wv.data.data(), Cin, K, n.stride, n.padding,
                   nodes_[n.a].grad.data.data(), L);
      conv_kernel_grad(xv.data.data(), B, Cin, L, gy.data.data(), Cout, Lp, K, n.stride,
                       n.padding, nodes_[n.b].grad.data.data());
      reach(n.a);
      reach(n.b);
      return;
    }

    case Op::ConvT: {
      const Tensor& yv = nodes_[n.a].value;
      const Tensor& wv = nodes_[n.b].value;
      std::size_t B, Cyin, Lp, Cout, K;
      conv_dims(yv, wv, B, Cyin, Lp, Cout, K, true);
      const std::size_t Cin = wv.rank() == 3 ? wv.shape[1] : 1;
      const std::size_t L = n.value.rank() == 1 ? n.value.shape[0] : n.value.shape[2];
      // adjoint of scatter is the gather: grad wrt input is a plain conv
      conv_apply(gy.data.data(), B, Cin, L, wv.data.data(), Cout, K, n.stride, n.padding,
                 nodes_[n.a].grad.data.data(), Lp, true);
      conv_kernel_grad(gy.data.data(), B, Cin, L, yv.data.data(), Cout, Lp, K, n.stride,
                       n.padding, nodes_[n.b].grad.data.data());
      reach(n.a);
      reach(n.b);
      return;
    }

    case Op::Dense: {
      const Tensor& xv = nodes_[n.a].value;
      const Tensor& wv = nodes_[n.b].value;
      const std::size_t B = xv.shape[0], N = xv.shape[1], M = wv.shape[0];
      Tensor& gx = nodes_[n.a].grad;
      Tensor& gw = nodes_[n.b].grad;
      Tensor& gb = nodes_[n.c].grad;
      for (std::size_t bi = 0; bi < B; ++bi) {
        const double* grow = gy.data.data() + bi * M;
        const double* xrow = xv.data.data() + bi * N;
        double* gxrow = gx.data.data() + bi * N;
        for (std::size_t m = 0; m < M; ++m) {
          const double g = grow[m];
          if (g == 0.0) continue;
          const double* wrow = wv.data.data() + m * N;
          double* gwrow = gw.data.data() + m * N;
          for (std::size_t i = 0; i < N; ++i) {
            gxrow[i] += g * wrow[i];
            gwrow[i] += g * xrow[i];
          }
          gb.data[m] += g;
        }
      }
      reach(n.a);
      reach(n.b);
      reach(n.c);
      return;
    }

    case Op::BiasAdd: {
      const Tensor& xv = nodes_[n.a].value;
      const std::size_t B = xv.shape[0], C = xv.shape[1], L = xv.shape[2];
      Tensor& gx = nodes_[n.a].grad;
      Tensor& gb = nodes_[n.b].grad;
      for (std::size_t i = 0; i < gx.numel(); ++i) gx.data[i] += gy.data[i];
      for (std::size_t bi = 0; bi < B; ++bi) {
        for (std::size_t c = 0; c < C; ++c) {
          const double* row = gy.data.data() + (bi * C + c) * L;
          double acc = 0.0;
          for (std::size_t l = 0; l < L; ++l) acc += row[l];
          gb.data[c] += acc;
        }
      }
      reach(n.a);
      reach(n.b);
      return;
    }

    case Op::Relu: {
      const Tensor& xv = nodes_[n.a].value;
      Tensor& gx = nodes_[n.a].grad;
      for (std::size_t i = 0; i < gx.numel(); ++i) {
        if (xv.data[i] > 0.0) gx.data[i] += gy.data[i];
      }
      reach(n.a);
      return;
    }

    case Op::LeakyRelu: {
      const Tensor& xv = nodes_[n.a].value;
      Tensor& gx = nodes_[n.a].grad;
      for (std::size_t i = 0; i < gx.numel(); ++i) {
        gx.data[i] += gy.data[i] * (xv.data[i] > 0.0 ? 1.0 : n.p0);
      }
      reach(n.a);
      return;
    }

    case Op::Tanh: {
      Tensor& gx = nodes_[n.a].grad;
      for (std::size_t i = 0; i < gx.numel(); ++i) {
        const double t = n.value.data[i];
        gx.data[i] += gy.data[i] * (1.0 - t * t);
      }
      reach(n.a);
      return;
    }

    case Op::Sigmoid: {
      Tensor& gx = nodes_[n.a].grad;
      for (std::size_t i = 0; i < gx.numel(); ++i) {
        const double s = n.value.data[i];
        gx.data[i] += gy.data[i] * s * (1.0 - s);
      }
      reach(n.a);
      return;
    }

    case Op::Exp: {
      Tensor& gx = nodes_[n.a].grad;
      for (std::size_t i = 0; i < gx.numel(); ++i) gx.data[i] += gy.data[i] * n.value.data[i];
      reach(n.a);
      return;
    }

    case Op::Log: {
      const Tensor& xv = nodes_[n.a].value;
      Tensor& gx = nodes_[n.a].grad;
      for (std::size_t i = 0; i < gx.numel(); ++i) gx.data[i] += gy.data[i] / xv.data[i];
      reach(n.a);
      return;
    }

    case Op::Clamp: {
      const Tensor& xv = nodes_[n.a].value;
      Tensor& gx = nodes_[n.a].grad;
      for (std::size_t i = 0; i < gx.numel(); ++i) {
        if (xv.data[i] >= n.p0 && xv.data[i] <= n.p1) gx.data[i] += gy.data[i];
      }
      reach(n.a);
      return;
    }
    case Op::LogSigmoid: {
      const Tensor& xv = nodes_[n.a].value;
      Tensor& gx = nodes_[n.a].grad;
      for (std::size_t i = 0; i < gx.numel(); ++i) {
        gx.data[i] += gy.data[i] / (1.0 + std::exp(xv.data[i]));
      }
      reach(n.a);
      return;
    }

    case Op::Add: {
      Tensor& ga = nodes_[n.a].grad;
      Tensor& gb = nodes_[n.b].grad;
      for (std::size_t i = 0; i < gy.numel(); ++i) {
        ga.data[i] += gy.data[i];
        gb.data[i] += gy.data[i];
      }
      reach(n.a);
      reach(n.b);
      return;
    }

    case Op::Sub: {
      Tensor& ga = nodes_[n.a].grad;
      Tensor& gb = nodes_[n.b].grad;
      for (std::size_t i = 0; i < gy.numel(); ++i) {
        ga.data[i] += gy.data[i];
        gb.data[i] -= gy.data[i];
      }
      reach(n.a);
      reach(n.b);
      return;
    }

    case Op::Mul: {
      const Tensor& av = nodes_[n.a].value;
      const Tensor& bv = nodes_[n.b].value;
      Tensor& ga = nodes_[n.a].grad;
      Tensor& gb = nodes_[n.b].grad;
      for (std::size_t i = 0; i < gy.numel(); ++i) {
        ga.data[i] += gy.data[i] * bv.data[i];
        gb.data[i] += gy.data[i] * av.data[i];
      }
      reach(n.a);
      reach(n.b);
      return;
    }

    case Op::Affine: {
      Tensor& gx = nodes_[n.a].grad;
      for (std::size_t i = 0; i < gy.numel(); ++i) gx.data[i] += gy.data[i] * n.p0;
      reach(n.a);
      return;
    }

    case Op::Square: {
      const Tensor& xv = nodes_[n.a].value;
      Tensor& gx = nodes_[n.a].grad;
      for (std::size_t i = 0; i < gy.numel(); ++i) gx.data[i] += gy.data[i] * 2.0 * xv.data[i];
      reach(n.a);
      return;
    }

    case Op::SumAll: {
      const double g = gy.data[0];
      Tensor& gx = nodes_[n.a].grad;
      for (double& v : gx.data) v += g;
      reach(n.a);
      return;
    }

    case Op::MeanAll: {
      Tensor& gx = nodes_[n.a].grad;
      const double g = gy.data[0] / static_cast<double>(gx.numel());
      for (double& v : gx.data) v += g;
      reach(n.a);
      return;
    }

    case Op::Mse: {
      const Tensor& av = nodes_[n.a].value;
      const Tensor& bv = nodes_[n.b].value;
      Tensor& ga = nodes_[n.a].grad;
      Tensor& gb = nodes_[n.b].grad;
      const double g = gy.data[0] * 2.0 / static_cast<double>(av.numel());
      for (std::size_t i = 0; i < av.numel(); ++i) {
        const double d = g * (av.data[i] - bv.data[i]);
        ga.data[i] += d;
        gb.data[i] -= d;
      }
      reach(n.a);
      reach(n.b);
      return;
    }

    case Op::Reshape: {
      Tensor& gx = nodes_[n.a].grad;
      for (std::size_t i = 0; i < gy.numel(); ++i) gx.data[i] += gy.data[i];
      reach(n.a);
      return;
    }
  }
}

}  // namespace stimgen
