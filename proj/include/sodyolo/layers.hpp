#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "sodyolo/ops.hpp"
#include "sodyolo/rng.hpp"
#include "sodyolo/tensor.hpp"

namespace sodyolo {

// Named-parameter traversal used for counting, optimisation and checkpoints.
// `decay` marks tensors that receive weight decay (weights, not biases/norms).
using ParamVisitor = std::function<void(const std::string& name, Tensor& t, bool decay)>;
using BufferVisitor = std::function<void(const std::string& name, std::vector<double>& buf)>;

struct ConvParams {
  Tensor weight;  // (Cout, Cin, k, k)
  Tensor bias;    // (Cout)

  std::size_t out_channels() const { return weight.dim(0); }
  std::size_t in_channels() const { return weight.dim(1); }
  std::size_t kernel() const { return weight.dim(2); }

  void visit(const ParamVisitor& f, const std::string& prefix) {
    f(prefix + ".weight", weight, true);
    f(prefix + ".bias", bias, false);
  }
};

// conv (no bias) -> batch norm -> LeakyReLU, the detector's standard block.
struct ConvBnParams {
  Tensor weight;  // (Cout, Cin, k, k)
  Tensor gamma;   // (Cout)
  Tensor beta;    // (Cout)
  // Written only by training-mode forwards.
  mutable nn::RunningStats stats;

  std::size_t out_channels() const { return weight.dim(0); }
  std::size_t in_channels() const { return weight.dim(1); }
  std::size_t kernel() const { return weight.dim(2); }

  void visit(const ParamVisitor& f, const std::string& prefix) {
    f(prefix + ".weight", weight, true);
    f(prefix + ".bn.gamma", gamma, false);
    f(prefix + ".bn.beta", beta, false);
  }
  void visit_buffers(const BufferVisitor& f, const std::string& prefix) {
    f(prefix + ".bn.running_mean", stats.mean);
    f(prefix + ".bn.running_var", stats.var);
  }
};

// Kaiming-uniform weights for a leaky-ReLU fan-in, zero bias.
ConvParams make_conv(Rng& rng, std::size_t cin, std::size_t cout, std::size_t kernel);
Tensor uniform_tensor(Rng& rng, Shape shape, double bound);
// Kaiming-uniform weights, gamma 1, beta 0, running stats (0, 1).
ConvBnParams make_conv_bn(Rng& rng, std::size_t cin, std::size_t cout, std::size_t kernel);

// conv -> LeakyReLU, padding k/2.
Tensor conv_act(const Tensor& x, const ConvParams& p, std::size_t stride = 1);
// conv -> batch norm (batch statistics when training) -> LeakyReLU, padding k/2.
Tensor conv_act(const Tensor& x, const ConvBnParams& p, std::size_t stride, bool training);
// conv only (no activation), padding k/2.
Tensor conv_linear(const Tensor& x, const ConvParams& p, std::size_t stride = 1);

}  // namespace sodyolo
