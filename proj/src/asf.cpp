#include "sodyolo/asf.hpp"

#include <cmath>
#include <stdexcept>

namespace sodyolo::asf {

void ScalSeqParams::visit(const ParamVisitor& f, const std::string& prefix) {
  for (std::size_t i = 0; i < unify.size(); ++i) unify[i].visit(f, prefix + ".unify" + std::to_string(i));
  f(prefix + ".fuse.weight", fuse_weight, true);
  f(prefix + ".fuse.bias", fuse_bias, false);
  f(prefix + ".bn.gamma", bn_gamma, false);
  f(prefix + ".bn.beta", bn_beta, false);
}

void ScalSeqParams::visit_buffers(const BufferVisitor& f, const std::string& prefix) {
  f(prefix + ".bn.running_mean", bn_stats.mean);
  f(prefix + ".bn.running_var", bn_stats.var);
}

ScalSeqParams make_scalseq_params(Rng& rng, const std::array<std::size_t, 3>& in_channels,
                                  std::size_t c_out) {
  if (c_out < 1) throw std::invalid_argument("scalseq: c_out must be >= 1");
  ScalSeqParams p;
  p.c_out = c_out;
  for (std::size_t i = 0; i < 3; ++i) p.unify[i] = make_conv(rng, in_channels[i], c_out, 1);
  const double bound = std::sqrt(3.0 / static_cast<double>(c_out));
  p.fuse_weight = uniform_tensor(rng, {c_out, c_out, 1, 1, 1}, bound);
  p.fuse_bias = Tensor({c_out}, 0.0);
  p.bn_gamma = Tensor({c_out}, 1.0);
  p.bn_beta = Tensor({c_out}, 0.0);
  p.bn_stats = nn::RunningStats(c_out);
  return p;
}

namespace {

void check_pyramid(const Tensor& a, const Tensor& b, const Tensor& c) {
  auto fail = [&] {
    throw std::invalid_argument("scalseq: inputs must have spatial ratios 1:2:4 and equal batch, got " +
                                shape_str(a.shape()) + ", " + shape_str(b.shape()) + ", " +
                                shape_str(c.shape()));
  };
  if (a.rank() != 4 || b.rank() != 4 || c.rank() != 4) fail();
  if (a.dim(0) != b.dim(0) || a.dim(0) != c.dim(0)) fail();
  if (a.dim(2) != 2 * b.dim(2) || a.dim(3) != 2 * b.dim(3)) fail();
  if (a.dim(2) != 4 * c.dim(2) || a.dim(3) != 4 * c.dim(3)) fail();
}

}  // namespace

Tensor scalseq(const Tensor& p_small, const Tensor& p_mid, const Tensor& p_large,
               ScalSeqParams& params, Mode mode) {
  check_pyramid(p_small, p_mid, p_large);
  const std::array<const Tensor*, 3> levels{&p_small, &p_mid, &p_large};
  for (std::size_t i = 0; i < 3; ++i) {
    if (levels[i]->dim(1) != params.unify[i].in_channels()) {
      throw std::invalid_argument("scalseq: input " + std::to_string(i) + " " +
                                  shape_str(levels[i]->shape()) + " does not match unify conv " +
                                  shape_str(params.unify[i].weight.shape()));
    }
  }
  Tensor s0 = conv_linear(p_small, params.unify[0]);
  Tensor s1 = nn::upsample_nearest(conv_linear(p_mid, params.unify[1]), 2);
  Tensor s2 = nn::upsample_nearest(conv_linear(p_large, params.unify[2]), 4);
  Tensor stack = nn::stack_scales(s0, s1, s2);
  Tensor fused = nn::conv3d_scale(stack, params.fuse_weight, params.fuse_bias);
  Tensor normed = nn::batchnorm_scale(fused, params.bn_gamma, params.bn_beta, params.bn_eps,
                                      params.bn_stats, mode == Mode::kTraining);
  return nn::maxpool3d_scale(nn::leaky_relu(normed, params.slope));
}

Tensor scalseq(const Tensor& p_small, const Tensor& p_mid, const Tensor& p_large,
               const ScalSeqParams& params) {
  ScalSeqParams view = params;  // shares tensors; copies only the running stats
  return scalseq(p_small, p_mid, p_large, view, Mode::kInference);
}

void AttentionParams::visit(const ParamVisitor& f, const std::string& prefix) {
  f(prefix + ".fc1.weight", fc1_weight, true);
  f(prefix + ".fc1.bias", fc1_bias, false);
  f(prefix + ".fc2.weight", fc2_weight, true);
  f(prefix + ".fc2.bias", fc2_bias, false);
  spatial.visit(f, prefix + ".spatial");
}

AttentionParams make_attention_params(Rng& rng, std::size_t channels, std::size_t reduction,
                                      std::size_t kernel) {
  if (reduction < 1 || channels < 1 || channels % reduction != 0) {
    throw std::invalid_argument("attention: channels " + std::to_string(channels) +
                                " not divisible by reduction " + std::to_string(reduction));
  }
  if (kernel % 2 == 0) {
    throw std::invalid_argument("attention: spatial kernel must be odd, got " +
                                std::to_string(kernel));
  }
  const std::size_t hidden = channels / reduction;
  AttentionParams p;
  p.channels = channels;
  p.reduction = reduction;
  p.fc1_weight = uniform_tensor(rng, {hidden, channels}, std::sqrt(3.0 / static_cast<double>(channels)));
  p.fc1_bias = Tensor({hidden}, 0.0);
  p.fc2_weight = uniform_tensor(rng, {channels, hidden}, std::sqrt(3.0 / static_cast<double>(hidden)));
  p.fc2_bias = Tensor({channels}, 0.0);
  p.spatial = make_conv(rng, 2, 1, kernel);
  return p;
}

Tensor channel_attention(const Tensor& x, const AttentionParams& params) {
  if (x.rank() != 4 || x.dim(1) != params.fc1_weight.dim(1)) {
    throw std::invalid_argument("channel_attention: input " + shape_str(x.shape()) +
                                " does not match attention channels " +
                                std::to_string(params.fc1_weight.dim(1)));
  }
  Tensor pooled = nn::global_avg_pool(x);
  Tensor hidden = nn::leaky_relu(nn::linear(pooled, params.fc1_weight, params.fc1_bias), params.slope);
  Tensor gate = nn::sigmoid(nn::linear(hidden, params.fc2_weight, params.fc2_bias));
  return nn::gate_channels(x, gate);
}

Tensor local_attention(const Tensor& x, const AttentionParams& params) {
  const std::size_t k = params.spatial.kernel();
  if (k % 2 == 0) {
    throw std::invalid_argument("local_attention: spatial kernel must be odd, got " +
                                std::to_string(k));
  }
  Tensor desc = nn::concat_channels({nn::channel_mean(x), nn::channel_max(x)});
  Tensor gate = nn::sigmoid(nn::conv2d(desc, params.spatial.weight, params.spatial.bias, 1, (k - 1) / 2));
  return nn::gate_spatial(x, gate);
}

Tensor attention_model(const Tensor& x1, const Tensor& x2, const AttentionParams& params) {
  if (x1.shape() != x2.shape()) {
    throw std::invalid_argument("attention_model: shape mismatch " + shape_str(x1.shape()) +
                                " vs " + shape_str(x2.shape()));
  }
  return local_attention(nn::add(channel_attention(x1, params), x2), params);
}

}  // namespace sodyolo::asf
