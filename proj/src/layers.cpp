#include "sodyolo/layers.hpp"

#include <cmath>

namespace sodyolo {

Tensor uniform_tensor(Rng& rng, Shape shape, double bound) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = rng.uniform(-bound, bound);
  return Tensor(std::move(shape), std::move(v));
}

ConvParams make_conv(Rng& rng, std::size_t cin, std::size_t cout, std::size_t kernel) {
  const double fan_in = static_cast<double>(cin * kernel * kernel);
  const double gain = std::sqrt(2.0 / (1.0 + nn::kLeakySlope * nn::kLeakySlope));
  const double bound = gain * std::sqrt(3.0 / fan_in);
  ConvParams p;
  p.weight = uniform_tensor(rng, {cout, cin, kernel, kernel}, bound);
  p.bias = Tensor({cout}, 0.0);
  return p;
}

ConvBnParams make_conv_bn(Rng& rng, std::size_t cin, std::size_t cout, std::size_t kernel) {
  ConvBnParams p;
  p.weight = make_conv(rng, cin, cout, kernel).weight;
  p.gamma = Tensor({cout}, 1.0);
  p.beta = Tensor({cout}, 0.0);
  p.stats = nn::RunningStats(cout);
  return p;
}

Tensor conv_act(const Tensor& x, const ConvBnParams& p, std::size_t stride, bool training) {
  Tensor y = nn::conv2d(x, p.weight, Tensor(), stride, p.kernel() / 2);
  y = nn::batchnorm2d(y, p.gamma, p.beta, nn::kBatchNormEps, p.stats, training);
  return nn::leaky_relu(y);
}

Tensor conv_act(const Tensor& x, const ConvParams& p, std::size_t stride) {
  return nn::leaky_relu(nn::conv2d(x, p.weight, p.bias, stride, p.kernel() / 2));
}

Tensor conv_linear(const Tensor& x, const ConvParams& p, std::size_t stride) {
  return nn::conv2d(x, p.weight, p.bias, stride, p.kernel() / 2);
}

}  // namespace sodyolo
