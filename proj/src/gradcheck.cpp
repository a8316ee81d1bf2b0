#include "sodyolo/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "sodyolo/errors.hpp"

namespace sodyolo::nn {

namespace {

double eval_scalar(const ScalarFn& fn, const std::vector<Tensor>& inputs,
                   const std::string& op_name) {
  NoGradGuard guard;
  const Tensor out = fn(inputs);
  if (out.numel() != 1) {
    throw std::invalid_argument("grad_check: " + op_name + " must return a scalar, got " +
                                shape_str(out.shape()));
  }
  const double v = out.item();
  if (!std::isfinite(v)) throw NumericError("grad_check: non-finite output from " + op_name);
  return v;
}

}  // namespace

double grad_check(const ScalarFn& fn, std::vector<Tensor> inputs, double eps,
                  const std::string& op_name) {
  for (auto& t : inputs) {
    t.set_requires_grad(true);
    t.zero_grad();
  }
  const Tensor out = fn(inputs);
  if (out.numel() != 1) {
    throw std::invalid_argument("grad_check: " + op_name + " must return a scalar, got " +
                                shape_str(out.shape()));
  }
  if (!std::isfinite(out.item())) {
    throw NumericError("grad_check: non-finite output from " + op_name);
  }
  backward(out);

  double worst = 0.0;
  for (auto& t : inputs) {
    std::vector<double> analytic(t.grad().begin(), t.grad().end());
    auto values = t.data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (!std::isfinite(analytic[i])) {
        throw NumericError("grad_check: non-finite gradient from " + op_name);
      }
      const double orig = values[i];
      values[i] = orig + eps;
      const double fp = eval_scalar(fn, inputs, op_name);
      values[i] = orig - eps;
      const double fm = eval_scalar(fn, inputs, op_name);
      values[i] = orig;
      const double numeric = (fp - fm) / (2.0 * eps);
      const double err = std::abs(analytic[i] - numeric) /
                         std::max(1e-12, std::abs(analytic[i]) + std::abs(numeric));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace sodyolo::nn
