#pragma once

#include <functional>
#include <string>
#include <vector>

#include "sodyolo/tensor.hpp"

namespace sodyolo::nn {

using ScalarFn = std::function<Tensor(const std::vector<Tensor>& inputs)>;

// Compares the analytic gradient of a scalar-valued fn against central
// differences over every element of every input. Returns
//   max |analytic - numeric| / max(1e-12, |analytic| + |numeric|).
// Throws NumericError naming `op_name` if any evaluation is non-finite.
double grad_check(const ScalarFn& fn, std::vector<Tensor> inputs, double eps = 1e-5,
                  const std::string& op_name = "op");

}  // namespace sodyolo::nn
