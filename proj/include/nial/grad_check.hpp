#pragma once

#include <functional>

#include "nial/tensor.hpp"

namespace nial {

// Compares the analytic gradient of a scalar-valued function against central
// finite differences at x. Returns the worst elementwise discrepancy
// |analytic - numeric| / max(1, |analytic|, |numeric|).
double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                  double h = 1e-5);

}  // namespace nial
