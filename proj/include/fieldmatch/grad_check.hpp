#pragma once

#include <functional>
#include <string>
#include <vector>

#include "fieldmatch/param_store.hpp"

namespace fieldmatch {

// A differentiable scalar closure over a parameter store. When compute_grad
// is true the closure must accumulate gradients into the store; otherwise a
// plain forward evaluation suffices.
using ScalarClosure = std::function<double(ParamStore&, bool compute_grad)>;

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  int worst_index = -1;
};

// Central finite differences against the closure's analytic gradients over
// every element of every trainable parameter. Relative error is
// |analytic - fd| / max(|analytic|, |fd|, 1e-12).
GradCheckResult grad_check(const ScalarClosure& closure, ParamStore& params,
                           double epsilon = 1e-5);

}  // namespace fieldmatch
