#include "fieldmatch/grad_check.hpp"

#include <cmath>
#include <map>

namespace fieldmatch {

GradCheckResult grad_check(const ScalarClosure& closure, ParamStore& params, double epsilon) {
  params.zero_grads();
  closure(params, true);

  std::map<std::string, Tensor> analytic;
  for (const auto& [name, e] : params.entries()) {
    if (e.trainable) analytic.emplace(name, e.grad);
  }

  GradCheckResult result;
  for (auto& [name, e] : params.entries()) {
    if (!e.trainable) continue;
    const Tensor& ga = analytic.at(name);
    for (int i = 0; i < e.value.size(); ++i) {
      const double saved = e.value.at(i);
      e.value.at(i) = saved + epsilon;
      const double up = closure(params, false);
      e.value.at(i) = saved - epsilon;
      const double down = closure(params, false);
      e.value.at(i) = saved;
      const double fd = (up - down) / (2.0 * epsilon);
      const double a = ga.at(i);
      const double rel = std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-12});
      if (rel > result.max_relative_error) {
        result.max_relative_error = rel;
        result.worst_parameter = name;
        result.worst_index = i;
      }
    }
  }
  params.zero_grads();
  return result;
}

}  // namespace fieldmatch
