#pragma once

#include <string>
#include <vector>

namespace fieldmatch {

// Finite-difference verification of every differentiable primitive plus the
// full joint and contrastive losses on tiny configurations.
struct GradientSuiteReport {
  struct Component {
    std::string name;
    double max_relative_error = 0.0;
  };
  std::vector<Component> components;

  double worst() const;
  bool pass(double threshold = 1e-4) const;
};

GradientSuiteReport run_gradient_suite();

}  // namespace fieldmatch
