#pragma once

#include <functional>
#include <vector>

#include "hpm/numerics/tensor.hpp"

namespace hpm {

struct GradReport {
  std::vector<double> max_rel_error;  // one entry per parameter
  double max_error = 0.0;
  double epsilon = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

// Compares backward() gradients of the scalar `f` against central differences.
// Relative error per element is |a - n| / max(|a|, |n|, floor). `f` must be
// deterministic: it is evaluated twice up front and must agree bitwise.
// Deep compositions carry finite-difference roundoff near 1e-11, so a larger
// floor is needed there for structurally zero gradients (e.g. key biases).
GradReport grad_check(const std::function<Tensor()>& f, const std::vector<Tensor>& params,
                      double epsilon = 1e-5, double tolerance = 1e-4, double floor = 1e-12);

}  // namespace hpm
