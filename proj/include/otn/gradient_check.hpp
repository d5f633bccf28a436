#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "otn/tensor.hpp"

namespace otn {

struct GradientCheckOptions {
  double eps = 1e-5;
  // 0 checks every component; otherwise a seeded sample of this many
  // components per tensor (always including the largest-gradient one).
  std::size_t max_components_per_tensor = 0;
  std::uint64_t sample_seed = 0;
  // Components whose relative error exceeds this are listed in `flagged`.
  double flag_above = std::numeric_limits<double>::infinity();
};

struct ComponentError {
  std::string tensor;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double error = 0.0;
};

struct GradientCheckResult {
  double max_relative_error = 0.0;
  std::string worst_tensor;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t components_checked = 0;
  std::vector<ComponentError> flagged;
};

// Compares the tape gradient of loss_fn against central differences
// (f(t+eps) - f(t-eps)) / (2 eps), component by component. The error of one
// component is |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
// loss_fn must be deterministic; every parameter must be a leaf that
// requires gradients. Parameter gradients are left zeroed on return.
GradientCheckResult gradient_check(const std::function<Tensor(Tape&)>& loss_fn,
                                   const std::vector<NamedTensor>& params,
                                   const GradientCheckOptions& options = {});

double relative_error(double analytic, double numeric);

}  // namespace otn
