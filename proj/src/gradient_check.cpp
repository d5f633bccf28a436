#include "otn/gradient_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace otn {

double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1e-8, std::abs(analytic) + std::abs(numeric));
}

namespace {

double evaluate(const std::function<Tensor(Tape&)>& loss_fn) {
  Tape tape;
  const double value = loss_fn(tape).item();
  if (!std::isfinite(value)) throw NumericError("gradient_check: loss is not finite");
  return value;
}

std::vector<std::size_t> pick_components(std::span<const double> analytic,
                                         const GradientCheckOptions& options, Rng& rng) {
  std::vector<std::size_t> all(analytic.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  if (options.max_components_per_tensor == 0 || all.size() <= options.max_components_per_tensor) {
    return all;
  }
  const auto largest = static_cast<std::size_t>(
      std::max_element(analytic.begin(), analytic.end(),
                       [](double a, double b) { return std::abs(a) < std::abs(b); }) -
      analytic.begin());
  std::vector<std::size_t> picked{largest};
  std::uniform_int_distribution<std::size_t> uniform(0, all.size() - 1);
  while (picked.size() < options.max_components_per_tensor) picked.push_back(uniform(rng));
  return picked;
}

}  // namespace

GradientCheckResult gradient_check(const std::function<Tensor(Tape&)>& loss_fn,
                                   const std::vector<NamedTensor>& params,
                                   const GradientCheckOptions& options) {
  if (!(options.eps > 0.0)) throw ConfigError("gradient_check: eps must be positive");
  for (const auto& p : params) {
    if (!p.tensor.requires_grad()) {
      throw ConfigError("gradient_check: parameter " + p.name + " does not require gradients");
    }
    p.tensor.zero_grad();
  }
  {
    Tape tape;
    Tensor loss = loss_fn(tape);
    if (!std::isfinite(loss.item())) throw NumericError("gradient_check: loss is not finite");
    tape.backward(loss);
  }

  GradientCheckResult result;
  Rng rng(options.sample_seed);
  for (const auto& p : params) {
    Tensor tensor = p.tensor;
    const std::vector<double> analytic(tensor.grad().begin(), tensor.grad().end());
    auto values = tensor.values();
    for (std::size_t index : pick_components(analytic, options, rng)) {
      const double saved = values[index];
      values[index] = saved + options.eps;
      const double plus = evaluate(loss_fn);
      values[index] = saved - options.eps;
      const double minus = evaluate(loss_fn);
      values[index] = saved;
      const double numeric = (plus - minus) / (2.0 * options.eps);
      const double error = relative_error(analytic[index], numeric);
      ++result.components_checked;
      if (error > options.flag_above) result.flagged.push_back({p.name, index, analytic[index], numeric, error});
      if (error > result.max_relative_error || result.worst_tensor.empty()) {
        result.max_relative_error = std::max(result.max_relative_error, error);
        result.worst_tensor = p.name;
        result.worst_index = index;
        result.worst_analytic = analytic[index];
        result.worst_numeric = numeric;
      }
    }
    tensor.zero_grad();
  }
  return result;
}

}  // namespace otn
