#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "shadow/tensor.hpp"

namespace shadow::nn {

/// A differentiable function of some input tensors, checked against central
/// finite differences. `make_inputs` draws a fresh random instance; `kinks`
/// lists input values the check should keep a margin from.
struct GradCase {
  std::string name;
  std::function<std::vector<Tensor>(std::mt19937_64&, int trial)> make_inputs;
  std::function<Tensor(const std::vector<Tensor>&)> fn;
  double tolerance = 1e-4;
  int trials = 10;
  /// Coordinates perturbed per trial; 0 checks every coordinate.
  std::size_t max_coords = 0;
};

struct GradCheckResult {
  std::string name;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  int trials = 0;
  bool pass = false;
};

struct GradCheckReport {
  std::vector<GradCheckResult> results;
  double seconds = 0.0;
  bool passed() const;
};

/// Relative error of one trial: max |analytic - numeric| over the checked
/// coordinates divided by max(max |analytic|, max |numeric|, 1e-8).
double gradient_error(const std::vector<Tensor>& inputs, const std::function<Tensor(const std::vector<Tensor>&)>& fn,
                      std::mt19937_64& rng, double step = 1e-5, std::size_t max_coords = 0);

GradCheckResult run_case(const GradCase& c, std::uint64_t seed);

/// Every tensor op plus the encoder, policy and critic composites.
std::vector<GradCase> default_grad_cases();

/// An op whose backward is deliberately wrong, for exercising the checker.
GradCase broken_grad_case();

GradCheckReport run_gradcheck(const std::vector<GradCase>& cases, std::uint64_t seed);

}  // namespace shadow::nn
