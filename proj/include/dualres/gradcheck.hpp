#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dualres/autodiff.hpp"
#include "dualres/params.hpp"

namespace dualres {

struct GradCheckResult {
  double max_relative_error = 0.0;
  /// False if any value or gradient was NaN or infinite.
  bool finite = true;
  /// "input k (r, c)" or a parameter name with its coordinate, plus both values.
  std::string worst;
  std::size_t coordinates = 0;
  /// Coordinates where both gradients were below `resolution`; they are judged by
  /// absolute error only and do not enter max_relative_error.
  std::size_t below_resolution = 0;
  double max_absolute_error_below = 0.0;
};

using GraphFn = std::function<ad::Var(ad::Tape&, const std::vector<ad::Var>&)>;

/// Central differences of f(x) = Σ R ⊙ fn(x) against the analytic gradient, for every
/// coordinate of every input. R is drawn from `projection_seed` (all ones when the
/// output is 1 x 1). Relative error uses max(|a|, |n|, 1e-8) as the denominator.
///
/// Central differences carry round-off of roughly 1e-16 |f| / step, about 1e-11 |f| at
/// the default step, so coordinates much smaller than that cannot meet a 1e-4 relative
/// bound. `resolution` > 0 moves coordinates with max(|a|, |n|) < resolution to a
/// separate absolute-error tally; the default 0 applies the relative bound everywhere.
GradCheckResult gradient_check(const GraphFn& fn, const std::vector<ad::Mat>& inputs, double step = 1e-5,
                               std::uint64_t projection_seed = 0, double resolution = 0.0);

using LossFn = std::function<ad::Var(ParamBinder&)>;

/// Same check against every coordinate of every parameter in `store` for a scalar loss.
/// `store` is perturbed in place and restored.
GradCheckResult gradient_check_parameters(ParameterStore& store, const LossFn& loss, double step = 1e-5,
                                          double resolution = 0.0);

double relative_error(double analytic, double numeric);

}  // namespace dualres
