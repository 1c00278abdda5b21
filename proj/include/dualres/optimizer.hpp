#pragma once

#include "dualres/params.hpp"
#include "dualres/types.hpp"

namespace dualres {

struct AdamState {
  GradientSet first_moment;
  GradientSet second_moment;
  long long steps = 0;
};

/// Adam with bias-corrected moment estimates.
class Adam {
 public:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEpsilon = 1e-8;

  explicit Adam(const ParameterStore& store);

  void step(ParameterStore& store, const GradientSet& gradients, double learning_rate);

  const AdamState& state() const { return state_; }
  /// Shapes must match the store the optimizer was built for.
  void set_state(AdamState state);

 private:
  AdamState state_;
};

}  // namespace dualres
