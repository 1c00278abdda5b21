#include "dualres/optimizer.hpp"

#include <cmath>

namespace dualres {

Adam::Adam(const ParameterStore& store) {
  state_.first_moment = store.zero_gradients();
  state_.second_moment = store.zero_gradients();
}

void Adam::step(ParameterStore& store, const GradientSet& g, double lr) {
  ++state_.steps;
  const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(state_.steps));
  const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(state_.steps));
  for (ParamId id = 0; id < store.size(); ++id) {
    Mat& m = state_.first_moment[id];
    Mat& v = state_.second_moment[id];
    m = kBeta1 * m + (1.0 - kBeta1) * g[id];
    v = kBeta2 * v + (1.0 - kBeta2) * g[id].cwiseProduct(g[id]);
    store.value(id).array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + kEpsilon);
  }
}

void Adam::set_state(AdamState state) {
  if (state.first_moment.size() != state_.first_moment.size() ||
      state.second_moment.size() != state_.second_moment.size()) {
    throw DataError("optimizer state has the wrong number of tensors");
  }
  for (std::size_t i = 0; i < state_.first_moment.size(); ++i) {
    if (state.first_moment[i].rows() != state_.first_moment[i].rows() ||
        state.first_moment[i].cols() != state_.first_moment[i].cols() ||
        state.second_moment[i].rows() != state_.second_moment[i].rows() ||
        state.second_moment[i].cols() != state_.second_moment[i].cols()) {
      throw DataError("optimizer state tensor " + std::to_string(i) + " has the wrong shape");
    }
  }
  state_ = std::move(state);
}

}  // namespace dualres
