#include "dualres/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace dualres {

double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-8});
}

namespace {

void record(GradCheckResult& result, double analytic, double numeric, const std::string& where,
            double resolution) {
  ++result.coordinates;
  if (!std::isfinite(analytic) || !std::isfinite(numeric)) {
    result.finite = false;
    result.worst = where;
    return;
  }
  if (std::max(std::abs(analytic), std::abs(numeric)) < resolution) {
    ++result.below_resolution;
    result.max_absolute_error_below = std::max(result.max_absolute_error_below, std::abs(analytic - numeric));
    return;
  }
  const double err = relative_error(analytic, numeric);
  if (err > result.max_relative_error) {
    result.max_relative_error = err;
    std::ostringstream s;
    s << where << " analytic " << analytic << " numeric " << numeric;
    result.worst = s.str();
  }
}

std::string coordinate(const std::string& prefix, Eigen::Index r, Eigen::Index c) {
  return prefix + " (" + std::to_string(r) + ", " + std::to_string(c) + ")";
}

}  // namespace

GradCheckResult gradient_check(const GraphFn& fn, const std::vector<ad::Mat>& inputs, double step,
                               std::uint64_t projection_seed, double resolution) {
  ad::Mat projection;
  auto evaluate = [&](const std::vector<ad::Mat>& values, std::vector<ad::Mat>* grads) {
    ad::Tape tape;
    std::vector<ad::Var> vars;
    for (const auto& v : values) vars.push_back(tape.variable(v));
    const ad::Var out = fn(tape, vars);
    if (projection.size() == 0) {
      projection = ad::Mat::Ones(out.rows(), out.cols());
      if (out.rows() * out.cols() != 1) {
        Rng rng = make_rng(projection_seed, {hash_string("gradcheck")});
        std::uniform_real_distribution<double> dist(-1.0, 1.0);
        for (Eigen::Index i = 0; i < projection.size(); ++i) projection.data()[i] = dist(rng);
      }
    }
    if (grads) {
      tape.backward(out, projection);
      for (const auto& v : vars) grads->push_back(tape.grad(v));
    }
    return out.value().cwiseProduct(projection).sum();
  };

  std::vector<ad::Mat> analytic;
  GradCheckResult result;
  if (!std::isfinite(evaluate(inputs, &analytic))) result.finite = false;

  std::vector<ad::Mat> work = inputs;
  for (std::size_t k = 0; k < work.size(); ++k) {
    for (Eigen::Index r = 0; r < work[k].rows(); ++r) {
      for (Eigen::Index c = 0; c < work[k].cols(); ++c) {
        const double saved = work[k](r, c);
        work[k](r, c) = saved + step;
        const double plus = evaluate(work, nullptr);
        work[k](r, c) = saved - step;
        const double minus = evaluate(work, nullptr);
        work[k](r, c) = saved;
        record(result, analytic[k](r, c), (plus - minus) / (2.0 * step),
               coordinate("input " + std::to_string(k), r, c), resolution);
      }
    }
  }
  return result;
}

GradCheckResult gradient_check_parameters(ParameterStore& store, const LossFn& loss, double step,
                                          double resolution) {
  auto evaluate = [&](GradientSet* grads) {
    ad::Tape tape;
    ParamBinder binder(tape, store);
    const ad::Var out = loss(binder);
    if (grads) {
      tape.backward(out);
      binder.accumulate_gradients(*grads);
    }
    return out.value()(0, 0);
  };
  GradientSet analytic = store.zero_gradients();
  GradCheckResult result;
  if (!std::isfinite(evaluate(&analytic))) result.finite = false;
  for (ParamId id = 0; id < store.size(); ++id) {
    ad::Mat& value = store.value(id);
    for (Eigen::Index r = 0; r < value.rows(); ++r) {
      for (Eigen::Index c = 0; c < value.cols(); ++c) {
        const double saved = value(r, c);
        value(r, c) = saved + step;
        const double plus = evaluate(nullptr);
        value(r, c) = saved - step;
        const double minus = evaluate(nullptr);
        value(r, c) = saved;
        record(result, analytic[id](r, c), (plus - minus) / (2.0 * step), coordinate(store[id].name, r, c),
               resolution);
      }
    }
  }
  return result;
}

}  // namespace dualres
