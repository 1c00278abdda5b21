#include "dualres/params.hpp"

#include <cmath>
#include <stdexcept>

#include "dualres/types.hpp"

namespace dualres {

ParamId ParameterStore::add(std::string name, Mat value) {
  if (index_.count(name)) throw std::invalid_argument("duplicate parameter '" + name + "'");
  const ParamId id = params_.size();
  index_.emplace(name, id);
  params_.push_back({std::move(name), std::move(value)});
  return id;
}

ParamId ParameterStore::add_weight(std::string name, Eigen::Index out, Eigen::Index in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Mat w(out, in);
  for (Eigen::Index r = 0; r < out; ++r) {
    for (Eigen::Index c = 0; c < in; ++c) w(r, c) = dist(rng);
  }
  return add(std::move(name), std::move(w));
}

ParamId ParameterStore::add_constant(std::string name, Eigen::Index rows, Eigen::Index cols, double value) {
  return add(std::move(name), Mat::Constant(rows, cols, value));
}

ParamId ParameterStore::id(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("unknown parameter '" + name + "'");
  return it->second;
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

GradientSet ParameterStore::zero_gradients() const {
  GradientSet g;
  g.reserve(params_.size());
  for (const auto& p : params_) g.push_back(Mat::Zero(p.value.rows(), p.value.cols()));
  return g;
}

bool ParameterStore::all_finite() const {
  for (const auto& p : params_) {
    if (!p.value.allFinite()) return false;
  }
  return true;
}

void ParameterStore::assign_from(const ParameterStore& other) {
  if (other.size() != size()) {
    throw DataError("parameter count mismatch: expected " + std::to_string(size()) + ", got " +
                    std::to_string(other.size()));
  }
  for (ParamId i = 0; i < size(); ++i) {
    const auto& src = other[i];
    auto& dst = params_[i];
    if (src.name != dst.name) {
      throw DataError("parameter name mismatch at " + std::to_string(i) + ": expected '" + dst.name +
                      "', got '" + src.name + "'");
    }
    if (src.value.rows() != dst.value.rows() || src.value.cols() != dst.value.cols()) {
      throw DataError("parameter '" + dst.name + "' shape mismatch: expected " +
                      std::to_string(dst.value.rows()) + "x" + std::to_string(dst.value.cols()) +
                      ", got " + std::to_string(src.value.rows()) + "x" + std::to_string(src.value.cols()));
    }
    dst.value = src.value;
  }
}

ParamBinder::ParamBinder(ad::Tape& tape, const ParameterStore& store)
    : tape_(tape), store_(store), bound_(store.size()) {}

ad::Var ParamBinder::operator()(ParamId id) {
  if (!bound_[id].valid()) bound_[id] = tape_.variable(store_.value(id));
  return bound_[id];
}

void ParamBinder::accumulate_gradients(GradientSet& out) const {
  for (ParamId i = 0; i < bound_.size(); ++i) {
    if (bound_[i].valid()) out[i] += tape_.grad(bound_[i]);
  }
}

void add_scaled(GradientSet& into, const GradientSet& from, double factor) {
  for (std::size_t i = 0; i < into.size(); ++i) into[i] += factor * from[i];
}

}  // namespace dualres
