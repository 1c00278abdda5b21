#pragma once

#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

#include "dualres/autodiff.hpp"
#include "dualres/rng.hpp"

namespace dualres {

using ad::Mat;
using ParamId = std::size_t;

struct Parameter {
  std::string name;
  Mat value;
};

/// One gradient matrix per parameter, same order and shapes as the store.
using GradientSet = std::vector<Mat>;

/// Named, shape-checked learnable tensors of a model.
class ParameterStore {
 public:
  ParamId add(std::string name, Mat value);
  /// Weight of shape out x in drawn from U(-1/sqrt(in), 1/sqrt(in)).
  ParamId add_weight(std::string name, Eigen::Index out, Eigen::Index in, Rng& rng);
  ParamId add_constant(std::string name, Eigen::Index rows, Eigen::Index cols, double value);

  ParamId id(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;

  const Parameter& operator[](ParamId id) const { return params_[id]; }
  Mat& value(ParamId id) { return params_[id].value; }
  const Mat& value(ParamId id) const { return params_[id].value; }
  const std::vector<Parameter>& all() const { return params_; }

  GradientSet zero_gradients() const;
  bool all_finite() const;

  /// Copies values from `other`; names and shapes must match exactly.
  void assign_from(const ParameterStore& other);

 private:
  std::vector<Parameter> params_;
  std::unordered_map<std::string, ParamId> index_;
};

/// Lazily binds store parameters as leaves of one tape.
class ParamBinder {
 public:
  ParamBinder(ad::Tape& tape, const ParameterStore& store);

  ad::Var operator()(ParamId id);
  ad::Tape& tape() { return tape_; }
  const ParameterStore& store() const { return store_; }

  /// Adds leaf gradients of every bound parameter into `out` (after backward).
  void accumulate_gradients(GradientSet& out) const;

 private:
  ad::Tape& tape_;
  const ParameterStore& store_;
  std::vector<ad::Var> bound_;
};

void add_scaled(GradientSet& into, const GradientSet& from, double factor = 1.0);

}  // namespace dualres
