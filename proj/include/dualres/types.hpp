#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "dualres/box.hpp"

namespace dualres {

/// Predicate 0 marks "no relationship" and is never reported as a prediction.
inline constexpr int kNoRelation = 0;

enum class TaskMode { PredCls, SGCls, SGGenSim };

std::string to_string(TaskMode mode);
TaskMode parse_task_mode(std::string_view text);

struct AnnotatedObject {
  BoundingBox box;
  int label = 0;
  friend bool operator==(const AnnotatedObject&, const AnnotatedObject&) = default;
};

struct AnnotatedRelation {
  int subject = 0;
  int object = 0;
  int predicate = 0;
  friend bool operator==(const AnnotatedRelation&, const AnnotatedRelation&) = default;
};

struct SceneAnnotation {
  std::string image_id;
  int width = 0;
  int height = 0;
  std::vector<AnnotatedObject> objects;
  std::vector<AnnotatedRelation> relations;
  friend bool operator==(const SceneAnnotation&, const SceneAnnotation&) = default;
};

struct ObjectPair {
  int subject = 0;
  int object = 0;
  friend bool operator==(const ObjectPair&, const ObjectPair&) = default;
  friend auto operator<=>(const ObjectPair&, const ObjectPair&) = default;
};

/// One object as seen by the model before projection.
struct ObjectProposal {
  std::vector<double> appearance;
  BoundingBox box;
  std::vector<double> class_scores;
};

struct PredictedTriplet {
  int subject_index = 0;
  int object_index = 0;
  BoundingBox subject_box;
  BoundingBox object_box;
  int subject_label = 0;
  int predicate = 0;
  int object_label = 0;
  double confidence = 0.0;
};

/// Malformed input data (dataset file, prior CSV, checkpoint contents).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid user configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite values during optimisation or gradient checking.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dualres
