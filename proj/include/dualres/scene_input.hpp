#pragma once

#include <string>
#include <vector>

#include "dualres/autodiff.hpp"
#include "dualres/features.hpp"
#include "dualres/rng.hpp"
#include "dualres/synthgen.hpp"
#include "dualres/types.hpp"

namespace dualres {

/// Numeric view of one image as consumed by the model.
struct SceneInput {
  std::string image_id;
  TaskMode mode = TaskMode::PredCls;
  double width = 0.0;
  double height = 0.0;
  /// Boxes the model sees: annotated boxes, or simulated detections in SGGenSim.
  std::vector<BoundingBox> boxes;
  /// n x (d_f + 4 + C^o) rows of [appearance ; normalised box ; class scores].
  Mat object_inputs;
  /// Ordered pairs forming each object's neighbourhood N_i.
  std::vector<ObjectPair> context_pairs;
  /// Raw union-region features u_ij, one row per context pair.
  Mat union_features;
  /// Candidate relation pairs as indices into context_pairs.
  std::vector<int> candidates;
  /// Raw 16-dim box encoding per candidate.
  Mat spatial_raw;

  /// Ground-truth class per model object (source object's class in SGGenSim).
  std::vector<int> object_labels;
  /// Ground-truth predicate per candidate (0 = none).
  std::vector<int> relation_labels;
  /// Annotated object index behind each model object.
  std::vector<int> source_object;

  int num_objects() const { return static_cast<int>(boxes.size()); }
  ObjectPair candidate_pair(std::size_t k) const { return context_pairs[static_cast<std::size_t>(candidates[k])]; }
};

struct SceneInputOptions {
  TaskMode mode = TaskMode::PredCls;
  /// Training: annotated pairs plus sampled negatives. Otherwise every eligible pair.
  bool training = false;
  double negative_ratio = 3.0;
  /// SGGenSim only: restrict N_i to overlapping boxes.
  bool overlap_neighbors = false;
};

/// All ordered pairs (i, j), i != j, optionally only those with IoU > 0.
std::vector<ObjectPair> ordered_pairs(const std::vector<BoundingBox>& boxes, bool overlap_only);

/// Keeps every annotated candidate plus up to `negative_ratio` x positives sampled
/// negatives (at least one), preserving candidate order.
SceneInput sample_training_candidates(const SceneInput& full, double negative_ratio, Rng& rng);

/// `sampling_rng` drives negative sampling only; features come from the oracle.
SceneInput build_scene_input(const SceneAnnotation& scene, const FeatureOracle& oracle,
                             const SceneInputOptions& options, Rng& sampling_rng);

}  // namespace dualres
