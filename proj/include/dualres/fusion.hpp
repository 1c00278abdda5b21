#pragma once

#include <string>
#include <vector>

#include "dualres/autodiff.hpp"
#include "dualres/box.hpp"
#include "dualres/types.hpp"

namespace dualres {

using ad::Mat;

/// Row-wise softmax of the summed branch logits.
Mat fuse_scores(const Mat& relation_logits, const Mat& object_branch_logits);

/// All ordered pairs in PredCls/SGCls; overlapping pairs only in SGGenSim.
std::vector<ObjectPair> candidate_pairs(const std::vector<BoundingBox>& boxes, TaskMode mode);

struct ScoredDetection {
  BoundingBox box;
  int label = 0;
  double score = 0.0;
};

/// Greedy per-class suppression by descending score. Returns kept indices in ascending order.
std::vector<int> per_class_nms(const std::vector<ScoredDetection>& detections, double iou_threshold = 0.3);

/// Everything needed to rank triplets for one image.
struct ScenePrediction {
  std::string image_id;
  std::vector<BoundingBox> boxes;
  std::vector<int> object_labels;
  std::vector<double> object_scores;
  std::vector<ObjectPair> pairs;
  /// pairs x C^r fused probabilities.
  Mat relation_probabilities;
};

enum class Constraint { Constrained, Unconstrained };
std::string to_string(Constraint c);

/// Drops suppressed objects and every pair touching them; indices are remapped.
ScenePrediction suppress_duplicates(const ScenePrediction& prediction, double iou_threshold = 0.3);

/// Top-K triplets by subj_score x P̂[predicate] x obj_score, predicate 0 excluded.
/// Constrained keeps only each pair's best predicate. Ties break on (subject, object, predicate).
std::vector<PredictedTriplet> rank_triplets(const ScenePrediction& prediction, int k, Constraint constraint);

}  // namespace dualres
