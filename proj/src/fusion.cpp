#include "dualres/fusion.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <tuple>

#include "dualres/scene_input.hpp"

namespace dualres {

Mat fuse_scores(const Mat& relation_logits, const Mat& object_branch_logits) {
  if (relation_logits.rows() != object_branch_logits.rows() || relation_logits.cols() != object_branch_logits.cols()) {
    throw std::invalid_argument("fuse_scores: logit shapes differ");
  }
  return ad::softmax_rows(relation_logits + object_branch_logits);
}

std::vector<ObjectPair> candidate_pairs(const std::vector<BoundingBox>& boxes, TaskMode mode) {
  return ordered_pairs(boxes, mode == TaskMode::SGGenSim);
}

std::vector<int> per_class_nms(const std::vector<ScoredDetection>& detections, double iou_threshold) {
  std::vector<int> order(detections.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return detections[static_cast<std::size_t>(a)].score > detections[static_cast<std::size_t>(b)].score;
  });
  std::vector<int> kept;
  for (int idx : order) {
    const auto& d = detections[static_cast<std::size_t>(idx)];
    bool suppressed = false;
    for (int k : kept) {
      const auto& other = detections[static_cast<std::size_t>(k)];
      if (other.label == d.label && compute_iou(other.box, d.box) > iou_threshold) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(idx);
  }
  std::sort(kept.begin(), kept.end());
  return kept;
}

std::string to_string(Constraint c) {
  return c == Constraint::Constrained ? "constrained" : "unconstrained";
}

ScenePrediction suppress_duplicates(const ScenePrediction& prediction, double iou_threshold) {
  std::vector<ScoredDetection> dets;
  for (std::size_t i = 0; i < prediction.boxes.size(); ++i) {
    dets.push_back({prediction.boxes[i], prediction.object_labels[i], prediction.object_scores[i]});
  }
  const std::vector<int> kept = per_class_nms(dets, iou_threshold);
  std::vector<int> remap(prediction.boxes.size(), -1);
  ScenePrediction out;
  out.image_id = prediction.image_id;
  for (std::size_t k = 0; k < kept.size(); ++k) {
    const auto i = static_cast<std::size_t>(kept[k]);
    remap[i] = static_cast<int>(k);
    out.boxes.push_back(prediction.boxes[i]);
    out.object_labels.push_back(prediction.object_labels[i]);
    out.object_scores.push_back(prediction.object_scores[i]);
  }
  std::vector<Eigen::Index> rows;
  for (std::size_t p = 0; p < prediction.pairs.size(); ++p) {
    const int s = remap[static_cast<std::size_t>(prediction.pairs[p].subject)];
    const int o = remap[static_cast<std::size_t>(prediction.pairs[p].object)];
    if (s < 0 || o < 0) continue;
    out.pairs.push_back({s, o});
    rows.push_back(static_cast<Eigen::Index>(p));
  }
  out.relation_probabilities.resize(static_cast<Eigen::Index>(rows.size()), prediction.relation_probabilities.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out.relation_probabilities.row(static_cast<Eigen::Index>(r)) = prediction.relation_probabilities.row(rows[r]);
  }
  return out;
}

std::vector<PredictedTriplet> rank_triplets(const ScenePrediction& pred, int k, Constraint constraint) {
  if (k < 1) throw std::invalid_argument("rank_triplets: K must be at least 1");
  const Mat& P = pred.relation_probabilities;
  std::vector<PredictedTriplet> pool;
  for (std::size_t p = 0; p < pred.pairs.size(); ++p) {
    const ObjectPair pair = pred.pairs[p];
    const auto s = static_cast<std::size_t>(pair.subject);
    const auto o = static_cast<std::size_t>(pair.object);
    const double pair_score = pred.object_scores[s] * pred.object_scores[o];
    auto make = [&](int predicate) {
      return PredictedTriplet{pair.subject, pair.object, pred.boxes[s], pred.boxes[o], pred.object_labels[s],
                              predicate, pred.object_labels[o],
                              pair_score * P(static_cast<Eigen::Index>(p), predicate)};
    };
    if (constraint == Constraint::Constrained) {
      int best = 1;
      for (int c = 2; c < P.cols(); ++c) {
        if (P(static_cast<Eigen::Index>(p), c) > P(static_cast<Eigen::Index>(p), best)) best = c;
      }
      if (P.cols() > 1) pool.push_back(make(best));
    } else {
      for (int c = 1; c < P.cols(); ++c) pool.push_back(make(c));
    }
  }
  auto before = [](const PredictedTriplet& a, const PredictedTriplet& b) {
    if (a.confidence != b.confidence) return a.confidence > b.confidence;
    return std::tie(a.subject_index, a.object_index, a.predicate) <
           std::tie(b.subject_index, b.object_index, b.predicate);
  };
  const auto keep = std::min(pool.size(), static_cast<std::size_t>(k));
  std::partial_sort(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(keep), pool.end(), before);
  pool.resize(keep);
  return pool;
}

}  // namespace dualres
