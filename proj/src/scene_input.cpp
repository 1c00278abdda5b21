#include "dualres/scene_input.hpp"

#include <algorithm>
#include <map>

namespace dualres {

std::vector<ObjectPair> ordered_pairs(const std::vector<BoundingBox>& boxes, bool overlap_only) {
  std::vector<ObjectPair> out;
  const int n = static_cast<int>(boxes.size());
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      if (overlap_only &&
          !(compute_iou(boxes[static_cast<std::size_t>(i)], boxes[static_cast<std::size_t>(j)]) > 0.0)) {
        continue;
      }
      out.push_back({i, j});
    }
  }
  return out;
}

SceneInput build_scene_input(const SceneAnnotation& scene, const FeatureOracle& oracle,
                             const SceneInputOptions& options, Rng& sampling_rng) {
  const GeneratorConfig& gen = oracle.config();
  SceneInput in;
  in.image_id = scene.image_id;
  in.mode = options.mode;
  in.width = scene.width;
  in.height = scene.height;

  std::map<std::pair<int, int>, int> annotated;
  for (const auto& rel : scene.relations) annotated[{rel.subject, rel.object}] = rel.predicate;

  std::vector<ObjectProposal> proposals;
  if (options.mode == TaskMode::SGGenSim) {
    const auto dets = oracle.detections(scene);
    for (std::size_t k = 0; k < dets.size(); ++k) {
      const int src = dets[k].source_object;
      const int label = scene.objects[static_cast<std::size_t>(src)].label;
      in.boxes.push_back(dets[k].box);
      in.source_object.push_back(src);
      in.object_labels.push_back(label);
      proposals.push_back({oracle.appearance(scene.image_id, src, label), dets[k].box,
                           oracle.detector_scores(scene.image_id, static_cast<int>(k), label)});
    }
  } else {
    for (std::size_t i = 0; i < scene.objects.size(); ++i) {
      const auto& obj = scene.objects[i];
      const int idx = static_cast<int>(i);
      in.boxes.push_back(obj.box);
      in.source_object.push_back(idx);
      in.object_labels.push_back(obj.label);
      std::vector<double> scores;
      if (options.mode == TaskMode::PredCls) {
        scores.assign(static_cast<std::size_t>(gen.num_object_classes), 0.0);
        scores[static_cast<std::size_t>(obj.label)] = 1.0;
      } else {
        scores = oracle.detector_scores(scene.image_id, idx, obj.label);
      }
      proposals.push_back({oracle.appearance(scene.image_id, idx, obj.label), obj.box, std::move(scores)});
    }
  }
  FeatureDims dims;
  dims.appearance_dim = gen.appearance_dim;
  dims.num_object_classes = gen.num_object_classes;
  in.object_inputs = object_input_rows(proposals, in.width, in.height, dims);

  const bool sggen = options.mode == TaskMode::SGGenSim;
  in.context_pairs = ordered_pairs(in.boxes, sggen && options.overlap_neighbors);

  // Label and union features of a model pair come from its source objects.
  auto pair_predicate = [&](const ObjectPair& p) {
    const int si = in.source_object[static_cast<std::size_t>(p.subject)];
    const int oi = in.source_object[static_cast<std::size_t>(p.object)];
    if (si == oi) return kNoRelation;
    auto it = annotated.find({si, oi});
    return it == annotated.end() ? kNoRelation : it->second;
  };
  in.union_features.resize(static_cast<Eigen::Index>(in.context_pairs.size()), gen.union_dim);
  for (std::size_t k = 0; k < in.context_pairs.size(); ++k) {
    const ObjectPair p = in.context_pairs[k];
    const int si = in.source_object[static_cast<std::size_t>(p.subject)];
    const int oi = in.source_object[static_cast<std::size_t>(p.object)];
    std::vector<double> u;
    if (si == oi) {
      // Two detections of one object: noise keyed beyond the object index range.
      const int base = static_cast<int>(scene.objects.size());
      u = oracle.union_features(scene.image_id, base + p.subject, base + p.object, kNoRelation);
    } else {
      u = oracle.union_features(scene.image_id, si, oi, pair_predicate(p));
    }
    for (int c = 0; c < gen.union_dim; ++c) in.union_features(static_cast<Eigen::Index>(k), c) = u[static_cast<std::size_t>(c)];
  }

  // Candidates: overlap-filtered in SGGenSim, all pairs otherwise.
  std::vector<int> eligible;
  for (std::size_t k = 0; k < in.context_pairs.size(); ++k) {
    const ObjectPair p = in.context_pairs[k];
    if (sggen && !(compute_iou(in.boxes[static_cast<std::size_t>(p.subject)],
                               in.boxes[static_cast<std::size_t>(p.object)]) > 0.0)) {
      continue;
    }
    eligible.push_back(static_cast<int>(k));
  }
  in.candidates = std::move(eligible);

  in.spatial_raw.resize(static_cast<Eigen::Index>(in.candidates.size()), kRawSpatialDim);
  for (std::size_t k = 0; k < in.candidates.size(); ++k) {
    const ObjectPair p = in.candidate_pair(k);
    const auto raw = raw_spatial_features(in.boxes[static_cast<std::size_t>(p.subject)],
                                          in.boxes[static_cast<std::size_t>(p.object)], in.width, in.height);
    for (int c = 0; c < kRawSpatialDim; ++c) in.spatial_raw(static_cast<Eigen::Index>(k), c) = raw[static_cast<std::size_t>(c)];
    in.relation_labels.push_back(pair_predicate(p));
  }
  if (options.training) return sample_training_candidates(in, options.negative_ratio, sampling_rng);
  return in;
}

SceneInput sample_training_candidates(const SceneInput& full, double negative_ratio, Rng& rng) {
  std::vector<std::size_t> positives, negatives;
  for (std::size_t k = 0; k < full.candidates.size(); ++k) {
    (full.relation_labels[k] != kNoRelation ? positives : negatives).push_back(k);
  }
  std::shuffle(negatives.begin(), negatives.end(), rng);
  const auto keep = static_cast<std::size_t>(
      std::max(1.0, negative_ratio * static_cast<double>(std::max<std::size_t>(positives.size(), 1))));
  if (negatives.size() > keep) negatives.resize(keep);
  std::vector<std::size_t> rows = positives;
  rows.insert(rows.end(), negatives.begin(), negatives.end());
  std::sort(rows.begin(), rows.end());

  SceneInput out = full;
  out.candidates.clear();
  out.relation_labels.clear();
  out.spatial_raw.resize(static_cast<Eigen::Index>(rows.size()), full.spatial_raw.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out.candidates.push_back(full.candidates[rows[r]]);
    out.relation_labels.push_back(full.relation_labels[rows[r]]);
    out.spatial_raw.row(static_cast<Eigen::Index>(r)) = full.spatial_raw.row(static_cast<Eigen::Index>(rows[r]));
  }
  return out;
}

}  // namespace dualres
