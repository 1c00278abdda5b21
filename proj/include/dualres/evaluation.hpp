#pragma once

#include <vector>

#include "dualres/batch.hpp"
#include "dualres/metrics.hpp"
#include "dualres/prior.hpp"

namespace dualres {

struct EvaluationOptions {
  TaskMode mode = TaskMode::PredCls;
  std::vector<int> ks = kDefaultRecallKs;
  MeanRecallPooling pooling = MeanRecallPooling::Pooled;
  /// Per-class NMS threshold applied to predicted objects in SGGenSim.
  double nms_iou = 0.3;
  bool overlap_neighbors = false;
  bool parallel = true;
};

/// Every eligible candidate pair, no negative sampling.
std::vector<SceneInput> build_eval_inputs(const std::vector<SceneAnnotation>& scenes, const FeatureOracle& oracle,
                                          TaskMode mode, bool overlap_neighbors = false);

/// Applies SGGenSim duplicate suppression, then ranks and matches.
MetricReport evaluate_predictions(std::vector<ScenePrediction> predictions,
                                  const std::vector<SceneAnnotation>& scenes, int num_predicates,
                                  const EvaluationOptions& options);

MetricReport evaluate_model(const Model& model, const std::vector<SceneInput>& inputs,
                            const std::vector<SceneAnnotation>& scenes, const EvaluationOptions& options);
MetricReport evaluate_model(const Model& model, const Dataset& dataset, const EvaluationOptions& options);

/// Object labels as for the model without context (given labels in PredCls,
/// detector argmax otherwise); relation scores from the class-pair table.
ScenePrediction frequency_prediction(const FrequencyBaseline& baseline, const SceneInput& input);

MetricReport evaluate_frequency_baseline(const FrequencyBaseline& baseline, const Dataset& dataset,
                                         const EvaluationOptions& options);

}  // namespace dualres
