#include "dualres/evaluation.hpp"

namespace dualres {

std::vector<SceneInput> build_eval_inputs(const std::vector<SceneAnnotation>& scenes, const FeatureOracle& oracle,
                                          TaskMode mode, bool overlap_neighbors) {
  SceneInputOptions opts;
  opts.mode = mode;
  opts.training = false;
  opts.overlap_neighbors = overlap_neighbors;
  Rng unused(0);
  std::vector<SceneInput> out;
  out.reserve(scenes.size());
  for (const auto& scene : scenes) out.push_back(build_scene_input(scene, oracle, opts, unused));
  return out;
}

MetricReport evaluate_predictions(std::vector<ScenePrediction> predictions,
                                  const std::vector<SceneAnnotation>& scenes, int num_predicates,
                                  const EvaluationOptions& options) {
  if (options.mode == TaskMode::SGGenSim) {
    for (auto& p : predictions) p = suppress_duplicates(p, options.nms_iou);
  }
  return compute_report(predictions, scenes, options.mode, num_predicates, options.ks, options.pooling);
}

MetricReport evaluate_model(const Model& model, const std::vector<SceneInput>& inputs,
                            const std::vector<SceneAnnotation>& scenes, const EvaluationOptions& options) {
  SceneBatch batch;
  for (const auto& in : inputs) batch.push_back(&in);
  auto predictions = options.parallel ? predict_parallel(model, batch) : predict_serial(model, batch);
  return evaluate_predictions(std::move(predictions), scenes, model.config().num_predicates, options);
}

MetricReport evaluate_model(const Model& model, const Dataset& dataset, const EvaluationOptions& options) {
  const FeatureOracle oracle = oracle_from_dataset(dataset);
  const ModelConfig& mc = model.config();
  const GeneratorConfig& g = oracle.config();
  const std::pair<const char*, std::pair<int, int>> checks[] = {
      {"appearance_dim", {mc.appearance_dim, g.appearance_dim}},
      {"union_dim", {mc.union_dim, g.union_dim}},
      {"num_object_classes", {mc.num_object_classes, g.num_object_classes}},
      {"num_predicates", {mc.num_predicates, g.num_predicates}}};
  for (const auto& [key, v] : checks) {
    if (v.first != v.second) {
      throw DataError(std::string("model was built with ") + key + " = " + std::to_string(v.first) +
                      " but the dataset has " + std::to_string(v.second));
    }
  }
  const auto inputs = build_eval_inputs(dataset.images, oracle, options.mode, options.overlap_neighbors);
  return evaluate_model(model, inputs, dataset.images, options);
}

ScenePrediction frequency_prediction(const FrequencyBaseline& baseline, const SceneInput& in) {
  const int C_o = baseline.num_object_classes();
  const Eigen::Index first = in.object_inputs.cols() - C_o;
  ScenePrediction pred;
  pred.image_id = in.image_id;
  pred.boxes = in.boxes;
  for (int i = 0; i < in.num_objects(); ++i) {
    if (in.mode == TaskMode::PredCls) {
      pred.object_labels.push_back(in.object_labels[static_cast<std::size_t>(i)]);
      pred.object_scores.push_back(1.0);
      continue;
    }
    Eigen::Index best = 0;
    const double score = in.object_inputs.row(i).segment(first, C_o).maxCoeff(&best);
    pred.object_labels.push_back(static_cast<int>(best));
    pred.object_scores.push_back(score);
  }
  pred.relation_probabilities.resize(static_cast<Eigen::Index>(in.candidates.size()), baseline.num_predicates());
  for (std::size_t k = 0; k < in.candidates.size(); ++k) {
    const ObjectPair p = in.candidate_pair(k);
    pred.pairs.push_back(p);
    const auto dist = baseline.distribution(pred.object_labels[static_cast<std::size_t>(p.subject)],
                                            pred.object_labels[static_cast<std::size_t>(p.object)]);
    for (int c = 0; c < baseline.num_predicates(); ++c) {
      pred.relation_probabilities(static_cast<Eigen::Index>(k), c) = dist[static_cast<std::size_t>(c)];
    }
  }
  return pred;
}

MetricReport evaluate_frequency_baseline(const FrequencyBaseline& baseline, const Dataset& dataset,
                                         const EvaluationOptions& options) {
  const FeatureOracle oracle = oracle_from_dataset(dataset);
  const auto inputs = build_eval_inputs(dataset.images, oracle, options.mode, options.overlap_neighbors);
  std::vector<ScenePrediction> predictions;
  for (const auto& in : inputs) predictions.push_back(frequency_prediction(baseline, in));
  return evaluate_predictions(std::move(predictions), dataset.images, baseline.num_predicates(), options);
}

}  // namespace dualres
