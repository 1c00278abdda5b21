#include "dualres/batch.hpp"

#include <exception>

namespace dualres {

namespace {

struct Normalisers {
  double objects = 0.0;
  double relations = 0.0;
  double images_with_relations = 0.0;
};

Normalisers normalisers(const SceneBatch& batch) {
  Normalisers n;
  for (const SceneInput* in : batch) {
    n.objects += static_cast<double>(in->num_objects());
    n.relations += static_cast<double>(in->candidates.size());
    if (!in->candidates.empty()) n.images_with_relations += 1.0;
  }
  return n;
}

ad::Var scene_objective(const ModelOutputs& out, const SceneInput& in, const TrainingObjective& objective,
                        const Normalisers& norm) {
  ad::Tape& tape = out.object_logits.tape();
  ad::Var loss = tape.constant(Mat::Zero(1, 1));
  if (objective.mode != TaskMode::PredCls && norm.objects > 0.0 && in.num_objects() > 0) {
    loss = ad::scale(ad::cross_entropy_sum(out.object_logits, in.object_labels), 1.0 / norm.objects);
  }
  if (in.candidates.empty()) return loss;
  ad::Var rel;
  if (objective.loss == LossMode::Ohem) {
    rel = ad::scale(ohem_cross_entropy(out.relation_logits, in.relation_labels, objective.ohem),
                    1.0 / norm.images_with_relations);
  } else {
    rel = ad::scale(ad::cross_entropy_sum(out.relation_logits, in.relation_labels), 1.0 / norm.relations);
  }
  return ad::add(loss, rel);
}

struct SceneGradient {
  double loss = 0.0;
  GradientSet gradients;
};

SceneGradient scene_gradient(const Model& model, const SceneInput& in, const TrainingObjective& objective,
                             const Normalisers& norm) {
  ad::Tape tape;
  ParamBinder binder(tape, model.params());
  const ad::Var loss = scene_objective(model.forward(binder, in), in, objective, norm);
  SceneGradient out;
  out.loss = loss.value()(0, 0);
  out.gradients = model.params().zero_gradients();
  if (tape.requires_grad(loss)) {
    tape.backward(loss);
    binder.accumulate_gradients(out.gradients);
  }
  return out;
}

BatchGradient reduce(const Model& model, std::vector<SceneGradient>& parts) {
  BatchGradient total;
  total.gradients = model.params().zero_gradients();
  for (auto& p : parts) {
    total.loss += p.loss;
    add_scaled(total.gradients, p.gradients);
  }
  return total;
}

template <typename Fn>
void run_parallel(std::size_t count, Fn&& fn) {
  std::vector<std::exception_ptr> errors(count);
  const auto n = static_cast<long long>(count);
#pragma omp parallel for schedule(dynamic, 1)
  for (long long i = 0; i < n; ++i) {
    try {
      fn(static_cast<std::size_t>(i));
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

BatchGradient batch_gradient_serial(const Model& model, const SceneBatch& batch, const TrainingObjective& objective) {
  const Normalisers norm = normalisers(batch);
  BatchGradient total;
  total.gradients = model.params().zero_gradients();
  for (const SceneInput* in : batch) {
    const SceneGradient part = scene_gradient(model, *in, objective, norm);
    total.loss += part.loss;
    add_scaled(total.gradients, part.gradients);
  }
  return total;
}

BatchGradient batch_gradient_parallel(const Model& model, const SceneBatch& batch,
                                      const TrainingObjective& objective) {
  const Normalisers norm = normalisers(batch);
  std::vector<SceneGradient> parts(batch.size());
  run_parallel(batch.size(), [&](std::size_t i) { parts[i] = scene_gradient(model, *batch[i], objective, norm); });
  return reduce(model, parts);
}

double batch_loss(const Model& model, const SceneBatch& batch, const TrainingObjective& objective) {
  const Normalisers norm = normalisers(batch);
  double total = 0.0;
  for (const SceneInput* in : batch) {
    ad::Tape tape;
    ParamBinder binder(tape, model.params());
    total += scene_objective(model.forward(binder, *in), *in, objective, norm).value()(0, 0);
  }
  return total;
}

ScenePrediction predict_scene(const Model& model, const SceneInput& in) {
  ad::Tape tape;
  ParamBinder binder(tape, model.params());
  const ModelOutputs out = model.forward(binder, in);
  const ObjectPrediction objects = predict_object_classes(out.object_logits.value(), in.mode, in.object_labels);
  ScenePrediction pred;
  pred.image_id = in.image_id;
  pred.boxes = in.boxes;
  pred.object_labels = objects.labels;
  pred.object_scores = objects.scores;
  for (std::size_t k = 0; k < in.candidates.size(); ++k) pred.pairs.push_back(in.candidate_pair(k));
  pred.relation_probabilities = ad::softmax_rows(out.relation_logits.value());
  return pred;
}

std::vector<ScenePrediction> predict_serial(const Model& model, const SceneBatch& batch) {
  std::vector<ScenePrediction> out;
  out.reserve(batch.size());
  for (const SceneInput* in : batch) out.push_back(predict_scene(model, *in));
  return out;
}

std::vector<ScenePrediction> predict_parallel(const Model& model, const SceneBatch& batch) {
  std::vector<ScenePrediction> out(batch.size());
  run_parallel(batch.size(), [&](std::size_t i) { out[i] = predict_scene(model, *batch[i]); });
  return out;
}

}  // namespace dualres
