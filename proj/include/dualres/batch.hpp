#pragma once

#include <vector>

#include "dualres/fusion.hpp"
#include "dualres/loss.hpp"
#include "dualres/model.hpp"

namespace dualres {

struct TrainingObjective {
  TaskMode mode = TaskMode::PredCls;
  LossMode loss = LossMode::CrossEntropy;
  OhemSettings ohem;
};

struct BatchGradient {
  double loss = 0.0;
  GradientSet gradients;
};

using SceneBatch = std::vector<const SceneInput*>;

/// Loss of a whole batch: mean object CE over all objects (skipped in PredCls) plus
/// the relation term, mean CE over all candidates or, with OHEM, the mean over
/// images of each image's OHEM loss. Gradients are summed per image in batch order,
/// so the serial and parallel versions agree bit for bit.
BatchGradient batch_gradient_serial(const Model& model, const SceneBatch& batch, const TrainingObjective& objective);
BatchGradient batch_gradient_parallel(const Model& model, const SceneBatch& batch,
                                      const TrainingObjective& objective);

/// Forward-only value of the same objective.
double batch_loss(const Model& model, const SceneBatch& batch, const TrainingObjective& objective);

/// Object labels and scores per task mode plus fused relation probabilities.
ScenePrediction predict_scene(const Model& model, const SceneInput& input);
std::vector<ScenePrediction> predict_serial(const Model& model, const SceneBatch& batch);
std::vector<ScenePrediction> predict_parallel(const Model& model, const SceneBatch& batch);

}  // namespace dualres
