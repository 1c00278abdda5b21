#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"

#include "dualres/batch.hpp"
#include "dualres/config.hpp"
#include "dualres/csv.hpp"
#include "dualres/optimizer.hpp"

namespace dualres {

struct TrainConfig {
  /// Adam step size. Desk-scale default; pretrained-backbone setups use about 1e-5.
  double learning_rate = 1e-3;
  int batch_size = 8;
  int max_epochs = 15;
  /// Epochs without validation R@50 improvement before the learning rate is divided.
  int plateau_patience = 3;
  double lr_decay = 10.0;
  std::uint64_t seed = 0;
  TaskMode task = TaskMode::PredCls;
  LossMode loss = LossMode::CrossEntropy;
  OhemSettings ohem;
  /// Share of the training images held out for plateau monitoring. 0 monitors the training set.
  double val_fraction = 0.1;
  double negative_ratio = 3.0;
  bool overlap_neighbors = false;
  bool parallel = true;

  void validate() const;
  /// Reads the documented training keys; other keys are left for the caller.
  void read(KeyValueConfig& kv);
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& doc);

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_recall = 0.0;
  double val_mean_recall = 0.0;
  double learning_rate = 0.0;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct Checkpoint {
  nlohmann::json meta;
  ParameterStore params;
  Mat prior;
  AdamState adam;
};

std::string serialize_checkpoint(const Checkpoint& checkpoint);
Checkpoint parse_checkpoint(const std::string& bytes);
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Rebuilds the model recorded in a checkpoint.
Model model_from_checkpoint(const Checkpoint& checkpoint);

/// Mini-batch Adam training with validation-driven learning-rate decay.
class Trainer {
 public:
  /// `model` must outlive the trainer and is updated in place.
  Trainer(Model& model, const Dataset& train, TrainConfig config);

  bool finished() const { return epoch_ >= config_.max_epochs; }
  int epoch() const { return epoch_; }
  double learning_rate() const { return learning_rate_; }
  const std::vector<EpochRecord>& history() const { return history_; }
  const TrainConfig& config() const { return config_; }

  /// One pass over the training images. Throws NumericError on divergence.
  EpochRecord run_epoch();
  /// Runs until max_epochs, calling `on_epoch` after each one.
  const std::vector<EpochRecord>& fit(const std::function<void(const EpochRecord&)>& on_epoch = {});

  Checkpoint checkpoint() const;
  /// Continues from a checkpoint written by an identically configured trainer.
  void restore(const Checkpoint& checkpoint);

 private:
  Model& model_;
  TrainConfig config_;
  std::vector<SceneAnnotation> val_scenes_;
  std::vector<SceneInput> train_inputs_;
  std::vector<SceneInput> val_inputs_;
  Adam optimizer_;
  Rng rng_;
  int epoch_ = 0;
  double learning_rate_ = 0.0;
  double best_recall_ = -1.0;
  int stale_epochs_ = 0;
  std::vector<EpochRecord> history_;
};

/// Columns epoch, train_loss, val_R@50, val_mR@50, learning_rate.
CsvTable history_table(const std::vector<EpochRecord>& history);

}  // namespace dualres
