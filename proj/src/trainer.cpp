#include "dualres/trainer.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "dualres/evaluation.hpp"

namespace dualres {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (batch_size < 1) throw ConfigError("batch_size must be positive");
  if (max_epochs < 1) throw ConfigError("max_epochs must be positive");
  if (plateau_patience < 1) throw ConfigError("plateau_patience must be positive");
  if (!(lr_decay > 1.0)) throw ConfigError("lr_decay must be greater than 1");
  if (!(val_fraction >= 0.0 && val_fraction < 1.0)) throw ConfigError("val_fraction must be in [0, 1)");
  if (!(negative_ratio >= 0.0)) throw ConfigError("negative_ratio must be non-negative");
  ohem.validate();
}

void TrainConfig::read(KeyValueConfig& kv) {
  learning_rate = kv.get_double("learning_rate", learning_rate);
  batch_size = static_cast<int>(kv.get_int("batch_size", batch_size));
  max_epochs = static_cast<int>(kv.get_int("max_epochs", max_epochs));
  plateau_patience = static_cast<int>(kv.get_int("plateau_patience", plateau_patience));
  lr_decay = kv.get_double("lr_decay", lr_decay);
  seed = static_cast<std::uint64_t>(kv.get_int("seed", static_cast<long long>(seed)));
  loss = parse_loss_mode(kv.get_string("loss", to_string(loss)));
  ohem.threshold = kv.get_double("ohem_threshold", ohem.threshold);
  ohem.keep_fraction = kv.get_double("ohem_keep_fraction", ohem.keep_fraction);
  val_fraction = kv.get_double("val_fraction", val_fraction);
  negative_ratio = kv.get_double("negative_ratio", negative_ratio);
  overlap_neighbors = kv.get_bool("overlap_neighbors", overlap_neighbors);
  parallel = kv.get_bool("parallel", parallel);
}

nlohmann::json TrainConfig::to_json() const {
  return {{"learning_rate", learning_rate},
          {"batch_size", batch_size},
          {"max_epochs", max_epochs},
          {"plateau_patience", plateau_patience},
          {"lr_decay", lr_decay},
          {"seed", seed},
          {"task", to_string(task)},
          {"loss", to_string(loss)},
          {"ohem_threshold", ohem.threshold},
          {"ohem_keep_fraction", ohem.keep_fraction},
          {"val_fraction", val_fraction},
          {"negative_ratio", negative_ratio},
          {"overlap_neighbors", overlap_neighbors},
          {"parallel", parallel}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& doc) {
  TrainConfig c;
  c.learning_rate = doc.at("learning_rate").get<double>();
  c.batch_size = doc.at("batch_size").get<int>();
  c.max_epochs = doc.at("max_epochs").get<int>();
  c.plateau_patience = doc.at("plateau_patience").get<int>();
  c.lr_decay = doc.at("lr_decay").get<double>();
  c.seed = doc.at("seed").get<std::uint64_t>();
  c.task = parse_task_mode(doc.at("task").get<std::string>());
  c.loss = parse_loss_mode(doc.at("loss").get<std::string>());
  c.ohem.threshold = doc.at("ohem_threshold").get<double>();
  c.ohem.keep_fraction = doc.at("ohem_keep_fraction").get<double>();
  c.val_fraction = doc.at("val_fraction").get<double>();
  c.negative_ratio = doc.at("negative_ratio").get<double>();
  c.overlap_neighbors = doc.at("overlap_neighbors").get<bool>();
  c.parallel = doc.at("parallel").get<bool>();
  c.validate();
  return c;
}

Trainer::Trainer(Model& model, const Dataset& train, TrainConfig config)
    : model_(model), config_(std::move(config)), optimizer_(model.params()) {
  config_.validate();
  if (train.images.empty()) throw DataError("training set has no images");
  const FeatureOracle oracle = oracle_from_dataset(train);

  const std::size_t n = train.images.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng split_rng = make_rng(config_.seed, {hash_string("split")});
  std::shuffle(order.begin(), order.end(), split_rng);
  std::size_t n_val = 0;
  if (config_.val_fraction > 0.0 && n >= 2) {
    n_val = std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(config_.val_fraction * static_cast<double>(n))),
                                    1, n - 1);
  }
  std::vector<std::size_t> val_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train_idx(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  std::sort(val_idx.begin(), val_idx.end());
  std::sort(train_idx.begin(), train_idx.end());

  std::vector<SceneAnnotation> train_scenes;
  for (std::size_t i : train_idx) train_scenes.push_back(train.images[i]);
  for (std::size_t i : val_idx) val_scenes_.push_back(train.images[i]);
  if (val_scenes_.empty()) val_scenes_ = train_scenes;
  train_inputs_ = build_eval_inputs(train_scenes, oracle, config_.task, config_.overlap_neighbors);
  val_inputs_ = build_eval_inputs(val_scenes_, oracle, config_.task, config_.overlap_neighbors);

  rng_ = make_rng(config_.seed, {hash_string("train")});
  learning_rate_ = config_.learning_rate;
}

EpochRecord Trainer::run_epoch() {
  const int epoch = epoch_ + 1;
  std::vector<std::size_t> order(train_inputs_.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng_);

  TrainingObjective objective;
  objective.mode = config_.task;
  objective.loss = config_.loss;
  objective.ohem = config_.ohem;

  double loss_sum = 0.0;
  int batches = 0;
  const auto bs = static_cast<std::size_t>(config_.batch_size);
  for (std::size_t start = 0; start < order.size(); start += bs) {
    const std::size_t stop = std::min(order.size(), start + bs);
    std::vector<SceneInput> sampled;
    sampled.reserve(stop - start);
    for (std::size_t i = start; i < stop; ++i) {
      sampled.push_back(sample_training_candidates(train_inputs_[order[i]], config_.negative_ratio, rng_));
    }
    SceneBatch batch;
    for (const auto& s : sampled) batch.push_back(&s);
    const BatchGradient g = config_.parallel ? batch_gradient_parallel(model_, batch, objective)
                                             : batch_gradient_serial(model_, batch, objective);
    if (!std::isfinite(g.loss)) {
      throw NumericError("training diverged at epoch " + std::to_string(epoch) + ": loss is not finite");
    }
    optimizer_.step(model_.params(), g.gradients, learning_rate_);
    if (!model_.params().all_finite()) {
      throw NumericError("training diverged at epoch " + std::to_string(epoch) + ": parameters are not finite");
    }
    loss_sum += g.loss;
    ++batches;
  }

  EvaluationOptions eval;
  eval.mode = config_.task;
  eval.ks = {50};
  eval.overlap_neighbors = config_.overlap_neighbors;
  eval.parallel = config_.parallel;
  const MetricReport report = evaluate_model(model_, val_inputs_, val_scenes_, eval);
  const MetricEntry& r50 = report.at(Constraint::Constrained, 50);

  EpochRecord rec;
  rec.epoch = epoch;
  rec.train_loss = batches == 0 ? 0.0 : loss_sum / batches;
  rec.val_recall = r50.recall;
  rec.val_mean_recall = r50.mean_recall;
  rec.learning_rate = learning_rate_;

  if (r50.recall > best_recall_) {
    best_recall_ = r50.recall;
    stale_epochs_ = 0;
  } else if (++stale_epochs_ >= config_.plateau_patience) {
    learning_rate_ /= config_.lr_decay;
    stale_epochs_ = 0;
  }
  epoch_ = epoch;
  history_.push_back(rec);
  return rec;
}

const std::vector<EpochRecord>& Trainer::fit(const std::function<void(const EpochRecord&)>& on_epoch) {
  while (!finished()) {
    const EpochRecord rec = run_epoch();
    if (on_epoch) on_epoch(rec);
  }
  return history_;
}

Checkpoint Trainer::checkpoint() const {
  Checkpoint c;
  std::ostringstream rng_state;
  rng_state << rng_;
  nlohmann::json history = nlohmann::json::array();
  for (const auto& h : history_) {
    history.push_back({{"epoch", h.epoch},
                       {"train_loss", h.train_loss},
                       {"val_recall", h.val_recall},
                       {"val_mean_recall", h.val_mean_recall},
                       {"learning_rate", h.learning_rate}});
  }
  c.meta = {{"model", model_.config().to_json()},
            {"train", config_.to_json()},
            {"epoch", epoch_},
            {"learning_rate", learning_rate_},
            {"best_recall", best_recall_},
            {"stale_epochs", stale_epochs_},
            {"rng", rng_state.str()},
            {"history", history}};
  c.params = model_.params();
  c.prior = model_.prior();
  c.adam = optimizer_.state();
  return c;
}

void Trainer::restore(const Checkpoint& c) {
  const ModelConfig saved = ModelConfig::from_json(c.meta.at("model"));
  if (!(saved == model_.config())) throw DataError("checkpoint was written for a different model configuration");
  TrainConfig saved_train = TrainConfig::from_json(c.meta.at("train"));
  saved_train.max_epochs = config_.max_epochs;
  if (!(saved_train == config_)) {
    throw DataError("checkpoint was written with a different training configuration");
  }
  model_.params().assign_from(c.params);
  model_.set_prior(c.prior);
  optimizer_.set_state(c.adam);
  std::istringstream rng_state(c.meta.at("rng").get<std::string>());
  rng_state >> rng_;
  if (!rng_state) throw DataError("checkpoint rng state is malformed");
  epoch_ = c.meta.at("epoch").get<int>();
  learning_rate_ = c.meta.at("learning_rate").get<double>();
  best_recall_ = c.meta.at("best_recall").get<double>();
  stale_epochs_ = c.meta.at("stale_epochs").get<int>();
  history_.clear();
  for (const auto& h : c.meta.at("history")) {
    history_.push_back({h.at("epoch").get<int>(), h.at("train_loss").get<double>(), h.at("val_recall").get<double>(),
                        h.at("val_mean_recall").get<double>(), h.at("learning_rate").get<double>()});
  }
}

CsvTable history_table(const std::vector<EpochRecord>& history) {
  CsvTable t;
  t.header = {"epoch", "train_loss", "val_R@50", "val_mR@50", "learning_rate"};
  for (const auto& h : history) {
    t.rows.push_back({std::to_string(h.epoch), format_double(h.train_loss), format_double(h.val_recall),
                      format_double(h.val_mean_recall), format_double(h.learning_rate)});
  }
  return t;
}

}  // namespace dualres
