#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "dualres/evaluation.hpp"
#include "dualres/gradcheck.hpp"
#include "dualres/trainer.hpp"
#include "test_support.hpp"

namespace dualres {
namespace {

using ad::Tape;
using testing::randomize_parameters;
using testing::random_matrix;
using testing::tiny_generator;
using testing::tiny_model;

double log_softmax_ref(const Mat& logits, Eigen::Index row, int label) {
  double m = logits.row(row).maxCoeff();
  double z = 0.0;
  for (Eigen::Index c = 0; c < logits.cols(); ++c) z += std::exp(logits(row, c) - m);
  return logits(row, label) - m - std::log(z);
}

TEST(TotalLoss, UniformLogitsGiveLogC) {
  Tape t;
  const auto v = total_loss(t.constant(Mat::Zero(3, 4)), {0, 1, 2}, t.constant(Mat::Zero(5, 7)), {0, 1, 2, 3, 6},
                            TaskMode::PredCls);
  EXPECT_NEAR(v.value()(0, 0), std::log(7.0), 1e-14);
  const auto both = total_loss(t.constant(Mat::Zero(3, 4)), {0, 1, 2}, t.constant(Mat::Zero(5, 7)), {0, 1, 2, 3, 6},
                               TaskMode::SGCls);
  EXPECT_NEAR(both.value()(0, 0), std::log(7.0) + std::log(4.0), 1e-14);
}

TEST(TotalLoss, LargeMarginGoesToZero) {
  Tape t;
  Mat logits = Mat::Zero(2, 3);
  logits(0, 1) = 60.0;
  logits(1, 2) = 60.0;
  EXPECT_LT(total_loss(t.constant(logits), {1, 2}, t.constant(logits), {1, 2}, TaskMode::SGCls).value()(0, 0), 1e-20);
}

TEST(TotalLoss, MatchesLogSoftmaxOracle) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const Mat obj = random_matrix(4, 3, rng, 4.0), rel = random_matrix(6, 5, rng, 4.0);
    const std::vector<int> ol{0, 2, 1, 1}, rl{4, 0, 0, 3, 2, 1};
    double o = 0.0, r = 0.0;
    for (int i = 0; i < 4; ++i) o -= log_softmax_ref(obj, i, ol[static_cast<std::size_t>(i)]);
    for (int i = 0; i < 6; ++i) r -= log_softmax_ref(rel, i, rl[static_cast<std::size_t>(i)]);
    Tape t;
    EXPECT_NEAR(total_loss(t.constant(obj), ol, t.constant(rel), rl, TaskMode::SGCls).value()(0, 0), o / 4 + r / 6, 1e-12);
    EXPECT_NEAR(total_loss(t.constant(obj), ol, t.constant(rel), rl, TaskMode::PredCls).value()(0, 0), r / 6, 1e-12);
  }
}

TEST(Ohem, HandExample) {
  const Mat P = (Mat(2, 2) << 0.9, 0.1, 0.4, 0.6).finished();
  const OhemSettings s{0.7, 1.0};
  EXPECT_EQ(ohem_selection({0.9, 0.6}, s), (std::vector<int>{1}));
  EXPECT_NEAR(ohem_loss(P, {0, 1}, s), -std::log(0.6), 1e-15);
  EXPECT_NEAR(ohem_loss(P, {0, 1}, s), 0.5108, 1e-4);
}

TEST(Ohem, DegenerateThresholdsEqualMeanCe) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const Mat logits = random_matrix(8, 4, rng, 3.0);
    const Mat P = ad::softmax_rows(logits);
    std::vector<int> labels;
    std::uniform_int_distribution<int> lab(0, 3);
    double ce = 0.0;
    for (int i = 0; i < 8; ++i) {
      labels.push_back(lab(rng));
      ce -= std::log(P(i, labels.back()));
    }
    EXPECT_NEAR(ohem_loss(P, labels, {1.0, 1.0}), ce / 8, 1e-6);
    Tape t;
    EXPECT_NEAR(ohem_cross_entropy(t.constant(logits), labels, {1.0, 1.0}).value()(0, 0), ce / 8, 1e-6);
  }
}

TEST(Ohem, FallsBackWhenNothingIsHard) {
  const Mat P = (Mat(2, 2) << 0.9, 0.1, 0.2, 0.8).finished();
  EXPECT_TRUE(ohem_selection({0.9, 0.8}, {0.7, 0.7}).empty());
  EXPECT_NEAR(ohem_loss(P, {0, 1}, {0.7, 0.7}), -(std::log(0.9) + std::log(0.8)) / 2, 1e-15);
}

TEST(Ohem, ThresholdThenTopFraction) {
  // Hard rows 0, 2, 3, 4 (p < 0.7); ceil(0.5 * 4) = 2 lowest kept, ties by row.
  EXPECT_EQ(ohem_selection({0.3, 0.9, 0.1, 0.3, 0.5}, {0.7, 0.5}), (std::vector<int>{2, 0}));
  EXPECT_EQ(ohem_selection({0.3, 0.9, 0.1, 0.3, 0.5}, {0.7, 0.6}), (std::vector<int>{2, 0, 3}));
}

TEST(Ohem, ShrinkingTheKeptSetNeverLowersTheLoss) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const Mat P = ad::softmax_rows(random_matrix(10, 3, rng, 3.0));
    std::vector<int> labels(10);
    for (auto& l : labels) l = static_cast<int>(rng() % 3);
    double previous = ohem_loss(P, labels, {0.9, 1.0});
    for (double tau : {0.8, 0.6, 0.4, 0.2, 0.05}) {
      const double cur = ohem_loss(P, labels, {0.9, tau});
      EXPECT_GE(cur, previous - 1e-12);
      previous = cur;
    }
  }
}

TEST(Ohem, SettingsAreValidated) {
  EXPECT_THROW((OhemSettings{0.0, 0.5}.validate()), ConfigError);
  EXPECT_THROW((OhemSettings{0.5, 1.5}.validate()), ConfigError);
  EXPECT_NO_THROW((OhemSettings{1.0, 1.0}.validate()));
  EXPECT_THROW(parse_loss_mode("focal"), ConfigError);
}

TEST(AdamOptimizer, MatchesHandUpdate) {
  ParameterStore store;
  const ParamId id = store.add("w", (Mat(1, 3) << 1.0, -2.0, 0.5).finished());
  Adam adam(store);
  const Mat g1 = (Mat(1, 3) << 0.5, -1.0, 0.0).finished();
  const Mat g2 = (Mat(1, 3) << -0.25, 2.0, 1.0).finished();
  const double lr = 0.1, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  Mat w = store.value(id), m = Mat::Zero(1, 3), v = Mat::Zero(1, 3);
  int step = 0;
  for (const Mat& g : {g1, g2}) {
    ++step;
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g.cwiseProduct(g);
    for (int k = 0; k < 3; ++k) {
      const double mh = m(0, k) / (1 - std::pow(b1, step));
      const double vh = v(0, k) / (1 - std::pow(b2, step));
      w(0, k) -= lr * mh / (std::sqrt(vh) + eps);
    }
    adam.step(store, {g}, lr);
    EXPECT_TRUE(store.value(id).isApprox(w, 1e-14));
  }
  EXPECT_EQ(adam.state().steps, 2);
  AdamState bad = adam.state();
  bad.first_moment[0] = Mat::Zero(2, 2);
  EXPECT_THROW(adam.set_state(bad), DataError);
}

struct TinySetup {
  GeneratorConfig gen;
  Dataset train;
  Dataset test;
  CooccurrenceMatrix prior;
  ModelConfig model;
};

TinySetup tiny_setup(std::uint64_t seed = 3) {
  TinySetup s;
  s.gen = tiny_generator(seed);
  s.train = generate_dataset(s.gen, Split::Train);
  s.test = generate_dataset(s.gen, Split::Test);
  s.prior = build_cooccurrence(s.train);
  s.model = tiny_model(s.gen);
  return s;
}

TrainConfig tiny_train(int epochs) {
  TrainConfig c;
  c.max_epochs = epochs;
  c.batch_size = 4;
  c.seed = 5;
  c.task = TaskMode::SGCls;
  c.learning_rate = 5e-3;
  c.plateau_patience = 1;
  return c;
}

TEST(Training, SameSeedGivesIdenticalHistories) {
  const TinySetup s = tiny_setup();
  auto run = [&] {
    Model m = assemble(AblationConfig{}, s.model, s.prior, 1);
    Trainer tr(m, s.train, tiny_train(3));
    return std::make_pair(tr.fit(), m.params().all());
  };
  const auto [h1, p1] = run();
  const auto [h2, p2] = run();
  EXPECT_EQ(h1, h2);
  ASSERT_EQ(p1.size(), p2.size());
  for (std::size_t i = 0; i < p1.size(); ++i) EXPECT_TRUE(p1[i].value == p2[i].value) << p1[i].name;
}

TEST(Training, ResumeMatchesUninterruptedRun) {
  const TinySetup s = tiny_setup();
  for (LossMode loss : {LossMode::CrossEntropy, LossMode::Ohem}) {
    TrainConfig cfg = tiny_train(4);
    cfg.loss = loss;
    Model straight = assemble(AblationConfig{}, s.model, s.prior, 1);
    Trainer full(straight, s.train, cfg);
    full.fit();

    Model first = assemble(AblationConfig{}, s.model, s.prior, 1);
    TrainConfig half = cfg;
    half.max_epochs = 2;
    Trainer part(first, s.train, half);
    part.fit();
    const Checkpoint saved = parse_checkpoint(serialize_checkpoint(part.checkpoint()));

    Model resumed = model_from_checkpoint(saved);
    Trainer rest(resumed, s.train, cfg);
    rest.restore(saved);
    EXPECT_EQ(rest.epoch(), 2);
    rest.fit();
    EXPECT_EQ(rest.history(), full.history());
    for (std::size_t i = 0; i < straight.params().size(); ++i) {
      EXPECT_TRUE(straight.params()[i].value == resumed.params()[i].value) << straight.params()[i].name;
    }
  }
}

TEST(Training, CheckpointRoundTripsBitExactly) {
  const TinySetup s = tiny_setup();
  Model m = assemble(AblationConfig{}, s.model, s.prior, 2);
  Trainer tr(m, s.train, tiny_train(1));
  tr.fit();
  const Checkpoint c = tr.checkpoint();
  const std::string bytes = serialize_checkpoint(c);
  const Checkpoint back = parse_checkpoint(bytes);
  EXPECT_EQ(serialize_checkpoint(back), bytes);
  EXPECT_EQ(back.meta, c.meta);
  EXPECT_TRUE(back.prior == c.prior);
  EXPECT_EQ(back.adam.steps, c.adam.steps);
  for (std::size_t i = 0; i < c.params.size(); ++i) {
    EXPECT_EQ(back.params[i].name, c.params[i].name);
    EXPECT_TRUE(back.params[i].value == c.params[i].value);
    EXPECT_TRUE(back.adam.first_moment[i] == c.adam.first_moment[i]);
    EXPECT_TRUE(back.adam.second_moment[i] == c.adam.second_moment[i]);
  }
  EXPECT_THROW(parse_checkpoint(bytes.substr(0, bytes.size() / 2)), DataError);
  EXPECT_THROW(parse_checkpoint("not a checkpoint"), DataError);
}

TEST(Training, RestoreRejectsADifferentConfiguration) {
  const TinySetup s = tiny_setup();
  Model m = assemble(AblationConfig{}, s.model, s.prior, 2);
  Trainer tr(m, s.train, tiny_train(1));
  const Checkpoint c = tr.checkpoint();
  TrainConfig other = tiny_train(1);
  other.learning_rate = 1.0;
  Model m2 = assemble(AblationConfig{}, s.model, s.prior, 2);
  Trainer tr2(m2, s.train, other);
  EXPECT_THROW(tr2.restore(c), DataError);
}

TEST(Training, DivergenceNamesTheEpoch) {
  const TinySetup s = tiny_setup();
  Model m = assemble(AblationConfig{}, s.model, s.prior, 1);
  TrainConfig cfg = tiny_train(3);
  cfg.learning_rate = 1e250;
  cfg.batch_size = 1;
  Trainer tr(m, s.train, cfg);
  try {
    tr.fit();
    FAIL() << "expected divergence";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("epoch 1"), std::string::npos) << e.what();
  }
}

TEST(Training, EveryParameterReceivesGradient) {
  const TinySetup s = tiny_setup();
  const Model m = assemble(AblationConfig{}, s.model, s.prior, 4);
  const FeatureOracle oracle = oracle_from_dataset(s.train);
  const auto inputs = build_eval_inputs(s.train.images, oracle, TaskMode::SGCls);
  SceneBatch batch;
  for (const auto& in : inputs) batch.push_back(&in);
  const BatchGradient g = batch_gradient_serial(m, batch, {TaskMode::SGCls, LossMode::CrossEntropy, {}});
  for (const auto& name : m.active_parameters()) {
    const ParamId id = m.params().id(name);
    EXPECT_GT(g.gradients[id].cwiseAbs().maxCoeff(), 0.0) << name;
  }
  EXPECT_EQ(m.active_parameters().size(), m.params().size());
}

TEST(Training, FullLossPassesGradientCheckOnATwoObjectScene) {
  GeneratorConfig g = tiny_generator(7);
  g.min_objects = 2;
  g.max_objects = 2;
  g.relations_per_image = 1;
  const Dataset ds = generate_dataset(g, Split::Train);
  const FeatureOracle oracle(g);
  ModelConfig mc = tiny_model(g, 3);
  mc.ablation.heads = 2;
  Model model(mc, build_cooccurrence(ds).M, 9);
  std::mt19937_64 point(9);
  randomize_parameters(model.params(), point);
  Rng rng(1);
  for (TaskMode mode : {TaskMode::SGCls, TaskMode::PredCls}) {
    const SceneInput in = build_scene_input(ds.images[0], oracle, {mode, false, 3.0, false}, rng);
    ASSERT_EQ(in.num_objects(), 2);
    ASSERT_EQ(in.candidates.size(), 2u);
    const LossFn loss = [&](ParamBinder& b) {
      const ModelOutputs out = model.forward(b, in);
      return total_loss(out.object_logits, in.object_labels, out.relation_logits, in.relation_labels, mode);
    };
    // With one neighbour per object the layer norm cancels most of the coefficient
    // scale, leaving cross-attention gate gradients near 1e-8, below what central
    // differences resolve. Those coordinates are held to an absolute bound instead.
    const GradCheckResult res = gradient_check_parameters(model.params(), loss, 1e-5, 1e-6);
    EXPECT_TRUE(res.finite);
    EXPECT_LE(res.max_relative_error, 1e-4) << res.worst;
    EXPECT_LE(res.max_absolute_error_below, 1e-8);
  }
}

TEST(Training, SeparableTaskIsLearned) {
  GeneratorConfig g = tiny_generator(11);
  g.confusability = 0.0;
  g.noise = 0.01;
  g.num_train_images = 24;
  g.num_test_images = 12;
  const Dataset train = generate_dataset(g, Split::Train);
  const Dataset test = generate_dataset(g, Split::Test);
  Model model = assemble(AblationConfig{}, tiny_model(g, 8), build_cooccurrence(train), 3);

  const FeatureOracle oracle(g);
  Rng rng(2);
  std::vector<SceneInput> fixed;
  for (const auto& img : train.images) fixed.push_back(build_scene_input(img, oracle, {TaskMode::PredCls, true, 3.0, false}, rng));
  SceneBatch batch;
  for (const auto& in : fixed) batch.push_back(&in);
  const TrainingObjective objective{TaskMode::PredCls, LossMode::CrossEntropy, {}};
  const double initial = batch_loss(model, batch, objective);

  TrainConfig cfg;
  cfg.max_epochs = 30;
  cfg.batch_size = 4;
  cfg.learning_rate = 1e-2;
  cfg.seed = 1;
  cfg.val_fraction = 0.0;
  Trainer tr(model, train, cfg);
  tr.fit();
  EXPECT_LT(batch_loss(model, batch, objective), 0.1 * initial);

  EvaluationOptions eval;
  const MetricReport report = evaluate_model(model, test, eval);
  EXPECT_GE(report.at(Constraint::Constrained, 50).recall, 0.9);
}

TEST(Training, HistoryTableSchema) {
  const std::vector<EpochRecord> h{{1, 0.5, 0.25, 0.125, 1e-3}, {2, 0.25, 0.5, 0.25, 1e-4}};
  const CsvTable t = history_table(h);
  EXPECT_EQ(t.header, (std::vector<std::string>{"epoch", "train_loss", "val_R@50", "val_mR@50", "learning_rate"}));
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(parse_double(t.rows[1][4]), 1e-4);
}

TEST(Training, PlateauDividesTheLearningRate) {
  const TinySetup s = tiny_setup();
  Model m = assemble(AblationConfig{}, s.model, s.prior, 1);
  TrainConfig cfg = tiny_train(6);
  cfg.learning_rate = 1e-9;  // effectively frozen, so validation recall never improves
  Trainer tr(m, s.train, cfg);
  tr.fit();
  const auto& h = tr.history();
  EXPECT_DOUBLE_EQ(h[0].learning_rate, 1e-9);
  EXPECT_DOUBLE_EQ(h[1].learning_rate, 1e-9);
  EXPECT_LT(h.back().learning_rate, 1e-9);
  for (std::size_t i = 1; i < h.size(); ++i) EXPECT_LE(h[i].learning_rate, h[i - 1].learning_rate);
}

TEST(TrainConfigTest, ValidationAndJsonRoundTrip) {
  TrainConfig c;
  c.learning_rate = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = TrainConfig{};
  c.lr_decay = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = TrainConfig{};
  c.loss = LossMode::Ohem;
  c.task = TaskMode::SGGenSim;
  c.seed = 99;
  EXPECT_EQ(TrainConfig::from_json(c.to_json()), c);
}

}  // namespace
}  // namespace dualres
