#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "dualres/metrics.hpp"
#include "test_support.hpp"

namespace dualres {
namespace {

constexpr int kMan = 0, kHorse = 1, kHat = 2;
constexpr int kOn = 1, kWearing = 2, kNear = 3;

BoundingBox box(double x) { return {x, 0, x + 10, 10}; }

PredictedTriplet triplet(int s, int p, int o, double conf) {
  PredictedTriplet t;
  t.subject_label = s;
  t.predicate = p;
  t.object_label = o;
  t.subject_box = box(0);
  t.object_box = box(o == kHat ? 40 : 20);
  t.confidence = conf;
  return t;
}

std::vector<GroundTruthTriplet> hand_gt() {
  return {{box(0), box(20), kMan, kOn, kHorse}, {box(0), box(40), kMan, kWearing, kHat}};
}

std::vector<PredictedTriplet> hand_ranking() {
  return {triplet(kMan, kOn, kHorse, 0.9), triplet(kMan, kNear, kHorse, 0.8), triplet(kMan, kWearing, kHat, 0.7)};
}

TEST(Matching, HandExample) {
  const MatchResult m = match_triplets(hand_ranking(), hand_gt());
  EXPECT_EQ(m.matched_rank, (std::vector<int>{0, 2}));
  EXPECT_DOUBLE_EQ(recall_at_k(m, 1), 0.5);
  EXPECT_DOUBLE_EQ(recall_at_k(m, 2), 0.5);
  EXPECT_DOUBLE_EQ(recall_at_k(m, 3), 1.0);
  const std::vector<ImageMatches> images{{m, {kOn, kWearing}}};
  EXPECT_DOUBLE_EQ(mean_recall_at_k(images, 3, 4), 1.0);
  EXPECT_DOUBLE_EQ(mean_recall_at_k(images, 1, 4), 0.5);
}

TEST(Matching, IouGate) {
  auto ranked = hand_ranking();
  // Subject box shifted by 7 of 10: IoU 3/17.
  ranked[0].subject_box = {7, 0, 17, 10};
  EXPECT_EQ(match_triplets(ranked, hand_gt()).matched_rank[0], -1);
  // Exactly at the threshold still matches: shift 10/3 gives IoU 0.5.
  ranked[0].subject_box = {10.0 / 3.0, 0, 10 + 10.0 / 3.0, 10};
  ASSERT_NEAR(compute_iou(ranked[0].subject_box, box(0)), 0.5, 1e-12);
  ranked[0].subject_box = {10.0 / 3.0 - 1e-9, 0, 10 + 10.0 / 3.0 - 1e-9, 10};
  EXPECT_EQ(match_triplets(ranked, hand_gt()).matched_rank[0], 0);
}

TEST(Matching, GreedyOneToOne) {
  const std::vector<PredictedTriplet> ranked{triplet(kMan, kOn, kHorse, 0.9), triplet(kMan, kOn, kHorse, 0.8)};
  const std::vector<GroundTruthTriplet> gt{hand_gt()[0]};
  EXPECT_EQ(match_triplets(ranked, gt).matched_rank, (std::vector<int>{0}));
  // Two identical GT triplets consume one prediction each.
  const std::vector<GroundTruthTriplet> twice{hand_gt()[0], hand_gt()[0]};
  EXPECT_EQ(match_triplets(ranked, twice).matched_rank, (std::vector<int>{0, 1}));
  EXPECT_EQ(match_triplets({ranked[0]}, twice).matched_rank, (std::vector<int>{0, -1}));
}

TEST(Matching, AllWrongAndAllRight) {
  const std::vector<PredictedTriplet> wrong{triplet(kMan, kNear, kHorse, 1.0), triplet(kHat, kOn, kHorse, 0.5)};
  const MatchResult none = match_triplets(wrong, hand_gt());
  EXPECT_EQ(recall_at_k(none, 100), 0.0);
  EXPECT_EQ(mean_recall_at_k({{none, {kOn, kWearing}}}, 100, 4), 0.0);
  const std::vector<PredictedTriplet> right{triplet(kMan, kWearing, kHat, 1.0), triplet(kMan, kOn, kHorse, 0.5)};
  EXPECT_EQ(recall_at_k(match_triplets(right, hand_gt()), 2), 1.0);
}

// Random scene with GT and a noisy prediction over the same boxes.
std::pair<SceneAnnotation, ScenePrediction> random_case(std::mt19937_64& rng, int num_predicates) {
  SceneAnnotation s;
  s.image_id = "r";
  s.width = s.height = 100;
  std::uniform_int_distribution<int> count(2, 5), label(0, 2), pred(1, num_predicates - 1);
  const int n = count(rng);
  for (int i = 0; i < n; ++i) s.objects.push_back({box(12.0 * i), label(rng)});
  ScenePrediction p;
  p.image_id = s.image_id;
  for (const auto& o : s.objects) {
    p.boxes.push_back(o.box);
    p.object_labels.push_back(o.label);
    p.object_scores.push_back(1.0);
  }
  p.pairs = candidate_pairs(p.boxes, TaskMode::PredCls);
  for (const auto& pr : p.pairs) {
    if (std::bernoulli_distribution(0.4)(rng)) s.relations.push_back({pr.subject, pr.object, pred(rng)});
  }
  p.relation_probabilities = fuse_scores(testing::random_matrix(static_cast<Eigen::Index>(p.pairs.size()), num_predicates, rng, 3.0),
                                         Mat::Zero(static_cast<Eigen::Index>(p.pairs.size()), num_predicates));
  return {s, p};
}

TEST(MetricReportProperties, MonotoneAndBounded) {
  std::mt19937_64 rng(3);
  const int C = 6;
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<SceneAnnotation> scenes;
    std::vector<ScenePrediction> preds;
    for (int i = 0; i < 5; ++i) {
      auto [s, p] = random_case(rng, C);
      scenes.push_back(s);
      preds.push_back(p);
    }
    const std::vector<int> ks{1, 2, 5, 20, 50, 100};
    for (auto pooling : {MeanRecallPooling::Pooled, MeanRecallPooling::PerImage}) {
      const MetricReport r = compute_report(preds, scenes, TaskMode::PredCls, C, ks, pooling);
      for (Constraint c : {Constraint::Constrained, Constraint::Unconstrained}) {
        for (std::size_t i = 0; i < ks.size(); ++i) {
          const auto& e = r.at(c, ks[i]);
          EXPECT_GE(e.recall, 0.0);
          EXPECT_LE(e.recall, 1.0);
          EXPECT_GE(e.mean_recall, 0.0);
          EXPECT_LE(e.mean_recall, 1.0);
          if (i > 0) {
            EXPECT_GE(e.recall, r.at(c, ks[i - 1]).recall);
            EXPECT_GE(e.mean_recall, r.at(c, ks[i - 1]).mean_recall);
          }
          // Per-predicate recalls average exactly to mR.
          double sum = 0.0;
          int defined = 0;
          for (std::size_t p = 1; p < e.per_predicate.size(); ++p) {
            if (std::isnan(e.per_predicate[p])) continue;
            sum += e.per_predicate[p];
            ++defined;
          }
          EXPECT_DOUBLE_EQ(e.mean_recall, defined ? sum / defined : 0.0);
        }
      }
      // At most 20 pairs x 5 predicates, so K = 100 ranks every entry and dominance must hold.
      EXPECT_GE(r.at(Constraint::Unconstrained, 100).recall, r.at(Constraint::Constrained, 100).recall);
    }
  }
}

// Below the pool size the unconstrained top-K can be crowded by one pair.
TEST(MetricReportProperties, UnconstrainedCanLoseAtSmallK) {
  SceneAnnotation s;
  s.image_id = "c";
  s.width = s.height = 100;
  s.objects = {{box(0.0), 0}, {box(12.0), 1}, {box(24.0), 2}};
  s.relations = {{1, 2, 1}};
  ScenePrediction p;
  p.image_id = s.image_id;
  for (const auto& o : s.objects) {
    p.boxes.push_back(o.box);
    p.object_labels.push_back(o.label);
    p.object_scores.push_back(1.0);
  }
  p.pairs = {{0, 1}, {1, 2}};
  p.relation_probabilities.resize(2, 3);
  p.relation_probabilities << 0.0, 0.5, 0.5,
                              0.2, 0.45, 0.35;
  const MetricReport r = compute_report({p}, {s}, TaskMode::PredCls, 3, {2, 4});
  EXPECT_DOUBLE_EQ(r.at(Constraint::Constrained, 2).recall, 1.0);
  EXPECT_DOUBLE_EQ(r.at(Constraint::Unconstrained, 2).recall, 0.0);
  EXPECT_DOUBLE_EQ(r.at(Constraint::Unconstrained, 4).recall, 1.0);
}

TEST(MetricReportProperties, PerfectPredictionsGiveFullRecall) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    auto [s, p] = random_case(rng, 5);
    p.relation_probabilities.setZero();
    for (std::size_t k = 0; k < p.pairs.size(); ++k) p.relation_probabilities(static_cast<Eigen::Index>(k), 0) = 1.0;
    for (const auto& rel : s.relations) {
      for (std::size_t k = 0; k < p.pairs.size(); ++k) {
        if (p.pairs[k] == ObjectPair{rel.subject, rel.object}) {
          p.relation_probabilities.row(static_cast<Eigen::Index>(k)).setZero();
          p.relation_probabilities(static_cast<Eigen::Index>(k), rel.predicate) = 1.0;
        }
      }
    }
    if (s.relations.empty()) continue;
    const MetricReport r = compute_report({p}, {s}, TaskMode::PredCls, 5, {50});
    EXPECT_DOUBLE_EQ(r.at(Constraint::Constrained, 50).recall, 1.0);
    EXPECT_DOUBLE_EQ(r.at(Constraint::Constrained, 50).mean_recall, 1.0);
  }
}

TEST(MetricReportProperties, HeadOnlyPredictorShowsTheImbalanceGap) {
  // Head predicate 1 dominates; the predictor only ever says 1.
  SceneAnnotation s;
  s.image_id = "h";
  s.width = s.height = 200;
  for (int i = 0; i < 8; ++i) s.objects.push_back({box(15.0 * i), 0});
  std::vector<int> preds{1, 1, 1, 1, 1, 1, 1, 1, 2, 3};
  ScenePrediction p;
  for (const auto& o : s.objects) {
    p.boxes.push_back(o.box);
    p.object_labels.push_back(0);
    p.object_scores.push_back(1.0);
  }
  p.pairs = candidate_pairs(p.boxes, TaskMode::PredCls);
  for (std::size_t k = 0; k < preds.size(); ++k) s.relations.push_back({p.pairs[k].subject, p.pairs[k].object, preds[k]});
  p.relation_probabilities = Mat::Zero(static_cast<Eigen::Index>(p.pairs.size()), 4);
  p.relation_probabilities.col(1).setConstant(0.7);
  p.relation_probabilities.col(2).setConstant(0.2);
  p.relation_probabilities.col(3).setConstant(0.1);
  const MetricReport r = compute_report({p}, {s}, TaskMode::PredCls, 4, {100});
  const auto& e = r.at(Constraint::Constrained, 100);
  EXPECT_DOUBLE_EQ(e.recall, 0.8);
  EXPECT_DOUBLE_EQ(e.per_predicate[1], 1.0);
  EXPECT_LE(e.mean_recall, e.per_predicate[1] / 3.0 + 1e-12);
  EXPECT_EQ(r.gt_count, (std::vector<long long>{0, 8, 1, 1}));
}

TEST(MetricReportProperties, PooledAndPerImageDiffer) {
  // Predicate 1: image A 1 of 1 matched, image B 0 of 3. Pooled 1/4, per-image 1/2.
  MatchResult a{{0}}, b{{-1, -1, -1}};
  const std::vector<ImageMatches> images{{a, {1}}, {b, {1, 1, 1}}};
  EXPECT_DOUBLE_EQ(per_predicate_recall(images, 10, 2, MeanRecallPooling::Pooled)[1], 0.25);
  EXPECT_DOUBLE_EQ(per_predicate_recall(images, 10, 2, MeanRecallPooling::PerImage)[1], 0.5);
  EXPECT_TRUE(std::isnan(per_predicate_recall(images, 10, 2)[0]));
  EXPECT_DOUBLE_EQ(mean_image_recall(images, 10), 0.5);
  EXPECT_DOUBLE_EQ(mean_image_recall({{MatchResult{}, {}}, {a, {1}}}, 10), 1.0);
}

TEST(MetricTables, SchemasAndRoundTrip) {
  std::mt19937_64 rng(5);
  auto [s, p] = random_case(rng, 4);
  s.relations.push_back({0, 1, 2});
  const MetricReport r = compute_report({p}, {s}, TaskMode::SGCls, 4);
  const CsvTable t = report_table(r);
  EXPECT_EQ(t.header, (std::vector<std::string>{"task", "mode", "K", "metric", "value"}));
  EXPECT_EQ(t.rows.size(), 12u);
  EXPECT_EQ(t.rows[0][0], "sgcls");
  const CsvTable parsed = parse_csv(write_csv(t));
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& e = r.entries[i / 2];
    EXPECT_EQ(parse_double(parsed.rows[i][4]), i % 2 == 0 ? e.recall : e.mean_recall);
  }
  const CsvTable pp = per_predicate_table(r);
  EXPECT_EQ(pp.header, (std::vector<std::string>{"predicate", "gt_count", "recall@20", "recall@50", "recall@100"}));
  EXPECT_EQ(pp.rows.size(), 3u);
  const auto rows = read_per_predicate(parse_csv(write_csv(pp)), "recall@50");
  for (const auto& row : rows) {
    const double expect = r.at(Constraint::Constrained, 50).per_predicate[static_cast<std::size_t>(row.predicate)];
    if (std::isnan(expect)) EXPECT_TRUE(std::isnan(row.recall));
    else EXPECT_EQ(row.recall, expect);
    EXPECT_EQ(row.gt_count, r.gt_count[static_cast<std::size_t>(row.predicate)]);
  }
}

TEST(MetricTables, DeltaTableOrderedByFrequency) {
  const std::vector<PerPredicateRow> a{{1, 10, 0.9}, {2, 5, 0.5}, {3, 1, 0.25}};
  const std::vector<PerPredicateRow> b{{1, 10, 0.8}, {2, 5, 0.5}, {3, 1, 0.0}};
  const CsvTable t = recall_delta_table(a, b, {0, 1, 10, 5});
  EXPECT_EQ(t.header, (std::vector<std::string>{"predicate", "freq_rank", "recall_a", "recall_b", "delta"}));
  ASSERT_EQ(t.rows.size(), 3u);
  EXPECT_EQ(t.rows[0][0], "2");
  EXPECT_EQ(t.rows[1][0], "3");
  EXPECT_EQ(t.rows[2][0], "1");
  EXPECT_EQ(parse_double(t.rows[1][4]), 0.25);
  const CsvTable self = recall_delta_table(a, a, {0, 10, 5, 1});
  for (const auto& row : self.rows) EXPECT_EQ(parse_double(row[4]), 0.0);
}

TEST(MetricTables, MismatchedPredicatesAreNamed) {
  const std::vector<PerPredicateRow> a{{1, 1, 0.5}, {2, 1, 0.5}};
  const std::vector<PerPredicateRow> b{{1, 1, 0.5}, {4, 1, 0.5}};
  try {
    recall_delta_table(a, b, {});
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("only in first [2]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("only in second [4]"), std::string::npos) << msg;
  }
}

TEST(MetricReport, RequiresMatchingInputs) {
  EXPECT_THROW(compute_report({ScenePrediction{}}, {}, TaskMode::PredCls, 3), std::invalid_argument);
  EXPECT_THROW(compute_report({}, {}, TaskMode::PredCls, 3, {}), std::invalid_argument);
}

}  // namespace
}  // namespace dualres
