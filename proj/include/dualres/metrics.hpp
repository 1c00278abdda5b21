#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "dualres/csv.hpp"
#include "dualres/fusion.hpp"
#include "dualres/types.hpp"

namespace dualres {

struct GroundTruthTriplet {
  BoundingBox subject_box;
  BoundingBox object_box;
  int subject_label = 0;
  int predicate = 0;
  int object_label = 0;
};

std::vector<GroundTruthTriplet> ground_truth_triplets(const SceneAnnotation& scene);

/// matched_rank[g] is the 0-based rank of the prediction that claimed GT g, or -1.
struct MatchResult {
  std::vector<int> matched_rank;
};

/// Greedy one-to-one matching in rank order: labels equal and both boxes at IoU >= `min_iou`.
MatchResult match_triplets(const std::vector<PredictedTriplet>& ranked, const std::vector<GroundTruthTriplet>& gt,
                           double min_iou = 0.5);

/// Fraction of GT matched within the top K (0 when there is no GT).
double recall_at_k(const MatchResult& matches, int k);

enum class MeanRecallPooling {
  /// Class recall = matched / total GT of that class over the whole split.
  Pooled,
  /// Class recall = mean over images containing the class of that image's class recall.
  PerImage,
};

struct ImageMatches {
  MatchResult matches;
  std::vector<int> gt_predicates;
};

/// Per-predicate recall at K (NaN where a class has no GT).
std::vector<double> per_predicate_recall(const std::vector<ImageMatches>& images, int k, int num_predicates,
                                         MeanRecallPooling pooling = MeanRecallPooling::Pooled);
/// Mean over predicates with at least one GT instance.
double mean_recall_at_k(const std::vector<ImageMatches>& images, int k, int num_predicates,
                        MeanRecallPooling pooling = MeanRecallPooling::Pooled);
/// Mean over images with at least one GT triplet.
double mean_image_recall(const std::vector<ImageMatches>& images, int k);

struct MetricEntry {
  Constraint constraint = Constraint::Constrained;
  int k = 0;
  double recall = 0.0;
  double mean_recall = 0.0;
  std::vector<double> per_predicate;
};

struct MetricReport {
  TaskMode task = TaskMode::PredCls;
  int num_predicates = 0;
  std::vector<MetricEntry> entries;
  /// GT instances per predicate over the evaluated split.
  std::vector<long long> gt_count;

  const MetricEntry& at(Constraint constraint, int k) const;
};

inline const std::vector<int> kDefaultRecallKs{20, 50, 100};

/// Ranks, matches and aggregates one split. `predictions[i]` belongs to `scenes[i]`.
MetricReport compute_report(const std::vector<ScenePrediction>& predictions,
                            const std::vector<SceneAnnotation>& scenes, TaskMode task, int num_predicates,
                            const std::vector<int>& ks = kDefaultRecallKs,
                            MeanRecallPooling pooling = MeanRecallPooling::Pooled);

/// Columns task, mode, K, metric, value; metric is R or mR.
CsvTable report_table(const MetricReport& report);
/// Columns predicate, gt_count, recall@K... (constrained), predicates 1..C^r-1.
CsvTable per_predicate_table(const MetricReport& report);

struct PerPredicateRow {
  int predicate = 0;
  long long gt_count = 0;
  double recall = 0.0;
};
/// Reads one recall column (default the last) from a per-predicate table.
std::vector<PerPredicateRow> read_per_predicate(const CsvTable& table, const std::string& recall_column = "");

/// Columns predicate, freq_rank, recall_a, recall_b, delta, ordered by `frequency` descending.
/// Throws DataError naming the predicates present in only one input.
CsvTable recall_delta_table(const std::vector<PerPredicateRow>& a, const std::vector<PerPredicateRow>& b,
                            const std::vector<long long>& frequency);

}  // namespace dualres
