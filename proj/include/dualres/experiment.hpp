#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dualres/evaluation.hpp"
#include "dualres/trainer.hpp"

namespace dualres {

struct AblationPlan {
  /// Variant names understood by AblationConfig::from_name.
  std::vector<std::string> variants{"full", "no-relation-branch", "no-prior"};
  std::vector<std::uint64_t> seeds{1, 2, 3};
  ModelConfig model;
  TrainConfig train;
  EvaluationOptions eval;
};

struct AblationRun {
  std::string variant;
  std::uint64_t seed = 0;
  MetricReport report;
  std::vector<EpochRecord> history;
};

/// Trains and evaluates every (variant, seed) combination. Model init and training
/// both use the run's seed; the data is fixed.
std::vector<AblationRun> run_ablation(const Dataset& train, const Dataset& test, const CooccurrenceMatrix& prior,
                                      const AblationPlan& plan,
                                      const std::function<void(const AblationRun&)>& on_run = {});

double median(std::vector<double> values);

struct VariantSummary {
  std::string variant;
  double recall = 0.0;
  double mean_recall = 0.0;
};

/// Seed medians of constrained R@K and mR@K per variant, in plan order.
std::vector<VariantSummary> summarize(const std::vector<AblationRun>& runs, int k);

/// Columns variant, seed, mode, K, metric, value; seed "median" rows hold per-variant medians.
CsvTable ablation_table(const std::vector<AblationRun>& runs);

}  // namespace dualres
