#include "dualres/experiment.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>
#include <tuple>

namespace dualres {

std::vector<AblationRun> run_ablation(const Dataset& train, const Dataset& test, const CooccurrenceMatrix& prior,
                                      const AblationPlan& plan,
                                      const std::function<void(const AblationRun&)>& on_run) {
  const FeatureOracle oracle = oracle_from_dataset(test);
  EvaluationOptions eval = plan.eval;
  eval.mode = plan.train.task;
  const auto test_inputs = build_eval_inputs(test.images, oracle, eval.mode, eval.overlap_neighbors);

  std::vector<AblationRun> runs;
  for (const auto& variant : plan.variants) {
    const AblationConfig ablation = AblationConfig::from_name(variant);
    for (std::uint64_t seed : plan.seeds) {
      TrainConfig tc = plan.train;
      tc.seed = seed;
      Model model = assemble(ablation, plan.model, prior, seed);
      Trainer trainer(model, train, tc);
      AblationRun run;
      run.variant = variant;
      run.seed = seed;
      run.history = trainer.fit();
      run.report = evaluate_model(model, test_inputs, test.images, eval);
      if (on_run) on_run(run);
      runs.push_back(std::move(run));
    }
  }
  return runs;
}

double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median of an empty set");
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  return values.size() % 2 == 1 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
}

std::vector<VariantSummary> summarize(const std::vector<AblationRun>& runs, int k) {
  std::vector<std::string> order;
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> by_variant;
  for (const auto& run : runs) {
    if (!by_variant.count(run.variant)) order.push_back(run.variant);
    const MetricEntry& e = run.report.at(Constraint::Constrained, k);
    by_variant[run.variant].first.push_back(e.recall);
    by_variant[run.variant].second.push_back(e.mean_recall);
  }
  std::vector<VariantSummary> out;
  for (const auto& v : order) {
    const auto& [r, mr] = by_variant[v];
    out.push_back({v, median(r), median(mr)});
  }
  return out;
}

CsvTable ablation_table(const std::vector<AblationRun>& runs) {
  CsvTable t;
  t.header = {"variant", "seed", "mode", "K", "metric", "value"};
  std::vector<std::string> order;
  std::map<std::string, std::map<std::tuple<int, int, std::string>, std::vector<double>>> pooled;
  for (const auto& run : runs) {
    if (!pooled.count(run.variant)) order.push_back(run.variant);
    for (const auto& e : run.report.entries) {
      for (const auto& [metric, value] : {std::pair<std::string, double>{"R", e.recall}, {"mR", e.mean_recall}}) {
        t.rows.push_back({run.variant, std::to_string(run.seed), to_string(e.constraint), std::to_string(e.k), metric,
                          format_double(value)});
        pooled[run.variant][{static_cast<int>(e.constraint), e.k, metric}].push_back(value);
      }
    }
  }
  for (const auto& v : order) {
    for (const auto& [key, values] : pooled[v]) {
      const auto& [constraint, k, metric] = key;
      t.rows.push_back({v, "median", to_string(static_cast<Constraint>(constraint)), std::to_string(k), metric,
                        format_double(median(values))});
    }
  }
  return t;
}

}  // namespace dualres
