#include "cli.hpp"

#include <algorithm>
#include <iostream>
#include <optional>

#include "CLI11.hpp"

#include "dualres/evaluation.hpp"
#include "dualres/experiment.hpp"
#include "dualres/synthgen.hpp"
#include "dualres/trainer.hpp"
#include "manifest.hpp"

namespace dualres::cli {

namespace {

namespace fs = std::filesystem;

fs::path with_suffix(const fs::path& base, const std::string& suffix) { return fs::path(base.string() + suffix); }

AblationConfig combine_ablations(const std::vector<std::string>& names, bool literal_eq2) {
  AblationConfig out;
  for (const auto& name : names) {
    const AblationConfig a = AblationConfig::from_name(name);
    out.use_object_branch = out.use_object_branch && a.use_object_branch;
    out.use_relation_branch = out.use_relation_branch && a.use_relation_branch;
    out.use_prior = out.use_prior && a.use_prior;
    if (a.heads != AblationConfig{}.heads) out.heads = a.heads;
    out.literal_eq2 = out.literal_eq2 || a.literal_eq2;
  }
  out.literal_eq2 = out.literal_eq2 || literal_eq2;
  out.validate();
  return out;
}

MeanRecallPooling parse_pooling(const std::string& text) {
  if (text == "pooled") return MeanRecallPooling::Pooled;
  if (text == "per-image") return MeanRecallPooling::PerImage;
  throw ConfigError("unknown mR pooling '" + text + "' (expected pooled or per-image)");
}

/// Training and model keys from one config file; unknown keys are errors.
struct TrainingSetup {
  TrainConfig train;
  ModelConfig model;
  nlohmann::json snapshot;
};

TrainingSetup read_training_setup(const std::optional<fs::path>& path, const Dataset& data, TaskMode task) {
  KeyValueConfig kv = path ? KeyValueConfig::load(*path) : KeyValueConfig{};
  TrainingSetup s;
  s.train.read(kv);
  s.train.task = task;
  s.model = ModelConfig::for_data(GeneratorConfig::from_json(data.meta.generator));
  s.model.read_widths(kv);
  kv.ensure_consumed();
  s.train.validate();
  s.snapshot = {{"train", s.train.to_json()}, {"model", s.model.to_json()}};
  return s;
}

void write_report(const MetricReport& report, const fs::path& out, const fs::path& per_predicate) {
  save_csv(report_table(report), out);
  save_csv(per_predicate_table(report), per_predicate);
}

struct Options {
  // gen-data
  fs::path config;
  std::string split = "train";
  // shared
  fs::path data;
  fs::path prior;
  fs::path out;
  std::string task = "predcls";
  // train
  std::vector<std::string> ablation;
  bool literal_eq2 = false;
  std::optional<std::uint64_t> seed;
  fs::path history;
  fs::path resume;
  // evaluate
  fs::path checkpoint;
  fs::path baseline_data;
  fs::path per_predicate;
  std::string pooling = "pooled";
  // report
  std::vector<fs::path> reports;
  std::string recall_column;
  // ablate
  fs::path test_data;
  std::vector<std::string> variants{"full", "no-relation-branch", "no-prior"};
  std::vector<std::uint64_t> seeds{1, 2, 3};
};

int gen_data(const Options& o, std::ostream& out) {
  KeyValueConfig kv = KeyValueConfig::load(o.config);
  const GeneratorConfig config = GeneratorConfig::from_config(kv);
  Split split;
  if (o.split == "train") {
    split = Split::Train;
  } else if (o.split == "test") {
    split = Split::Test;
  } else {
    throw ConfigError("--split must be train or test");
  }
  const Dataset dataset = generate_dataset(config, split);
  save_dataset(dataset, o.out);
  RunManifest m("gen-data");
  m.set_config(dataset.meta.generator);
  m.set_seed(config.seed);
  m.add_input("config", o.config);
  m.add_output(o.out);
  m.write(manifest_path_for(o.out));
  out << "wrote " << dataset.images.size() << " images to " << o.out.string() << "\n";
  return kOk;
}

int build_prior(const Options& o, std::ostream& out) {
  const Dataset dataset = load_dataset(o.data);
  const CooccurrenceMatrix prior = build_cooccurrence(dataset);
  save_cooccurrence(prior, o.out);
  RunManifest m("build-prior");
  m.set_config({{"num_predicates", prior.num_predicates()}});
  m.add_input("data", o.data);
  m.add_output(o.out);
  m.write(manifest_path_for(o.out));
  out << "wrote " << prior.num_predicates() << "x" << prior.num_predicates() << " prior to " << o.out.string()
      << "\n";
  return kOk;
}

int train(const Options& o, const std::optional<fs::path>& config_path, std::ostream& out) {
  const Dataset dataset = load_dataset(o.data);
  const CooccurrenceMatrix prior = load_cooccurrence(o.prior);
  TrainingSetup setup = read_training_setup(config_path, dataset, parse_task_mode(o.task));
  if (o.seed) setup.train.seed = *o.seed;
  const AblationConfig ablation = combine_ablations(o.ablation, o.literal_eq2);

  Model model = assemble(ablation, setup.model, prior, setup.train.seed);
  Trainer trainer(model, dataset, setup.train);
  if (!o.resume.empty()) trainer.restore(load_checkpoint(o.resume));
  trainer.fit([&out](const EpochRecord& r) {
    out << "epoch " << r.epoch << " loss " << r.train_loss << " val R@50 " << r.val_recall << " mR@50 "
        << r.val_mean_recall << " lr " << r.learning_rate << "\n";
  });

  const fs::path history = o.history.empty() ? with_suffix(o.out, ".history.csv") : o.history;
  save_checkpoint(trainer.checkpoint(), o.out);
  save_csv(history_table(trainer.history()), history);

  RunManifest m("train");
  m.set_config({{"train", trainer.config().to_json()},
                {"model", model.config().to_json()},
                {"ablation", ablation.label()}});
  m.set_seed(setup.train.seed);
  m.add_input("data", o.data);
  m.add_input("prior", o.prior);
  if (config_path) m.add_input("config", *config_path);
  if (!o.resume.empty()) m.add_input("resume", o.resume);
  m.add_output(o.out);
  m.add_output(history);
  m.write(manifest_path_for(o.out));
  return kOk;
}

int evaluate(const Options& o, std::ostream& out) {
  const Dataset dataset = load_dataset(o.data);
  EvaluationOptions eval;
  eval.mode = parse_task_mode(o.task);
  eval.pooling = parse_pooling(o.pooling);

  RunManifest m("evaluate");
  MetricReport report;
  if (!o.checkpoint.empty() && !o.baseline_data.empty()) {
    throw ConfigError("--checkpoint and --baseline-data are mutually exclusive");
  }
  if (!o.checkpoint.empty()) {
    const Checkpoint checkpoint = load_checkpoint(o.checkpoint);
    const TrainConfig trained = TrainConfig::from_json(checkpoint.meta.at("train"));
    if (trained.task != eval.mode) {
      throw ConfigError("checkpoint was trained for " + to_string(trained.task) + " but --task is " + o.task);
    }
    eval.overlap_neighbors = trained.overlap_neighbors;
    const Model model = model_from_checkpoint(checkpoint);
    report = evaluate_model(model, dataset, eval);
    m.set_config({{"task", o.task}, {"model", model.config().to_json()}, {"pooling", o.pooling}});
    m.add_input("checkpoint", o.checkpoint);
  } else if (!o.baseline_data.empty()) {
    const FrequencyBaseline baseline = FrequencyBaseline::fit(load_dataset(o.baseline_data));
    report = evaluate_frequency_baseline(baseline, dataset, eval);
    m.set_config({{"task", o.task}, {"model", "frequency-baseline"}, {"pooling", o.pooling}});
    m.add_input("baseline_data", o.baseline_data);
  } else {
    throw ConfigError("evaluate needs --checkpoint or --baseline-data");
  }
  const fs::path per_predicate = o.per_predicate.empty() ? with_suffix(o.out, ".per_predicate.csv") : o.per_predicate;
  write_report(report, o.out, per_predicate);
  m.add_input("data", o.data);
  m.add_output(o.out);
  m.add_output(per_predicate);
  m.write(manifest_path_for(o.out));
  for (const auto& e : report.entries) {
    out << to_string(e.constraint) << " R@" << e.k << " " << e.recall << " mR@" << e.k << " " << e.mean_recall
        << "\n";
  }
  return kOk;
}

int report(const Options& o, std::ostream& out) {
  if (o.reports.size() != 2) throw ConfigError("--reports takes exactly two per-predicate CSV files");
  const auto a = read_per_predicate(load_csv(o.reports[0]), o.recall_column);
  const auto b = read_per_predicate(load_csv(o.reports[1]), o.recall_column);
  std::vector<long long> frequency;
  RunManifest m("report");
  if (!o.data.empty()) {
    const Dataset train = load_dataset(o.data);
    frequency.assign(static_cast<std::size_t>(train.meta.num_predicates), 0);
    for (const auto& img : train.images) {
      for (const auto& rel : img.relations) ++frequency[static_cast<std::size_t>(rel.predicate)];
    }
    m.add_input("data", o.data);
  } else {
    for (const auto& row : a) {
      if (static_cast<std::size_t>(row.predicate) >= frequency.size()) {
        frequency.resize(static_cast<std::size_t>(row.predicate) + 1, 0);
      }
      frequency[static_cast<std::size_t>(row.predicate)] = row.gt_count;
    }
  }
  save_csv(recall_delta_table(a, b, frequency), o.out);
  m.set_config({{"recall_column", o.recall_column.empty() ? "last" : o.recall_column},
                {"frequency", o.data.empty() ? "gt_count of first report" : "training data"}});
  m.add_input("report_a", o.reports[0]);
  m.add_input("report_b", o.reports[1]);
  m.add_output(o.out);
  m.write(manifest_path_for(o.out));
  out << "wrote " << a.size() << " predicate deltas to " << o.out.string() << "\n";
  return kOk;
}

int ablate(const Options& o, const std::optional<fs::path>& config_path, std::ostream& out) {
  const Dataset train_data = load_dataset(o.data);
  const Dataset test_data = load_dataset(o.test_data);
  const CooccurrenceMatrix prior = load_cooccurrence(o.prior);
  const TrainingSetup setup = read_training_setup(config_path, train_data, parse_task_mode(o.task));
  AblationPlan plan;
  plan.variants = o.variants;
  plan.seeds = o.seeds;
  plan.model = setup.model;
  plan.train = setup.train;
  plan.eval.pooling = parse_pooling(o.pooling);
  plan.eval.overlap_neighbors = setup.train.overlap_neighbors;
  for (const auto& v : plan.variants) AblationConfig::from_name(v);

  const auto runs = run_ablation(train_data, test_data, prior, plan, [&out](const AblationRun& r) {
    const MetricEntry& e = r.report.at(Constraint::Constrained, 50);
    out << r.variant << " seed " << r.seed << " R@50 " << e.recall << " mR@50 " << e.mean_recall << "\n";
  });
  save_csv(ablation_table(runs), o.out);
  for (const auto& s : summarize(runs, 50)) {
    out << "median " << s.variant << " R@50 " << s.recall << " mR@50 " << s.mean_recall << "\n";
  }
  RunManifest m("ablate");
  nlohmann::json snapshot = setup.snapshot;
  snapshot["variants"] = plan.variants;
  snapshot["seeds"] = plan.seeds;
  m.set_config(snapshot);
  m.add_input("train_data", o.data);
  m.add_input("test_data", o.test_data);
  m.add_input("prior", o.prior);
  if (config_path) m.add_input("config", *config_path);
  m.add_output(o.out);
  m.write(manifest_path_for(o.out));
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Dual ResGCN scene graph toolkit"};
  app.require_subcommand(1);
  Options o;
  fs::path train_config;

  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic scene graph corpus");
  gen->add_option("--config", o.config, "Generator config file")->required();
  gen->add_option("--out", o.out, "Dataset JSON to write")->required();
  gen->add_option("--split", o.split, "train or test")->capture_default_str();

  auto* prior = app.add_subcommand("build-prior", "Count predicate co-occurrence once per image");
  prior->add_option("--data", o.data, "Dataset JSON")->required();
  prior->add_option("--out", o.out, "Prior CSV to write")->required();

  auto* tr = app.add_subcommand("train", "Fit a model and write a checkpoint");
  tr->add_option("--data", o.data, "Training dataset JSON")->required();
  tr->add_option("--prior", o.prior, "Co-occurrence CSV")->required();
  tr->add_option("--config", train_config, "Training config file");
  tr->add_option("--task", o.task, "predcls, sgcls or sggen-sim")->capture_default_str();
  tr->add_option("--ablation", o.ablation,
                 "no-object-branch, no-relation-branch, no-prior, heads-N, literal-eq2 (repeatable)");
  tr->add_flag("--literal-eq2", o.literal_eq2, "Coefficients from CA(CA(x_i, x_i), u)");
  tr->add_option("--seed", o.seed, "Overrides the config seed");
  tr->add_option("--history", o.history, "History CSV (default <out>.history.csv)");
  tr->add_option("--resume", o.resume, "Continue from this checkpoint");
  tr->add_option("--out", o.out, "Checkpoint to write")->required();

  auto* ev = app.add_subcommand("evaluate", "Compute R@K and mR@K on a dataset");
  ev->add_option("--data", o.data, "Evaluation dataset JSON")->required();
  ev->add_option("--checkpoint", o.checkpoint, "Trained model");
  ev->add_option("--baseline-data", o.baseline_data, "Fit the frequency baseline on this dataset instead");
  ev->add_option("--task", o.task, "predcls, sgcls or sggen-sim")->capture_default_str();
  ev->add_option("--pooling", o.pooling, "mR class pooling: pooled or per-image")->capture_default_str();
  ev->add_option("--per-predicate", o.per_predicate, "Per-predicate CSV (default <out>.per_predicate.csv)");
  ev->add_option("--out", o.out, "Metric CSV to write")->required();

  auto* rep = app.add_subcommand("report", "Per-predicate recall deltas between two runs");
  rep->add_option("--reports", o.reports, "Two per-predicate CSV files")->required()->expected(2);
  rep->add_option("--data", o.data, "Training dataset used for frequency ordering");
  rep->add_option("--column", o.recall_column, "Recall column (default the last one)");
  rep->add_option("--out", o.out, "Delta CSV to write")->required();

  auto* abl = app.add_subcommand("ablate", "Train and evaluate ablation variants over several seeds");
  abl->add_option("--train-data", o.data, "Training dataset JSON")->required();
  abl->add_option("--test-data", o.test_data, "Evaluation dataset JSON")->required();
  abl->add_option("--prior", o.prior, "Co-occurrence CSV")->required();
  abl->add_option("--config", train_config, "Training config file");
  abl->add_option("--task", o.task, "predcls, sgcls or sggen-sim")->capture_default_str();
  abl->add_option("--variants", o.variants, "Variant names")->capture_default_str();
  abl->add_option("--seeds", o.seeds, "Training seeds")->capture_default_str();
  abl->add_option("--pooling", o.pooling, "mR class pooling: pooled or per-image")->capture_default_str();
  abl->add_option("--out", o.out, "Ablation CSV to write")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  }

  const std::optional<fs::path> config_path =
      train_config.empty() ? std::nullopt : std::optional<fs::path>(train_config);
  try {
    if (gen->parsed()) return gen_data(o, out);
    if (prior->parsed()) return build_prior(o, out);
    if (tr->parsed()) return train(o, config_path, out);
    if (ev->parsed()) return evaluate(o, out);
    if (rep->parsed()) return report(o, out);
    if (abl->parsed()) return ablate(o, config_path, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kNumericError;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kDataError;
  } catch (const nlohmann::json::exception& e) {
    err << "data error: " << e.what() << "\n";
    return kDataError;
  }
  return kConfigError;
}

}  // namespace dualres::cli
