// Serial reference vs OpenMP per-image parallelism for one training batch and for prediction.

#include <benchmark/benchmark.h>

#include <map>
#include <memory>

#include "dualres/batch.hpp"
#include "dualres/prior.hpp"
#include "dualres/synthgen.hpp"

namespace {

using namespace dualres;

GeneratorConfig corpus(int images) {
  GeneratorConfig g;
  g.seed = 1;
  g.num_train_images = images;
  return g;
}

struct Fixture {
  Dataset data;
  Model model;
  std::vector<SceneInput> inputs;
  SceneBatch batch;

  explicit Fixture(int images)
      : data(generate_dataset(corpus(images), Split::Train)),
        model(ModelConfig::for_data(corpus(images)), build_cooccurrence(data).M, 1) {
    const FeatureOracle oracle(corpus(images));
    const Dataset& ds = data;
    Rng rng(0);
    for (const auto& img : ds.images) inputs.push_back(build_scene_input(img, oracle, {TaskMode::SGCls, true, 3.0, false}, rng));
    for (const auto& in : inputs) batch.push_back(&in);
  }
};

Fixture& fixture(int images) {
  static std::map<int, std::unique_ptr<Fixture>> cache;
  auto& f = cache[images];
  if (!f) f = std::make_unique<Fixture>(images);
  return *f;
}

void BM_GradientSerial(benchmark::State& state) {
  Fixture& f = fixture(static_cast<int>(state.range(0)));
  const TrainingObjective obj{TaskMode::SGCls, LossMode::CrossEntropy, {}};
  for (auto _ : state) benchmark::DoNotOptimize(batch_gradient_serial(f.model, f.batch, obj));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_GradientParallel(benchmark::State& state) {
  Fixture& f = fixture(static_cast<int>(state.range(0)));
  const TrainingObjective obj{TaskMode::SGCls, LossMode::CrossEntropy, {}};
  for (auto _ : state) benchmark::DoNotOptimize(batch_gradient_parallel(f.model, f.batch, obj));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_PredictSerial(benchmark::State& state) {
  Fixture& f = fixture(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(predict_serial(f.model, f.batch));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_PredictParallel(benchmark::State& state) {
  Fixture& f = fixture(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(predict_parallel(f.model, f.batch));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

BENCHMARK(BM_GradientSerial)->Arg(8)->Arg(32)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_GradientParallel)->Arg(8)->Arg(32)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_PredictSerial)->Arg(8)->Arg(32)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_PredictParallel)->Arg(8)->Arg(32)->Unit(benchmark::kMillisecond)->UseRealTime();

}  // namespace

BENCHMARK_MAIN();
