#include <benchmark/benchmark.h>

#include "bier/boosting.hpp"
#include "bier/sampler.hpp"
#include "bier/data_io.hpp"

namespace {

void BM_MetricGradient(benchmark::State& state) {
  const auto M = static_cast<std::size_t>(state.range(0));
  bier::SynthSpec spec;
  spec.classes = 20;
  spec.feature_dim = 64;
  const bier::FeatureSet data = bier::synth_gaussian(spec);
  bier::Rng rng(1);
  const bier::EnsembleModel model = bier::make_model(64, bier::proportional_partition(32, M), rng);
  const bier::Batch batch = bier::sample_batch(data.labels, data.n_classes, bier::BatchConfig{}, rng);
  const std::vector<bier::Vector> inputs = data.samples(batch.indices);
  const bier::LossSpec loss;
  for (auto _ : state) {
    auto g = bier::metric_gradient(model, inputs, batch.pairs, loss, bier::MetricOptions{});
    benchmark::DoNotOptimize(g.grad_W);
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * batch.pairs.size()));
}
BENCHMARK(BM_MetricGradient)->Arg(1)->Arg(3)->Arg(8);

void BM_BoostForward(benchmark::State& state) {
  const auto M = static_cast<std::size_t>(state.range(0));
  const bier::BoostSchedule s = bier::make_schedule(M);
  std::vector<double> scores(M, 0.25);
  for (auto _ : state) benchmark::DoNotOptimize(bier::boost_forward(s, scores));
}
BENCHMARK(BM_BoostForward)->Arg(3)->Arg(16);

}  // namespace
