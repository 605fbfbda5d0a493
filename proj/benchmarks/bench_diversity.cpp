#include <benchmark/benchmark.h>

#include "bier/data_io.hpp"
#include "bier/diversity.hpp"

namespace {

std::vector<bier::Vector> batch_features(std::size_t n) {
  bier::SynthSpec spec;
  spec.classes = 4;
  spec.per_class = static_cast<std::uint32_t>(n / 4);
  spec.feature_dim = 64;
  return bier::synth_gaussian(spec).samples();
}

void BM_ActivationLoss(benchmark::State& state) {
  const auto phi = batch_features(static_cast<std::size_t>(state.range(0)));
  bier::Rng rng(2);
  const bier::EnsembleModel model = bier::make_model(64, bier::proportional_partition(32, 3), rng);
  for (auto _ : state) benchmark::DoNotOptimize(bier::activation_loss(model, phi, 1.0).grad_W);
}
BENCHMARK(BM_ActivationLoss)->Arg(20)->Arg(200);

void BM_AdversarialLoss(benchmark::State& state) {
  const auto phi = batch_features(20);
  bier::Rng rng(3);
  const bier::EnsembleModel model = bier::make_model(64, bier::proportional_partition(32, 3), rng);
  const bier::RegressorBank bank =
      bier::make_bank(model.partition, static_cast<std::size_t>(state.range(0)), rng);
  for (auto _ : state) benchmark::DoNotOptimize(bier::adversarial_loss(model, bank, phi, {}).grad_W);
}
BENCHMARK(BM_AdversarialLoss)->Arg(32)->Arg(512);

}  // namespace
