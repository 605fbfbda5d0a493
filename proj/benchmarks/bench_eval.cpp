#include <benchmark/benchmark.h>

#include "bier/eval.hpp"

namespace {

void BM_RecallAtK(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto threads = static_cast<unsigned>(state.range(1));
  bier::Rng rng(4);
  std::vector<bier::Vector> emb;
  std::vector<std::uint32_t> labels;
  for (std::size_t i = 0; i < n; ++i) {
    bier::Vector v(32);
    for (double& x : v) x = rng.normal();
    emb.push_back(v);
    labels.push_back(static_cast<std::uint32_t>(rng.index(50)));
  }
  const std::vector<std::size_t> ks{1, 2, 4, 8};
  for (auto _ : state) benchmark::DoNotOptimize(bier::recall_at_k(emb, labels, ks, threads));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n));
}
BENCHMARK(BM_RecallAtK)->Args({500, 1})->Args({2000, 1})->Args({2000, 4});

void BM_FeatureCorrelation(benchmark::State& state) {
  bier::Rng rng(5);
  std::vector<bier::Vector> raw;
  for (int i = 0; i < 1000; ++i) {
    bier::Vector v(32);
    for (double& x : v) x = rng.normal();
    raw.push_back(v);
  }
  const bier::GroupPartition part = bier::proportional_partition(32, 3);
  for (auto _ : state) benchmark::DoNotOptimize(bier::feature_correlation(part, raw));
}
BENCHMARK(BM_FeatureCorrelation);

}  // namespace
