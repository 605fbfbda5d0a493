#include "bier/sampler.hpp"

#include <algorithm>
#include <string>

#include "bier/errors.hpp"

namespace bier {

Batch sample_batch(std::span<const std::uint32_t> labels, std::uint32_t n_classes, const BatchConfig& config,
                   Rng& rng) {
  std::vector<std::vector<std::size_t>> by_class(n_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= n_classes) throw InvalidArgument("sample_batch: label out of range");
    by_class[labels[i]].push_back(i);
  }
  std::vector<std::uint32_t> classes;
  for (std::uint32_t c = 0; c < n_classes; ++c) {
    if (!by_class[c].empty()) classes.push_back(c);
  }
  if (classes.size() < 2) throw InvalidArgument("sample_batch: dataset needs at least 2 classes");
  if (config.classes_per_batch < 2) throw InvalidArgument("sample_batch: classes_per_batch must be >= 2");
  if (config.classes_per_batch > classes.size()) {
    throw InvalidArgument("sample_batch: classes_per_batch " + std::to_string(config.classes_per_batch) +
                          " exceeds the " + std::to_string(classes.size()) + " available classes");
  }
  if (config.samples_per_class == 0) throw InvalidArgument("sample_batch: samples_per_class must be >= 1");

  // Partial Fisher-Yates for the class draw.
  for (std::size_t k = 0; k < config.classes_per_batch; ++k) {
    std::swap(classes[k], classes[k + rng.index(classes.size() - k)]);
  }

  Batch batch;
  for (std::size_t k = 0; k < config.classes_per_batch; ++k) {
    std::vector<std::size_t> pool = by_class[classes[k]];
    const std::size_t K = config.samples_per_class;
    if (pool.size() >= K) {
      for (std::size_t s = 0; s < K; ++s) {
        std::swap(pool[s], pool[s + rng.index(pool.size() - s)]);
        batch.indices.push_back(pool[s]);
      }
    } else {
      for (std::size_t s = 0; s < K; ++s) batch.indices.push_back(pool[rng.index(pool.size())]);
    }
    batch.labels.insert(batch.labels.end(), K, classes[k]);
  }

  const std::size_t n = batch.indices.size();
  if (config.mining == Mining::pairs) {
    std::vector<PairItem> positives, negatives;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        if (batch.labels[i] == batch.labels[j]) {
          positives.push_back({i, j, PairLabel::positive});
        } else {
          negatives.push_back({i, j, PairLabel::negative});
        }
      }
    }
    if (config.max_pairs > 0 && positives.size() + negatives.size() > config.max_pairs) {
      const std::size_t keep = config.max_pairs > positives.size() ? config.max_pairs - positives.size() : 0;
      for (std::size_t k = 0; k < keep; ++k) {
        std::swap(negatives[k], negatives[k + rng.index(negatives.size() - k)]);
      }
      negatives.resize(keep);
      std::sort(negatives.begin(), negatives.end(),
                [](const PairItem& x, const PairItem& y) { return x.a != y.a ? x.a < y.a : x.b < y.b; });
    }
    batch.pairs = std::move(positives);
    batch.pairs.insert(batch.pairs.end(), negatives.begin(), negatives.end());
    std::sort(batch.pairs.begin(), batch.pairs.end(),
              [](const PairItem& x, const PairItem& y) { return x.a != y.a ? x.a < y.a : x.b < y.b; });
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<std::size_t> negatives;
      for (std::size_t j = 0; j < n; ++j) {
        if (batch.labels[j] != batch.labels[i]) negatives.push_back(j);
      }
      for (std::size_t j = i + 1; j < n; ++j) {
        if (batch.labels[i] != batch.labels[j]) continue;
        batch.triplets.push_back({i, j, negatives[rng.index(negatives.size())]});
      }
    }
  }
  return batch;
}

}  // namespace bier
