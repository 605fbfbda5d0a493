#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "bier/boosting.hpp"
#include "bier/rng.hpp"

namespace bier {

enum class Mining { pairs, triplets };

struct BatchConfig {
  std::size_t classes_per_batch = 4;  // P
  std::size_t samples_per_class = 5;  // K
  Mining mining = Mining::pairs;
  // 0 keeps every mined pair; otherwise negatives are subsampled so that the
  // total does not exceed the cap (positives are always kept).
  std::size_t max_pairs = 0;
};

/// A mini-batch: dataset rows plus items that index into `indices`.
struct Batch {
  std::vector<std::size_t> indices;
  std::vector<std::uint32_t> labels;
  std::vector<PairItem> pairs;
  std::vector<TripletItem> triplets;
};

/// P distinct classes drawn uniformly, then K samples of each (without
/// replacement when the class has at least K samples, with replacement
/// otherwise). Pair mining enumerates every in-batch pair; triplet mining
/// takes every positive pair (anchor = earlier position) with one uniformly
/// drawn negative. Throws InvalidArgument for fewer than 2 populated classes,
/// P < 2, P larger than the number of populated classes, or K == 0.
Batch sample_batch(std::span<const std::uint32_t> labels, std::uint32_t n_classes, const BatchConfig& config,
                   Rng& rng);

}  // namespace bier
