#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "bier/tensor.hpp"

namespace bier {

/// Labeled fixed-dimension feature vectors. Labels are dense class ids in
/// [0, n_classes).
struct FeatureSet {
  std::vector<std::uint32_t> labels;
  Matrix features;  // N x h, row per sample
  std::uint32_t n_classes = 0;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t dim() const noexcept { return features.cols(); }
  Vector sample(std::size_t i) const { return Vector(features.row(i)); }
  std::vector<Vector> samples() const;
  std::vector<Vector> samples(std::span<const std::size_t> indices) const;

  // Throws InvalidArgument on a broken invariant.
  void validate() const;
};

// Binary layout: "BIERFT01", u64 N, u32 h, u32 n_classes, u32 labels[N],
// f32 features[N*h] row-major; little-endian. Features are rounded to f32 on write.
void write_features(std::ostream& os, const FeatureSet& set);
FeatureSet read_features(std::istream& is);
void save_features(const std::filesystem::path& path, const FeatureSet& set);
FeatureSet load_features(const std::filesystem::path& path);

// Lines "label,v1,...,vh". Labels are arbitrary tokens remapped to dense ids
// in first-appearance order. Blank lines are skipped. Errors carry the line number.
FeatureSet read_csv(std::istream& is);
FeatureSet load_csv(const std::filesystem::path& path);
// Writes the dense ids as labels, values with round-trip precision.
void write_csv(std::ostream& os, const FeatureSet& set);

struct SynthSpec {
  std::uint32_t classes = 10;
  std::uint32_t per_class = 20;
  std::uint32_t feature_dim = 64;
  double cluster_spread = 1.0;
  double noise = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
};

// Class centers uniform on the sphere of radius cluster_spread; each sample is
// its center plus noise * N(0, I). Samples are grouped by class in order.
FeatureSet synth_gaussian(const SynthSpec& spec);

enum class SplitMode { disjoint_classes, within_class };

struct SplitOptions {
  SplitMode mode = SplitMode::disjoint_classes;
  // Fraction of classes (disjoint) or of each class's samples (within_class) used for training.
  double train_fraction = 0.5;
  // Disjoint mode only: false assigns the first classes to training, as in the
  // usual zero-shot retrieval protocol; true draws them with `seed`.
  bool shuffle_classes = false;
  std::uint64_t seed = 0;
};

struct Split {
  FeatureSet train;
  FeatureSet test;
};

// Both halves get dense labels again (disjoint mode) or keep the original ids
// (within-class mode). Throws InvalidArgument when either half would be empty.
Split split(const FeatureSet& set, const SplitOptions& options);

}  // namespace bier
