#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "bier/rng.hpp"
#include "bier/tensor.hpp"

namespace bier {

/// Non-overlapping split of the d embedding dimensions into M learner groups.
class GroupPartition {
 public:
  GroupPartition() = default;
  // Throws InvalidArgument if sizes is empty or contains a zero.
  explicit GroupPartition(std::vector<std::size_t> sizes);

  std::size_t count() const noexcept { return sizes_.size(); }
  std::size_t total() const noexcept { return total_; }
  std::size_t size(std::size_t m) const { return sizes_.at(m); }
  std::size_t offset(std::size_t m) const { return offsets_.at(m); }
  const std::vector<std::size_t>& sizes() const noexcept { return sizes_; }
  const std::vector<std::size_t>& offsets() const noexcept { return offsets_; }

  // Group index owning embedding dimension c.
  std::size_t group_of(std::size_t c) const;

  bool operator==(const GroupPartition&) const = default;

 private:
  std::vector<std::size_t> sizes_;
  std::vector<std::size_t> offsets_;
  std::size_t total_ = 0;
};

/// Online boosting coefficients: eta_m = 2/(m+1) and the equivalent convex
/// weights alpha_m = eta_m * prod_{n>m} (1 - eta_n), with m counted from 1.
struct BoostSchedule {
  std::vector<double> eta;
  std::vector<double> alpha;

  std::size_t count() const noexcept { return eta.size(); }
  bool operator==(const BoostSchedule&) const = default;
};

// Throws InvalidArgument when M == 0.
BoostSchedule make_schedule(std::size_t M);

// Group sizes proportional to alpha_m: floor(alpha_m * d) for all but the last
// learner (raised to 1 when the floor is 0), remainder to the last learner.
// Throws InvalidArgument if M == 0 or d < M.
GroupPartition proportional_partition(std::size_t d, std::size_t M);

// Hand-picked reference group sizes, keyed by (d, M).
std::optional<GroupPartition> preset_partition(std::size_t d, std::size_t M);

struct PresetRow {
  std::size_t d;
  std::vector<std::size_t> sizes;
};
const std::vector<PresetRow>& preset_table();

/// Single affine + rectifier layer producing the h-dimensional features fed
/// to the embedding. Stands in for the trainable part of a feature extractor.
struct Backbone {
  Matrix weights;  // h x input_dim
  Vector bias;     // h

  std::size_t input_dim() const noexcept { return weights.cols(); }
  std::size_t output_dim() const noexcept { return weights.rows(); }
  bool operator==(const Backbone&) const = default;
};

struct EnsembleModel {
  Matrix W;  // h x d, column c is the weight vector of embedding dimension c
  GroupPartition partition;
  BoostSchedule schedule;
  std::optional<Backbone> backbone;

  std::size_t input_dim() const noexcept { return backbone ? backbone->input_dim() : W.rows(); }
  std::size_t feature_dim() const noexcept { return W.rows(); }
  std::size_t embedding_dim() const noexcept { return W.cols(); }
  std::size_t learners() const noexcept { return partition.count(); }

  // Throws InvalidArgument when the pieces disagree on shapes.
  void validate() const;
  bool operator==(const EnsembleModel&) const = default;
};

// Uniform Glorot init of W (and the backbone, if backbone_input_dim > 0).
EnsembleModel make_model(std::size_t h, GroupPartition partition, Rng& rng,
                         std::size_t backbone_input_dim = 0);

// Sets every column of W to unit length (used by tests and the initializer).
void normalize_columns(Matrix& W);

// phi(x): backbone output, or x itself when there is no backbone.
Vector features(const EnsembleModel& model, const Vector& x);
// Rectifier pre-activations of the backbone (needed for its gradient).
Vector backbone_preactivation(const Backbone& backbone, const Vector& x);

// Full raw embedding W^T phi for precomputed features.
Vector embed_features(const EnsembleModel& model, const Vector& phi);

// Sub-vector of a d-dimensional embedding belonging to group m.
Vector group_slice(const GroupPartition& partition, const Vector& f, std::size_t m);

// Raw, unnormalized per-learner embeddings f_1(x) .. f_M(x).
std::vector<Vector> learner_forward(const EnsembleModel& model, const Vector& x);

struct CosineGrad {
  double s = 0.0;
  Vector ds_du;
  Vector ds_dv;
};

// Cosine similarity and its gradient w.r.t. both arguments.
// Throws DegenerateInput if either vector has zero norm.
CosineGrad cosine_sim_grad(const Vector& u, const Vector& v);
double cosine_sim(std::span<const double> u, std::span<const double> v);

struct TestEmbeddingOptions {
  // Each normalized group is scaled by alpha_m^weight_exponent. With 0.5 the
  // dot product of two embeddings equals sum_m alpha_m s_m exactly.
  double weight_exponent = 1.0;
  // L2-normalize the concatenated vector as a final step.
  bool renormalize_full = false;
};

// Test-time embedding: concatenation of weighted, L2-normalized learner outputs.
// Throws DegenerateInput if any group output is zero.
Vector test_embedding(const EnsembleModel& model, const Vector& x,
                      const TestEmbeddingOptions& options = {});
Vector test_embedding_from_raw(const EnsembleModel& model, const Vector& f,
                               const TestEmbeddingOptions& options = {});

}  // namespace bier
