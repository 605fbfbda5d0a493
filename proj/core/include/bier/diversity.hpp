#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "bier/ensemble.hpp"
#include "bier/rng.hpp"
#include "bier/tensor.hpp"

namespace bier {

enum class DiversityKind { none, activation, adversarial };

std::string_view to_string(DiversityKind kind);
DiversityKind diversity_kind_from_string(std::string_view name);

// ---------------------------------------------------------------------------
// Activation loss
// ---------------------------------------------------------------------------

struct ActivationResult {
  double loss = 0.0;            // suppression + lambda_w * weight_penalty
  double suppression = 0.0;     // mean over samples of sum_{i<j} sum_{k,l} (f_ik f_jl)^2
  double weight_penalty = 0.0;  // sum_c (|w_c|^2 - 1)^2 over the d columns of W
  Matrix grad_W;
};

/// Activation loss on precomputed features `phi` (one h-vector per sample).
///
/// The per-sample cross-group suppression term factorizes as
/// sum_{i<j} |f_i|^2 |f_j|^2, which is what is evaluated here. The weight
/// penalty acts on the d per-output-dimension vectors of W (its columns).
/// Throws InvalidArgument on an empty batch.
ActivationResult activation_loss(const EnsembleModel& model, std::span<const Vector> phi, double lambda_w);

// Sum over W's columns of (|w_c|^2 - 1)^2, and its gradient (added to `grad`, scaled).
double column_norm_penalty(const Matrix& W, Matrix* grad = nullptr, double scale = 1.0);

// ---------------------------------------------------------------------------
// Adversarial loss
// ---------------------------------------------------------------------------

/// Two-layer regressor g(v) = W2 relu(W1 v + b1) + b2 mapping the embedding of
/// a source learner j (dim d_j) into the space of a target learner i (dim d_i).
struct Regressor {
  Matrix W1;  // hidden x d_j
  Vector b1;  // hidden
  Matrix W2;  // d_i x hidden
  Vector b2;  // d_i

  std::size_t hidden() const noexcept { return W1.rows(); }
  std::size_t source_dim() const noexcept { return W1.cols(); }
  std::size_t target_dim() const noexcept { return W2.rows(); }
  bool operator==(const Regressor&) const = default;
};

Regressor make_regressor(std::size_t source_dim, std::size_t target_dim, std::size_t hidden, Rng& rng);
Regressor zeros_like(const Regressor& r);

// Throws InvalidArgument when v.dim() != r.source_dim().
Vector regressor_forward(const Regressor& r, const Vector& v);

/// One regressor per learner pair (i, j), i < j, mapping f_j to f_i's space.
/// Stored in lexicographic (i, j) order.
struct RegressorBank {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::vector<Regressor> regressors;

  std::size_t size() const noexcept { return regressors.size(); }
  bool operator==(const RegressorBank&) const = default;
};

RegressorBank make_bank(const GroupPartition& partition, std::size_t hidden, Rng& rng);
RegressorBank zeros_like(const RegressorBank& bank);
// Throws InvalidArgument when the bank does not match the partition.
void validate_bank(const RegressorBank& bank, const GroupPartition& partition);

// Mutable views of every parameter array, in a fixed order (per regressor: W1, b1, W2, b2).
std::vector<std::span<double>> parameter_blocks(RegressorBank& bank);
std::vector<std::span<const double>> parameter_blocks(const RegressorBank& bank);

enum class SimNormalizer { source_dim, target_dim };

struct AdversarialOptions {
  double lambda_w = 1.0;
  // Divide each similarity term by d_j (source, default) or d_i (target).
  SimNormalizer normalizer = SimNormalizer::source_dim;
  // Flip the sign of the similarity gradient flowing into the embedding.
  bool gradient_reversal = true;
  // Apply the flip on the target (f_i) path as well as the source (f_j) path.
  bool reverse_target_path = true;
};

struct AdversarialResult {
  double loss = 0.0;            // -similarity + lambda_w * weight_penalty
  double similarity = 0.0;      // (1/N) sum_n sum_{i<j} L_sim
  double weight_penalty = 0.0;  // regressor bias hinges + row penalties + W column penalty
  RegressorBank grad_bank;      // d loss / d bank
  Matrix grad_W;                // embedding gradient after gradient reversal
  Matrix grad_W_penalty;        // lambda_w * d(W column penalty)/dW, part of grad_W, never reversed
};

AdversarialResult adversarial_loss(const EnsembleModel& model, const RegressorBank& bank,
                                   std::span<const Vector> phi, const AdversarialOptions& options);

// ---------------------------------------------------------------------------
// Dispatch
// ---------------------------------------------------------------------------

struct DiversityResult {
  double loss = 0.0;
  Matrix grad_W;
  std::optional<RegressorBank> grad_bank;
};

// kind == none yields a zero loss and zero gradient. The adversarial kind
// requires a bank (InvalidArgument otherwise).
DiversityResult diversity_loss(DiversityKind kind, const EnsembleModel& model, std::span<const Vector> phi,
                               const RegressorBank* bank, const AdversarialOptions& options);

}  // namespace bier
