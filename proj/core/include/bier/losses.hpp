#pragma once

#include <string_view>

namespace bier {

enum class LossKind { binomial_deviance, contrastive, triplet };

enum class PairLabel : int { negative = 0, positive = 1 };

std::string_view to_string(LossKind kind);
// Throws InvalidArgument on an unknown name.
LossKind loss_kind_from_string(std::string_view name);

/// Metric loss selection and constants. Defaults:
/// binomial deviance scale/translation 2 and 0.5, contrastive margin 0.5,
/// triplet margin 0.01, and class-balancing costs 1 (positive) / 25 (negative).
struct LossSpec {
  LossKind kind = LossKind::binomial_deviance;
  double beta1 = 2.0;
  double beta2 = 0.5;
  double margin_contrastive = 0.5;
  double margin_triplet = 0.01;
  double cost_pos = 1.0;
  double cost_neg = 25.0;

  // Throws InvalidArgument if beta1 <= 0, a margin < 0 or a cost <= 0.
  void validate() const;
};

struct PairLossValue {
  double loss = 0.0;
  double dloss_ds = 0.0;
};

struct TripletLossValue {
  double loss = 0.0;
  double d_dspos = 0.0;
  double d_dsneg = 0.0;
};

// Loss of a single pair with similarity s. Throws InvalidArgument for the triplet kind.
PairLossValue pair_loss(const LossSpec& spec, double s, PairLabel y);

// max(0, s_neg - s_pos + m); the subgradient at the hinge point is 0.
// Throws InvalidArgument unless spec.kind is triplet.
TripletLossValue triplet_loss(const LossSpec& spec, double s_pos, double s_neg);

// Sample weight for the next learner from the ensemble score of a pair.
// Default is the gradient magnitude |l'(s, y)|; `signed_weight` gives the
// literal -l'(s, y), which is negative for negative pairs.
double pair_boost_weight(const LossSpec& spec, double s, PairLabel y, bool signed_weight = false);

// -dl/ds_pos at the accumulated triplet scores; always 0 or 1.
double triplet_boost_weight(const LossSpec& spec, double s_pos, double s_neg);

// log(1 + e^z) without overflow.
double softplus(double z);
double sigmoid(double z);

}  // namespace bier
