#include "bier/losses.hpp"

#include <cmath>
#include <string>

#include "bier/errors.hpp"

namespace bier {

std::string_view to_string(LossKind kind) {
  switch (kind) {
    case LossKind::binomial_deviance: return "binomial_deviance";
    case LossKind::contrastive: return "contrastive";
    case LossKind::triplet: return "triplet";
  }
  return "unknown";
}

LossKind loss_kind_from_string(std::string_view name) {
  if (name == "binomial_deviance" || name == "binomial") return LossKind::binomial_deviance;
  if (name == "contrastive") return LossKind::contrastive;
  if (name == "triplet") return LossKind::triplet;
  throw InvalidArgument("unknown loss kind '" + std::string(name) + "'");
}

void LossSpec::validate() const {
  if (!(beta1 > 0.0)) throw InvalidArgument("loss: beta1 must be positive");
  if (!(margin_contrastive >= 0.0) || !(margin_triplet >= 0.0)) {
    throw InvalidArgument("loss: margins must be non-negative");
  }
  if (!(cost_pos > 0.0) || !(cost_neg > 0.0)) throw InvalidArgument("loss: costs must be positive");
}

double softplus(double z) {
  if (z > 30.0) return z + std::log1p(std::exp(-z));
  return std::log1p(std::exp(z));
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

PairLossValue pair_loss(const LossSpec& spec, double s, PairLabel y) {
  const bool positive = y == PairLabel::positive;
  switch (spec.kind) {
    case LossKind::binomial_deviance: {
      const double sign = positive ? 1.0 : -1.0;
      const double cost = positive ? spec.cost_pos : spec.cost_neg;
      const double dz_ds = -sign * spec.beta1 * cost;
      const double z = dz_ds * (s - spec.beta2);
      return {softplus(z), sigmoid(z) * dz_ds};
    }
    case LossKind::contrastive: {
      if (positive) {
        const double d = s - 1.0;
        return {d * d, 2.0 * d};
      }
      if (s > spec.margin_contrastive) return {s - spec.margin_contrastive, 1.0};
      return {0.0, 0.0};
    }
    case LossKind::triplet:
      break;
  }
  throw InvalidArgument("pair_loss: triplet loss needs a (positive, negative) score pair");
}

TripletLossValue triplet_loss(const LossSpec& spec, double s_pos, double s_neg) {
  if (spec.kind != LossKind::triplet) throw InvalidArgument("triplet_loss: spec is not a triplet loss");
  const double v = s_neg - s_pos + spec.margin_triplet;
  if (v > 0.0) return {v, -1.0, 1.0};
  return {0.0, 0.0, 0.0};
}

double pair_boost_weight(const LossSpec& spec, double s, PairLabel y, bool signed_weight) {
  const double g = pair_loss(spec, s, y).dloss_ds;
  return signed_weight ? -g : std::fabs(g);
}

double triplet_boost_weight(const LossSpec& spec, double s_pos, double s_neg) {
  return -triplet_loss(spec, s_pos, s_neg).d_dspos;
}

}  // namespace bier
