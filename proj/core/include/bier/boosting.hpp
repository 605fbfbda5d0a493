#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "bier/ensemble.hpp"
#include "bier/losses.hpp"

namespace bier {

struct PairItem {
  std::size_t a = 0;
  std::size_t b = 0;
  PairLabel y = PairLabel::negative;
};

struct TripletItem {
  std::size_t anchor = 0;
  std::size_t positive = 0;
  std::size_t negative = 0;
};

/// How the metric loss is attached to the partitioned embedding.
enum class MetricObjective {
  boosted,      // online gradient boosting over the learner groups
  global,       // one loss on the full concatenated embedding (baseline)
  independent,  // every group trained with its own loss, unit sample weights
};

std::string_view to_string(MetricObjective objective);
MetricObjective metric_objective_from_string(std::string_view name);

// Ensemble accumulation s^1..s^M with s^0 = 0 and
// s^m = (1 - eta_m) s^{m-1} + eta_m s_m. Throws InvalidArgument on a length mismatch.
std::vector<double> boost_forward(const BoostSchedule& schedule, std::span<const double> scores);

/// Forward and backward quantities of one pair through the ensemble.
struct BoostTrace {
  std::vector<double> scores;       // s_m per learner
  std::vector<double> accumulated;  // s^m
  std::vector<double> weights;      // w^m, w^1 = 1, w^{m+1} from s^m
  std::vector<double> losses;       // l(s_m, y), unweighted
  std::vector<double> grads;        // w^m * dl/ds_m
};

// `weights_override`, when given, replaces the computed sample weights.
BoostTrace boost_backward_pair(const LossSpec& spec, const BoostSchedule& schedule,
                               std::span<const double> scores, PairLabel y,
                               bool signed_weights = false,
                               std::span<const double> weights_override = {});

/// Triplet variant: separate accumulators for the positive and negative pair.
struct TripletTrace {
  std::vector<double> scores_pos;
  std::vector<double> scores_neg;
  std::vector<double> accumulated_pos;
  std::vector<double> accumulated_neg;
  std::vector<double> weights;  // each 0 or 1 beyond the first
  std::vector<double> losses;
  std::vector<double> grads_pos;  // w^m * dl/ds_pos
  std::vector<double> grads_neg;  // w^m * dl/ds_neg
};

TripletTrace boost_step_triplet(const LossSpec& spec, const BoostSchedule& schedule,
                                std::span<const double> scores_pos, std::span<const double> scores_neg,
                                std::span<const double> weights_override = {});

struct MetricOptions {
  MetricObjective objective = MetricObjective::boosted;
  bool signed_weights = false;
  bool backbone_gradient = false;
};

// Per-item sample weights of a forward pass, used to re-evaluate the objective
// with the weights held constant (the gradient treats them as constants).
struct SampleWeights {
  std::vector<std::vector<double>> per_item;
};

struct MetricGradient {
  Matrix grad_W;
  std::optional<Backbone> grad_backbone;
  double objective = 0.0;      // mean over used items of sum_m w^m l_m
  double ensemble_loss = 0.0;  // mean over used items of l at the final ensemble score
  std::size_t used = 0;
  std::size_t skipped = 0;     // items with a zero-norm group embedding
  SampleWeights weights;
};

// Gradient of the (re)weighted metric objective w.r.t. W and, on request, the
// backbone. `inputs` holds raw samples; items index into it. Contributions are
// averaged over the non-skipped items. If `frozen` is non-null its weights are
// used instead of those of the current forward pass.
MetricGradient metric_gradient(const EnsembleModel& model, std::span<const Vector> inputs,
                               std::span<const PairItem> pairs, const LossSpec& spec,
                               const MetricOptions& options, const SampleWeights* frozen = nullptr);
MetricGradient metric_gradient(const EnsembleModel& model, std::span<const Vector> inputs,
                               std::span<const TripletItem> triplets, const LossSpec& spec,
                               const MetricOptions& options, const SampleWeights* frozen = nullptr);

}  // namespace bier
