#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

#include "bier/boosting.hpp"
#include "bier/data_io.hpp"
#include "bier/diversity.hpp"
#include "bier/ensemble.hpp"
#include "bier/eval.hpp"
#include "bier/losses.hpp"
#include "bier/optim.hpp"
#include "bier/rng.hpp"
#include "bier/sampler.hpp"

namespace bier {

enum class PartitionSource { proportional, preset, explicit_sizes };

/// Everything that determines a training run. Given the same config and data,
/// a run is bit-reproducible.
struct TrainConfig {
  LossSpec loss;
  MetricObjective objective = MetricObjective::boosted;
  bool boost_weight_signed = false;

  PartitionSource partition_source = PartitionSource::proportional;
  std::vector<std::size_t> group_sizes;  // used with explicit_sizes
  std::size_t embedding_dim = 32;
  std::size_t learners = 3;

  DiversityKind diversity = DiversityKind::none;
  // Unset: 1e-3 for adversarial, 1e-2 for activation.
  std::optional<double> lambda_div;
  double lambda_w = 1.0;
  std::size_t regressor_hidden = 512;
  SimNormalizer sim_normalizer = SimNormalizer::source_dim;
  bool reverse_target_path = true;

  OptimConfig optim;
  std::size_t iterations = 1000;
  std::size_t classes_per_batch = 4;
  std::size_t samples_per_class = 5;
  std::size_t max_pairs_per_batch = 0;
  std::uint64_t seed = 0;

  // 0: no backbone, the embedding reads the data directly. Otherwise the size
  // h of an affine + rectifier layer placed in front of the embedding.
  std::size_t backbone_dim = 0;
  bool backbone_trainable = true;

  TestEmbeddingOptions embedding;
  std::size_t eval_interval = 0;  // 0: only after the last iteration
  std::size_t eval_max_pairs = 20000;

  double effective_lambda_div() const;
  Mining mining() const { return loss.kind == LossKind::triplet ? Mining::triplets : Mining::pairs; }
  void validate() const;
};

// Throws InvalidArgument when no partition can be built (e.g. no preset row).
GroupPartition resolve_partition(const TrainConfig& config);

// Independent random streams derived from the run seed.
enum class RngStream : std::uint64_t { model = 1, bank = 2, batches = 3 };
std::uint64_t derive_seed(std::uint64_t seed, RngStream stream);

struct TrainState {
  EnsembleModel model;
  std::optional<RegressorBank> bank;
  Optimizer optimizer;
  Rng rng;  // batch sampling
  std::uint64_t iteration = 0;

  bool operator==(const TrainState&) const = default;
};

// Fresh state: Glorot-initialized W (and backbone), regressor bank for the
// adversarial kind, optimizer with empty moments.
TrainState init_state(const TrainConfig& config, std::size_t input_dim);

struct StepResult {
  double loss_metric = 0.0;
  double loss_div = 0.0;
  double ensemble_loss = 0.0;
  std::size_t skipped = 0;
  // Backbone gradient that was applied (empty without a trainable backbone).
  std::optional<Backbone> backbone_grad;
};

// One step of L = L_metric + lambda_div * L_div. The metric gradient reaches W
// and (if trainable) the backbone; the diversity gradient reaches W and the
// regressors only. Throws PoisonedState if a gradient is non-finite.
StepResult train_step(const TrainConfig& config, TrainState& state, const FeatureSet& data, const Batch& batch);

struct MetricsRow {
  std::uint64_t iter = 0;
  double loss_metric = 0.0;
  double loss_div = 0.0;
  double r_at_1 = 0.0;
  double feat_corr = 0.0;  // NaN when undefined
  double clf_corr = 0.0;   // NaN when undefined
};

MetricsRow evaluate_row(const TrainConfig& config, const EnsembleModel& model, const FeatureSet& eval_set,
                        std::uint64_t iter, double loss_metric, double loss_div);

struct RunResult {
  TrainState state;
  std::vector<MetricsRow> rows;
  std::size_t skipped_items = 0;
};

struct RunHooks {
  std::function<void(const MetricsRow&)> on_row;
  // Stop after this many total iterations (for checkpoint/resume); 0 = run to config.iterations.
  std::uint64_t stop_at = 0;
};

/// Samples batches and applies train_step until config.iterations steps have
/// been taken in total, emitting a metrics row every eval_interval steps and
/// after the last one. Starts from `resume` when given. Divergence surfaces as
/// NumericFailure naming the iteration.
RunResult run(const TrainConfig& config, const FeatureSet& train, const FeatureSet* eval_set,
              std::optional<TrainState> resume = std::nullopt, const RunHooks& hooks = {});

void write_metrics_header(std::ostream& os);
void write_metrics_row(std::ostream& os, const MetricsRow& row);
void write_metrics_csv(std::ostream& os, const std::vector<MetricsRow>& rows);

}  // namespace bier
