#include "bier/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <string>
#include <utility>

#include "bier/errors.hpp"
#include "bier/log.hpp"

namespace bier {

double TrainConfig::effective_lambda_div() const {
  if (lambda_div) return *lambda_div;
  switch (diversity) {
    case DiversityKind::adversarial: return 1e-3;
    case DiversityKind::activation: return 1e-2;
    case DiversityKind::none: return 0.0;
  }
  return 0.0;
}

void TrainConfig::validate() const {
  loss.validate();
  optim.validate();
  if (effective_lambda_div() < 0.0 || !(lambda_w >= 0.0)) throw InvalidArgument("config: lambdas must be >= 0");
  if (classes_per_batch < 2) throw InvalidArgument("config: classes_per_batch must be >= 2");
  if (samples_per_class < 2) throw InvalidArgument("config: samples_per_class must be >= 2");
  if (regressor_hidden == 0) throw InvalidArgument("config: regressor_hidden must be >= 1");
  if (!std::isfinite(embedding.weight_exponent)) throw InvalidArgument("config: weight_exponent must be finite");
}

GroupPartition resolve_partition(const TrainConfig& config) {
  switch (config.partition_source) {
    case PartitionSource::explicit_sizes:
      return GroupPartition(config.group_sizes);
    case PartitionSource::preset: {
      auto p = preset_partition(config.embedding_dim, config.learners);
      if (!p) {
        throw InvalidArgument("no preset group sizes for d=" + std::to_string(config.embedding_dim) +
                              ", M=" + std::to_string(config.learners));
      }
      return *p;
    }
    case PartitionSource::proportional:
      return proportional_partition(config.embedding_dim, config.learners);
  }
  throw InvalidArgument("unknown partition source");
}

std::uint64_t derive_seed(std::uint64_t seed, RngStream stream) {
  // splitmix64 finalizer over seed + stream offset
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * static_cast<std::uint64_t>(stream);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

TrainState init_state(const TrainConfig& config, std::size_t input_dim) {
  config.validate();
  Rng model_rng(derive_seed(config.seed, RngStream::model));
  TrainState state{.model = {},
                   .bank = std::nullopt,
                   .optimizer = Optimizer(config.optim),
                   .rng = Rng(derive_seed(config.seed, RngStream::batches)),
                   .iteration = 0};
  const std::size_t h = config.backbone_dim > 0 ? config.backbone_dim : input_dim;
  state.model = make_model(h, resolve_partition(config), model_rng, config.backbone_dim > 0 ? input_dim : 0);
  if (config.diversity == DiversityKind::adversarial) {
    Rng bank_rng(derive_seed(config.seed, RngStream::bank));
    state.bank = make_bank(state.model.partition, config.regressor_hidden, bank_rng);
  }
  return state;
}

namespace {

AdversarialOptions adversarial_options(const TrainConfig& config) {
  AdversarialOptions o;
  o.lambda_w = config.lambda_w;
  o.normalizer = config.sim_normalizer;
  o.reverse_target_path = config.reverse_target_path;
  return o;
}

}  // namespace

StepResult train_step(const TrainConfig& config, TrainState& state, const FeatureSet& data, const Batch& batch) {
  EnsembleModel& model = state.model;
  const std::vector<Vector> inputs = data.samples(batch.indices);
  const bool backbone_grad = model.backbone.has_value() && config.backbone_trainable;
  const MetricOptions mopts{config.objective, config.boost_weight_signed, backbone_grad};
  MetricGradient mg = config.mining() == Mining::triplets
                          ? metric_gradient(model, inputs, batch.triplets, config.loss, mopts)
                          : metric_gradient(model, inputs, batch.pairs, config.loss, mopts);

  StepResult result;
  result.loss_metric = mg.objective;
  result.ensemble_loss = mg.ensemble_loss;
  result.skipped = mg.skipped;
  if (mg.skipped > 0) log_debug("iteration " + std::to_string(state.iteration) + ": skipped " +
                                std::to_string(mg.skipped) + " degenerate items");

  Matrix grad_W = std::move(mg.grad_W);
  std::optional<RegressorBank> grad_bank;
  const double lambda_div = config.effective_lambda_div();
  if (config.diversity != DiversityKind::none && lambda_div > 0.0) {
    std::vector<Vector> phi;
    phi.reserve(inputs.size());
    for (const Vector& x : inputs) phi.push_back(features(model, x));
    DiversityResult dv = diversity_loss(config.diversity, model, phi, state.bank ? &*state.bank : nullptr,
                                        adversarial_options(config));
    result.loss_div = dv.loss;
    axpy(lambda_div, dv.grad_W.span(), grad_W.span());
    if (dv.grad_bank) {
      grad_bank = std::move(dv.grad_bank);
      for (auto block : parameter_blocks(*grad_bank)) {
        for (double& g : block) g *= lambda_div;
      }
    }
  }

  std::vector<std::span<double>> params{model.W.span()};
  std::vector<std::span<const double>> grads{grad_W.span()};
  if (backbone_grad) {
    params.push_back(model.backbone->weights.span());
    params.push_back(model.backbone->bias.span());
    grads.push_back(mg.grad_backbone->weights.span());
    grads.push_back(mg.grad_backbone->bias.span());
  }
  std::optional<RegressorBank> zero_bank;
  if (state.bank) {
    for (auto b : parameter_blocks(*state.bank)) params.push_back(b);
    if (!grad_bank) {
      zero_bank = zeros_like(*state.bank);
      for (auto b : parameter_blocks(std::as_const(*zero_bank))) grads.push_back(b);
    } else {
      for (auto b : parameter_blocks(std::as_const(*grad_bank))) grads.push_back(b);
    }
  }
  state.optimizer.step(params, grads);
  ++state.iteration;
  if (backbone_grad) result.backbone_grad = std::move(mg.grad_backbone);
  return result;
}

MetricsRow evaluate_row(const TrainConfig& config, const EnsembleModel& model, const FeatureSet& eval_set,
                        std::uint64_t iter, double loss_metric, double loss_div) {
  MetricsRow row{iter, loss_metric, loss_div, 0.0, std::numeric_limits<double>::quiet_NaN(),
                 std::numeric_limits<double>::quiet_NaN()};
  const std::vector<Vector> inputs = eval_set.samples();
  std::vector<Vector> raw, emb;
  raw.reserve(inputs.size());
  emb.reserve(inputs.size());
  for (const Vector& x : inputs) {
    raw.push_back(embed_features(model, features(model, x)));
    emb.push_back(test_embedding_from_raw(model, raw.back(), config.embedding));
  }
  const std::size_t k1 = 1;
  row.r_at_1 = recall_at_k(emb, eval_set.labels, std::span(&k1, 1)).at(1);
  if (model.learners() >= 2) {
    try {
      row.feat_corr = feature_correlation(model.partition, raw);
    } catch (const UndefinedCorrelation&) {
    }
    try {
      const auto pairs = evaluation_pairs(inputs.size(), config.eval_max_pairs, config.seed);
      row.clf_corr = classifier_correlation(model, inputs, pairs);
    } catch (const UndefinedCorrelation&) {
    }
  }
  return row;
}

RunResult run(const TrainConfig& config, const FeatureSet& train, const FeatureSet* eval_set,
              std::optional<TrainState> resume, const RunHooks& hooks) {
  config.validate();
  train.validate();
  RunResult result{resume ? std::move(*resume) : init_state(config, train.dim()), {}, 0};
  TrainState& state = result.state;
  if (state.model.input_dim() != train.dim()) {
    throw InvalidArgument("run: model input dim " + std::to_string(state.model.input_dim()) +
                          " does not match data dim " + std::to_string(train.dim()));
  }
  if (config.diversity == DiversityKind::adversarial && !state.bank) {
    // A checkpoint written without a bank (e.g. after an activation-loss init).
    Rng bank_rng(derive_seed(config.seed, RngStream::bank));
    state.bank = make_bank(state.model.partition, config.regressor_hidden, bank_rng);
  }
  const FeatureSet& eval_data = eval_set != nullptr ? *eval_set : train;
  const BatchConfig bcfg{config.classes_per_batch, config.samples_per_class, config.mining(),
                         config.max_pairs_per_batch};
  const std::uint64_t target =
      hooks.stop_at > 0 ? std::min<std::uint64_t>(hooks.stop_at, config.iterations) : config.iterations;

  double sum_metric = 0.0, sum_div = 0.0;
  std::size_t since_row = 0;
  while (state.iteration < target) {
    const Batch batch = sample_batch(train.labels, train.n_classes, bcfg, state.rng);
    StepResult step;
    try {
      step = train_step(config, state, train, batch);
    } catch (const PoisonedState& e) {
      throw NumericFailure("diverged at iteration " + std::to_string(state.iteration + 1) + ": " + e.what());
    }
    if (!std::isfinite(step.loss_metric) || !std::isfinite(step.loss_div)) {
      throw NumericFailure("diverged at iteration " + std::to_string(state.iteration) + ": non-finite loss");
    }
    result.skipped_items += step.skipped;
    sum_metric += step.loss_metric;
    sum_div += step.loss_div;
    ++since_row;
    const bool interval_hit = config.eval_interval > 0 && state.iteration % config.eval_interval == 0;
    const bool last = state.iteration == config.iterations;
    if (interval_hit || last) {
      const double n = static_cast<double>(since_row);
      MetricsRow row = evaluate_row(config, state.model, eval_data, state.iteration, sum_metric / n, sum_div / n);
      if (hooks.on_row) hooks.on_row(row);
      result.rows.push_back(row);
      sum_metric = sum_div = 0.0;
      since_row = 0;
    }
  }
  if (result.skipped_items > 0) {
    log_info("skipped " + std::to_string(result.skipped_items) + " degenerate batch items in total");
  }
  return result;
}

void write_metrics_header(std::ostream& os) { os << "iter,loss_metric,loss_div,r_at_1,feat_corr,clf_corr\n"; }

void write_metrics_row(std::ostream& os, const MetricsRow& row) {
  auto num = [&](double v) {
    if (std::isnan(v)) {
      os << "nan";
    } else {
      char buf[64];
      const int n = std::snprintf(buf, sizeof buf, "%.17g", v);
      os.write(buf, n);
    }
  };
  os << row.iter << ',';
  num(row.loss_metric);
  os << ',';
  num(row.loss_div);
  os << ',';
  num(row.r_at_1);
  os << ',';
  num(row.feat_corr);
  os << ',';
  num(row.clf_corr);
  os << '\n';
}

void write_metrics_csv(std::ostream& os, const std::vector<MetricsRow>& rows) {
  write_metrics_header(os);
  for (const auto& r : rows) write_metrics_row(os, r);
}

}  // namespace bier
