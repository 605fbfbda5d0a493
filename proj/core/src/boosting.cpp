#include "bier/boosting.hpp"

#include <string>

#include "bier/errors.hpp"

namespace bier {

std::string_view to_string(MetricObjective objective) {
  switch (objective) {
    case MetricObjective::boosted: return "boosted";
    case MetricObjective::global: return "global";
    case MetricObjective::independent: return "independent";
  }
  return "unknown";
}

MetricObjective metric_objective_from_string(std::string_view name) {
  if (name == "boosted") return MetricObjective::boosted;
  if (name == "global") return MetricObjective::global;
  if (name == "independent") return MetricObjective::independent;
  throw InvalidArgument("unknown metric objective '" + std::string(name) + "'");
}

std::vector<double> boost_forward(const BoostSchedule& schedule, std::span<const double> scores) {
  if (scores.size() != schedule.count()) {
    throw InvalidArgument("boost_forward: " + std::to_string(scores.size()) + " scores for " +
                          std::to_string(schedule.count()) + " learners");
  }
  std::vector<double> acc(scores.size());
  double prev = 0.0;
  for (std::size_t m = 0; m < scores.size(); ++m) {
    prev = (1.0 - schedule.eta[m]) * prev + schedule.eta[m] * scores[m];
    acc[m] = prev;
  }
  return acc;
}

namespace {

void check_override(std::span<const double> weights_override, std::size_t M) {
  if (!weights_override.empty() && weights_override.size() != M) {
    throw InvalidArgument("boosting: weight override has wrong length");
  }
}

}  // namespace

BoostTrace boost_backward_pair(const LossSpec& spec, const BoostSchedule& schedule,
                               std::span<const double> scores, PairLabel y, bool signed_weights,
                               std::span<const double> weights_override) {
  const std::size_t M = schedule.count();
  check_override(weights_override, M);
  BoostTrace t;
  t.scores.assign(scores.begin(), scores.end());
  t.accumulated = boost_forward(schedule, scores);
  t.weights.resize(M);
  t.losses.resize(M);
  t.grads.resize(M);
  for (std::size_t m = 0; m < M; ++m) {
    if (!weights_override.empty()) {
      t.weights[m] = weights_override[m];
    } else {
      t.weights[m] = m == 0 ? 1.0 : pair_boost_weight(spec, t.accumulated[m - 1], y, signed_weights);
    }
    const PairLossValue l = pair_loss(spec, scores[m], y);
    t.losses[m] = l.loss;
    t.grads[m] = t.weights[m] * l.dloss_ds;
  }
  return t;
}

TripletTrace boost_step_triplet(const LossSpec& spec, const BoostSchedule& schedule,
                                std::span<const double> scores_pos, std::span<const double> scores_neg,
                                std::span<const double> weights_override) {
  if (spec.kind != LossKind::triplet) throw InvalidArgument("boost_step_triplet: spec is not a triplet loss");
  const std::size_t M = schedule.count();
  check_override(weights_override, M);
  TripletTrace t;
  t.scores_pos.assign(scores_pos.begin(), scores_pos.end());
  t.scores_neg.assign(scores_neg.begin(), scores_neg.end());
  t.accumulated_pos = boost_forward(schedule, scores_pos);
  t.accumulated_neg = boost_forward(schedule, scores_neg);
  t.weights.resize(M);
  t.losses.resize(M);
  t.grads_pos.resize(M);
  t.grads_neg.resize(M);
  for (std::size_t m = 0; m < M; ++m) {
    if (!weights_override.empty()) {
      t.weights[m] = weights_override[m];
    } else {
      t.weights[m] = m == 0 ? 1.0
                            : triplet_boost_weight(spec, t.accumulated_pos[m - 1], t.accumulated_neg[m - 1]);
    }
    const TripletLossValue l = triplet_loss(spec, scores_pos[m], scores_neg[m]);
    t.losses[m] = l.loss;
    t.grads_pos[m] = t.weights[m] * l.d_dspos;
    t.grads_neg[m] = t.weights[m] * l.d_dsneg;
  }
  return t;
}

namespace {

constexpr double kMinEmbeddingNorm = 1e-12;

// Index ranges the loss is applied to: the learner groups, or the whole
// embedding for the global objective.
struct Units {
  std::vector<std::size_t> offset;
  std::vector<std::size_t> length;
  std::size_t count() const { return offset.size(); }
};

Units make_units(const EnsembleModel& model, MetricObjective objective) {
  Units u;
  if (objective == MetricObjective::global) {
    u.offset = {0};
    u.length = {model.embedding_dim()};
  } else {
    u.offset = model.partition.offsets();
    u.length = model.partition.sizes();
  }
  return u;
}

Vector unit_slice(const Vector& f, const Units& units, std::size_t k) {
  const auto off = static_cast<std::ptrdiff_t>(units.offset[k]);
  const auto len = static_cast<std::ptrdiff_t>(units.length[k]);
  return Vector(std::vector<double>(f.begin() + off, f.begin() + off + len));
}

void scatter(Vector& dst, std::size_t offset, double scale, const Vector& src) {
  for (std::size_t k = 0; k < src.dim(); ++k) dst[offset + k] += scale * src[k];
}

struct BatchForward {
  std::vector<Vector> phi;
  std::vector<Vector> pre;  // backbone pre-activations, only when requested
  std::vector<Vector> f;
  std::vector<Vector> dLdf;
};

BatchForward forward_batch(const EnsembleModel& model, std::span<const Vector> inputs, bool keep_pre) {
  BatchForward fw;
  fw.phi.reserve(inputs.size());
  fw.f.reserve(inputs.size());
  for (const Vector& x : inputs) {
    if (x.dim() != model.input_dim()) {
      throw InvalidArgument("metric_gradient: sample dim " + std::to_string(x.dim()) +
                            " does not match model input dim " + std::to_string(model.input_dim()));
    }
    if (keep_pre && model.backbone) fw.pre.push_back(backbone_preactivation(*model.backbone, x));
    fw.phi.push_back(features(model, x));
    fw.f.push_back(embed_features(model, fw.phi.back()));
  }
  fw.dLdf.assign(inputs.size(), Vector(model.embedding_dim()));
  return fw;
}

// Slices every unit of both samples; false if any has (near) zero norm.
bool gather(const BatchForward& fw, const Units& units, std::size_t i, std::vector<Vector>& out) {
  out.clear();
  for (std::size_t k = 0; k < units.count(); ++k) {
    out.push_back(unit_slice(fw.f[i], units, k));
    if (norm(out.back().span()) < kMinEmbeddingNorm) return false;
  }
  return true;
}

std::span<const double> frozen_for(const SampleWeights* frozen, std::size_t item, std::size_t units) {
  if (frozen == nullptr) return {};
  if (item >= frozen->per_item.size() || frozen->per_item[item].size() != units) {
    throw InvalidArgument("metric_gradient: frozen weights do not match the batch");
  }
  return frozen->per_item[item];
}

std::vector<double> unit_weights(MetricObjective objective, std::size_t units) {
  if (objective == MetricObjective::independent) return std::vector<double>(units, 1.0);
  return {};
}

void finish(const EnsembleModel& model, std::span<const Vector> inputs, BatchForward& fw,
            const MetricOptions& options, MetricGradient& out) {
  out.grad_W = Matrix(model.feature_dim(), model.embedding_dim());
  const bool want_backbone = options.backbone_gradient && model.backbone.has_value();
  if (want_backbone) {
    out.grad_backbone = Backbone{Matrix(model.backbone->output_dim(), model.backbone->input_dim()),
                                 Vector(model.backbone->output_dim())};
  }
  if (out.used == 0) return;
  const double scale = 1.0 / static_cast<double>(out.used);
  out.objective *= scale;
  out.ensemble_loss *= scale;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    Vector& g = fw.dLdf[i];
    for (double& v : g) v *= scale;
    add_outer(out.grad_W, 1.0, fw.phi[i].span(), g.span());
    if (want_backbone) {
      Vector dphi = matvec(model.W, g);
      for (std::size_t r = 0; r < dphi.dim(); ++r) {
        if (!(fw.pre[i][r] > 0.0)) dphi[r] = 0.0;
      }
      add_outer(out.grad_backbone->weights, 1.0, dphi.span(), inputs[i].span());
      axpy(1.0, dphi.span(), out.grad_backbone->bias.span());
    }
  }
}

void check_index(std::size_t idx, std::size_t n) {
  if (idx >= n) throw InvalidArgument("metric_gradient: item index out of range");
}

}  // namespace

MetricGradient metric_gradient(const EnsembleModel& model, std::span<const Vector> inputs,
                               std::span<const PairItem> pairs, const LossSpec& spec,
                               const MetricOptions& options, const SampleWeights* frozen) {
  model.validate();
  const Units units = make_units(model, options.objective);
  BatchForward fw = forward_batch(model, inputs, options.backbone_gradient);
  MetricGradient out;
  out.weights.per_item.resize(pairs.size());
  const std::vector<double> unit_w = unit_weights(options.objective, units.count());
  std::vector<Vector> ua, vb;
  std::vector<CosineGrad> cg(units.count());
  std::vector<double> scores(units.count());

  for (std::size_t item = 0; item < pairs.size(); ++item) {
    const PairItem& p = pairs[item];
    check_index(p.a, inputs.size());
    check_index(p.b, inputs.size());
    if (p.a == p.b) throw InvalidArgument("metric_gradient: pair with identical indices");
    if (!gather(fw, units, p.a, ua) || !gather(fw, units, p.b, vb)) {
      ++out.skipped;
      continue;
    }
    for (std::size_t k = 0; k < units.count(); ++k) {
      cg[k] = cosine_sim_grad(ua[k], vb[k]);
      scores[k] = cg[k].s;
    }
    std::span<const double> override_w = frozen_for(frozen, item, units.count());
    if (override_w.empty()) override_w = unit_w;

    double objective = 0.0;
    double ensemble = 0.0;
    std::vector<double> grads(units.count());
    if (options.objective == MetricObjective::global) {
      const double w = override_w.empty() ? 1.0 : override_w[0];
      const PairLossValue l = pair_loss(spec, scores[0], p.y);
      grads[0] = w * l.dloss_ds;
      objective = w * l.loss;
      ensemble = l.loss;
      out.weights.per_item[item] = {w};
    } else {
      const BoostTrace t =
          boost_backward_pair(spec, model.schedule, scores, p.y, options.signed_weights, override_w);
      for (std::size_t k = 0; k < units.count(); ++k) objective += t.weights[k] * t.losses[k];
      ensemble = pair_loss(spec, t.accumulated.back(), p.y).loss;
      grads = t.grads;
      out.weights.per_item[item] = t.weights;
    }
    for (std::size_t k = 0; k < units.count(); ++k) {
      scatter(fw.dLdf[p.a], units.offset[k], grads[k], cg[k].ds_du);
      scatter(fw.dLdf[p.b], units.offset[k], grads[k], cg[k].ds_dv);
    }
    out.objective += objective;
    out.ensemble_loss += ensemble;
    ++out.used;
  }
  finish(model, inputs, fw, options, out);
  return out;
}

MetricGradient metric_gradient(const EnsembleModel& model, std::span<const Vector> inputs,
                               std::span<const TripletItem> triplets, const LossSpec& spec,
                               const MetricOptions& options, const SampleWeights* frozen) {
  model.validate();
  if (spec.kind != LossKind::triplet) throw InvalidArgument("metric_gradient: triplets need a triplet loss");
  const Units units = make_units(model, options.objective);
  BatchForward fw = forward_batch(model, inputs, options.backbone_gradient);
  MetricGradient out;
  out.weights.per_item.resize(triplets.size());
  const std::vector<double> unit_w = unit_weights(options.objective, units.count());
  std::vector<Vector> fa, fp, fn;
  std::vector<CosineGrad> cpos(units.count()), cneg(units.count());
  std::vector<double> spos(units.count()), sneg(units.count());

  for (std::size_t item = 0; item < triplets.size(); ++item) {
    const TripletItem& t = triplets[item];
    check_index(t.anchor, inputs.size());
    check_index(t.positive, inputs.size());
    check_index(t.negative, inputs.size());
    if (t.anchor == t.positive || t.anchor == t.negative) {
      throw InvalidArgument("metric_gradient: triplet reuses the anchor index");
    }
    if (!gather(fw, units, t.anchor, fa) || !gather(fw, units, t.positive, fp) ||
        !gather(fw, units, t.negative, fn)) {
      ++out.skipped;
      continue;
    }
    for (std::size_t k = 0; k < units.count(); ++k) {
      cpos[k] = cosine_sim_grad(fa[k], fp[k]);
      cneg[k] = cosine_sim_grad(fa[k], fn[k]);
      spos[k] = cpos[k].s;
      sneg[k] = cneg[k].s;
    }
    std::span<const double> override_w = frozen_for(frozen, item, units.count());
    if (override_w.empty()) override_w = unit_w;

    std::vector<double> gp(units.count()), gn(units.count());
    double objective = 0.0;
    double ensemble = 0.0;
    if (options.objective == MetricObjective::global) {
      const double w = override_w.empty() ? 1.0 : override_w[0];
      const TripletLossValue l = triplet_loss(spec, spos[0], sneg[0]);
      gp[0] = w * l.d_dspos;
      gn[0] = w * l.d_dsneg;
      objective = w * l.loss;
      ensemble = l.loss;
      out.weights.per_item[item] = {w};
    } else {
      const TripletTrace tr = boost_step_triplet(spec, model.schedule, spos, sneg, override_w);
      for (std::size_t k = 0; k < units.count(); ++k) objective += tr.weights[k] * tr.losses[k];
      ensemble = triplet_loss(spec, tr.accumulated_pos.back(), tr.accumulated_neg.back()).loss;
      gp = tr.grads_pos;
      gn = tr.grads_neg;
      out.weights.per_item[item] = tr.weights;
    }
    for (std::size_t k = 0; k < units.count(); ++k) {
      const std::size_t off = units.offset[k];
      scatter(fw.dLdf[t.anchor], off, gp[k], cpos[k].ds_du);
      scatter(fw.dLdf[t.positive], off, gp[k], cpos[k].ds_dv);
      scatter(fw.dLdf[t.anchor], off, gn[k], cneg[k].ds_du);
      scatter(fw.dLdf[t.negative], off, gn[k], cneg[k].ds_dv);
    }
    out.objective += objective;
    out.ensemble_loss += ensemble;
    ++out.used;
  }
  finish(model, inputs, fw, options, out);
  return out;
}

}  // namespace bier
