#include "bier/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <utility>

#include "bier/boosting.hpp"
#include "bier/diversity.hpp"
#include "bier/ensemble.hpp"
#include "bier/errors.hpp"
#include "bier/losses.hpp"
#include "bier/rng.hpp"

namespace bier {

namespace {

using Objective = std::function<double()>;

constexpr double kMinMetricGradNorm = 1e-2;

double rel_error(std::span<const double> a, std::span<const double> n, double floor) {
  double diff = 0.0, na = 0.0, nn = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - n[i]) * (a[i] - n[i]);
    na += a[i] * a[i];
    nn += n[i] * n[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nn), floor});
}

// Central differences of f with respect to every entry of `params`, which f reads.
std::vector<double> numeric_grad(std::span<double> params, const Objective& f, double h) {
  std::vector<double> out(params.size());
  for (std::size_t k = 0; k < params.size(); ++k) {
    const double keep = params[k];
    params[k] = keep + h;
    const double up = f();
    params[k] = keep - h;
    const double down = f();
    params[k] = keep;
    out[k] = (up - down) / (2.0 * h);
  }
  return out;
}

struct Checker {
  const GradcheckOptions& options;
  CheckResult result;

  Checker(const GradcheckOptions& o, std::string module, std::string name) : options(o) {
    result.module = std::move(module);
    result.name = std::move(name);
  }

  void compare(std::vector<double> analytic, std::span<const double> numeric) {
    if (options.inject_fault == result.name) {
      for (double& v : analytic) v = -v;
    }
    const double e = rel_error(analytic, numeric, options.floor);
    ++result.instances;
    // A NaN error counts as an infinite one.
    result.worst_rel_error = std::max(result.worst_rel_error, std::isnan(e) ? INFINITY : e);
    result.passed = result.worst_rel_error < options.tolerance;
  }
};

std::vector<double> flat(std::span<const double> s) { return {s.begin(), s.end()}; }

Vector random_vector(std::size_t n, Rng& rng, double scale = 1.0) {
  Vector v(n);
  for (double& x : v) x = scale * rng.normal();
  return v;
}

// Groups of one dimension have a constant cosine score, so sizes start at 2.
GroupPartition random_partition(Rng& rng, std::size_t min_m = 1) {
  const std::size_t M = min_m + rng.index(4 - std::min<std::size_t>(min_m, 3));
  std::vector<std::size_t> sizes(M);
  for (auto& s : sizes) s = 2 + rng.index(3);
  return GroupPartition(sizes);
}

// ---------------------------------------------------------------------------
// losses: scalar loss derivatives and the cosine similarity
// ---------------------------------------------------------------------------

void check_pair_loss(const GradcheckOptions& opt, LossKind kind, const std::string& name, Rng& rng,
                     std::vector<CheckResult>& out) {
  Checker ck(opt, "losses", name);
  LossSpec spec;
  spec.kind = kind;
  while (ck.result.instances < opt.instances) {
    double s = rng.uniform(-1.0, 1.0);
    const PairLabel y = rng.index(2) ? PairLabel::positive : PairLabel::negative;
    // The contrastive negative term has a kink at the margin.
    if (kind == LossKind::contrastive && std::abs(s - spec.margin_contrastive) < 1e-3) continue;
    const double analytic = pair_loss(spec, s, y).dloss_ds;
    std::span<double> p(&s, 1);
    const auto num = numeric_grad(p, [&] { return pair_loss(spec, s, y).loss; }, opt.step);
    ck.compare({analytic}, num);
  }
  out.push_back(ck.result);
}

void check_triplet_loss(const GradcheckOptions& opt, Rng& rng, std::vector<CheckResult>& out) {
  Checker ck(opt, "losses", "triplet");
  LossSpec spec;
  spec.kind = LossKind::triplet;
  while (ck.result.instances < opt.instances) {
    double s[2] = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
    // Bias half the draws into the active region so both branches are covered.
    if (ck.result.instances % 2 == 0) s[1] = s[0] + rng.uniform(-0.005, 0.5);
    if (std::abs(s[1] - s[0] + spec.margin_triplet) < 1e-4) continue;
    const TripletLossValue v = triplet_loss(spec, s[0], s[1]);
    const auto num = numeric_grad(std::span<double>(s, 2), [&] { return triplet_loss(spec, s[0], s[1]).loss; },
                                  opt.step);
    ck.compare({v.d_dspos, v.d_dsneg}, num);
  }
  out.push_back(ck.result);
}

void check_cosine(const GradcheckOptions& opt, Rng& rng, std::vector<CheckResult>& out) {
  Checker ck(opt, "losses", "cosine_similarity");
  while (ck.result.instances < opt.instances) {
    const std::size_t n = 2 + rng.index(7);
    Vector u = random_vector(n, rng);
    Vector v = random_vector(n, rng);
    const CosineGrad g = cosine_sim_grad(u, v);
    std::vector<double> analytic = flat(g.ds_du.span());
    analytic.insert(analytic.end(), g.ds_dv.begin(), g.ds_dv.end());
    auto num = numeric_grad(u.span(), [&] { return cosine_sim(u.span(), v.span()); }, opt.step);
    const auto num_v = numeric_grad(v.span(), [&] { return cosine_sim(u.span(), v.span()); }, opt.step);
    num.insert(num.end(), num_v.begin(), num_v.end());
    ck.compare(std::move(analytic), num);
  }
  out.push_back(ck.result);
}

// ---------------------------------------------------------------------------
// boosting: W (and backbone) gradients of the reweighted objective
// ---------------------------------------------------------------------------

struct Problem {
  EnsembleModel model;
  std::vector<Vector> inputs;
  std::vector<PairItem> pairs;
  std::vector<TripletItem> triplets;
};

Problem random_problem(Rng& rng, bool with_backbone, bool triplets) {
  Problem p;
  const std::size_t h = 2 + rng.index(5);
  const std::size_t in = with_backbone ? 2 + rng.index(4) : h;
  p.model = make_model(h, random_partition(rng), rng, with_backbone ? in : 0);
  if (with_backbone) {
    // Push pre-activations away from the rectifier kink.
    for (double& b : p.model.backbone->bias) b = rng.uniform(0.2, 1.0) * (rng.index(2) ? 1.0 : -1.0);
  }
  const std::size_t n = 4 + rng.index(4);
  for (std::size_t i = 0; i < n; ++i) p.inputs.push_back(random_vector(in, rng));
  const std::size_t items = 3 + rng.index(6);
  for (std::size_t k = 0; k < items; ++k) {
    const std::size_t a = rng.index(n);
    std::size_t b = rng.index(n - 1);
    if (b >= a) ++b;
    if (triplets) {
      std::size_t c = rng.index(n - 2);
      for (std::size_t taken : {std::min(a, b), std::max(a, b)}) {
        if (c >= taken) ++c;
      }
      p.triplets.push_back({a, b, c});
    } else {
      p.pairs.push_back({a, b, rng.index(2) ? PairLabel::positive : PairLabel::negative});
    }
  }
  return p;
}

MetricGradient metric(const Problem& p, const LossSpec& spec, const MetricOptions& o, const SampleWeights* frozen) {
  return p.triplets.empty() ? metric_gradient(p.model, p.inputs, p.pairs, spec, o, frozen)
                            : metric_gradient(p.model, p.inputs, p.triplets, spec, o, frozen);
}

void check_metric(const GradcheckOptions& opt, const std::string& name, LossKind kind, MetricObjective objective,
                  bool backbone, Rng& rng, std::vector<CheckResult>& out) {
  Checker ck(opt, "boosting", name);
  LossSpec spec;
  spec.kind = kind;
  MetricOptions mo;
  mo.objective = objective;
  mo.backbone_gradient = backbone;
  while (ck.result.instances < opt.instances) {
    Problem p = random_problem(rng, backbone, kind == LossKind::triplet);
    const MetricGradient g = metric(p, spec, mo, nullptr);
    if (g.used == 0) continue;
    // Triplet hinges: skip instances sitting within reach of a kink.
    if (kind == LossKind::triplet) {
      bool near_kink = false;
      for (const TripletItem& t : p.triplets) {
        const auto fa = learner_forward(p.model, p.inputs[t.anchor]);
        const auto fp = learner_forward(p.model, p.inputs[t.positive]);
        const auto fn = learner_forward(p.model, p.inputs[t.negative]);
        for (std::size_t m = 0; m < fa.size(); ++m) {
          const double z = cosine_sim(fa[m].span(), fn[m].span()) - cosine_sim(fa[m].span(), fp[m].span()) +
                           spec.margin_triplet;
          if (std::abs(z) < 1e-4) near_kink = true;
        }
      }
      if (near_kink) continue;
    }
    // Saturated losses leave nothing but rounding noise to compare against.
    if (norm(g.grad_W.span()) < kMinMetricGradNorm) continue;
    const SampleWeights frozen = g.weights;
    const Objective f = [&] { return metric(p, spec, mo, &frozen).objective; };
    std::vector<double> analytic = flat(g.grad_W.span());
    std::vector<double> num = numeric_grad(p.model.W.span(), f, opt.step);
    if (backbone) {
      analytic.insert(analytic.end(), g.grad_backbone->weights.span().begin(), g.grad_backbone->weights.span().end());
      analytic.insert(analytic.end(), g.grad_backbone->bias.begin(), g.grad_backbone->bias.end());
      const auto nw = numeric_grad(p.model.backbone->weights.span(), f, opt.step);
      const auto nb = numeric_grad(p.model.backbone->bias.span(), f, opt.step);
      num.insert(num.end(), nw.begin(), nw.end());
      num.insert(num.end(), nb.begin(), nb.end());
    }
    ck.compare(std::move(analytic), num);
  }
  out.push_back(ck.result);
}

// ---------------------------------------------------------------------------
// diversity: activation and adversarial losses
// ---------------------------------------------------------------------------

void check_activation(const GradcheckOptions& opt, Rng& rng, std::vector<CheckResult>& out) {
  Checker ck(opt, "diversity", "activation_W");
  while (ck.result.instances < opt.instances) {
    const std::size_t h = 2 + rng.index(5);
    EnsembleModel model = make_model(h, random_partition(rng, 2), rng);
    std::vector<Vector> phi;
    for (std::size_t i = 0, n = 2 + rng.index(5); i < n; ++i) phi.push_back(random_vector(h, rng));
    const double lambda_w = rng.uniform(0.1, 10.0);
    const ActivationResult r = activation_loss(model, phi, lambda_w);
    const auto num =
        numeric_grad(model.W.span(), [&] { return activation_loss(model, phi, lambda_w).loss; }, opt.step);
    ck.compare(flat(r.grad_W.span()), num);
  }
  out.push_back(ck.result);
}

struct AdvProblem {
  EnsembleModel model;
  RegressorBank bank;
  std::vector<Vector> phi;
  AdversarialOptions options;
};

AdvProblem random_adv_problem(Rng& rng) {
  AdvProblem p;
  const std::size_t h = 2 + rng.index(4);
  p.model = make_model(h, random_partition(rng, 2), rng);
  p.bank = make_bank(p.model.partition, 2 + rng.index(4), rng);
  for (Regressor& g : p.bank.regressors) {
    // Biases either well inside or well outside the unit ball (the hinge is at 1),
    // and away from zero so the rectifier sees both signs.
    const double scale = rng.index(2) ? 0.3 : 1.5;
    Vector b = random_vector(g.b1.dim() + g.b2.dim(), rng);
    b = l2_normalize(b);
    for (std::size_t k = 0; k < g.b1.dim(); ++k) g.b1[k] = scale * b[k];
    for (std::size_t k = 0; k < g.b2.dim(); ++k) g.b2[k] = scale * b[g.b1.dim() + k];
  }
  for (std::size_t i = 0, n = 2 + rng.index(4); i < n; ++i) p.phi.push_back(random_vector(h, rng));
  p.options.lambda_w = rng.uniform(0.1, 2.0);
  p.options.normalizer = rng.index(2) ? SimNormalizer::source_dim : SimNormalizer::target_dim;
  return p;
}

void check_adversarial(const GradcheckOptions& opt, Rng& rng, std::vector<CheckResult>& out) {
  Checker ck_w(opt, "diversity", "adversarial_W");
  Checker ck_bank(opt, "diversity", "adversarial_regressors");
  while (ck_w.result.instances < opt.instances) {
    AdvProblem p = random_adv_problem(rng);
    // Without the reversal layer grad_W is the plain gradient of the loss.
    p.options.gradient_reversal = false;
    const AdversarialResult r = adversarial_loss(p.model, p.bank, p.phi, p.options);
    const Objective f = [&] { return adversarial_loss(p.model, p.bank, p.phi, p.options).loss; };
    ck_w.compare(flat(r.grad_W.span()), numeric_grad(p.model.W.span(), f, opt.step));

    std::vector<double> analytic, num;
    const auto grads = parameter_blocks(std::as_const(r.grad_bank));
    auto params = parameter_blocks(p.bank);
    for (std::size_t b = 0; b < params.size(); ++b) {
      analytic.insert(analytic.end(), grads[b].begin(), grads[b].end());
      const auto nb = numeric_grad(params[b], f, opt.step);
      num.insert(num.end(), nb.begin(), nb.end());
    }
    ck_bank.compare(std::move(analytic), num);
  }
  out.push_back(ck_w.result);
  out.push_back(ck_bank.result);
}

struct Suite {
  std::string module;
  std::vector<std::string> names;
  std::function<void(const GradcheckOptions&, Rng&, std::vector<CheckResult>&)> run;
};

const std::vector<Suite>& suites() {
  static const std::vector<Suite> all = {
      {"losses",
       {"binomial_deviance", "contrastive", "triplet", "cosine_similarity"},
       [](const GradcheckOptions& o, Rng& rng, std::vector<CheckResult>& out) {
         check_pair_loss(o, LossKind::binomial_deviance, "binomial_deviance", rng, out);
         check_pair_loss(o, LossKind::contrastive, "contrastive", rng, out);
         check_triplet_loss(o, rng, out);
         check_cosine(o, rng, out);
       }},
      {"boosting",
       {"boosted_binomial_W", "boosted_contrastive_W", "boosted_triplet_W", "global_binomial_W",
        "boosted_binomial_backbone"},
       [](const GradcheckOptions& o, Rng& rng, std::vector<CheckResult>& out) {
         check_metric(o, "boosted_binomial_W", LossKind::binomial_deviance, MetricObjective::boosted, false, rng, out);
         check_metric(o, "boosted_contrastive_W", LossKind::contrastive, MetricObjective::boosted, false, rng, out);
         check_metric(o, "boosted_triplet_W", LossKind::triplet, MetricObjective::boosted, false, rng, out);
         check_metric(o, "global_binomial_W", LossKind::binomial_deviance, MetricObjective::global, false, rng, out);
         check_metric(o, "boosted_binomial_backbone", LossKind::binomial_deviance, MetricObjective::boosted, true,
                      rng, out);
       }},
      {"diversity",
       {"activation_W", "adversarial_W", "adversarial_regressors"},
       [](const GradcheckOptions& o, Rng& rng, std::vector<CheckResult>& out) {
         check_activation(o, rng, out);
         check_adversarial(o, rng, out);
       }},
  };
  return all;
}

}  // namespace

bool GradcheckReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

double GradcheckReport::worst(const std::string& module) const {
  double w = 0.0;
  for (const CheckResult& c : checks) {
    if (c.module == module) w = std::max(w, c.worst_rel_error);
  }
  return w;
}

const std::vector<std::string>& gradcheck_modules() {
  static const std::vector<std::string> names = {"losses", "boosting", "diversity"};
  return names;
}

std::vector<std::string> gradcheck_names() {
  std::vector<std::string> out;
  for (const Suite& s : suites()) out.insert(out.end(), s.names.begin(), s.names.end());
  return out;
}

GradcheckReport run_gradcheck(const GradcheckOptions& options) {
  for (const std::string& m : options.modules) {
    const auto& known = gradcheck_modules();
    if (std::find(known.begin(), known.end(), m) == known.end()) {
      throw InvalidArgument("unknown gradcheck module '" + m + "'");
    }
  }
  if (!options.inject_fault.empty()) {
    const auto names = gradcheck_names();
    if (std::find(names.begin(), names.end(), options.inject_fault) == names.end()) {
      throw InvalidArgument("unknown gradient check '" + options.inject_fault + "'");
    }
  }
  if (options.instances == 0 || !(options.step > 0.0) || !(options.tolerance > 0.0)) {
    throw InvalidArgument("gradcheck: instances, step and tolerance must be positive");
  }

  GradcheckReport report;
  std::uint64_t stream = 0;
  for (const Suite& s : suites()) {
    ++stream;
    const bool selected = options.modules.empty() ||
                          std::find(options.modules.begin(), options.modules.end(), s.module) != options.modules.end();
    if (!selected) continue;
    // Each module draws from its own stream so filtering does not change results.
    Rng rng(options.seed * 1000003ULL + stream);
    s.run(options, rng, report.checks);
  }
  return report;
}

}  // namespace bier
