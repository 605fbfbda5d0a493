#include "bier/init_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "bier/errors.hpp"
#include "bier/log.hpp"
#include "bier/optim.hpp"

namespace bier {

namespace {

struct Evaluation {
  double loss = 0.0;
  double term = 0.0;
  Matrix grad_W;
  std::optional<RegressorBank> grad_bank;
};

Evaluation evaluate(const EnsembleModel& model, const RegressorBank* bank, std::span<const Vector> phi,
                    const InitSolverConfig& config) {
  Evaluation e;
  if (config.kind == DiversityKind::activation) {
    ActivationResult r = activation_loss(model, phi, config.lambda_w);
    e.loss = r.loss;
    e.term = r.suppression;
    e.grad_W = std::move(r.grad_W);
  } else {
    AdversarialOptions opts = config.adversarial;
    opts.lambda_w = config.lambda_w;
    AdversarialResult r = adversarial_loss(model, *bank, phi, opts);
    e.loss = r.loss;
    e.term = r.similarity;
    e.grad_W = std::move(r.grad_W);
    e.grad_bank = std::move(r.grad_bank);
  }
  return e;
}

}  // namespace

InitResult init_solver(std::span<const Vector> phi, const EnsembleModel& skeleton, const InitSolverConfig& config,
                       Rng& rng) {
  if (config.kind == DiversityKind::none) throw InvalidArgument("init_solver: a diversity kind is required");
  if (phi.empty()) throw InvalidArgument("init_solver: no features");
  if (config.window == 0) throw InvalidArgument("init_solver: window must be >= 1");
  skeleton.validate();

  EnsembleModel model = skeleton;
  InitResult result;
  if (config.kind == DiversityKind::adversarial) {
    result.bank = make_bank(model.partition, config.regressor_hidden, rng);
  }
  Optimizer opt(OptimConfig{.kind = OptimKind::sgd_momentum, .lr = config.lr, .momentum = config.momentum});

  std::vector<double> losses;
  for (std::size_t it = 0;; ++it) {
    Evaluation e = evaluate(model, result.bank ? &*result.bank : nullptr, phi, config);
    if (!std::isfinite(e.loss) || !all_finite(e.grad_W.span())) {
      throw NumericFailure("init_solver diverged at iteration " + std::to_string(it) + " (loss " +
                           std::to_string(e.loss) + ", lr " + std::to_string(config.lr) + ")");
    }
    if (it == 0) {
      result.initial_loss = e.loss;
      result.initial_diversity_term = e.term;
    }
    result.final_loss = e.loss;
    result.final_diversity_term = e.term;
    result.diversity_history.push_back(e.term);
    losses.push_back(e.loss);
    result.iterations = it;
    if (it >= config.window) {
      const double past = losses[it - config.window];
      const double rel = std::fabs(e.loss - past) / std::max(std::fabs(past), std::numeric_limits<double>::min());
      if (rel < config.rel_tol) {
        result.converged = true;
        break;
      }
    }
    if (it == config.max_iterations) break;

    std::vector<std::span<double>> params{model.W.span()};
    std::vector<std::span<const double>> grads{e.grad_W.span()};
    if (result.bank) {
      for (auto b : parameter_blocks(*result.bank)) params.push_back(b);
      for (auto b : parameter_blocks(std::as_const(*e.grad_bank))) grads.push_back(b);
    }
    opt.step(params, grads);
  }

  result.min_sq_norm = std::numeric_limits<double>::infinity();
  result.max_sq_norm = 0.0;
  for (std::size_t c = 0; c < model.W.cols(); ++c) {
    double sq = 0.0;
    for (std::size_t r = 0; r < model.W.rows(); ++r) sq += model.W(r, c) * model.W(r, c);
    result.min_sq_norm = std::min(result.min_sq_norm, sq);
    result.max_sq_norm = std::max(result.max_sq_norm, sq);
  }
  result.norms_in_band = result.min_sq_norm >= 1.0 - config.norm_band && result.max_sq_norm <= 1.0 + config.norm_band;
  if (!result.norms_in_band) {
    std::string msg = "init_solver: squared column norms in [" + std::to_string(result.min_sq_norm) + ", " +
                      std::to_string(result.max_sq_norm) + "] outside 1 +- " + std::to_string(config.norm_band) +
                      "; consider a larger lambda_w";
    log_warn(msg);
    result.warnings.push_back(std::move(msg));
  }
  if (!result.converged) {
    std::string msg = "init_solver: stopped at max_iterations=" + std::to_string(config.max_iterations) +
                      " before reaching rel_tol";
    log_info(msg);
    result.warnings.push_back(std::move(msg));
  }
  result.W = std::move(model.W);
  return result;
}

}  // namespace bier
