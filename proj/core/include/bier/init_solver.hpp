#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bier/diversity.hpp"
#include "bier/ensemble.hpp"
#include "bier/rng.hpp"

namespace bier {

struct InitSolverConfig {
  DiversityKind kind = DiversityKind::activation;
  double lambda_w = 10.0;
  double lr = 0.01;
  double momentum = 0.9;
  std::size_t max_iterations = 20000;
  // Stop once |L_t - L_{t-window}| / |L_{t-window}| drops below rel_tol.
  double rel_tol = 1e-6;
  std::size_t window = 100;
  double norm_band = 1e-3;
  // Adversarial kind only.
  std::size_t regressor_hidden = 512;
  AdversarialOptions adversarial;
};

struct InitResult {
  Matrix W;
  std::optional<RegressorBank> bank;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  // Activation: suppression term. Adversarial: regressor similarity.
  double initial_diversity_term = 0.0;
  double final_diversity_term = 0.0;
  std::vector<double> diversity_history;  // per iteration, before each update
  std::size_t iterations = 0;
  bool converged = false;
  double min_sq_norm = 0.0;
  double max_sq_norm = 0.0;
  bool norms_in_band = false;
  std::vector<std::string> warnings;
};

/// Minimizes the chosen diversity loss over W alone, on precomputed features,
/// with full-batch SGD + momentum. For the adversarial kind the regressors are
/// updated jointly and W follows the reversed similarity gradient. Emits a
/// warning (not an error) when the column norms end outside 1 +- norm_band.
/// Throws NumericFailure if the loss becomes non-finite.
InitResult init_solver(std::span<const Vector> phi, const EnsembleModel& skeleton, const InitSolverConfig& config,
                       Rng& rng);

}  // namespace bier
