#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

namespace bier {

enum class OptimKind { sgd_momentum, adam };

std::string_view to_string(OptimKind kind);
OptimKind optim_kind_from_string(std::string_view name);

struct OptimConfig {
  OptimKind kind = OptimKind::adam;
  double lr = 1e-3;
  double momentum = 0.9;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const;
  bool operator==(const OptimConfig&) const = default;
};

/// First-order optimizer over a fixed list of parameter blocks.
///
/// Moment buffers are allocated on the first step and must keep matching the
/// block shapes afterwards. A step whose gradients contain NaN/Inf is refused
/// with PoisonedState before anything is modified.
///
///   sgd_momentum: v <- mu v + g;  p <- p - lr v
///   adam:         m <- b1 m + (1-b1) g;  v <- b2 v + (1-b2) g^2
///                 p <- p - lr * m/(1-b1^t) / (sqrt(v/(1-b2^t)) + eps)
class Optimizer {
 public:
  explicit Optimizer(OptimConfig config = {});

  void step(std::span<const std::span<double>> params, std::span<const std::span<const double>> grads);

  const OptimConfig& config() const noexcept { return config_; }
  std::uint64_t steps() const noexcept { return t_; }

  void write(std::ostream& os) const;
  static Optimizer read(std::istream& is);

  bool operator==(const Optimizer&) const = default;

 private:
  OptimConfig config_;
  std::uint64_t t_ = 0;
  std::vector<std::vector<double>> first_;
  std::vector<std::vector<double>> second_;
};

}  // namespace bier
