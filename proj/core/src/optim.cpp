#include "bier/optim.hpp"

#include <cmath>
#include <string>

#include "binary_io.hpp"
#include "bier/errors.hpp"
#include "bier/tensor.hpp"

namespace bier {

std::string_view to_string(OptimKind kind) {
  return kind == OptimKind::adam ? "adam" : "sgd_momentum";
}

OptimKind optim_kind_from_string(std::string_view name) {
  if (name == "adam") return OptimKind::adam;
  if (name == "sgd_momentum" || name == "sgd") return OptimKind::sgd_momentum;
  throw InvalidArgument("unknown optimizer '" + std::string(name) + "'");
}

void OptimConfig::validate() const {
  if (!(lr > 0.0)) throw InvalidArgument("optimizer: lr must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw InvalidArgument("optimizer: momentum must be in [0, 1)");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw InvalidArgument("optimizer: adam betas must be in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw InvalidArgument("optimizer: adam eps must be positive");
}

Optimizer::Optimizer(OptimConfig config) : config_(config) { config_.validate(); }

void Optimizer::step(std::span<const std::span<double>> params,
                     std::span<const std::span<const double>> grads) {
  if (params.size() != grads.size()) throw InvalidArgument("optimizer: params/grads block count mismatch");
  for (std::size_t b = 0; b < params.size(); ++b) {
    if (params[b].size() != grads[b].size()) {
      throw InvalidArgument("optimizer: block " + std::to_string(b) + " shape mismatch");
    }
    if (!all_finite(grads[b])) {
      throw PoisonedState("optimizer: non-finite gradient in block " + std::to_string(b) + "; step refused");
    }
  }
  const bool adam = config_.kind == OptimKind::adam;
  if (first_.empty()) {
    for (const auto& p : params) {
      first_.emplace_back(p.size(), 0.0);
      if (adam) second_.emplace_back(p.size(), 0.0);
    }
  } else {
    if (first_.size() != params.size()) throw InvalidArgument("optimizer: parameter block count changed");
    for (std::size_t b = 0; b < params.size(); ++b) {
      if (first_[b].size() != params[b].size()) throw InvalidArgument("optimizer: parameter shape changed");
    }
  }

  ++t_;
  if (!adam) {
    for (std::size_t b = 0; b < params.size(); ++b) {
      auto& v = first_[b];
      for (std::size_t k = 0; k < v.size(); ++k) {
        v[k] = config_.momentum * v[k] + grads[b][k];
        params[b][k] -= config_.lr * v[k];
      }
    }
    return;
  }
  const double t = static_cast<double>(t_);
  const double c1 = 1.0 - std::pow(config_.adam_beta1, t);
  const double c2 = 1.0 - std::pow(config_.adam_beta2, t);
  for (std::size_t b = 0; b < params.size(); ++b) {
    auto& m = first_[b];
    auto& v = second_[b];
    for (std::size_t k = 0; k < m.size(); ++k) {
      const double g = grads[b][k];
      m[k] = config_.adam_beta1 * m[k] + (1.0 - config_.adam_beta1) * g;
      v[k] = config_.adam_beta2 * v[k] + (1.0 - config_.adam_beta2) * g * g;
      const double mhat = m[k] / c1;
      const double vhat = v[k] / c2;
      params[b][k] -= config_.lr * mhat / (std::sqrt(vhat) + config_.adam_eps);
    }
  }
}

void Optimizer::write(std::ostream& os) const {
  detail::ByteWriter w(os);
  w.u8(config_.kind == OptimKind::adam ? 1 : 0);
  w.f64(config_.lr);
  w.f64(config_.momentum);
  w.f64(config_.adam_beta1);
  w.f64(config_.adam_beta2);
  w.f64(config_.adam_eps);
  w.u64(t_);
  auto buffers = [&](const std::vector<std::vector<double>>& bufs) {
    w.u64(bufs.size());
    for (const auto& b : bufs) {
      w.u64(b.size());
      for (double x : b) w.f64(x);
    }
  };
  buffers(first_);
  buffers(second_);
}

Optimizer Optimizer::read(std::istream& is) {
  detail::ByteReader r(is, "optimizer state");
  OptimConfig cfg;
  const std::uint8_t kind = r.u8("kind");
  if (kind > 1) r.fail("bad optimizer kind");
  cfg.kind = kind == 1 ? OptimKind::adam : OptimKind::sgd_momentum;
  cfg.lr = r.f64("lr");
  cfg.momentum = r.f64("momentum");
  cfg.adam_beta1 = r.f64("beta1");
  cfg.adam_beta2 = r.f64("beta2");
  cfg.adam_eps = r.f64("eps");
  Optimizer opt(cfg);
  opt.t_ = r.u64("step counter");
  auto buffers = [&](std::vector<std::vector<double>>& bufs) {
    const std::uint64_t n = r.u64("buffer count");
    if (n > (1u << 20)) r.fail("implausible buffer count");
    bufs.resize(n);
    for (auto& b : bufs) {
      const std::uint64_t len = r.u64("buffer length");
      if (len > (1ull << 32)) r.fail("implausible buffer length");
      b.resize(len);
      for (double& x : b) x = r.f64("buffer value");
    }
  };
  buffers(opt.first_);
  buffers(opt.second_);
  return opt;
}

}  // namespace bier
