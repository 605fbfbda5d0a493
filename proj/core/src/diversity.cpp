#include "bier/diversity.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "bier/errors.hpp"

namespace bier {

std::string_view to_string(DiversityKind kind) {
  switch (kind) {
    case DiversityKind::none: return "none";
    case DiversityKind::activation: return "activation";
    case DiversityKind::adversarial: return "adversarial";
  }
  return "unknown";
}

DiversityKind diversity_kind_from_string(std::string_view name) {
  if (name == "none") return DiversityKind::none;
  if (name == "activation") return DiversityKind::activation;
  if (name == "adversarial") return DiversityKind::adversarial;
  throw InvalidArgument("unknown diversity kind '" + std::string(name) + "'");
}

double column_norm_penalty(const Matrix& W, Matrix* grad, double scale) {
  double total = 0.0;
  for (std::size_t c = 0; c < W.cols(); ++c) {
    double sq = 0.0;
    for (std::size_t r = 0; r < W.rows(); ++r) sq += W(r, c) * W(r, c);
    const double dev = sq - 1.0;
    total += dev * dev;
    if (grad != nullptr) {
      const double k = scale * 4.0 * dev;
      for (std::size_t r = 0; r < W.rows(); ++r) (*grad)(r, c) += k * W(r, c);
    }
  }
  return total;
}

namespace {

// Penalty on the rows of a regressor matrix, i.e. on each output neuron's weights.
double row_norm_penalty(const Matrix& m, Matrix* grad, double scale) {
  double total = 0.0;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double dev = squared_norm(m.row(r)) - 1.0;
    total += dev * dev;
    if (grad != nullptr) axpy(scale * 4.0 * dev, m.row(r), grad->row(r));
  }
  return total;
}

void check_batch(const EnsembleModel& model, std::span<const Vector> phi) {
  if (phi.empty()) throw InvalidArgument("diversity loss: empty batch");
  for (const Vector& p : phi) {
    if (p.dim() != model.feature_dim()) throw InvalidArgument("diversity loss: feature dim mismatch");
  }
}

}  // namespace

ActivationResult activation_loss(const EnsembleModel& model, std::span<const Vector> phi, double lambda_w) {
  model.validate();
  check_batch(model, phi);
  const GroupPartition& part = model.partition;
  const std::size_t M = part.count();
  const double inv_n = 1.0 / static_cast<double>(phi.size());

  ActivationResult out;
  out.grad_W = Matrix(model.feature_dim(), model.embedding_dim());
  std::vector<double> q(M);
  Vector df(model.embedding_dim());
  for (const Vector& x : phi) {
    const Vector f = embed_features(model, x);
    double total = 0.0;
    for (std::size_t m = 0; m < M; ++m) {
      q[m] = squared_norm(f.span().subspan(part.offset(m), part.size(m)));
      total += q[m];
    }
    double sup = 0.0;
    for (std::size_t i = 0; i < M; ++i) {
      for (std::size_t j = i + 1; j < M; ++j) sup += q[i] * q[j];
    }
    out.suppression += sup;
    // d sup / d f_k = 2 f_k * sum_{j != group(k)} q_j
    for (std::size_t m = 0; m < M; ++m) {
      const double others = total - q[m];
      for (std::size_t k = part.offset(m); k < part.offset(m) + part.size(m); ++k) {
        df[k] = 2.0 * f[k] * others * inv_n;
      }
    }
    add_outer(out.grad_W, 1.0, x.span(), df.span());
  }
  out.suppression *= inv_n;
  out.weight_penalty = column_norm_penalty(model.W, &out.grad_W, lambda_w);
  out.loss = out.suppression + lambda_w * out.weight_penalty;
  return out;
}

Regressor make_regressor(std::size_t source_dim, std::size_t target_dim, std::size_t hidden, Rng& rng) {
  if (source_dim == 0 || target_dim == 0 || hidden == 0) {
    throw InvalidArgument("make_regressor: dimensions must be >= 1");
  }
  Regressor r{Matrix(hidden, source_dim), Vector(hidden), Matrix(target_dim, hidden), Vector(target_dim)};
  const double l1 = std::sqrt(6.0 / static_cast<double>(source_dim + hidden));
  const double l2 = std::sqrt(6.0 / static_cast<double>(hidden + target_dim));
  for (double& w : r.W1.span()) w = rng.uniform(-l1, l1);
  for (double& w : r.W2.span()) w = rng.uniform(-l2, l2);
  return r;
}

Regressor zeros_like(const Regressor& r) {
  return {Matrix(r.W1.rows(), r.W1.cols()), Vector(r.b1.dim()), Matrix(r.W2.rows(), r.W2.cols()),
          Vector(r.b2.dim())};
}

Vector regressor_forward(const Regressor& r, const Vector& v) {
  if (v.dim() != r.source_dim()) {
    throw InvalidArgument("regressor_forward: input dim " + std::to_string(v.dim()) + " expected " +
                          std::to_string(r.source_dim()));
  }
  Vector hdn = matvec(r.W1, v);
  for (std::size_t k = 0; k < hdn.dim(); ++k) hdn[k] = std::max(hdn[k] + r.b1[k], 0.0);
  Vector out = matvec(r.W2, hdn);
  axpy(1.0, r.b2.span(), out.span());
  return out;
}

RegressorBank make_bank(const GroupPartition& partition, std::size_t hidden, Rng& rng) {
  RegressorBank bank;
  for (std::size_t i = 0; i < partition.count(); ++i) {
    for (std::size_t j = i + 1; j < partition.count(); ++j) {
      bank.pairs.emplace_back(i, j);
      bank.regressors.push_back(make_regressor(partition.size(j), partition.size(i), hidden, rng));
    }
  }
  return bank;
}

RegressorBank zeros_like(const RegressorBank& bank) {
  RegressorBank z;
  z.pairs = bank.pairs;
  for (const Regressor& r : bank.regressors) z.regressors.push_back(zeros_like(r));
  return z;
}

void validate_bank(const RegressorBank& bank, const GroupPartition& partition) {
  const std::size_t M = partition.count();
  if (bank.size() != M * (M - 1) / 2 || bank.pairs.size() != bank.size()) {
    throw InvalidArgument("regressor bank: expected " + std::to_string(M * (M - 1) / 2) + " regressors");
  }
  std::size_t idx = 0;
  for (std::size_t i = 0; i < M; ++i) {
    for (std::size_t j = i + 1; j < M; ++j, ++idx) {
      const Regressor& r = bank.regressors[idx];
      if (bank.pairs[idx] != std::make_pair(i, j) || r.source_dim() != partition.size(j) ||
          r.target_dim() != partition.size(i) || r.b1.dim() != r.hidden() || r.W2.cols() != r.hidden() ||
          r.b2.dim() != r.target_dim()) {
        throw InvalidArgument("regressor bank: regressor " + std::to_string(idx) +
                              " does not match the partition");
      }
    }
  }
}

std::vector<std::span<double>> parameter_blocks(RegressorBank& bank) {
  std::vector<std::span<double>> blocks;
  for (Regressor& r : bank.regressors) {
    blocks.push_back(r.W1.span());
    blocks.push_back(r.b1.span());
    blocks.push_back(r.W2.span());
    blocks.push_back(r.b2.span());
  }
  return blocks;
}

std::vector<std::span<const double>> parameter_blocks(const RegressorBank& bank) {
  std::vector<std::span<const double>> blocks;
  for (const Regressor& r : bank.regressors) {
    blocks.push_back(r.W1.span());
    blocks.push_back(r.b1.span());
    blocks.push_back(r.W2.span());
    blocks.push_back(r.b2.span());
  }
  return blocks;
}

AdversarialResult adversarial_loss(const EnsembleModel& model, const RegressorBank& bank,
                                   std::span<const Vector> phi, const AdversarialOptions& options) {
  model.validate();
  check_batch(model, phi);
  validate_bank(bank, model.partition);
  const GroupPartition& part = model.partition;
  const std::size_t d = model.embedding_dim();
  const double inv_n = 1.0 / static_cast<double>(phi.size());

  AdversarialResult out;
  out.grad_bank = zeros_like(bank);
  // d(sum L_sim)/d(bank), before the -1/N factor of the loss.
  RegressorBank sim_grad = zeros_like(bank);
  Matrix grad_target(model.feature_dim(), d);
  Matrix grad_source(model.feature_dim(), d);
  Vector d_target(d), d_source(d);

  for (const Vector& x : phi) {
    const Vector f = embed_features(model, x);
    std::fill(d_target.begin(), d_target.end(), 0.0);
    std::fill(d_source.begin(), d_source.end(), 0.0);
    for (std::size_t r = 0; r < bank.size(); ++r) {
      const auto [i, j] = bank.pairs[r];
      const Regressor& g = bank.regressors[r];
      Regressor& sg = sim_grad.regressors[r];
      const Vector src = group_slice(part, f, j);
      const Vector tgt = group_slice(part, f, i);
      const double c =
          1.0 / static_cast<double>(options.normalizer == SimNormalizer::source_dim ? part.size(j) : part.size(i));

      Vector pre = matvec(g.W1, src);
      axpy(1.0, g.b1.span(), pre.span());
      Vector hdn(pre.dim());
      for (std::size_t k = 0; k < pre.dim(); ++k) hdn[k] = pre[k] > 0.0 ? pre[k] : 0.0;
      Vector out_g = matvec(g.W2, hdn);
      axpy(1.0, g.b2.span(), out_g.span());

      Vector dg(out_g.dim());
      double sim = 0.0;
      for (std::size_t k = 0; k < tgt.dim(); ++k) {
        const double p = tgt[k] * out_g[k];
        sim += p * p;
        d_target[part.offset(i) + k] += 2.0 * c * tgt[k] * out_g[k] * out_g[k];
        dg[k] = 2.0 * c * tgt[k] * tgt[k] * out_g[k];
      }
      out.similarity += c * sim;

      add_outer(sg.W2, 1.0, dg.span(), hdn.span());
      axpy(1.0, dg.span(), sg.b2.span());
      Vector dpre = matvec_transposed(g.W2, dg);
      for (std::size_t k = 0; k < dpre.dim(); ++k) {
        if (!(pre[k] > 0.0)) dpre[k] = 0.0;
      }
      add_outer(sg.W1, 1.0, dpre.span(), src.span());
      axpy(1.0, dpre.span(), sg.b1.span());
      const Vector dsrc = matvec_transposed(g.W1, dpre);
      axpy(1.0, dsrc.span(), d_source.span().subspan(part.offset(j), part.size(j)));
    }
    add_outer(grad_target, inv_n, x.span(), d_target.span());
    add_outer(grad_source, inv_n, x.span(), d_source.span());
  }
  out.similarity *= inv_n;

  // Bank: descend on -similarity + lambda_w * penalty.
  double bank_penalty = 0.0;
  for (std::size_t r = 0; r < bank.size(); ++r) {
    const Regressor& g = bank.regressors[r];
    const Regressor& sg = sim_grad.regressors[r];
    Regressor& gb = out.grad_bank.regressors[r];
    axpy(-inv_n, sg.W1.span(), gb.W1.span());
    axpy(-inv_n, sg.b1.span(), gb.b1.span());
    axpy(-inv_n, sg.W2.span(), gb.W2.span());
    axpy(-inv_n, sg.b2.span(), gb.b2.span());

    const double bb = squared_norm(g.b1.span()) + squared_norm(g.b2.span());
    if (bb > 1.0) {
      bank_penalty += bb - 1.0;
      axpy(2.0 * options.lambda_w, g.b1.span(), gb.b1.span());
      axpy(2.0 * options.lambda_w, g.b2.span(), gb.b2.span());
    }
    bank_penalty += row_norm_penalty(g.W1, &gb.W1, options.lambda_w);
    bank_penalty += row_norm_penalty(g.W2, &gb.W2, options.lambda_w);
  }

  out.grad_W_penalty = Matrix(model.feature_dim(), d);
  const double w_penalty = column_norm_penalty(model.W, &out.grad_W_penalty, options.lambda_w);
  out.weight_penalty = bank_penalty + w_penalty;
  out.loss = -out.similarity + options.lambda_w * out.weight_penalty;

  // The loss carries -similarity, so its plain gradient along the similarity
  // path is -d(similarity); the reversal layer flips that to +d(similarity).
  const double source_sign = options.gradient_reversal ? 1.0 : -1.0;
  const double target_sign = options.gradient_reversal && options.reverse_target_path ? 1.0 : -1.0;
  out.grad_W = out.grad_W_penalty;
  axpy(source_sign, grad_source.span(), out.grad_W.span());
  axpy(target_sign, grad_target.span(), out.grad_W.span());
  return out;
}

DiversityResult diversity_loss(DiversityKind kind, const EnsembleModel& model, std::span<const Vector> phi,
                               const RegressorBank* bank, const AdversarialOptions& options) {
  DiversityResult out;
  switch (kind) {
    case DiversityKind::none:
      out.grad_W = Matrix(model.feature_dim(), model.embedding_dim());
      return out;
    case DiversityKind::activation: {
      ActivationResult r = activation_loss(model, phi, options.lambda_w);
      out.loss = r.loss;
      out.grad_W = std::move(r.grad_W);
      return out;
    }
    case DiversityKind::adversarial: {
      if (bank == nullptr) throw InvalidArgument("diversity_loss: adversarial kind needs a regressor bank");
      AdversarialResult r = adversarial_loss(model, *bank, phi, options);
      out.loss = r.loss;
      out.grad_W = std::move(r.grad_W);
      out.grad_bank = std::move(r.grad_bank);
      return out;
    }
  }
  throw InvalidArgument("diversity_loss: unknown kind");
}

}  // namespace bier
