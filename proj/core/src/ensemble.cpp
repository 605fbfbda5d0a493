#include "bier/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "bier/errors.hpp"

namespace bier {

GroupPartition::GroupPartition(std::vector<std::size_t> sizes) : sizes_(std::move(sizes)) {
  if (sizes_.empty()) throw InvalidArgument("partition: at least one group required");
  offsets_.reserve(sizes_.size());
  for (std::size_t s : sizes_) {
    if (s == 0) throw InvalidArgument("partition: group sizes must be >= 1");
    offsets_.push_back(total_);
    total_ += s;
  }
}

std::size_t GroupPartition::group_of(std::size_t c) const {
  if (c >= total_) throw InvalidArgument("partition: dimension out of range");
  auto it = std::upper_bound(offsets_.begin(), offsets_.end(), c);
  return static_cast<std::size_t>(it - offsets_.begin()) - 1;
}

BoostSchedule make_schedule(std::size_t M) {
  if (M == 0) throw InvalidArgument("make_schedule: M must be >= 1");
  BoostSchedule sched;
  sched.eta.resize(M);
  sched.alpha.resize(M);
  for (std::size_t m = 0; m < M; ++m) sched.eta[m] = 2.0 / static_cast<double>(m + 2);
  // alpha_m = eta_m * prod_{n>m}(1 - eta_n), built from the back.
  double tail = 1.0;
  for (std::size_t m = M; m-- > 0;) {
    sched.alpha[m] = sched.eta[m] * tail;
    tail *= 1.0 - sched.eta[m];
  }
  return sched;
}

GroupPartition proportional_partition(std::size_t d, std::size_t M) {
  if (M == 0) throw InvalidArgument("proportional_partition: M must be >= 1");
  if (d < M) {
    throw InvalidArgument("proportional_partition: embedding size " + std::to_string(d) +
                          " smaller than learner count " + std::to_string(M));
  }
  std::vector<std::size_t> sizes(M);
  std::size_t used = 0;
  for (std::size_t m = 0; m + 1 < M; ++m) {
    // alpha_m * d with alpha_m = 2m / (M(M+1)), floored in integer arithmetic so
    // exact products such as d = 36, M = 8 do not lose a unit to rounding.
    const std::size_t s = 2 * (m + 1) * d / (M * (M + 1));
    sizes[m] = std::max<std::size_t>(s, 1);
    used += sizes[m];
  }
  if (used >= d) throw InvalidArgument("proportional_partition: no room left for the last learner");
  sizes[M - 1] = d - used;
  return GroupPartition(std::move(sizes));
}

const std::vector<PresetRow>& preset_table() {
  static const std::vector<PresetRow> table = {
      {512, {170, 342}},
      {512, {96, 160, 256}},
      {512, {52, 102, 152, 204}},
      {512, {34, 68, 102, 138, 170}},
      {1024, {170, 342, 512}},
      {1024, {102, 204, 308, 410}},
      {1024, {68, 136, 204, 274, 342}},
      {1024, {50, 96, 148, 196, 242, 292}},
      {1024, {36, 74, 110, 148, 182, 218, 256}},
  };
  return table;
}

std::optional<GroupPartition> preset_partition(std::size_t d, std::size_t M) {
  for (const auto& row : preset_table()) {
    if (row.d == d && row.sizes.size() == M) return GroupPartition(row.sizes);
  }
  return std::nullopt;
}

void EnsembleModel::validate() const {
  if (W.cols() != partition.total()) {
    throw InvalidArgument("model: W has " + std::to_string(W.cols()) +
                          " columns but partition covers " + std::to_string(partition.total()));
  }
  if (schedule.count() != partition.count()) {
    throw InvalidArgument("model: schedule and partition disagree on learner count");
  }
  if (backbone) {
    if (backbone->output_dim() != W.rows()) {
      throw InvalidArgument("model: backbone output dim does not match W rows");
    }
    if (backbone->bias.dim() != backbone->output_dim()) {
      throw InvalidArgument("model: backbone bias has wrong dim");
    }
  }
}

namespace {

void glorot_fill(Matrix& m, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (double& w : m.span()) w = rng.uniform(-limit, limit);
}

}  // namespace

EnsembleModel make_model(std::size_t h, GroupPartition partition, Rng& rng,
                         std::size_t backbone_input_dim) {
  if (h == 0) throw InvalidArgument("make_model: feature dim must be >= 1");
  EnsembleModel model;
  const std::size_t d = partition.total();
  model.schedule = make_schedule(partition.count());
  model.partition = std::move(partition);
  model.W = Matrix(h, d);
  glorot_fill(model.W, h, d, rng);
  if (backbone_input_dim > 0) {
    Backbone bb{Matrix(h, backbone_input_dim), Vector(h)};
    glorot_fill(bb.weights, backbone_input_dim, h, rng);
    model.backbone = std::move(bb);
  }
  return model;
}

void normalize_columns(Matrix& W) {
  for (std::size_t c = 0; c < W.cols(); ++c) {
    double sq = 0.0;
    for (std::size_t r = 0; r < W.rows(); ++r) sq += W(r, c) * W(r, c);
    if (!(sq > 0.0)) continue;
    const double inv = 1.0 / std::sqrt(sq);
    for (std::size_t r = 0; r < W.rows(); ++r) W(r, c) *= inv;
  }
}

Vector backbone_preactivation(const Backbone& backbone, const Vector& x) {
  Vector pre = matvec(backbone.weights, x);
  axpy(1.0, backbone.bias.span(), pre.span());
  return pre;
}

Vector features(const EnsembleModel& model, const Vector& x) {
  if (!model.backbone) {
    if (x.dim() != model.W.rows()) {
      throw InvalidArgument("features: input dim " + std::to_string(x.dim()) +
                            " does not match model input dim " + std::to_string(model.W.rows()));
    }
    return x;
  }
  Vector phi = backbone_preactivation(*model.backbone, x);
  for (double& v : phi) v = std::max(v, 0.0);
  return phi;
}

Vector embed_features(const EnsembleModel& model, const Vector& phi) {
  return matvec_transposed(model.W, phi);
}

Vector group_slice(const GroupPartition& partition, const Vector& f, std::size_t m) {
  const auto off = static_cast<std::ptrdiff_t>(partition.offset(m));
  const auto len = static_cast<std::ptrdiff_t>(partition.size(m));
  return Vector(std::vector<double>(f.begin() + off, f.begin() + off + len));
}

std::vector<Vector> learner_forward(const EnsembleModel& model, const Vector& x) {
  const Vector f = embed_features(model, features(model, x));
  std::vector<Vector> out;
  out.reserve(model.learners());
  for (std::size_t m = 0; m < model.learners(); ++m) out.push_back(group_slice(model.partition, f, m));
  return out;
}

double cosine_sim(std::span<const double> u, std::span<const double> v) {
  const double nu = norm(u);
  const double nv = norm(v);
  if (!(nu > 0.0) || !(nv > 0.0)) throw DegenerateInput("cosine similarity of a zero-norm vector");
  return dot(u, v) / (nu * nv);
}

CosineGrad cosine_sim_grad(const Vector& u, const Vector& v) {
  if (u.dim() != v.dim()) throw InvalidArgument("cosine_sim_grad: dimension mismatch");
  const double nu2 = squared_norm(u.span());
  const double nv2 = squared_norm(v.span());
  if (!(nu2 > 0.0) || !(nv2 > 0.0)) throw DegenerateInput("cosine similarity of a zero-norm vector");
  const double inv = 1.0 / std::sqrt(nu2 * nv2);
  CosineGrad out;
  out.s = dot(u.span(), v.span()) * inv;
  out.ds_du = Vector(u.dim());
  out.ds_dv = Vector(u.dim());
  const double su = out.s / nu2;
  const double sv = out.s / nv2;
  for (std::size_t k = 0; k < u.dim(); ++k) {
    out.ds_du[k] = v[k] * inv - su * u[k];
    out.ds_dv[k] = u[k] * inv - sv * v[k];
  }
  return out;
}

Vector test_embedding_from_raw(const EnsembleModel& model, const Vector& f,
                               const TestEmbeddingOptions& options) {
  Vector out(f.dim());
  for (std::size_t m = 0; m < model.learners(); ++m) {
    const std::size_t off = model.partition.offset(m);
    const std::span<const double> g = f.span().subspan(off, model.partition.size(m));
    const double n = norm(g);
    if (!(n > 0.0)) {
      throw DegenerateInput("test_embedding: learner " + std::to_string(m + 1) + " output is zero");
    }
    const double scale = std::pow(model.schedule.alpha[m], options.weight_exponent) / n;
    for (std::size_t k = 0; k < g.size(); ++k) out[off + k] = scale * g[k];
  }
  if (options.renormalize_full) return l2_normalize(out);
  return out;
}

Vector test_embedding(const EnsembleModel& model, const Vector& x, const TestEmbeddingOptions& options) {
  return test_embedding_from_raw(model, embed_features(model, features(model, x)), options);
}

}  // namespace bier
