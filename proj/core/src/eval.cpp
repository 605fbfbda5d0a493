#include "bier/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <set>
#include <string>
#include <thread>

#include "bier/errors.hpp"
#include "bier/rng.hpp"

namespace bier {

namespace {

constexpr std::size_t kNoMatch = std::numeric_limits<std::size_t>::max();

// Position (0-based) of the best-ranked same-label candidate of query q.
std::size_t first_match_rank(std::span<const Vector> emb, std::span<const std::uint32_t> labels, std::size_t q) {
  const std::size_t n = emb.size();
  std::vector<double> sims(n);
  double best = -std::numeric_limits<double>::infinity();
  std::size_t best_idx = kNoMatch;
  for (std::size_t j = 0; j < n; ++j) {
    if (j == q) continue;
    sims[j] = dot(emb[q].span(), emb[j].span());
    if (labels[j] == labels[q] && (best_idx == kNoMatch || sims[j] > best)) {
      best = sims[j];
      best_idx = j;
    }
  }
  if (best_idx == kNoMatch) return kNoMatch;
  std::size_t rank = 0;
  for (std::size_t j = 0; j < n; ++j) {
    if (j == q || j == best_idx) continue;
    if (sims[j] > best || (sims[j] == best && j < best_idx)) ++rank;
  }
  return rank;
}

}  // namespace

std::map<std::size_t, double> recall_at_k(std::span<const Vector> embeddings,
                                          std::span<const std::uint32_t> labels,
                                          std::span<const std::size_t> ks, unsigned threads) {
  const std::size_t n = embeddings.size();
  if (labels.size() != n) throw InvalidArgument("recall_at_k: label count != embedding count");
  if (n < 2) throw InvalidArgument("recall_at_k: need at least 2 samples");
  for (std::size_t k : ks) {
    if (k == 0 || k >= n) {
      throw InvalidArgument("recall_at_k: K=" + std::to_string(k) + " must be in [1, N-1] with N=" +
                            std::to_string(n));
    }
  }
  for (const Vector& e : embeddings) {
    if (e.dim() != embeddings[0].dim()) throw InvalidArgument("recall_at_k: embedding dims differ");
  }
  std::vector<std::size_t> ranks(n);
  const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n)));
  auto run = [&](std::size_t begin, std::size_t end) {
    for (std::size_t q = begin; q < end; ++q) ranks[q] = first_match_rank(embeddings, labels, q);
  };
  if (workers == 1) {
    run(0, n);
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (n + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
      const std::size_t b = std::min(n, w * chunk);
      const std::size_t e = std::min(n, b + chunk);
      pool.emplace_back(run, b, e);
    }
    for (auto& t : pool) t.join();
  }
  std::map<std::size_t, double> out;
  for (std::size_t k : ks) {
    std::size_t hits = 0;
    for (std::size_t r : ranks) hits += (r != kNoMatch && r < k) ? 1 : 0;
    out[k] = static_cast<double>(hits) / static_cast<double>(n);
  }
  return out;
}

double feature_correlation(const GroupPartition& partition, std::span<const Vector> raw,
                           CorrelationDiagnostics* diagnostics) {
  if (partition.count() < 2) throw UndefinedCorrelation("feature correlation needs at least 2 learners");
  const std::size_t n = raw.size();
  if (n < 2) throw InvalidArgument("feature correlation needs at least 2 samples");
  const std::size_t d = partition.total();
  // Centered columns.
  Matrix cols(d, n);
  std::vector<double> ss(d, 0.0);
  for (std::size_t c = 0; c < d; ++c) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += raw[i][c];
    mean /= static_cast<double>(n);
    bool constant = true;
    for (std::size_t i = 0; i < n; ++i) {
      cols(c, i) = raw[i][c] - mean;
      constant = constant && raw[i][c] == raw[0][c];
      ss[c] += cols(c, i) * cols(c, i);
    }
    if (constant) ss[c] = 0.0;
  }
  CorrelationDiagnostics diag;
  double total = 0.0;
  for (std::size_t k = 0; k < d; ++k) {
    const std::size_t gk = partition.group_of(k);
    for (std::size_t l = partition.offset(gk) + partition.size(gk); l < d; ++l) {
      if (ss[k] == 0.0 || ss[l] == 0.0) {
        ++diag.pairs_skipped;
        continue;
      }
      const double r = dot(cols.row(k), cols.row(l)) / std::sqrt(ss[k] * ss[l]);
      total += std::min(std::fabs(r), 1.0);
      ++diag.pairs_used;
    }
  }
  if (diagnostics != nullptr) *diagnostics = diag;
  if (diag.pairs_used == 0) throw UndefinedCorrelation("feature correlation: every dimension pair is constant");
  return total / static_cast<double>(diag.pairs_used);
}

double feature_correlation(const EnsembleModel& model, std::span<const Vector> inputs,
                           CorrelationDiagnostics* diagnostics) {
  std::vector<Vector> raw;
  raw.reserve(inputs.size());
  for (const Vector& x : inputs) raw.push_back(embed_features(model, features(model, x)));
  return feature_correlation(model.partition, raw, diagnostics);
}

double classifier_correlation(const std::vector<std::vector<double>>& learner_scores) {
  const std::size_t M = learner_scores.size();
  if (M < 2) throw UndefinedCorrelation("classifier correlation needs at least 2 learners");
  if (learner_scores[0].size() < 2) throw InvalidArgument("classifier correlation needs at least 2 pairs");
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t a = 0; a < M; ++a) {
    for (std::size_t b = a + 1; b < M; ++b) {
      total += std::fabs(pearson(learner_scores[a], learner_scores[b]));
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

double classifier_correlation(const EnsembleModel& model, std::span<const Vector> inputs,
                              std::span<const std::pair<std::size_t, std::size_t>> pairs) {
  const std::size_t M = model.learners();
  if (M < 2) throw UndefinedCorrelation("classifier correlation needs at least 2 learners");
  std::vector<std::vector<Vector>> per_sample;
  per_sample.reserve(inputs.size());
  for (const Vector& x : inputs) per_sample.push_back(learner_forward(model, x));
  std::vector<std::vector<double>> scores(M, std::vector<double>(pairs.size()));
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto [a, b] = pairs[p];
    if (a >= inputs.size() || b >= inputs.size()) throw InvalidArgument("classifier correlation: pair index out of range");
    for (std::size_t m = 0; m < M; ++m) scores[m][p] = cosine_sim(per_sample[a][m].span(), per_sample[b][m].span());
  }
  return classifier_correlation(scores);
}

std::vector<std::pair<std::size_t, std::size_t>> evaluation_pairs(std::size_t n, std::size_t max_pairs,
                                                                  std::uint64_t seed) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  if (n < 2) return out;
  const std::size_t total = n * (n - 1) / 2;
  if (total <= max_pairs) {
    out.reserve(total);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) out.emplace_back(i, j);
    }
    return out;
  }
  Rng rng(seed);
  std::set<std::pair<std::size_t, std::size_t>> chosen;
  while (chosen.size() < max_pairs) {
    std::size_t i = rng.index(n);
    std::size_t j = rng.index(n);
    if (i == j) continue;
    if (i > j) std::swap(i, j);
    chosen.emplace(i, j);
  }
  return {chosen.begin(), chosen.end()};
}

EvalReport evaluate(const EnsembleModel& model, const FeatureSet& set, const EvalOptions& options) {
  const std::vector<Vector> inputs = set.samples();
  std::vector<Vector> raw;
  raw.reserve(inputs.size());
  for (const Vector& x : inputs) raw.push_back(embed_features(model, features(model, x)));

  std::vector<Vector> emb;
  emb.reserve(raw.size());
  for (const Vector& f : raw) emb.push_back(test_embedding_from_raw(model, f, options.embedding));

  EvalReport report;
  report.recall_at = recall_at_k(emb, set.labels, options.ks, options.threads);
  const std::size_t one = 1;
  for (std::size_t m = 0; m < model.learners(); ++m) {
    std::vector<Vector> g;
    g.reserve(raw.size());
    for (const Vector& f : raw) g.push_back(l2_normalize(group_slice(model.partition, f, m)));
    report.learner_recall_at_1.push_back(recall_at_k(g, set.labels, std::span(&one, 1), options.threads).at(1));
  }
  if (model.learners() >= 2) {
    report.feature_corr = feature_correlation(model.partition, raw);
    const auto pairs = evaluation_pairs(inputs.size(), options.max_pairs, options.seed);
    report.clf_corr = classifier_correlation(model, inputs, pairs);
  }
  return report;
}

void write_report_csv(std::ostream& os, const EvalReport& report) {
  os << "metric,value\n";
  os << std::setprecision(17);
  for (const auto& [k, v] : report.recall_at) os << "r_at_" << k << ',' << v << '\n';
  os << "feat_corr,";
  if (report.feature_corr) os << *report.feature_corr; else os << "nan";
  os << "\nclf_corr,";
  if (report.clf_corr) os << *report.clf_corr; else os << "nan";
  os << '\n';
  for (std::size_t m = 0; m < report.learner_recall_at_1.size(); ++m) {
    os << "learner_" << (m + 1) << "_r_at_1," << report.learner_recall_at_1[m] << '\n';
  }
}

void write_report_table(std::ostream& os, const EvalReport& report) {
  os << std::fixed << std::setprecision(2);
  os << "Recall@K\n";
  for (const auto& [k, v] : report.recall_at) os << "  R@" << std::left << std::setw(4) << k << v * 100.0 << '\n';
  os << std::setprecision(4);
  os << "Feature Corr.  " << (report.feature_corr ? std::to_string(*report.feature_corr) : "-") << '\n';
  os << "Clf. Corr.     " << (report.clf_corr ? std::to_string(*report.clf_corr) : "-") << '\n';
  os << std::setprecision(2);
  for (std::size_t m = 0; m < report.learner_recall_at_1.size(); ++m) {
    os << "  Learner-" << (m + 1) << " R@1 " << report.learner_recall_at_1[m] * 100.0 << '\n';
  }
  os.unsetf(std::ios::floatfield);
}

}  // namespace bier
