#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "bier/data_io.hpp"
#include "bier/ensemble.hpp"

namespace bier {

/// Recall@K with every query excluded from its own candidate set.
///
/// Candidates are ranked by dot product, descending; equal similarities are
/// ordered by ascending sample index. A query scores 1 for K when at least one
/// of its top K candidates shares its label. Throws InvalidArgument when
/// N < 2, a K is 0 or K >= N, or sizes disagree. `threads` > 1 splits queries
/// across workers; the result does not depend on it.
std::map<std::size_t, double> recall_at_k(std::span<const Vector> embeddings,
                                          std::span<const std::uint32_t> labels,
                                          std::span<const std::size_t> ks, unsigned threads = 1);

struct CorrelationDiagnostics {
  std::size_t pairs_used = 0;
  std::size_t pairs_skipped = 0;  // involving a constant dimension
};

// Mean |Pearson| over all dimension pairs (k, l) lying in different groups,
// over raw (unnormalized) learner outputs. Throws UndefinedCorrelation for
// M = 1 or when every pair is skipped, InvalidArgument for fewer than 2 samples.
double feature_correlation(const GroupPartition& partition, std::span<const Vector> raw_embeddings,
                           CorrelationDiagnostics* diagnostics = nullptr);
double feature_correlation(const EnsembleModel& model, std::span<const Vector> inputs,
                           CorrelationDiagnostics* diagnostics = nullptr);

// Mean |Pearson| over all learner pairs of their per-pair score vectors.
// Throws UndefinedCorrelation for fewer than 2 learners or a constant vector.
double classifier_correlation(const std::vector<std::vector<double>>& learner_scores);
double classifier_correlation(const EnsembleModel& model, std::span<const Vector> inputs,
                              std::span<const std::pair<std::size_t, std::size_t>> pairs);

// All pairs i < j when there are at most max_pairs of them, else max_pairs
// distinct pairs drawn with `seed`, in ascending order.
std::vector<std::pair<std::size_t, std::size_t>> evaluation_pairs(std::size_t n, std::size_t max_pairs,
                                                                  std::uint64_t seed);

struct EvalOptions {
  std::vector<std::size_t> ks = {1, 2, 4, 8};
  TestEmbeddingOptions embedding;
  std::size_t max_pairs = 100000;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

struct EvalReport {
  std::map<std::size_t, double> recall_at;
  std::optional<double> feature_corr;  // absent for a single learner
  std::optional<double> clf_corr;
  std::vector<double> learner_recall_at_1;
};

EvalReport evaluate(const EnsembleModel& model, const FeatureSet& set, const EvalOptions& options = {});

void write_report_csv(std::ostream& os, const EvalReport& report);
void write_report_table(std::ostream& os, const EvalReport& report);

}  // namespace bier
