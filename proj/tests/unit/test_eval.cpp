#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "bier/errors.hpp"
#include "bier/eval.hpp"

namespace bier {
namespace {

// Full sort of every candidate list; ties broken by index.
double brute_force_recall(const std::vector<Vector>& emb, const std::vector<std::uint32_t>& labels,
                          std::size_t k) {
  std::size_t hits = 0;
  for (std::size_t q = 0; q < emb.size(); ++q) {
    std::vector<std::size_t> order;
    for (std::size_t j = 0; j < emb.size(); ++j) {
      if (j != q) order.push_back(j);
    }
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return dot(emb[q].span(), emb[a].span()) > dot(emb[q].span(), emb[b].span());
    });
    bool hit = false;
    for (std::size_t r = 0; r < k; ++r) hit = hit || labels[order[r]] == labels[q];
    hits += hit ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(emb.size());
}

std::vector<Vector> random_embeddings(std::size_t n, std::size_t d, Rng& rng) {
  std::vector<Vector> out;
  for (std::size_t i = 0; i < n; ++i) {
    Vector v(d);
    for (double& x : v) x = rng.normal();
    out.push_back(v);
  }
  return out;
}

TEST(RecallAtK, TrivialCases) {
  const std::vector<Vector> emb{{1, 0}, {0.9, 0.1}, {0, 1}, {0.1, 0.9}};
  const std::vector<std::uint32_t> good{0, 0, 1, 1};
  const std::vector<std::uint32_t> bad{0, 1, 0, 1};
  const std::size_t ks[] = {1};
  EXPECT_DOUBLE_EQ(recall_at_k(emb, good, ks).at(1), 1.0);
  EXPECT_DOUBLE_EQ(recall_at_k(emb, bad, ks).at(1), 0.0);
}

TEST(RecallAtK, MatchesBruteForceSort) {
  Rng rng(17);
  const auto emb = random_embeddings(200, 8, rng);
  std::vector<std::uint32_t> labels(200);
  for (auto& l : labels) l = static_cast<std::uint32_t>(rng.index(12));
  const std::vector<std::size_t> ks{1, 2, 4, 8, 16};
  const auto got = recall_at_k(emb, labels, ks);
  for (std::size_t k : ks) EXPECT_DOUBLE_EQ(got.at(k), brute_force_recall(emb, labels, k)) << "K=" << k;
}

TEST(RecallAtK, TiesResolveByLowerIndex) {
  // Query 0 sees samples 1 and 2 at identical similarity; only 1 is ranked first.
  const std::vector<Vector> emb{{1, 0}, {1, 0}, {1, 0}, {-1, 0}};
  const std::vector<std::uint32_t> labels{0, 1, 0, 1};
  const std::size_t ks[] = {1};
  const auto r = recall_at_k(emb, labels, ks);
  EXPECT_DOUBLE_EQ(r.at(1), brute_force_recall(emb, labels, 1));
}

TEST(RecallAtK, RejectsBadK) {
  const std::vector<Vector> emb{{1}, {2}, {3}};
  const std::vector<std::uint32_t> labels{0, 1, 0};
  const std::size_t too_big[] = {3};
  const std::size_t zero[] = {0};
  const std::size_t max_k[] = {2};
  EXPECT_THROW(recall_at_k(emb, labels, too_big), InvalidArgument);
  EXPECT_THROW(recall_at_k(emb, labels, zero), InvalidArgument);
  // K = N - 1 covers every candidate: any query with a same-label partner hits.
  const std::vector<std::uint32_t> paired{0, 0, 0};
  EXPECT_DOUBLE_EQ(recall_at_k(emb, paired, max_k).at(2), 1.0);
  const std::vector<std::uint32_t> short_labels{0, 1};
  EXPECT_THROW(recall_at_k(emb, short_labels, max_k), InvalidArgument);
}

TEST(RecallAtK, InvariantToSamplePermutation) {
  Rng rng(4);
  auto emb = random_embeddings(120, 6, rng);
  std::vector<std::uint32_t> labels(120);
  for (auto& l : labels) l = static_cast<std::uint32_t>(rng.index(10));
  const std::vector<std::size_t> ks{1, 4};
  const auto before = recall_at_k(emb, labels, ks);
  std::vector<std::size_t> perm(120);
  std::iota(perm.begin(), perm.end(), 0);
  for (std::size_t i = perm.size() - 1; i > 0; --i) std::swap(perm[i], perm[rng.index(i + 1)]);
  std::vector<Vector> e2;
  std::vector<std::uint32_t> l2;
  for (std::size_t p : perm) {
    e2.push_back(emb[p]);
    l2.push_back(labels[p]);
  }
  const auto after = recall_at_k(e2, l2, ks);
  // Continuous random similarities never tie, so the order change cannot matter.
  EXPECT_EQ(before, after);
}

TEST(RecallAtK, ThreadCountDoesNotChangeResult) {
  Rng rng(6);
  const auto emb = random_embeddings(97, 5, rng);
  std::vector<std::uint32_t> labels(97);
  for (auto& l : labels) l = static_cast<std::uint32_t>(rng.index(7));
  const std::vector<std::size_t> ks{1, 2, 8};
  const auto one = recall_at_k(emb, labels, ks, 1);
  for (unsigned t : {2u, 3u, 8u, 200u}) EXPECT_EQ(recall_at_k(emb, labels, ks, t), one);
}

TEST(FeatureCorrelation, DuplicatedGroupsCorrelatePerfectly) {
  Rng rng(2);
  const GroupPartition part({2, 2});
  std::vector<Vector> raw;
  for (int i = 0; i < 50; ++i) {
    const double a = rng.normal(), b = rng.normal();
    raw.push_back(Vector{a, b, a, b});
  }
  CorrelationDiagnostics diag;
  // Cross pairs: (0,2) and (1,3) are 1, (0,3) and (1,2) are near 0.
  const double c = feature_correlation(part, raw, &diag);
  EXPECT_EQ(diag.pairs_used, 4u);
  EXPECT_GT(c, 0.5);
  std::vector<Vector> single;
  for (int i = 0; i < 50; ++i) {
    const double a = rng.normal();
    single.push_back(Vector{a, -3.0 * a});
  }
  EXPECT_NEAR(feature_correlation(GroupPartition({1, 1}), single), 1.0, 1e-12);
}

TEST(FeatureCorrelation, IndependentGroupsAreNearZero) {
  Rng rng(9);
  std::vector<Vector> raw;
  for (int i = 0; i < 5000; ++i) raw.push_back(Vector{rng.normal(), rng.normal(), rng.normal()});
  EXPECT_LT(feature_correlation(GroupPartition({1, 2}), raw), 0.1);
}

TEST(FeatureCorrelation, ConstantDimensionsAreSkipped) {
  std::vector<Vector> raw{{1, 5, 2}, {2, 5, 4}, {3, 5, 7}};
  CorrelationDiagnostics diag;
  const double c = feature_correlation(GroupPartition({1, 1, 1}), raw, &diag);
  EXPECT_EQ(diag.pairs_used, 1u);
  EXPECT_EQ(diag.pairs_skipped, 2u);
  EXPECT_NEAR(c, pearson(std::vector<double>{1, 2, 3}, std::vector<double>{2, 4, 7}), 1e-12);
  std::vector<Vector> flat{{1, 1}, {1, 1}};
  EXPECT_THROW(feature_correlation(GroupPartition({1, 1}), flat), UndefinedCorrelation);
  EXPECT_THROW(feature_correlation(GroupPartition({2}), raw), UndefinedCorrelation);
}

TEST(ClassifierCorrelation, HandBuiltAverage) {
  const std::vector<double> a{1, 2, 3, 4};
  const std::vector<double> b{4, 3, 2, 1};   // |r| = 1 with a
  const std::vector<double> c{1, 3, 2, 4};   // r = 0.8 with a, -0.8 with b
  const double expect = (1.0 + 0.8 + 0.8) / 3.0;
  EXPECT_NEAR(classifier_correlation({a, b, c}), expect, 1e-12);
  EXPECT_NEAR(classifier_correlation({a, a}), 1.0, 1e-12);
  EXPECT_THROW(classifier_correlation({a}), UndefinedCorrelation);
  EXPECT_THROW(classifier_correlation({a, {2, 2, 2, 2}}), UndefinedCorrelation);
}

TEST(EvaluationPairs, EnumeratesOrSamples) {
  const auto all = evaluation_pairs(5, 100, 0);
  EXPECT_EQ(all.size(), 10u);
  const auto some = evaluation_pairs(100, 300, 3);
  EXPECT_EQ(some.size(), 300u);
  EXPECT_TRUE(std::is_sorted(some.begin(), some.end()));
  for (const auto& [i, j] : some) EXPECT_LT(i, j);
  EXPECT_EQ(some, evaluation_pairs(100, 300, 3));
}

TEST(Evaluate, ReportAndWriters) {
  Rng rng(5);
  FeatureSet set;
  set.n_classes = 4;
  set.features = Matrix(40, 6);
  for (std::size_t i = 0; i < 40; ++i) {
    set.labels.push_back(static_cast<std::uint32_t>(i % 4));
    for (std::size_t c = 0; c < 6; ++c) set.features(i, c) = rng.normal() + (c == i % 4 ? 3.0 : 0.0);
  }
  const EnsembleModel model = make_model(6, GroupPartition({2, 2}), rng);
  const EvalReport report = evaluate(model, set);
  EXPECT_EQ(report.recall_at.size(), 4u);
  ASSERT_TRUE(report.feature_corr.has_value());
  ASSERT_TRUE(report.clf_corr.has_value());
  EXPECT_EQ(report.learner_recall_at_1.size(), 2u);
  for (const auto& [k, r] : report.recall_at) {
    EXPECT_GE(r, 0.0);
    EXPECT_LE(r, 1.0);
  }
  std::ostringstream csv, table;
  write_report_csv(csv, report);
  write_report_table(table, report);
  EXPECT_NE(csv.str().find("r_at_1,"), std::string::npos);
  EXPECT_FALSE(table.str().empty());

  const EnsembleModel single = make_model(6, GroupPartition({4}), rng);
  const EvalReport r1 = evaluate(single, set);
  EXPECT_FALSE(r1.feature_corr.has_value());
  EXPECT_FALSE(r1.clf_corr.has_value());
}

}  // namespace
}  // namespace bier
