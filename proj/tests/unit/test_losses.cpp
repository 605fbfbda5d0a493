#include <gtest/gtest.h>

#include <cmath>

#include "bier/errors.hpp"
#include "bier/losses.hpp"
#include "bier/rng.hpp"
#include "finite_diff.hpp"

namespace bier {
namespace {

LossSpec spec_of(LossKind kind) {
  LossSpec s;
  s.kind = kind;
  return s;
}

// Direct transcription of the binomial deviance table entry.
double binomial_oracle(double s, int y, double b1 = 2.0, double b2 = 0.5, double cpos = 1.0, double cneg = 25.0) {
  const double c = y == 1 ? cpos : cneg;
  const double z = -(2.0 * y - 1.0) * b1 * (s - b2) * c;
  return std::log(1.0 + std::exp(z));
}

TEST(LossConstants, DefaultsArePinned) {
  const LossSpec s;
  EXPECT_EQ(s.kind, LossKind::binomial_deviance);
  EXPECT_EQ(s.beta1, 2.0);
  EXPECT_EQ(s.beta2, 0.5);
  EXPECT_EQ(s.margin_contrastive, 0.5);
  EXPECT_EQ(s.margin_triplet, 0.01);
  EXPECT_EQ(s.cost_pos, 1.0);
  EXPECT_EQ(s.cost_neg, 25.0);
}

TEST(LossConstants, BinomialSpotValueIsLn2) {
  const PairLossValue v = pair_loss(LossSpec{}, 0.5, PairLabel::positive);
  EXPECT_NEAR(v.loss, std::log(2.0), 1e-15);
  EXPECT_NEAR(v.dloss_ds, -1.0, 1e-15);
}

TEST(PairLoss, BinomialMatchesTableFormula) {
  Rng rng(11);
  for (int i = 0; i < 200; ++i) {
    const double s = rng.uniform(-1.0, 1.0);
    const int y = static_cast<int>(rng.index(2));
    const double v = pair_loss(LossSpec{}, s, y ? PairLabel::positive : PairLabel::negative).loss;
    EXPECT_NEAR(v, binomial_oracle(s, y), 1e-12 * std::max(1.0, v));
  }
}

TEST(PairLoss, BinomialIsStableForLargeArguments) {
  LossSpec s;
  s.cost_neg = 1e4;
  const PairLossValue v = pair_loss(s, 1.0, PairLabel::negative);
  // z = 2 * 0.5 * 1e4 = 1e4; log(1 + e^z) = z to double precision.
  EXPECT_TRUE(std::isfinite(v.loss));
  EXPECT_NEAR(v.loss, 1e4, 1e-9);
  EXPECT_NEAR(v.dloss_ds, 2.0 * 1e4, 1e-6);
}

TEST(PairLoss, ContrastiveExamples) {
  const LossSpec s = spec_of(LossKind::contrastive);
  const PairLossValue inside = pair_loss(s, 0.3, PairLabel::negative);
  EXPECT_EQ(inside.loss, 0.0);
  EXPECT_EQ(inside.dloss_ds, 0.0);
  const PairLossValue perfect = pair_loss(s, 1.0, PairLabel::positive);
  EXPECT_EQ(perfect.loss, 0.0);
  EXPECT_EQ(perfect.dloss_ds, 0.0);
  const PairLossValue active = pair_loss(s, 0.8, PairLabel::negative);
  EXPECT_NEAR(active.loss, 0.3, 1e-15);
  EXPECT_EQ(active.dloss_ds, 1.0);
  const PairLossValue pos = pair_loss(s, 0.25, PairLabel::positive);
  EXPECT_NEAR(pos.loss, 0.5625, 1e-15);
  EXPECT_NEAR(pos.dloss_ds, -1.5, 1e-15);
}

TEST(PairLoss, TripletKindIsRejected) {
  EXPECT_THROW(pair_loss(spec_of(LossKind::triplet), 0.1, PairLabel::positive), InvalidArgument);
  EXPECT_THROW(triplet_loss(LossSpec{}, 0.1, 0.2), InvalidArgument);
}

TEST(PairLoss, DerivativeMatchesFiniteDifferences) {
  Rng rng(5);
  for (LossKind kind : {LossKind::binomial_deviance, LossKind::contrastive}) {
    const LossSpec spec = spec_of(kind);
    int checked = 0;
    while (checked < 100) {
      double s = rng.uniform(-1.0, 1.0);
      if (kind == LossKind::contrastive && std::abs(s - spec.margin_contrastive) < 1e-4) continue;
      const PairLabel y = rng.index(2) ? PairLabel::positive : PairLabel::negative;
      const double analytic = pair_loss(spec, s, y).dloss_ds;
      const auto num = testing::central_diff({&s, 1}, [&] { return pair_loss(spec, s, y).loss; });
      const double denom = std::max({std::abs(analytic), std::abs(num[0]), 1e-8});
      EXPECT_LT(std::abs(analytic - num[0]) / denom, 1e-6) << "s=" << s;
      ++checked;
    }
  }
}

TEST(PairLoss, BinomialMonotoneInScore) {
  const LossSpec spec;
  double prev_pos = INFINITY, prev_neg = -INFINITY;
  for (int i = 0; i < 1000; ++i) {
    const double s = -1.0 + 2.0 * i / 999.0;
    const double lp = pair_loss(spec, s, PairLabel::positive).loss;
    const double ln = pair_loss(spec, s, PairLabel::negative).loss;
    EXPECT_LT(lp, prev_pos);
    EXPECT_GT(ln, prev_neg);
    prev_pos = lp;
    prev_neg = ln;
  }
}

TEST(TripletLoss, Examples) {
  const LossSpec s = spec_of(LossKind::triplet);
  const TripletLossValue sat = triplet_loss(s, 0.9, 0.1);
  EXPECT_EQ(sat.loss, 0.0);
  EXPECT_EQ(sat.d_dspos, 0.0);
  EXPECT_EQ(sat.d_dsneg, 0.0);

  const TripletLossValue viol = triplet_loss(s, 0.1, 0.9);
  EXPECT_NEAR(viol.loss, 0.81, 1e-15);
  EXPECT_EQ(viol.d_dspos, -1.0);
  EXPECT_EQ(viol.d_dsneg, 1.0);

  LossSpec zero_margin = s;
  zero_margin.margin_triplet = 0.0;
  const TripletLossValue kink = triplet_loss(zero_margin, 0.5, 0.5);
  EXPECT_EQ(kink.loss, 0.0);
  EXPECT_EQ(kink.d_dspos, 0.0);
  EXPECT_EQ(kink.d_dsneg, 0.0);
}

TEST(BoostWeight, PairExamples) {
  const LossSpec spec;
  EXPECT_NEAR(pair_boost_weight(spec, 0.5, PairLabel::positive), 1.0, 1e-15);
  EXPECT_NEAR(pair_boost_weight(spec, 0.5, PairLabel::negative), 25.0, 1e-13);
  // The literal signed convention is negative for negative pairs.
  EXPECT_NEAR(pair_boost_weight(spec, 0.5, PairLabel::negative, true), -25.0, 1e-13);
  EXPECT_NEAR(pair_boost_weight(spec, 0.5, PairLabel::positive, true), 1.0, 1e-15);
}

TEST(BoostWeight, NonNegativeEverywhere) {
  Rng rng(3);
  for (LossKind kind : {LossKind::binomial_deviance, LossKind::contrastive}) {
    for (int i = 0; i < 500; ++i) {
      const double s = rng.uniform(-1.0, 1.0);
      EXPECT_GE(pair_boost_weight(spec_of(kind), s, PairLabel::positive), 0.0);
      EXPECT_GE(pair_boost_weight(spec_of(kind), s, PairLabel::negative), 0.0);
    }
  }
  const LossSpec t = spec_of(LossKind::triplet);
  for (int i = 0; i < 500; ++i) {
    const double w = triplet_boost_weight(t, rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
    EXPECT_TRUE(w == 0.0 || w == 1.0);
  }
  EXPECT_EQ(triplet_boost_weight(t, 0.1, 0.9), 1.0);
}

TEST(LossSpec, ValidateAndNames) {
  LossSpec bad;
  bad.beta1 = 0.0;
  EXPECT_THROW(bad.validate(), InvalidArgument);
  bad = LossSpec{};
  bad.cost_neg = -1.0;
  EXPECT_THROW(bad.validate(), InvalidArgument);
  EXPECT_NO_THROW(LossSpec{}.validate());
  for (LossKind k : {LossKind::binomial_deviance, LossKind::contrastive, LossKind::triplet}) {
    EXPECT_EQ(loss_kind_from_string(to_string(k)), k);
  }
  EXPECT_THROW(loss_kind_from_string("hinge"), InvalidArgument);
}

TEST(Softplus, AgreesWithNaiveFormInSafeRange) {
  for (double z = -20.0; z <= 29.0; z += 0.37) {
    EXPECT_NEAR(softplus(z), std::log(1.0 + std::exp(z)), 1e-12 * std::max(1.0, z));
  }
  EXPECT_DOUBLE_EQ(softplus(800.0), 800.0);
  EXPECT_NEAR(sigmoid(0.0), 0.5, 0.0);
  EXPECT_NEAR(sigmoid(-800.0), 0.0, 1e-300);
}

}  // namespace
}  // namespace bier
