#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "bier/errors.hpp"
#include "bier/trainer.hpp"

namespace bier {
namespace {

FeatureSet small_data(std::uint64_t seed = 0) {
  SynthSpec spec;
  spec.classes = 8;
  spec.per_class = 8;
  spec.feature_dim = 12;
  spec.cluster_spread = 3.0;
  spec.noise = 1.0;
  spec.seed = seed;
  return synth_gaussian(spec);
}

TrainConfig small_config() {
  TrainConfig c;
  c.embedding_dim = 8;
  c.learners = 3;
  c.iterations = 40;
  c.eval_interval = 10;
  c.optim.lr = 1e-2;
  c.seed = 3;
  return c;
}

TEST(Trainer, ZeroDiversityWeightMatchesPlainTraining) {
  const FeatureSet data = small_data();
  TrainConfig plain = small_config();
  TrainConfig act = plain;
  act.diversity = DiversityKind::activation;
  act.lambda_div = 0.0;
  const RunResult a = run(plain, data, nullptr);
  const RunResult b = run(act, data, nullptr);
  EXPECT_EQ(a.state.model, b.state.model);
  ASSERT_EQ(a.rows.size(), b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) EXPECT_EQ(a.rows[i].loss_metric, b.rows[i].loss_metric);
}

TEST(Trainer, DiversityLossLeavesBackboneGradientAlone) {
  const FeatureSet data = small_data();
  for (DiversityKind kind : {DiversityKind::activation, DiversityKind::adversarial}) {
    TrainConfig with = small_config();
    with.backbone_dim = 10;
    with.diversity = kind;
    with.lambda_div = 1.0;
    with.regressor_hidden = 6;
    TrainConfig without = with;
    without.lambda_div = 0.0;
    TrainState s1 = init_state(with, data.dim());
    TrainState s2 = s1;
    Rng rng(1);
    const Batch batch = sample_batch(data.labels, data.n_classes, BatchConfig{}, rng);
    const StepResult r1 = train_step(with, s1, data, batch);
    const StepResult r2 = train_step(without, s2, data, batch);
    ASSERT_TRUE(r1.backbone_grad.has_value());
    EXPECT_GT(r1.loss_div, 0.0);
    EXPECT_EQ(*r1.backbone_grad, *r2.backbone_grad);
    EXPECT_EQ(s1.model.backbone, s2.model.backbone);
    EXPECT_NE(s1.model.W, s2.model.W);
  }
}

TEST(Trainer, TrainingReducesTheMetricLoss) {
  const FeatureSet data = small_data();
  TrainConfig c = small_config();
  c.iterations = 400;
  c.eval_interval = 100;
  const RunResult r = run(c, data, nullptr);
  ASSERT_EQ(r.rows.size(), 4u);
  EXPECT_LT(r.rows.back().loss_metric, r.rows.front().loss_metric);
  EXPECT_GT(r.rows.back().r_at_1, 0.5);
}

TEST(Trainer, ZeroIterationsLeavesInitialModel) {
  const FeatureSet data = small_data();
  TrainConfig c = small_config();
  c.iterations = 0;
  const RunResult r = run(c, data, nullptr);
  EXPECT_TRUE(r.rows.empty());
  EXPECT_EQ(r.state, init_state(c, data.dim()));
}

TEST(Trainer, SingleLearnerBoostingEqualsGlobalLoss) {
  const FeatureSet data = small_data();
  TrainConfig boosted = small_config();
  boosted.learners = 1;
  TrainConfig global = boosted;
  global.objective = MetricObjective::global;
  const RunResult a = run(boosted, data, nullptr);
  const RunResult b = run(global, data, nullptr);
  EXPECT_EQ(a.state.model.W, b.state.model.W);
}

TEST(Trainer, ResumeIsBitIdentical) {
  const FeatureSet data = small_data();
  for (DiversityKind kind : {DiversityKind::none, DiversityKind::adversarial}) {
    TrainConfig c = small_config();
    c.diversity = kind;
    c.regressor_hidden = 8;
    const RunResult full = run(c, data, nullptr);
    RunHooks hooks;
    hooks.stop_at = 17;
    const RunResult first = run(c, data, nullptr, std::nullopt, hooks);
    EXPECT_EQ(first.state.iteration, 17u);
    const RunResult second = run(c, data, nullptr, first.state);
    EXPECT_EQ(second.state, full.state);
    EXPECT_EQ(second.rows.back().loss_metric, full.rows.back().loss_metric);
  }
}

TEST(Trainer, DeterministicForSeed) {
  const FeatureSet data = small_data();
  TrainConfig c = small_config();
  c.diversity = DiversityKind::activation;
  EXPECT_EQ(run(c, data, nullptr).state, run(c, data, nullptr).state);
  TrainConfig other = c;
  other.seed = 4;
  EXPECT_NE(run(c, data, nullptr).state.model.W, run(other, data, nullptr).state.model.W);
}

TEST(Trainer, RejectsMismatchedResumeAndBadConfig) {
  const FeatureSet data = small_data();
  TrainConfig c = small_config();
  TrainState wrong = init_state(c, data.dim() + 1);
  EXPECT_THROW(run(c, data, nullptr, wrong), InvalidArgument);
  c.samples_per_class = 1;
  EXPECT_THROW(run(c, data, nullptr), InvalidArgument);
  TrainConfig preset = small_config();
  preset.partition_source = PartitionSource::preset;
  EXPECT_THROW(resolve_partition(preset), InvalidArgument);
}

TEST(Trainer, DivergenceNamesTheIteration) {
  const FeatureSet data = small_data();
  TrainConfig c = small_config();
  c.optim.kind = OptimKind::sgd_momentum;
  c.optim.lr = 1e200;
  try {
    run(c, data, nullptr);
    FAIL() << "expected divergence";
  } catch (const NumericFailure& e) {
    EXPECT_NE(std::string(e.what()).find("iteration"), std::string::npos);
  }
}

// Regression fixture: the metrics CSV of a short fixed run. Regenerate with
// BIER_UPDATE_GOLDEN=1 after an intentional numerical change.
TEST(Trainer, GoldenMetricsCsv) {
  const FeatureSet data = small_data(7);
  TrainConfig c = small_config();
  c.diversity = DiversityKind::adversarial;
  c.regressor_hidden = 8;
  c.iterations = 30;
  std::ostringstream got;
  write_metrics_csv(got, run(c, data, nullptr).rows);

  const std::string path = std::string(BIER_TEST_DATA_DIR) + "/golden_metrics.csv";
  if (std::getenv("BIER_UPDATE_GOLDEN") != nullptr) {
    std::ofstream(path) << got.str();
  }
  std::ifstream in(path);
  ASSERT_TRUE(in) << "missing " << path;
  std::stringstream want_text;
  want_text << in.rdbuf();
  std::istringstream want(want_text.str()), have(got.str());
  std::string wl, hl;
  std::getline(want, wl);
  std::getline(have, hl);
  EXPECT_EQ(wl, hl);
  while (std::getline(want, wl)) {
    ASSERT_TRUE(std::getline(have, hl));
    std::istringstream ws(wl), hs(hl);
    std::string wf, hf;
    while (std::getline(ws, wf, ',')) {
      ASSERT_TRUE(std::getline(hs, hf, ','));
      if (wf == "nan") {
        EXPECT_EQ(hf, "nan");
        continue;
      }
      const double w = std::stod(wf), h = std::stod(hf);
      EXPECT_NEAR(h, w, 1e-9 * std::max(1.0, std::fabs(w))) << wl;
    }
  }
  EXPECT_FALSE(std::getline(have, hl));
}

TEST(Metrics, CsvFormat) {
  std::ostringstream os;
  write_metrics_csv(os, {MetricsRow{5, 0.25, 0.0, 0.5, 0.125, std::nan("")}});
  EXPECT_EQ(os.str(), "iter,loss_metric,loss_div,r_at_1,feat_corr,clf_corr\n5,0.25,0,0.5,0.125,nan\n");
}

TEST(Config, LambdaDefaultsDependOnKind) {
  TrainConfig c;
  EXPECT_EQ(c.effective_lambda_div(), 0.0);
  c.diversity = DiversityKind::adversarial;
  EXPECT_EQ(c.effective_lambda_div(), 1e-3);
  c.diversity = DiversityKind::activation;
  EXPECT_EQ(c.effective_lambda_div(), 1e-2);
  c.lambda_div = 0.5;
  EXPECT_EQ(c.effective_lambda_div(), 0.5);
}

}  // namespace
}  // namespace bier
