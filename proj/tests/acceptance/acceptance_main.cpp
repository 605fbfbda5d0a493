// Acceptance runner: one PASS/FAIL line per criterion, non-zero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "bier/boosting.hpp"
#include "bier/data_io.hpp"
#include "bier/diversity.hpp"
#include "bier/eval.hpp"
#include "bier/gradcheck.hpp"
#include "bier/init_solver.hpp"
#include "bier/losses.hpp"
#include "bier/trainer.hpp"

namespace {

using Clock = std::chrono::steady_clock;

// Pinned tolerances and budgets.
constexpr double kGradTolerance = 1e-5;
constexpr std::size_t kGradInstances = 50;
constexpr double kGradBudgetSeconds = 60.0;
constexpr double kBoostTolerance = 1e-12;
constexpr double kReversalTolerance = 1e-12;
constexpr double kNormBand = 1e-3;
constexpr double kSuppressionReduction = 0.90;
constexpr double kInitBudgetSeconds = 120.0;
constexpr double kTrendBudgetSeconds = 600.0;
constexpr int kTrendSeeds = 5;
constexpr int kTrendRequired = 4;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* format, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, format, a, b, c);
  return buf;
}

#ifdef BIER_CLI_PATH
// Runs the command-line tool, capturing stdout; returns the exit status.
int run_cli(const std::string& args, std::string* out) {
  const std::string cmd = std::string("\"") + BIER_CLI_PATH + "\" " + args + " 2>/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  if (pipe == nullptr) return -1;
  char buf[512];
  std::string text;
  while (std::fgets(buf, sizeof buf, pipe) != nullptr) text += buf;
  const int status = pclose(pipe);
  if (out != nullptr) *out = text;
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}
#endif

Outcome gradient_fidelity() {
  const auto t0 = Clock::now();
  bier::GradcheckOptions opt;
  opt.instances = kGradInstances;
  opt.tolerance = kGradTolerance;
  const bier::GradcheckReport report = bier::run_gradcheck(opt);
  double worst = 0.0;
  for (const auto& c : report.checks) worst = std::max(worst, c.worst_rel_error);
  bool pass = report.passed() && !report.checks.empty();
  std::string detail = std::to_string(report.checks.size()) + " checks x " + std::to_string(kGradInstances) +
                       " instances, worst rel err " + fmt("%.2e", worst);
#ifdef BIER_CLI_PATH
  const int code = run_cli("gradcheck --instances " + std::to_string(kGradInstances), nullptr);
  pass = pass && code == 0;
  detail += ", `bier gradcheck` exit " + std::to_string(code);
#endif
  const double secs = seconds_since(t0);
  pass = pass && secs < kGradBudgetSeconds;
  return {pass, detail + fmt(", %.1f s", secs)};
}

Outcome boosting_identity() {
  bier::Rng rng(20240);
  double worst = 0.0, worst_sum = 0.0;
  for (std::size_t M = 1; M <= 16; ++M) {
    const bier::BoostSchedule s = bier::make_schedule(M);
    // Closed form alpha_m = 2m / (M(M+1)), computed independently of the schedule.
    double alpha_sum = 0.0;
    std::vector<double> alpha(M);
    for (std::size_t m = 0; m < M; ++m) {
      alpha[m] = 2.0 * static_cast<double>(m + 1) / static_cast<double>(M * (M + 1));
      alpha_sum += s.alpha[m];
      worst = std::max(worst, std::fabs(alpha[m] - s.alpha[m]));
    }
    worst_sum = std::max(worst_sum, std::fabs(alpha_sum - 1.0));
    for (int draw = 0; draw < 1000; ++draw) {
      std::vector<double> scores(M);
      for (double& x : scores) x = rng.uniform(-1.0, 1.0);
      double want = 0.0;
      for (std::size_t m = 0; m < M; ++m) want += alpha[m] * scores[m];
      worst = std::max(worst, std::fabs(bier::boost_forward(s, scores).back() - want));
    }
  }
  return {worst <= kBoostTolerance && worst_sum <= kBoostTolerance,
          fmt("M=1..16 x 1000 draws, max |s^M - sum alpha s| = %.1e, max |sum alpha - 1| = %.1e", worst, worst_sum)};
}

Outcome reduction_equivalence() {
  bier::SynthSpec spec;
  spec.classes = 10;
  spec.per_class = 20;
  spec.feature_dim = 32;
  const bier::FeatureSet data = bier::synth_gaussian(spec);
  bier::TrainConfig boosted;
  boosted.learners = 1;
  boosted.embedding_dim = 16;
  boosted.iterations = 500;
  boosted.eval_interval = 100;
  boosted.lambda_div = 0.0;
  boosted.seed = 7;
  bier::TrainConfig baseline = boosted;
  baseline.objective = bier::MetricObjective::global;
  const bier::RunResult a = bier::run(boosted, data, nullptr);
  const bier::RunResult b = bier::run(baseline, data, nullptr);
  bool rows_equal = a.rows.size() == b.rows.size();
  for (std::size_t i = 0; rows_equal && i < a.rows.size(); ++i) {
    rows_equal = a.rows[i].loss_metric == b.rows[i].loss_metric && a.rows[i].r_at_1 == b.rows[i].r_at_1;
  }
  const bool state_equal = a.state == b.state;
  return {state_equal && rows_equal && a.state.iteration == 500,
          std::string("500 iterations, W/optimizer/RNG ") + (state_equal ? "bit-identical" : "DIFFER") +
              ", loss rows " + (rows_equal ? "bit-identical" : "DIFFER")};
}

Outcome reversal_contract() {
  double worst = 0.0;
  bool penalty_same = true;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    bier::Rng rng(seed);
    const bier::GroupPartition part({2, 3, 4});
    const bier::EnsembleModel model = bier::make_model(6, part, rng);
    const bier::RegressorBank bank = bier::make_bank(part, 5, rng);
    std::vector<bier::Vector> phi;
    for (int n = 0; n < 8; ++n) {
      bier::Vector v(6);
      for (double& x : v) x = rng.normal();
      phi.push_back(v);
    }
    bier::AdversarialOptions on, off;
    off.gradient_reversal = false;
    const auto a = bier::adversarial_loss(model, bank, phi, on);
    const auto b = bier::adversarial_loss(model, bank, phi, off);
    penalty_same = penalty_same && a.grad_W_penalty == b.grad_W_penalty;
    for (std::size_t k = 0; k < a.grad_W.size(); ++k) {
      const double sim_on = a.grad_W.span()[k] - a.grad_W_penalty.span()[k];
      const double sim_off = b.grad_W.span()[k] - b.grad_W_penalty.span()[k];
      worst = std::max(worst, std::fabs(sim_on + sim_off));
    }
  }
  return {worst <= kReversalTolerance && penalty_same,
          fmt("20 random instances, max |g_rev + g_plain| = %.1e", worst)};
}

Outcome preset_rows() {
  const std::vector<std::pair<std::size_t, std::vector<std::size_t>>> rows = {
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
  std::size_t matched = 0;
  for (const auto& [d, sizes] : rows) {
    std::ostringstream want;
    for (std::size_t i = 0; i < sizes.size(); ++i) want << (i ? " " : "") << sizes[i];
    want << '\n';
#ifdef BIER_CLI_PATH
    std::string got;
    const int code =
        run_cli("partition --preset --d " + std::to_string(d) + " --m " + std::to_string(sizes.size()), &got);
    if (code == 0 && got == want.str()) ++matched;
#else
    const auto p = bier::preset_partition(d, sizes.size());
    if (p && p->sizes() == sizes) ++matched;
#endif
  }
  return {matched == rows.size(), std::to_string(matched) + "/" + std::to_string(rows.size()) +
                                      " table rows reproduced by `partition --preset`"};
}

double brute_force_recall(const std::vector<bier::Vector>& emb, const std::vector<std::uint32_t>& labels,
                          std::size_t k) {
  std::size_t hits = 0;
  for (std::size_t q = 0; q < emb.size(); ++q) {
    std::vector<std::pair<double, std::size_t>> ranked;
    for (std::size_t j = 0; j < emb.size(); ++j) {
      if (j != q) ranked.emplace_back(-bier::dot(emb[q].span(), emb[j].span()), j);
    }
    std::sort(ranked.begin(), ranked.end());
    bool hit = false;
    for (std::size_t r = 0; r < k; ++r) hit = hit || labels[ranked[r].second] == labels[q];
    hits += hit ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(emb.size());
}

Outcome recall_oracle() {
  const std::vector<std::size_t> ks{1, 2, 4, 8, 16, 32};
  int agreed = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    bier::Rng rng(seed);
    std::vector<bier::Vector> emb;
    std::vector<std::uint32_t> labels;
    for (int i = 0; i < 200; ++i) {
      bier::Vector v(8);
      for (double& x : v) x = rng.normal();
      emb.push_back(v);
      labels.push_back(static_cast<std::uint32_t>(rng.index(10 + seed)));
    }
    const auto got = bier::recall_at_k(emb, labels, ks);
    bool all = true;
    for (std::size_t k : ks) all = all && got.at(k) == brute_force_recall(emb, labels, k);
    agreed += all ? 1 : 0;
  }
  return {agreed == 20, std::to_string(agreed) + "/20 seeds exact for K in {1,2,4,8,16,32}"};
}

Outcome init_postcondition() {
  const auto t0 = Clock::now();
  bier::SynthSpec spec;
  spec.classes = 10;
  spec.feature_dim = 64;
  spec.seed = 0;
  const std::vector<bier::Vector> phi = bier::synth_gaussian(spec).samples();
  bier::Rng rng(0);
  const bier::EnsembleModel skeleton = bier::make_model(64, bier::proportional_partition(32, 3), rng);
  bier::InitSolverConfig cfg;
  cfg.norm_band = kNormBand;
  const bier::InitResult r = bier::init_solver(phi, skeleton, cfg, rng);
  const double reduction = 1.0 - r.final_diversity_term / r.initial_diversity_term;
  const double secs = seconds_since(t0);
  const bool pass = r.min_sq_norm >= 1.0 - kNormBand && r.max_sq_norm <= 1.0 + kNormBand &&
                    reduction >= kSuppressionReduction && secs < kInitBudgetSeconds;
  return {pass, fmt("squared norms in [%.6f, %.6f], suppression reduced %.2f%%", r.min_sq_norm, r.max_sq_norm,
                    100.0 * reduction) +
                    ", " + std::to_string(r.iterations) + " iterations" + fmt(", %.1f s", secs)};
}

struct ArmResult {
  double r_at_1 = 0.0;
  double best_learner = 0.0;
  double feat_corr = 0.0;
  double clf_corr = 0.0;
};

ArmResult train_arm(const bier::Split& data, int seed, bier::MetricObjective objective, bool adversarial) {
  bier::TrainConfig c;
  c.embedding_dim = 32;
  c.learners = 3;
  c.iterations = 5000;
  c.seed = static_cast<std::uint64_t>(seed);
  c.objective = objective;
  if (adversarial) {
    c.diversity = bier::DiversityKind::adversarial;
    c.lambda_div = 1e-3;
    c.regressor_hidden = 32;
  }
  const bier::RunResult run = bier::run(c, data.train, &data.test);
  const bier::EvalReport rep = bier::evaluate(run.state.model, data.test);
  return {rep.recall_at.at(1), *std::max_element(rep.learner_recall_at_1.begin(), rep.learner_recall_at_1.end()),
          *rep.feature_corr, *rep.clf_corr};
}

struct TrendResults {
  std::vector<ArmResult> boosted, global, adversarial;
  double seconds = 0.0;
};

const TrendResults& trend_results() {
  static const TrendResults results = [] {
    const auto t0 = Clock::now();
    TrendResults r;
    for (int seed = 0; seed < kTrendSeeds; ++seed) {
      bier::SynthSpec spec;
      spec.classes = 40;
      spec.per_class = 20;
      spec.feature_dim = 64;
      spec.cluster_spread = 10.0;
      spec.noise = 1.5;
      spec.seed = static_cast<std::uint64_t>(seed);
      bier::SplitOptions so;
      so.seed = static_cast<std::uint64_t>(seed);
      const bier::Split data = bier::split(bier::synth_gaussian(spec), so);
      r.boosted.push_back(train_arm(data, seed, bier::MetricObjective::boosted, false));
      r.global.push_back(train_arm(data, seed, bier::MetricObjective::global, false));
      r.adversarial.push_back(train_arm(data, seed, bier::MetricObjective::boosted, true));
    }
    r.seconds = seconds_since(t0);
    return r;
  }();
  return results;
}

Outcome trend_boosting() {
  const TrendResults& r = trend_results();
  int ok = 0;
  std::string per_seed;
  for (int s = 0; s < kTrendSeeds; ++s) {
    const bool corr = r.boosted[s].feat_corr < r.global[s].feat_corr;
    const bool recall = r.boosted[s].r_at_1 >= r.boosted[s].best_learner;
    ok += corr && recall ? 1 : 0;
    per_seed += fmt(" [fc %.3f vs %.3f, R@1 %.3f", r.boosted[s].feat_corr, r.global[s].feat_corr,
                    r.boosted[s].r_at_1) +
                fmt(" vs best learner %.3f]", r.boosted[s].best_learner);
  }
  return {ok >= kTrendRequired && r.seconds < kTrendBudgetSeconds,
          std::to_string(ok) + "/5 seeds" + per_seed + fmt(", %.0f s for all arms", r.seconds)};
}

Outcome trend_adversarial() {
  const TrendResults& r = trend_results();
  int ok = 0;
  std::string per_seed;
  for (int s = 0; s < kTrendSeeds; ++s) {
    ok += r.adversarial[s].clf_corr <= r.boosted[s].clf_corr ? 1 : 0;
    per_seed += fmt(" [%.4f -> %.4f]", r.boosted[s].clf_corr, r.adversarial[s].clf_corr);
  }
  return {ok >= kTrendRequired, std::to_string(ok) + "/5 seeds, clf corr without -> with adversarial loss" +
                                    per_seed};
}

Outcome loss_constants() {
  const bier::LossSpec s;
  const bool defaults = s.beta1 == 2.0 && s.beta2 == 0.5 && s.margin_contrastive == 0.5 &&
                        s.margin_triplet == 0.01 && s.cost_pos == 1.0 && s.cost_neg == 25.0;
  const double spot = bier::pair_loss(s, 0.5, bier::PairLabel::positive).loss;
  const double err = std::fabs(spot - std::log(2.0));
  return {defaults && err <= 1e-15, fmt("beta1=%g beta2=%g", s.beta1, s.beta2) +
                                        fmt(" m_c=%g m_t=%g", s.margin_contrastive, s.margin_triplet) +
                                        fmt(" C+=%g C-=%g", s.cost_pos, s.cost_neg) +
                                        fmt(", l(0.5,1) - ln2 = %.1e", spot - std::log(2.0))};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"gradient fidelity", gradient_fidelity},
      {"boosting identity", boosting_identity},
      {"reduction equivalence", reduction_equivalence},
      {"gradient reversal sign", reversal_contract},
      {"group-size presets", preset_rows},
      {"recall oracle", recall_oracle},
      {"initialization post-condition", init_postcondition},
      {"desk trend: boosting vs global loss", trend_boosting},
      {"desk trend: adversarial auxiliary loss", trend_adversarial},
      {"loss constants", loss_constants},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << (i + 1) << " (" << criteria[i].first
              << "): " << o.detail << std::endl;
  }
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << '\n';
  return failures == 0 ? 0 : 1;
}
