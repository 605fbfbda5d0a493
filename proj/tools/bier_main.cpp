// bier: command-line front end for data generation, initialization, training,
// evaluation, gradient checks and partition inspection.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "bier/checkpoint.hpp"
#include "bier/config.hpp"
#include "bier/data_io.hpp"
#include "bier/ensemble.hpp"
#include "bier/errors.hpp"
#include "bier/eval.hpp"
#include "bier/gradcheck.hpp"
#include "bier/init_solver.hpp"
#include "bier/log.hpp"
#include "bier/model_io.hpp"
#include "bier/trainer.hpp"

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

// Options shared by every subcommand. Precedence, lowest first: built-in
// defaults, --config file, --set overrides, dedicated flags (--seed, --threads,
// --diversity).
struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
};

void add_common(CLI::App* cmd, Common& common, bool with_config) {
  if (with_config) cmd->add_option("--config", common.config_path, "config file of `key = value` lines");
  cmd->add_option("--set", common.overrides, "override a config key, e.g. --set lr=0.01 (repeatable)");
  cmd->add_option("--seed", common.seed, "seed for every random stream");
  cmd->add_option("--threads", common.threads, "worker threads for evaluation (default 1)");
}

bier::RunConfig build_config(const Common& common) {
  bier::RunConfig config;
  if (!common.config_path.empty()) bier::apply_config_file(config, common.config_path);
  for (const std::string& o : common.overrides) bier::apply_override(config, o);
  if (common.seed) bier::set_config_value(config, "seed", std::to_string(*common.seed));
  if (common.threads) config.eval.threads = *common.threads;
  config.validate();
  return config;
}

bier::FeatureSet load_data(const std::string& path) {
  if (!std::filesystem::exists(path)) throw bier::IoError("file not found: '" + path + "'");
  if (std::filesystem::path(path).extension() == ".csv") return bier::load_csv(path);
  return bier::load_features(path);
}

std::string join(const std::vector<std::size_t>& v, const char* sep) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += sep;
    out += std::to_string(v[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------

struct GenArgs {
  Common common;
  std::string out;
  std::string test_out;
};

int cmd_gen(const GenArgs& a) {
  const bier::RunConfig config = build_config(a.common);
  const bier::FeatureSet set = bier::synth_gaussian(config.synth);
  if (a.test_out.empty()) {
    bier::save_features(a.out, set);
    std::cout << "wrote " << set.size() << " samples (" << set.n_classes << " classes, dim " << set.dim() << ") to "
              << a.out << '\n';
    return kOk;
  }
  const bier::Split parts = bier::split(set, config.split);
  bier::save_features(a.out, parts.train);
  bier::save_features(a.test_out, parts.test);
  std::cout << "wrote " << parts.train.size() << " training samples to " << a.out << " and " << parts.test.size()
            << " test samples to " << a.test_out << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------

struct InitArgs {
  Common common;
  std::string data;
  std::string out;
  std::string diversity;
};

int cmd_init(const InitArgs& a) {
  bier::RunConfig config = build_config(a.common);
  const bier::FeatureSet data = load_data(a.data);

  bier::InitSolverConfig solver = config.init;
  if (!a.diversity.empty()) {
    solver.kind = bier::diversity_kind_from_string(a.diversity);
  } else if (config.train.diversity != bier::DiversityKind::none) {
    solver.kind = config.train.diversity;
  }
  if (solver.kind == bier::DiversityKind::none) throw bier::InvalidArgument("init needs a diversity kind");
  solver.regressor_hidden = config.train.regressor_hidden;
  solver.adversarial.normalizer = config.train.sim_normalizer;
  solver.adversarial.reverse_target_path = config.train.reverse_target_path;
  // The solver's bank is the one training continues with.
  if (solver.kind == bier::DiversityKind::adversarial) config.train.diversity = bier::DiversityKind::adversarial;

  bier::TrainState state = bier::init_state(config.train, data.dim());
  std::vector<bier::Vector> phi;
  phi.reserve(data.size());
  for (const bier::Vector& x : data.samples()) phi.push_back(bier::features(state.model, x));

  bier::Rng rng(bier::derive_seed(config.train.seed, bier::RngStream::bank));
  const bier::InitResult r = bier::init_solver(phi, state.model, solver, rng);
  for (const std::string& w : r.warnings) bier::log_warn(w);
  state.model.W = r.W;
  if (r.bank) state.bank = r.bank;
  bier::save_checkpoint(a.out, state);

  std::printf("diversity kind:      %s\n", std::string(bier::to_string(solver.kind)).c_str());
  std::printf("iterations:          %zu (%s)\n", r.iterations, r.converged ? "converged" : "iteration limit");
  std::printf("diversity loss:      %.9g -> %.9g\n", r.initial_loss, r.final_loss);
  std::printf("diversity term:      %.9g -> %.9g\n", r.initial_diversity_term, r.final_diversity_term);
  std::printf("squared norms:       [%.6f, %.6f] %s 1 +- %g\n", r.min_sq_norm, r.max_sq_norm,
              r.norms_in_band ? "within" : "OUTSIDE", solver.norm_band);
  if (r.bank) {
    std::printf("regressor bank:      %zu regressors, hidden %zu\n", r.bank->size(), solver.regressor_hidden);
  }
  std::printf("checkpoint:          %s\n", a.out.c_str());
  return kOk;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  Common common;
  std::string data;
  std::string out;
  std::string resume;
  std::string metrics;
  std::string eval_data;
  std::uint64_t stop_at = 0;
};

int cmd_train(const TrainArgs& a) {
  const bier::RunConfig config = build_config(a.common);
  const bier::FeatureSet train = load_data(a.data);
  std::optional<bier::FeatureSet> eval_set;
  if (!a.eval_data.empty()) eval_set = load_data(a.eval_data);
  std::optional<bier::TrainState> resume;
  if (!a.resume.empty()) resume = bier::load_checkpoint(a.resume);

  // Rows are appended to an existing metrics file when resuming a run that has
  // already taken steps; a fresh run (including one started from an init
  // checkpoint) starts a new file.
  std::ofstream metrics;
  if (!a.metrics.empty()) {
    const bool append = resume && resume->iteration > 0 && std::filesystem::exists(a.metrics);
    metrics.open(a.metrics, append ? std::ios::app : std::ios::trunc);
    if (!metrics) throw bier::IoError("cannot open '" + a.metrics + "' for writing");
    if (!append) bier::write_metrics_header(metrics);
  }
  bier::RunHooks hooks;
  hooks.stop_at = a.stop_at;
  hooks.on_row = [&](const bier::MetricsRow& row) {
    if (metrics.is_open()) {
      bier::write_metrics_row(metrics, row);
      metrics.flush();
    }
    bier::log_info("iter " + std::to_string(row.iter) + " r@1 " + std::to_string(row.r_at_1));
  };

  const bier::RunResult result =
      bier::run(config.train, train, eval_set ? &*eval_set : nullptr, std::move(resume), hooks);
  bier::save_checkpoint(a.out, result.state);

  std::printf("iterations:  %llu\n", static_cast<unsigned long long>(result.state.iteration));
  std::printf("partition:   %s\n", join(result.state.model.partition.sizes(), "-").c_str());
  if (!result.rows.empty()) {
    const bier::MetricsRow& last = result.rows.back();
    std::printf("loss_metric: %.6g\nloss_div:    %.6g\nR@1:         %.4f\n", last.loss_metric, last.loss_div,
                last.r_at_1);
  }
  std::printf("checkpoint:  %s\n", a.out.c_str());
  return kOk;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  Common common;
  std::string data;
  std::string ckpt;
  std::string ks;
  std::string csv;
};

int cmd_eval(const EvalArgs& a) {
  bier::RunConfig config = build_config(a.common);
  if (!a.ks.empty()) bier::set_config_value(config, "ks", a.ks);
  config.eval.embedding = config.train.embedding;
  const bier::FeatureSet data = load_data(a.data);
  if (!std::filesystem::exists(a.ckpt)) throw bier::IoError("file not found: '" + a.ckpt + "'");
  const bier::EnsembleModel model = bier::load_model(a.ckpt);

  const bier::EvalReport report = bier::evaluate(model, data, config.eval);
  bier::write_report_table(std::cout, report);
  std::cout << '\n';
  bier::write_report_csv(std::cout, report);
  if (!a.csv.empty()) {
    std::ofstream os(a.csv, std::ios::trunc);
    if (!os) throw bier::IoError("cannot open '" + a.csv + "' for writing");
    bier::write_report_csv(os, report);
  }
  return kOk;
}

// ---------------------------------------------------------------------------

struct GradcheckArgs {
  std::string module = "all";
  std::string inject_fault;
  std::size_t instances = 50;
  std::optional<std::uint64_t> seed;
};

int cmd_gradcheck(const GradcheckArgs& a) {
  bier::GradcheckOptions opt;
  if (a.module != "all") opt.modules = {a.module};
  opt.inject_fault = a.inject_fault;
  opt.instances = a.instances;
  if (a.seed) opt.seed = *a.seed;
  const bier::GradcheckReport report = bier::run_gradcheck(opt);

  for (const bier::CheckResult& c : report.checks) {
    std::printf("%-10s %-28s n=%-4zu worst rel err %.3e  %s\n", c.module.c_str(), c.name.c_str(), c.instances,
                c.worst_rel_error, c.passed ? "ok" : "FAILED");
  }
  for (const std::string& m : bier::gradcheck_modules()) {
    if (a.module != "all" && a.module != m) continue;
    std::printf("worst[%s] = %.3e\n", m.c_str(), report.worst(m));
  }
  if (!report.passed()) {
    for (const bier::CheckResult& c : report.checks) {
      if (!c.passed) std::fprintf(stderr, "gradient check failed: %s/%s\n", c.module.c_str(), c.name.c_str());
    }
    return kNumeric;
  }
  return kOk;
}

// ---------------------------------------------------------------------------

struct PartitionArgs {
  std::size_t d = 0;
  std::size_t m = 0;
  bool preset = false;
};

int cmd_partition(const PartitionArgs& a) {
  bier::GroupPartition part;
  if (a.preset) {
    const auto p = bier::preset_partition(a.d, a.m);
    if (!p) {
      throw bier::InvalidArgument("no preset partition for d=" + std::to_string(a.d) + ", M=" + std::to_string(a.m));
    }
    part = *p;
  } else {
    part = bier::proportional_partition(a.d, a.m);
  }
  std::cout << join(part.sizes(), " ") << '\n';
  return kOk;
}

template <typename F>
int guarded(F&& f) {
  try {
    return f();
  } catch (const bier::NumericFailure& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNumeric;
  } catch (const bier::PoisonedState& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNumeric;
  } catch (const bier::UndefinedCorrelation& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNumeric;
  } catch (const bier::FormatError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  } catch (const bier::IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  } catch (const bier::DegenerateInput& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  } catch (const bier::InvalidArgument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bier: boosted ensembles of metric embeddings"};
  app.require_subcommand(1);
  app.footer("Exit codes: 0 success, 1 usage, 2 data error, 3 numeric failure.\n"
             "Verbosity: BIER_LOG=error|warn|info|debug (default warn).\n"
             "Setting precedence: defaults < --config file < --set key=value < --seed/--threads/--diversity.\n"
             "\nConfig keys (with defaults):" +
             bier::config_reference());

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen", "generate a synthetic Gaussian-cluster feature file");
  gen_cmd->add_option("--spec", gen.common.config_path, "config file with the data keys");
  gen_cmd->add_option("--out", gen.out, "output feature file (training part when --test-out is given)")->required();
  gen_cmd->add_option("--test-out", gen.test_out, "split the data and write the test part here");
  add_common(gen_cmd, gen.common, false);

  InitArgs init;
  auto* init_cmd = app.add_subcommand("init", "initialize W by minimizing a diversity loss");
  init_cmd->add_option("--data", init.data, "feature file (.bin or .csv)")->required();
  init_cmd->add_option("--out", init.out, "output checkpoint")->required();
  init_cmd->add_option("--diversity", init.diversity, "activation or adversarial (default: config key)");
  add_common(init_cmd, init.common, true);

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "train a boosted embedding");
  train_cmd->add_option("--data", train.data, "training feature file")->required();
  train_cmd->add_option("--out", train.out, "output checkpoint")->required();
  train_cmd->add_option("--resume", train.resume, "continue from this checkpoint");
  train_cmd->add_option("--metrics", train.metrics, "write the metrics CSV here");
  train_cmd->add_option("--eval-data", train.eval_data, "evaluation set for metrics rows (default: training data)");
  train_cmd->add_option("--stop-at", train.stop_at, "stop after this many total iterations");
  add_common(train_cmd, train.common, true);

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "report Recall@K and diversity diagnostics");
  eval_cmd->add_option("--data", eval.data, "evaluation feature file")->required();
  eval_cmd->add_option("--ckpt", eval.ckpt, "model or checkpoint file")->required();
  eval_cmd->add_option("--ks", eval.ks, "comma-separated K values (default 1,2,4,8)");
  eval_cmd->add_option("--csv", eval.csv, "also write the report CSV here");
  add_common(eval_cmd, eval.common, true);

  GradcheckArgs gc;
  auto* gc_cmd = app.add_subcommand("gradcheck", "compare analytic gradients with finite differences");
  gc_cmd->add_option("--module", gc.module, "all, losses, boosting or diversity")
      ->check(CLI::IsMember({"all", "losses", "boosting", "diversity"}));
  gc_cmd->add_option("--inject-fault", gc.inject_fault, "flip the sign of the named gradient (self-test)");
  gc_cmd->add_option("--instances", gc.instances, "random instances per check (default 50)");
  gc_cmd->add_option("--seed", gc.seed, "seed of the random instances");

  PartitionArgs part;
  auto* part_cmd = app.add_subcommand("partition", "print the learner group sizes for d and M");
  part_cmd->add_option("--d", part.d, "embedding size")->required();
  part_cmd->add_option("--m", part.m, "number of learners")->required();
  part_cmd->add_flag("--preset", part.preset, "use the reference group-size table");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  if (*gen_cmd) return guarded([&] { return cmd_gen(gen); });
  if (*init_cmd) return guarded([&] { return cmd_init(init); });
  if (*train_cmd) return guarded([&] { return cmd_train(train); });
  if (*eval_cmd) return guarded([&] { return cmd_eval(eval); });
  if (*gc_cmd) return guarded([&] { return cmd_gradcheck(gc); });
  if (*part_cmd) return guarded([&] { return cmd_partition(part); });
  return kUsage;
}
