#include "bier/config.hpp"

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

#include "bier/errors.hpp"

namespace bier {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double parse_real(std::string_view v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw InvalidArgument("expected a number, got '" + std::string(v) + "'");
  }
  return out;
}

std::uint64_t parse_count(std::string_view v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw InvalidArgument("expected a non-negative integer, got '" + std::string(v) + "'");
  }
  return out;
}

bool parse_bool(std::string_view v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw InvalidArgument("expected true or false, got '" + std::string(v) + "'");
}

template <typename T>
std::vector<T> parse_list(std::string_view v) {
  std::vector<T> out;
  while (!v.empty()) {
    const auto comma = v.find(',');
    const std::string_view item = trim(v.substr(0, comma));
    out.push_back(static_cast<T>(parse_count(item)));
    if (comma == std::string_view::npos) break;
    v.remove_prefix(comma + 1);
  }
  if (out.empty()) throw InvalidArgument("expected a comma-separated list");
  return out;
}

template <typename T>
std::string format_list(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(v[i]);
  }
  return out;
}

std::string fmt_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  // Prefer the shortest representation that round-trips.
  for (int p = 1; p <= 17; ++p) {
    char shorter[32];
    std::snprintf(shorter, sizeof shorter, "%.*g", p, v);
    if (std::strtod(shorter, nullptr) == v) return shorter;
  }
  return buf;
}

std::string fmt_bool(bool b) { return b ? "true" : "false"; }

std::string_view partition_name(PartitionSource s) {
  switch (s) {
    case PartitionSource::proportional: return "proportional";
    case PartitionSource::preset: return "preset";
    case PartitionSource::explicit_sizes: return "explicit";
  }
  return "?";
}

PartitionSource partition_from(std::string_view v) {
  if (v == "proportional") return PartitionSource::proportional;
  if (v == "preset") return PartitionSource::preset;
  if (v == "explicit") return PartitionSource::explicit_sizes;
  throw InvalidArgument("unknown partition source '" + std::string(v) + "'");
}

SimNormalizer normalizer_from(std::string_view v) {
  if (v == "source") return SimNormalizer::source_dim;
  if (v == "target") return SimNormalizer::target_dim;
  throw InvalidArgument("unknown similarity normalizer '" + std::string(v) + "' (source|target)");
}

SplitMode split_from(std::string_view v) {
  if (v == "disjoint") return SplitMode::disjoint_classes;
  if (v == "within_class") return SplitMode::within_class;
  throw InvalidArgument("unknown split mode '" + std::string(v) + "' (disjoint|within_class)");
}

struct Entry {
  ConfigKey key;
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define BIER_REAL(NAME, GROUP, HELP, FIELD)                                        \
  Entry {                                                                          \
    {NAME, GROUP, HELP}, [](RunConfig& c, std::string_view v) { c.FIELD = parse_real(v); }, \
        [](const RunConfig& c) { return fmt_real(c.FIELD); }                       \
  }
#define BIER_COUNT(NAME, GROUP, HELP, FIELD)                                                  \
  Entry {                                                                                     \
    {NAME, GROUP, HELP},                                                                      \
        [](RunConfig& c, std::string_view v) { c.FIELD = static_cast<decltype(c.FIELD)>(parse_count(v)); }, \
        [](const RunConfig& c) { return std::to_string(c.FIELD); }                            \
  }
#define BIER_BOOL(NAME, GROUP, HELP, FIELD)                                        \
  Entry {                                                                          \
    {NAME, GROUP, HELP}, [](RunConfig& c, std::string_view v) { c.FIELD = parse_bool(v); }, \
        [](const RunConfig& c) { return fmt_bool(c.FIELD); }                       \
  }

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = {
      Entry{{"seed", "general", "seed for every random stream (data, split, model, batches)"},
            [](RunConfig& c, std::string_view v) {
              const std::uint64_t s = parse_count(v);
              c.train.seed = s;
              c.synth.seed = s;
              c.split.seed = s;
              c.eval.seed = s;
            },
            [](const RunConfig& c) { return std::to_string(c.train.seed); }},

      // Synthetic data.
      BIER_COUNT("classes", "data", "number of synthetic classes", synth.classes),
      BIER_COUNT("per_class", "data", "synthetic samples per class", synth.per_class),
      BIER_COUNT("feature_dim", "data", "synthetic feature dimension h", synth.feature_dim),
      BIER_REAL("cluster_spread", "data", "radius of the sphere holding class centers", synth.cluster_spread),
      BIER_REAL("noise", "data", "standard deviation of per-sample noise", synth.noise),
      Entry{{"split_mode", "data", "disjoint (whole classes per side) or within_class"},
            [](RunConfig& c, std::string_view v) { c.split.mode = split_from(v); },
            [](const RunConfig& c) {
              return std::string(c.split.mode == SplitMode::disjoint_classes ? "disjoint" : "within_class");
            }},
      BIER_REAL("train_fraction", "data", "fraction of classes (disjoint) or samples (within_class) for training",
                split.train_fraction),
      BIER_BOOL("shuffle_classes", "data", "draw the training classes at random instead of taking the first ones",
                split.shuffle_classes),

      // Loss.
      Entry{{"loss", "loss", "binomial_deviance, contrastive or triplet"},
            [](RunConfig& c, std::string_view v) { c.train.loss.kind = loss_kind_from_string(v); },
            [](const RunConfig& c) { return std::string(to_string(c.train.loss.kind)); }},
      BIER_REAL("beta1", "loss", "binomial deviance scale", train.loss.beta1),
      BIER_REAL("beta2", "loss", "binomial deviance translation", train.loss.beta2),
      BIER_REAL("margin_contrastive", "loss", "contrastive loss margin", train.loss.margin_contrastive),
      BIER_REAL("margin_triplet", "loss", "triplet loss margin", train.loss.margin_triplet),
      BIER_REAL("cost_pos", "loss", "binomial deviance cost of positive pairs", train.loss.cost_pos),
      BIER_REAL("cost_neg", "loss", "binomial deviance cost of negative pairs", train.loss.cost_neg),
      Entry{{"objective", "loss", "boosted, global (one loss on the whole embedding) or independent"},
            [](RunConfig& c, std::string_view v) { c.train.objective = metric_objective_from_string(v); },
            [](const RunConfig& c) { return std::string(to_string(c.train.objective)); }},
      BIER_BOOL("boost_weight_signed", "loss", "use the signed loss derivative as sample weight",
                train.boost_weight_signed),

      // Embedding.
      BIER_COUNT("embedding_dim", "model", "total embedding size d", train.embedding_dim),
      BIER_COUNT("learners", "model", "number of learners M", train.learners),
      Entry{{"partition", "model", "proportional, preset or explicit"},
            [](RunConfig& c, std::string_view v) { c.train.partition_source = partition_from(v); },
            [](const RunConfig& c) { return std::string(partition_name(c.train.partition_source)); }},
      Entry{{"group_sizes", "model", "comma-separated group sizes; implies partition = explicit"},
            [](RunConfig& c, std::string_view v) {
              c.train.group_sizes = parse_list<std::size_t>(v);
              c.train.partition_source = PartitionSource::explicit_sizes;
            },
            [](const RunConfig& c) { return format_list(c.train.group_sizes); }},
      BIER_COUNT("backbone_dim", "model", "width of a trainable rectifier layer before the embedding (0: none)",
                 train.backbone_dim),
      BIER_BOOL("backbone_trainable", "model", "let the metric loss update the backbone", train.backbone_trainable),
      BIER_REAL("weight_exponent", "model", "test embedding scales group m by alpha_m to this power",
                train.embedding.weight_exponent),
      BIER_BOOL("renormalize_full", "model", "L2-normalize the concatenated test embedding",
                train.embedding.renormalize_full),

      // Diversity.
      Entry{{"diversity", "diversity", "none, activation or adversarial"},
            [](RunConfig& c, std::string_view v) { c.train.diversity = diversity_kind_from_string(v); },
            [](const RunConfig& c) { return std::string(to_string(c.train.diversity)); }},
      Entry{{"lambda_div", "diversity", "weight of the diversity loss (auto: 1e-3 adversarial, 1e-2 activation)"},
            [](RunConfig& c, std::string_view v) {
              if (v == "auto") {
                c.train.lambda_div.reset();
              } else {
                c.train.lambda_div = parse_real(v);
              }
            },
            [](const RunConfig& c) {
              return c.train.lambda_div ? fmt_real(*c.train.lambda_div) : std::string("auto");
            }},
      BIER_REAL("lambda_w", "diversity", "weight of the unit-norm penalties inside the diversity loss",
                train.lambda_w),
      BIER_COUNT("regressor_hidden", "diversity", "hidden width of the adversarial regressors",
                 train.regressor_hidden),
      Entry{{"sim_normalizer", "diversity", "divide each regressor similarity by the source or target size"},
            [](RunConfig& c, std::string_view v) { c.train.sim_normalizer = normalizer_from(v); },
            [](const RunConfig& c) {
              return std::string(c.train.sim_normalizer == SimNormalizer::source_dim ? "source" : "target");
            }},
      BIER_BOOL("reverse_target_path", "diversity", "reverse the similarity gradient on the target learner too",
                train.reverse_target_path),

      // Optimization.
      Entry{{"optimizer", "optim", "adam or sgd (with momentum)"},
            [](RunConfig& c, std::string_view v) { c.train.optim.kind = optim_kind_from_string(v); },
            [](const RunConfig& c) { return std::string(to_string(c.train.optim.kind)); }},
      BIER_REAL("lr", "optim", "learning rate", train.optim.lr),
      BIER_REAL("momentum", "optim", "SGD momentum", train.optim.momentum),
      BIER_REAL("adam_beta1", "optim", "Adam first-moment decay", train.optim.adam_beta1),
      BIER_REAL("adam_beta2", "optim", "Adam second-moment decay", train.optim.adam_beta2),
      BIER_REAL("adam_eps", "optim", "Adam denominator guard", train.optim.adam_eps),
      BIER_COUNT("iterations", "optim", "training iterations", train.iterations),
      BIER_COUNT("classes_per_batch", "optim", "classes drawn per batch (P)", train.classes_per_batch),
      BIER_COUNT("samples_per_class", "optim", "samples drawn per class (K)", train.samples_per_class),
      BIER_COUNT("max_pairs_per_batch", "optim", "cap on mined pairs, negatives subsampled (0: no cap)",
                 train.max_pairs_per_batch),

      // Evaluation.
      BIER_COUNT("eval_interval", "eval", "iterations between metrics rows (0: only at the end)",
                 train.eval_interval),
      BIER_COUNT("eval_max_pairs", "eval", "pairs used for the classifier correlation during training",
                 train.eval_max_pairs),
      Entry{{"ks", "eval", "comma-separated K values for Recall@K"},
            [](RunConfig& c, std::string_view v) { c.eval.ks = parse_list<std::size_t>(v); },
            [](const RunConfig& c) { return format_list(c.eval.ks); }},
      BIER_COUNT("report_max_pairs", "eval", "pairs used for the classifier correlation in reports",
                 eval.max_pairs),
      BIER_COUNT("threads", "eval", "worker threads for evaluation", eval.threads),

      // Initialization solver.
      BIER_REAL("init_lambda_w", "init", "unit-norm penalty weight during initialization", init.lambda_w),
      BIER_REAL("init_lr", "init", "initialization SGD learning rate", init.lr),
      BIER_REAL("init_momentum", "init", "initialization SGD momentum", init.momentum),
      BIER_COUNT("init_max_iterations", "init", "initialization iteration limit", init.max_iterations),
      BIER_REAL("init_rel_tol", "init", "stop when the relative loss change over the window drops below this",
                init.rel_tol),
      BIER_COUNT("init_window", "init", "window (iterations) of the convergence test", init.window),
      BIER_REAL("init_norm_band", "init", "tolerated deviation of squared column norms from 1", init.norm_band),
  };
  return table;
}

#undef BIER_REAL
#undef BIER_COUNT
#undef BIER_BOOL

const Entry& find(std::string_view key) {
  for (const Entry& e : entries()) {
    if (e.key.name == key) return e;
  }
  throw InvalidArgument("unknown config key '" + std::string(key) + "'");
}

}  // namespace

void RunConfig::validate() const {
  train.validate();
  synth.validate();
  if (!(split.train_fraction > 0.0 && split.train_fraction <= 1.0)) {
    throw InvalidArgument("train_fraction must lie in (0, 1]");
  }
  if (eval.ks.empty()) throw InvalidArgument("ks must not be empty");
  for (std::size_t k : eval.ks) {
    if (k == 0) throw InvalidArgument("ks entries must be positive");
  }
  if (eval.threads == 0) throw InvalidArgument("threads must be positive");
  if (init.lambda_w < 0.0 || init.lr <= 0.0 || init.momentum < 0.0 || init.momentum >= 1.0) {
    throw InvalidArgument("invalid initialization solver settings");
  }
  if (init.window == 0) throw InvalidArgument("init_window must be positive");
}

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> out;
    for (const Entry& e : entries()) out.push_back(e.key);
    return out;
  }();
  return keys;
}

void set_config_value(RunConfig& config, std::string_view key, std::string_view value) {
  const Entry& e = find(key);
  try {
    e.set(config, value);
  } catch (const InvalidArgument& err) {
    throw InvalidArgument("config key '" + std::string(key) + "': " + err.what());
  }
}

std::string get_config_value(const RunConfig& config, std::string_view key) { return find(key).get(config); }

void apply_config_text(RunConfig& config, std::string_view text, std::string_view source) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);

    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;

    const auto eq = line.find('=');
    const std::string where = std::string(source) + " line " + std::to_string(line_no) + ": ";
    if (eq == std::string_view::npos) throw InvalidArgument(where + "expected 'key = value'");
    const std::string_view key = trim(line.substr(0, eq));
    const std::string_view value = trim(line.substr(eq + 1));
    if (key.empty()) throw InvalidArgument(where + "missing key");
    try {
      set_config_value(config, key, value);
    } catch (const InvalidArgument& err) {
      throw InvalidArgument(where + err.what());
    }
  }
}

void apply_config_file(RunConfig& config, const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("file not found: '" + path.string() + "'");
  std::ostringstream ss;
  ss << is.rdbuf();
  apply_config_text(config, ss.str(), path.string());
}

void apply_override(RunConfig& config, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw InvalidArgument("override '" + std::string(assignment) + "' is not of the form key=value");
  }
  set_config_value(config, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

std::string config_reference() {
  const RunConfig defaults;
  std::ostringstream os;
  std::string_view group;
  for (const Entry& e : entries()) {
    if (e.key.group != group) {
      group = e.key.group;
      os << "\n[" << group << "]\n";
    }
    os << "  " << e.key.name << " = " << e.get(defaults) << "\n      " << e.key.help << '\n';
  }
  return os.str();
}

std::string dump_config(const RunConfig& config) {
  std::ostringstream os;
  for (const Entry& e : entries()) {
    const std::string value = e.get(config);
    // An empty list has no loadable spelling; leave it as a comment.
    if (value.empty()) {
      os << "# " << e.key.name << " =\n";
    } else {
      os << e.key.name << " = " << value << '\n';
    }
  }
  return os.str();
}

}  // namespace bier
