#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "bier/data_io.hpp"
#include "bier/eval.hpp"
#include "bier/init_solver.hpp"
#include "bier/trainer.hpp"

namespace bier {

/// Every tunable knob of the command-line tool, grouped by the component that
/// consumes it. Config files and `--set key=value` both write into this.
struct RunConfig {
  TrainConfig train;
  SynthSpec synth;
  SplitOptions split;
  EvalOptions eval;
  InitSolverConfig init;

  void validate() const;
};

struct ConfigKey {
  std::string_view name;
  std::string_view group;
  std::string_view help;
};

// All documented keys, in display order.
const std::vector<ConfigKey>& config_keys();

// Throws InvalidArgument for unknown keys or unparsable values.
void set_config_value(RunConfig& config, std::string_view key, std::string_view value);
std::string get_config_value(const RunConfig& config, std::string_view key);

/// Applies flat `key = value` lines. `#` starts a comment, blank lines are
/// ignored. Errors name the source and line number.
void apply_config_text(RunConfig& config, std::string_view text, std::string_view source = "config");
// Throws IoError when the file cannot be opened.
void apply_config_file(RunConfig& config, const std::filesystem::path& path);

// Applies a "key=value" override string.
void apply_override(RunConfig& config, std::string_view assignment);

// Every key with its default value and description.
std::string config_reference();
// Current values as a loadable config file.
std::string dump_config(const RunConfig& config);

}  // namespace bier
