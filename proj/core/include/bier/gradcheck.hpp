#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace bier {

struct GradcheckOptions {
  // Subset of {"losses", "boosting", "diversity"}; empty means all.
  std::vector<std::string> modules;
  std::size_t instances = 50;
  double step = 1e-6;
  double tolerance = 1e-5;
  // Denominator floor of the relative error, so exact zeros compare cleanly.
  double floor = 1e-8;
  std::uint64_t seed = 0;
  // Name of a check whose analytic gradient gets its sign flipped (harness self-test).
  std::string inject_fault;
};

struct CheckResult {
  std::string module;
  std::string name;
  std::size_t instances = 0;
  double worst_rel_error = 0.0;
  bool passed = true;
};

struct GradcheckReport {
  std::vector<CheckResult> checks;

  bool passed() const;
  // Worst relative error over the checks of one module (0 if none ran).
  double worst(const std::string& module) const;
};

const std::vector<std::string>& gradcheck_modules();
// Names of every check, for --inject-fault validation.
std::vector<std::string> gradcheck_names();

/// Compares every analytic gradient with central finite differences on random
/// instances: relative error |a - n| / max(|a|, |n|, floor) over the full
/// gradient vector of each instance. Throws InvalidArgument for unknown module
/// or fault names.
GradcheckReport run_gradcheck(const GradcheckOptions& options);

}  // namespace bier
