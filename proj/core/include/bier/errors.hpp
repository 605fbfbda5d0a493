#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace bier {

// Precondition violated by the caller (shapes, counts, option values).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Input is well-formed but numerically degenerate (zero norm, empty group output).
class DegenerateInput : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Correlation requested on a constant sequence or an empty pair domain.
class UndefinedCorrelation : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// NaN/Inf reached an optimizer; the step was refused and state left untouched.
class PoisonedState : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An iterative procedure diverged (loss became non-finite).
class NumericFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed file contents. `offset` is the byte offset (binary formats) or
// the 1-based line number (text formats) where parsing stopped.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : std::runtime_error(what), offset_(offset) {}

  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

}  // namespace bier
