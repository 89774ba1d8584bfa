#pragma once

#include <stdexcept>
#include <string>

namespace fgrlhf {

// Token id outside [0, V) handed to a transition or lookup.
struct InvalidTokenError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite logits, probabilities, or objectives.
struct NumericalOverflowError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Array arguments whose lengths disagree with the documented contract.
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Malformed or contradictory run configuration. CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Feedback span set that violates an annotation restriction.
struct AnnotationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Reward combination called with a missing segment reward.
struct IncompleteRewardError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Score that has no defined value (e.g. completeness with no gold units).
struct UndefinedScoreError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Training produced a non-finite objective. CLI maps this to exit code 3.
struct TrainingAbortError : std::runtime_error {
  explicit TrainingAbortError(const std::string& what, std::string diagnostic_dump)
      : std::runtime_error(what), dump(std::move(diagnostic_dump)) {}
  // Line-delimited episode records from the offending batch.
  std::string dump;
};

// File contents that do not parse as the documented format.
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace fgrlhf
