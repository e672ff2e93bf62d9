#pragma once

#include <stdexcept>
#include <string>

namespace dosegp {

// Error taxonomy. The CLI maps InputError to exit code 1 and everything else
// to exit code 2; library code never calls exit().

// Malformed user input: bad config, bad CSV, invalid argument combinations.
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Numerical failure after recovery attempts (e.g. a factorization that stays
// indefinite through the whole jitter ladder, or an optimizer that diverged
// on every restart).
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A requested computation exceeds a declared resource budget.
struct ResourceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// The synthetic-problem sampler exhausted its rejection budget.
struct GenerationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace dosegp
