#pragma once

#include <stdexcept>
#include <string>

namespace dssync {

// Bad user input: unknown field, inconsistent sizes, malformed file.
// The CLI maps this to exit code 1.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A worker produced a non-finite loss or parameter during training.
// The CLI maps this to exit code 2.
struct DivergenceError : std::runtime_error {
  DivergenceError(int rank, long iteration, const std::string& what)
      : std::runtime_error("worker " + std::to_string(rank) + " diverged at iteration " +
                           std::to_string(iteration) + ": " + what),
        rank(rank),
        iteration(iteration) {}

  int rank;
  long iteration;
};

}  // namespace dssync
