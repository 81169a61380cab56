#pragma once

#include <optional>
#include <ostream>
#include <string>

namespace covar::cli {

/// Exit codes of a run.
inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailed = 1;
inline constexpr int kExitConfigError = 2;

struct Options {
  std::string config;
  /// Report directory; defaults to the config's `output` key, else "covar-report".
  std::optional<std::string> output;
  /// Overrides the recipe tolerance.
  std::optional<double> tolerance;
  /// Overrides the point count of every grid axis.
  std::optional<int> resolution;
  /// Overrides the finite-difference order (2 or 4).
  std::optional<int> order;
};

/// Runs the recipe named in the config. Writes `report.jsonl` (one JSON object
/// per check) to the output directory and a human summary to `out`.
int run(const Options& options, std::ostream& out, std::ostream& err);

/// Command-line entry point: parses flags, then calls run().
int main(int argc, char** argv);

}  // namespace covar::cli
