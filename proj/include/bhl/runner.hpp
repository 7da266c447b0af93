#pragma once

#include <iosfwd>
#include <string>

#include "bhl/config.hpp"

namespace bhl {

struct RunOutcome {
  int exit_code = 1;  // 0 success, 2 acceptance-threshold failure, 1 error
  bool pass = false;
  std::string run_dir;
  std::string message;
};

// Execute the experiment named by the config and write table.csv,
// summary.json and manifest.json under the run directory.
RunOutcome run_config_file(const std::string& config_path, const std::string& output_override = "",
                           std::ostream* log = nullptr);

// Schema/invariant checks only.
ValidationReport validate_config_file(const std::string& config_path);

// Re-render the human-readable summary of a finished run directory.
int report_run_dir(const std::string& run_dir, std::ostream& os);

std::string config_digest(const std::string& text);

}  // namespace bhl
