#pragma once

#include <string>

namespace spoofbreak {

struct CommandResult {
  int exit_code = -1;
  std::string out;
};

// Runs a shell command, capturing standard output.
CommandResult run_command(const std::string& command);

// Model/plugin scratch directory: $SPOOFBREAK_CACHE if set, else a fixed
// location under /tmp. Created on first use.
std::string cache_dir();

// Unique path inside cache_dir() (pid + counter based).
std::string temp_path(const std::string& prefix, const std::string& suffix);

// Single-quotes a string for safe interpolation into a shell command.
std::string shell_quote(const std::string& s);

}  // namespace spoofbreak
