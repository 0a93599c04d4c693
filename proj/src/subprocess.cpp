#include "spoofbreak/subprocess.hpp"

#include <sys/stat.h>
#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <atomic>
#include <cstdio>
#include <cstdlib>

#include "spoofbreak/error.hpp"

namespace spoofbreak {

CommandResult run_command(const std::string& command) {
  CommandResult result;
  FILE* pipe = ::popen(command.c_str(), "r");
  if (!pipe) throw BackendError("failed to spawn command: " + command);
  std::array<char, 4096> buf;
  size_t n;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0)
    result.out.append(buf.data(), n);
  const int status = ::pclose(pipe);
  if (status == -1)
    result.exit_code = -1;
  else if (WIFEXITED(status))
    result.exit_code = WEXITSTATUS(status);
  else
    result.exit_code = 128;
  return result;
}

std::string cache_dir() {
  const char* env = std::getenv("SPOOFBREAK_CACHE");
  std::string dir = (env && *env) ? env : "/tmp/spoofbreak-cache";
  ::mkdir(dir.c_str(), 0755);  // EEXIST is fine
  return dir;
}

std::string temp_path(const std::string& prefix, const std::string& suffix) {
  static std::atomic<unsigned long> counter{0};
  const unsigned long id = counter.fetch_add(1);
  return cache_dir() + "/" + prefix + "-" + std::to_string(::getpid()) + "-" +
         std::to_string(id) + suffix;
}

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'')
      out += "'\\''";
    else
      out += c;
  }
  out += "'";
  return out;
}

}  // namespace spoofbreak
