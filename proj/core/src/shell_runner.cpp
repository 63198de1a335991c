#include <sys/wait.h>

#include <array>
#include <cerrno>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "layerpm/executor.hpp"

namespace layerpm {

namespace {

std::string
shell_quote(std::string_view text)
{
  std::string out = "'";
  for (char c : text) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out += c;
    }
  }
  out += '\'';
  return out;
}

} // namespace

RunResult
ShellRunner::run(const BuildJob& job)
{
  if (!job.decl.build) {
    std::ofstream witness(job.artifact_dir / "BUILT", std::ios::trunc);
    witness << job.name << ' ' << job.hash << '\n';
    if (!witness) {
      return {false, "cannot write witness file in " + job.artifact_dir.string()};
    }
    return {true, {}};
  }

  std::string externals;
  for (const auto& [name, resolution] : job.externals) {
    externals += externals.empty() ? "" : " ";
    externals += name + "=" + std::string(to_string(resolution.source));
  }
  const std::string command = "cd " + shell_quote(job.artifact_dir.string())
                              + " && LAYERPM_PACKAGE=" + shell_quote(job.name)
                              + " LAYERPM_HASH=" + job.hash
                              + " LAYERPM_EXTERNALS=" + shell_quote(externals)
                              + " /bin/sh -c " + shell_quote(*job.decl.build) + " 2>&1";

  FILE* pipe = ::popen(command.c_str(), "r");
  if (!pipe) {
    return {false, std::string("popen failed: ") + std::strerror(errno)};
  }
  RunResult result;
  std::array<char, 4096> buffer{};
  std::size_t n = 0;
  while ((n = std::fread(buffer.data(), 1, buffer.size(), pipe)) > 0) {
    result.log.append(buffer.data(), n);
  }
  const int status = ::pclose(pipe);
  result.success = status != -1 && WIFEXITED(status) && WEXITSTATUS(status) == 0;
  if (!result.success && status != -1 && WIFEXITED(status)) {
    result.log += "build command exited with status " + std::to_string(WEXITSTATUS(status)) + "\n";
  }
  return result;
}

} // namespace layerpm
