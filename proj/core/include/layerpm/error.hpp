#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace layerpm {

// Stable error codes. The string form ("E_CYCLE", ...) is what users see in
// diagnostics and what the CLI maps to exit statuses.
enum class ErrorCode {
  syntax,
  duplicate,
  self_dependency,
  unknown_dep,
  cycle,
  unknown_package,
  disabled_required,
  missing_external,
  not_enabled,
  state_corrupt,
  state_locked,
  runner_panic,
  lock_conflict,
  probe_syntax,
  io,
  truncated,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& message)
    : std::runtime_error(message), code_(code)
  {
  }

  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

} // namespace layerpm
