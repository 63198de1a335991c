#include "layerpm/error.hpp"

namespace layerpm {

std::string_view
to_string(ErrorCode code)
{
  switch (code) {
  case ErrorCode::syntax: return "E_SYNTAX";
  case ErrorCode::duplicate: return "E_DUP";
  case ErrorCode::self_dependency: return "E_SELF";
  case ErrorCode::unknown_dep: return "E_UNKNOWN_DEP";
  case ErrorCode::cycle: return "E_CYCLE";
  case ErrorCode::unknown_package: return "E_UNKNOWN_PKG";
  case ErrorCode::disabled_required: return "E_DISABLED_REQUIRED";
  case ErrorCode::missing_external: return "E_MISSING_EXTERNAL";
  case ErrorCode::not_enabled: return "E_NOT_ENABLED";
  case ErrorCode::state_corrupt: return "E_STATE_CORRUPT";
  case ErrorCode::state_locked: return "E_STATE_LOCKED";
  case ErrorCode::runner_panic: return "E_RUNNER_PANIC";
  case ErrorCode::lock_conflict: return "E_LOCK_CONFLICT";
  case ErrorCode::probe_syntax: return "E_PROBE_SYNTAX";
  case ErrorCode::io: return "E_IO";
  case ErrorCode::truncated: return "W_TRUNCATED";
  }
  return "E_UNKNOWN";
}

} // namespace layerpm
