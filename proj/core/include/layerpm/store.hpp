#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <string_view>

#include "layerpm/pkgmap.hpp"
#include "layerpm/resolver.hpp"

namespace layerpm {

// Store directory layout:
//
//   <dir>/state.txt        one line per built package
//   <dir>/lock.txt         external resolutions
//   <dir>/cache/<hash>/    per-package artifact directory
//   <dir>/.layerpm.lock    advisory lock held by a running executor
//
// A state line is `NAME HASH BUILT_AT CHAIN` where CHAIN is the running
// SHA-256 over the canonical `NAME HASH\n` entries so far. The last CHAIN is
// the state digest; built_at never enters it.

struct StateEntry {
  std::string hash;
  std::string built_at; // UTC, informational only

  friend bool operator==(const StateEntry&, const StateEntry&) = default;
};

struct InstallState {
  std::map<std::string, StateEntry> entries;
  std::string state_digest = empty_digest();

  bool is_built(std::string_view name, std::string_view hash) const;

  static std::string empty_digest();
};

std::string compute_state_digest(const InstallState& state);

// Throws E_STATE_CORRUPT when the stored digest or any entry hash is off.
void verify_state(const InstallState& state);

std::string serialize_state(const InstallState& state);
InstallState parse_state(std::string_view text); // throws E_STATE_CORRUPT

std::filesystem::path state_file(const std::filesystem::path& dir);
std::filesystem::path lock_file(const std::filesystem::path& dir);
std::filesystem::path cache_dir(const std::filesystem::path& dir, std::string_view hash);

// Missing file yields an empty state. Never repairs a damaged file.
InstallState load_state(const std::filesystem::path& dir);

struct StoreHooks {
  // Runs after the temporary file is complete and before it replaces the
  // target. Throwing here aborts the write and leaves the old file intact.
  std::function<void(const std::filesystem::path& tmp)> before_rename;
};

// Write to a temporary sibling, fsync, then rename over `path`.
void write_file_atomic(const std::filesystem::path& path,
                       std::string_view content,
                       const StoreHooks& hooks = {});

// Upsert `name` and rewrite state.txt atomically.
InstallState record_built(const std::filesystem::path& dir,
                          InstallState state,
                          const std::string& name,
                          const std::string& hash,
                          const StoreHooks& hooks = {});

struct LockEntry {
  ExternalSource source = ExternalSource::system;
  std::string provenance;

  friend bool operator==(const LockEntry&, const LockEntry&) = default;
};

struct Lockfile {
  std::map<std::string, LockEntry> resolutions;

  friend bool operator==(const Lockfile&, const Lockfile&) = default;
};

// `external NAME SOURCE PROVENANCE` per line, sorted by name.
std::string serialize_lockfile(const Lockfile& lock);
Lockfile parse_lockfile(std::string_view text); // throws E_STATE_CORRUPT

Lockfile read_lockfile(const std::filesystem::path& dir);
void write_lockfile(const std::filesystem::path& dir, const Lockfile& lock);

// Lock entries for the report's externals, layered over `base`. Missing
// resolutions are never recorded.
Lockfile merge_lockfile(Lockfile base, const ResolutionReport& report);

// Replace fresh resolutions in `report` by the locked ones. A locked source
// that can no longer be satisfied (system entry gone from the probe, builtin
// provider not enabled) throws E_LOCK_CONFLICT.
void apply_lockfile(const PackageMap& map,
                    ResolutionReport& report,
                    const Lockfile& lock,
                    const SystemProbe& probe);

// Exclusive advisory lock on a state directory (flock). Released on
// destruction or process exit.
class StateLock
{
public:
  // Throws E_STATE_LOCKED if another holder exists.
  explicit StateLock(const std::filesystem::path& dir);
  ~StateLock();

  StateLock(const StateLock&) = delete;
  StateLock& operator=(const StateLock&) = delete;

private:
  int fd_ = -1;
};

// Current UTC time as YYYY-MM-DDTHH:MM:SSZ.
std::string utc_timestamp();

} // namespace layerpm
