#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "layerpm/planner.hpp"
#include "layerpm/resolver.hpp"
#include "layerpm/store.hpp"

namespace layerpm {

struct BuildJob {
  const std::string& name;
  const PackageDecl& decl;
  const std::string& hash;
  // Resolutions of the externals this package declares.
  const std::map<std::string, ExternalResolution>& externals;
  // Created by the executor before the job runs.
  const std::filesystem::path& artifact_dir;
};

struct RunResult {
  bool success = false;
  std::string log;
};

// Performs one package build. Runners are called concurrently from several
// threads and must not touch the install state; only the executor does.
class Runner
{
public:
  virtual ~Runner() = default;
  virtual RunResult run(const BuildJob& job) = 0;
};

// Runs the package's `build:` command through /bin/sh inside its artifact
// directory, or writes a BUILT witness file when there is no command.
class ShellRunner : public Runner
{
public:
  RunResult run(const BuildJob& job) override;
};

enum class Outcome { built, failed, skipped };

std::string_view to_string(Outcome outcome);

struct PackageOutcome {
  std::string name;
  std::size_t layer = 0;
  Outcome outcome = Outcome::skipped;
  std::chrono::duration<double> wall_time{};
  std::string log;
  std::optional<ErrorCode> error; // E_RUNNER_PANIC when the runner threw
};

struct ExecutionReport {
  std::vector<PackageOutcome> packages; // plan order

  bool success() const noexcept;
  std::size_t count(Outcome outcome) const noexcept;
  const PackageOutcome* find(std::string_view name) const noexcept;
};

struct ExecuteOptions {
  std::size_t jobs = 1;
  // Stop starting packages after the first failure; the rest are skipped.
  bool fail_fast = false;
  StoreHooks store_hooks;
};

// Runs the plan layer by layer, at most `jobs` packages at a time. A layer
// starts only after the previous one settled. Failures skip their planned
// dependents and nothing else. Each success is committed to `state` and the
// state file before the report returns. Throws E_STATE_LOCKED and
// E_STATE_CORRUPT.
ExecutionReport execute(const PackageMap& map,
                        const ResolutionReport& report,
                        const BuildPlan& plan,
                        Runner& runner,
                        const std::filesystem::path& state_dir,
                        InstallState& state,
                        const ExecuteOptions& options = {});

inline constexpr std::string_view kNothingToBuild = "nothing to build";

// serialize_plan() (or the sentinel line) followed by `external ...` lines.
std::string dry_run(const BuildPlan& plan, const ResolutionReport& report);

// `NAME<TAB>OUTCOME` per package in plan order. Timing is left out so the
// text is deterministic.
std::string serialize_execution(const ExecutionReport& report);

} // namespace layerpm
