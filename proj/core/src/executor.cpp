#include "layerpm/executor.hpp"

#include <algorithm>
#include <atomic>
#include <mutex>
#include <stdexcept>
#include <thread>

namespace fs = std::filesystem;

namespace layerpm {

std::string_view
to_string(Outcome outcome)
{
  switch (outcome) {
  case Outcome::built: return "built";
  case Outcome::failed: return "failed";
  case Outcome::skipped: return "skipped";
  }
  return "skipped";
}

bool
ExecutionReport::success() const noexcept
{
  return std::none_of(packages.begin(), packages.end(), [](const auto& p) {
    return p.outcome != Outcome::built;
  });
}

std::size_t
ExecutionReport::count(Outcome outcome) const noexcept
{
  return static_cast<std::size_t>(std::count_if(
    packages.begin(), packages.end(), [outcome](const auto& p) { return p.outcome == outcome; }));
}

const PackageOutcome*
ExecutionReport::find(std::string_view name) const noexcept
{
  auto it = std::find_if(packages.begin(), packages.end(), [name](const auto& p) {
    return p.name == name;
  });
  return it == packages.end() ? nullptr : &*it;
}

ExecutionReport
execute(const PackageMap& map,
        const ResolutionReport& report,
        const BuildPlan& plan,
        Runner& runner,
        const fs::path& state_dir,
        InstallState& state,
        const ExecuteOptions& options)
{
  if (options.jobs == 0) {
    throw std::invalid_argument("jobs must be at least 1");
  }

  ExecutionReport result;
  if (plan.empty()) {
    return result;
  }

  StateLock lock(state_dir);
  verify_state(state);

  std::map<std::string, std::vector<std::string>> planned_deps;
  for (const auto& [from, to] : report.edges) {
    if (plan.reasons.contains(from) && plan.reasons.contains(to)) {
      planned_deps[from].push_back(to);
    }
  }

  std::map<std::string, Outcome> settled;
  std::mutex commit_mutex;
  std::atomic<bool> any_failure{false};

  for (std::size_t layer_index = 0; layer_index < plan.layers.size(); ++layer_index) {
    const auto& layer = plan.layers[layer_index];
    const std::size_t base = result.packages.size();

    std::vector<std::size_t> runnable;
    for (const auto& name : layer) {
      PackageOutcome entry;
      entry.name = name;
      entry.layer = layer_index;
      const auto& deps = planned_deps[name];
      const bool blocked = std::any_of(deps.begin(), deps.end(), [&](const auto& dep) {
        return settled.at(dep) != Outcome::built;
      });
      if (!blocked && !(options.fail_fast && any_failure)) {
        runnable.push_back(result.packages.size());
      }
      result.packages.push_back(std::move(entry));
    }

    std::atomic<std::size_t> next{0};
    const auto worker = [&]() {
      while (true) {
        const auto slot = next.fetch_add(1);
        if (slot >= runnable.size()) {
          return;
        }
        auto& entry = result.packages[runnable[slot]];
        if (options.fail_fast && any_failure) {
          continue;
        }

        const auto& decl = map.at(entry.name);
        const auto& hash = plan.hashes.at(entry.name);
        std::map<std::string, ExternalResolution> externals;
        for (const auto& external : decl.externals) {
          if (auto it = report.externals.find(external); it != report.externals.end()) {
            externals.emplace(external, it->second);
          }
        }

        const auto started = std::chrono::steady_clock::now();
        RunResult run;
        try {
          const auto artifact_dir = cache_dir(state_dir, hash);
          fs::create_directories(artifact_dir);
          run = runner.run(BuildJob{entry.name, decl, hash, externals, artifact_dir});
        } catch (const std::exception& e) {
          run = {false, e.what()};
          entry.error = ErrorCode::runner_panic;
        } catch (...) {
          run = {false, "runner threw a non-standard exception"};
          entry.error = ErrorCode::runner_panic;
        }
        entry.log = std::move(run.log);

        if (run.success) {
          std::lock_guard guard(commit_mutex);
          try {
            state = record_built(state_dir, state, entry.name, hash, options.store_hooks);
            entry.outcome = Outcome::built;
          } catch (const std::exception& e) {
            entry.log += std::string(entry.log.empty() ? "" : "\n") + "failed to record build: " + e.what();
            entry.outcome = Outcome::failed;
            entry.error = ErrorCode::io;
          }
        } else {
          entry.outcome = Outcome::failed;
        }
        entry.wall_time = std::chrono::steady_clock::now() - started;
        if (entry.outcome == Outcome::failed) {
          any_failure = true;
        }
      }
    };

    const auto workers = std::min(options.jobs, runnable.size());
    if (workers <= 1) {
      worker();
    } else {
      std::vector<std::jthread> pool;
      pool.reserve(workers);
      for (std::size_t i = 0; i < workers; ++i) {
        pool.emplace_back(worker);
      }
    }

    for (std::size_t i = base; i < result.packages.size(); ++i) {
      settled[result.packages[i].name] = result.packages[i].outcome;
    }
  }
  return result;
}

std::string
dry_run(const BuildPlan& plan, const ResolutionReport& report)
{
  std::string out = plan.empty() ? std::string(kNothingToBuild) + "\n" : serialize_plan(plan);
  for (const auto& [name, resolution] : report.externals) {
    out += "external " + name + " " + std::string(to_string(resolution.source));
    if (!resolution.provenance.empty()) {
      out += " " + resolution.provenance;
    }
    out += "\n";
  }
  return out;
}

std::string
serialize_execution(const ExecutionReport& report)
{
  std::string out;
  for (const auto& entry : report.packages) {
    out += entry.name + '\t' + std::string(to_string(entry.outcome)) + '\n';
  }
  return out;
}

} // namespace layerpm
