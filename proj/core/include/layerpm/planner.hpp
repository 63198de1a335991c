#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "layerpm/pkgmap.hpp"
#include "layerpm/resolver.hpp"
#include "layerpm/store.hpp"

namespace layerpm {

enum class PlanReason { fresh, invalidated, dependent };

// "new", "invalidated", "dependent"
std::string_view to_string(PlanReason reason);
std::optional<PlanReason> parse_plan_reason(std::string_view text);

struct BuildPlan {
  // Each layer is sorted by name and has no dependency edge inside it.
  std::vector<std::vector<std::string>> layers;
  std::map<std::string, PlanReason> reasons;
  // Hash each package is recorded under once built.
  std::map<std::string, std::string> hashes;
  std::string plan_digest;

  bool empty() const noexcept { return layers.empty(); }
  std::size_t package_count() const noexcept { return reasons.size(); }
};

// Optional extra staleness input per package (e.g. a source tree digest).
// An empty string leaves the hash equal to package_hash().
using ExtraHash = std::function<std::string(const PackageDecl&)>;

std::string current_hash(const PackageDecl& decl, const ExtraHash& extra = {});

// Packages of the closure that are unbuilt, stale, or downstream of either,
// arranged in maximal antichain layers. Throws E_STATE_CORRUPT.
BuildPlan plan(const PackageMap& map,
               const ResolutionReport& report,
               const InstallState& state,
               const ExtraHash& extra = {});

// `changed` and everything that transitively depends on it. Throws
// E_UNKNOWN_PKG.
std::set<std::string> affected(const PackageMap& map, const std::set<std::string>& changed);

// `LAYER<TAB>NAME<TAB>REASON` per package, layer by layer.
std::string serialize_plan(const BuildPlan& plan);

} // namespace layerpm
