#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "layerpm/pkgmap.hpp"

namespace layerpm {

struct Request {
  std::set<std::string> enable;
  std::set<std::string> disable;
  bool include_defaults = true;
};

enum class ExternalSource { system, builtin, missing };

std::string_view to_string(ExternalSource source);
std::optional<ExternalSource> parse_external_source(std::string_view text);

struct ExternalResolution {
  std::string name;
  ExternalSource source = ExternalSource::missing;
  // Probe entry text for `system`, providing package name for `builtin`.
  std::string provenance;

  friend bool operator==(const ExternalResolution&, const ExternalResolution&) = default;
};

// Externals available on the host, with where they were found.
struct SystemProbe {
  std::map<std::string, std::string> available;
};

// One external per line: NAME<TAB>provenance. Blank lines and `#` lines are
// skipped; a line without a tab has empty provenance. Throws E_PROBE_SYNTAX.
SystemProbe parse_probe(std::string_view text);

enum class ExternalPolicy { system_first, builtin_first, system_only };

std::string_view to_string(ExternalPolicy policy);
std::optional<ExternalPolicy> parse_policy(std::string_view text);

// Dependency edge: `from` depends on `to`.
using Edge = std::pair<std::string, std::string>;

struct ResolutionReport {
  std::set<std::string> requested;
  std::set<std::string> enabled;
  std::vector<std::string> order;
  std::set<Edge> edges;
  std::map<std::string, ExternalResolution> externals;
};

struct ResolveOutcome {
  ResolutionReport report;
  // Set when some external could not be satisfied; the report is still
  // complete so it can be shown to the user.
  std::optional<Error> error;
};

// Closure, order and external resolution for `request`.
// Throws E_UNKNOWN_PKG and E_DISABLED_REQUIRED; reports E_MISSING_EXTERNAL
// through ResolveOutcome::error.
ResolveOutcome resolve(const PackageMap& map,
                       const Request& request,
                       const SystemProbe& probe,
                       ExternalPolicy policy = ExternalPolicy::system_first);

// Kahn order with lexicographic tie-break among ready packages. Edges whose
// endpoints are not both in `nodes` are ignored. Throws E_CYCLE.
std::vector<std::string> topo_order(const std::set<std::string>& nodes, const std::set<Edge>& edges);

struct WhyResult {
  std::vector<std::vector<std::string>> paths;
  std::vector<Diagnostic> diagnostics; // truncation warning, if any
};

inline constexpr std::size_t kMaxWhyPaths = 1000;

// Every simple path from a requested package to `target`, sorted. Throws
// E_NOT_ENABLED when the target is outside the closure.
WhyResult why(const PackageMap& map, const ResolutionReport& report, std::string_view target);

// Graphviz digraph, dependent -> dependency. Requested packages are bold.
std::string export_dot(const ResolutionReport& report);

// Line-oriented canonical form of a report (the --porcelain output).
std::string serialize_report(const ResolutionReport& report);

} // namespace layerpm
