#include "layerpm/resolver.hpp"

#include <algorithm>
#include <deque>
#include <functional>

namespace layerpm {

namespace {

std::string
join_path(const std::vector<std::string>& path)
{
  std::string out;
  for (const auto& node : path) {
    if (!out.empty()) {
      out += " -> ";
    }
    out += node;
  }
  return out;
}

void
append_names(std::string& out, std::string_view label, const auto& names)
{
  out += label;
  for (const auto& name : names) {
    out += ' ';
    out += name;
  }
  out += '\n';
}

// Path from a requested package down to `target`, recovered from BFS parents.
std::vector<std::string>
path_to(const std::map<std::string, std::string>& parent, const std::string& target)
{
  std::vector<std::string> path{target};
  for (auto it = parent.find(target); it != parent.end(); it = parent.find(it->second)) {
    path.push_back(it->second);
  }
  std::reverse(path.begin(), path.end());
  return path;
}

ExternalResolution
resolve_external(const std::string& name,
                 const SystemProbe& probe,
                 const std::map<std::string, std::set<std::string>>& builtin_providers,
                 ExternalPolicy policy)
{
  const auto from_system = [&]() -> std::optional<ExternalResolution> {
    if (auto it = probe.available.find(name); it != probe.available.end()) {
      return ExternalResolution{name, ExternalSource::system, it->second};
    }
    return std::nullopt;
  };
  const auto from_builtin = [&]() -> std::optional<ExternalResolution> {
    if (auto it = builtin_providers.find(name); it != builtin_providers.end()) {
      return ExternalResolution{name, ExternalSource::builtin, *it->second.begin()};
    }
    return std::nullopt;
  };

  std::optional<ExternalResolution> found;
  switch (policy) {
  case ExternalPolicy::system_first:
    found = from_system();
    if (!found) {
      found = from_builtin();
    }
    break;
  case ExternalPolicy::builtin_first:
    found = from_builtin();
    if (!found) {
      found = from_system();
    }
    break;
  case ExternalPolicy::system_only:
    found = from_system();
    break;
  }
  return found.value_or(ExternalResolution{name, ExternalSource::missing, ""});
}

} // namespace

std::string_view
to_string(ExternalSource source)
{
  switch (source) {
  case ExternalSource::system: return "system";
  case ExternalSource::builtin: return "builtin";
  case ExternalSource::missing: return "missing";
  }
  return "missing";
}

std::optional<ExternalSource>
parse_external_source(std::string_view text)
{
  if (text == "system") {
    return ExternalSource::system;
  }
  if (text == "builtin") {
    return ExternalSource::builtin;
  }
  if (text == "missing") {
    return ExternalSource::missing;
  }
  return std::nullopt;
}

std::string_view
to_string(ExternalPolicy policy)
{
  switch (policy) {
  case ExternalPolicy::system_first: return "system_first";
  case ExternalPolicy::builtin_first: return "builtin_first";
  case ExternalPolicy::system_only: return "system_only";
  }
  return "system_first";
}

std::optional<ExternalPolicy>
parse_policy(std::string_view text)
{
  for (auto policy :
       {ExternalPolicy::system_first, ExternalPolicy::builtin_first, ExternalPolicy::system_only}) {
    if (to_string(policy) == text) {
      return policy;
    }
  }
  return std::nullopt;
}

SystemProbe
parse_probe(std::string_view text)
{
  SystemProbe probe;
  std::size_t lineno = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) {
      end = text.size();
    }
    auto line = text.substr(start, end - start);
    start = end + 1;
    ++lineno;
    if (!line.empty() && line.back() == '\r') {
      line.remove_suffix(1);
    }
    if (line.empty() || line.front() == '#') {
      continue;
    }
    const auto tab = line.find('\t');
    const auto name = line.substr(0, tab);
    if (!is_identifier(name)) {
      throw Error(ErrorCode::probe_syntax,
                  "probe line " + std::to_string(lineno) + ": malformed external name '"
                    + std::string(name) + "'");
    }
    const auto provenance = tab == std::string_view::npos ? std::string_view{} : line.substr(tab + 1);
    probe.available.insert_or_assign(std::string(name), std::string(provenance));
  }
  return probe;
}

std::vector<std::string>
topo_order(const std::set<std::string>& nodes, const std::set<Edge>& edges)
{
  std::map<std::string, std::size_t> pending;
  std::map<std::string, std::vector<std::string>> dependents;
  for (const auto& node : nodes) {
    pending[node] = 0;
  }
  for (const auto& [from, to] : edges) {
    if (nodes.contains(from) && nodes.contains(to)) {
      ++pending[from];
      dependents[to].push_back(from);
    }
  }

  std::set<std::string> ready;
  for (const auto& [node, count] : pending) {
    if (count == 0) {
      ready.insert(node);
    }
  }

  std::vector<std::string> order;
  order.reserve(nodes.size());
  while (!ready.empty()) {
    auto node = *ready.begin();
    ready.erase(ready.begin());
    for (const auto& dependent : dependents[node]) {
      if (--pending[dependent] == 0) {
        ready.insert(dependent);
      }
    }
    order.push_back(std::move(node));
  }

  if (order.size() != nodes.size()) {
    std::vector<std::string> stuck;
    for (const auto& [node, count] : pending) {
      if (count != 0) {
        stuck.push_back(node);
      }
    }
    std::string names;
    for (const auto& node : stuck) {
      names += names.empty() ? node : ", " + node;
    }
    throw Error(ErrorCode::cycle, "dependency cycle among: " + names);
  }
  return order;
}

ResolveOutcome
resolve(const PackageMap& map,
        const Request& request,
        const SystemProbe& probe,
        ExternalPolicy policy)
{
  for (const auto* names : {&request.enable, &request.disable}) {
    for (const auto& name : *names) {
      map.at(name);
    }
  }
  for (const auto& name : request.enable) {
    if (request.disable.contains(name)) {
      throw Error(ErrorCode::disabled_required,
                  "package '" + name + "' is both enabled and disabled");
    }
  }

  ResolveOutcome outcome;
  auto& report = outcome.report;

  report.requested = request.enable;
  for (const auto& [name, decl] : map.packages) {
    if (decl.kind == PackageKind::core || (request.include_defaults && decl.default_on)) {
      report.requested.insert(name);
    }
  }

  std::map<std::string, std::string> parent;
  std::deque<std::string> queue(report.requested.begin(), report.requested.end());
  report.enabled = report.requested;
  while (!queue.empty()) {
    auto current = queue.front();
    queue.pop_front();
    for (const auto& dep : map.at(current).deps) {
      if (!map.find(dep)) {
        throw Error(ErrorCode::unknown_dep,
                    "package '" + current + "' depends on unknown package '" + dep + "'");
      }
      report.edges.emplace(current, dep);
      if (report.enabled.insert(dep).second) {
        parent[dep] = current;
        queue.push_back(dep);
      }
    }
  }

  for (const auto& name : request.disable) {
    if (report.enabled.contains(name)) {
      throw Error(ErrorCode::disabled_required,
                  "disabled package '" + name + "' is required: " + join_path(path_to(parent, name)));
    }
  }

  report.order = topo_order(report.enabled, report.edges);

  std::map<std::string, std::set<std::string>> builtin_providers;
  std::map<std::string, std::set<std::string>> consumers;
  for (const auto& name : report.enabled) {
    const auto& decl = map.at(name);
    for (const auto& builtin : decl.builtins) {
      builtin_providers[builtin].insert(name);
    }
    for (const auto& external : decl.externals) {
      consumers[external].insert(name);
    }
  }

  std::string missing;
  for (const auto& [external, users] : consumers) {
    auto resolution = resolve_external(external, probe, builtin_providers, policy);
    if (resolution.source == ExternalSource::missing) {
      missing += missing.empty() ? "" : "; ";
      missing += "'" + external + "' required by " + *users.begin();
    }
    report.externals.emplace(external, std::move(resolution));
  }
  if (!missing.empty()) {
    outcome.error = Error(ErrorCode::missing_external,
                          "unresolved external dependency " + missing + " (policy "
                            + std::string(to_string(policy)) + ")");
  }
  return outcome;
}

WhyResult
why(const PackageMap& /*map*/, const ResolutionReport& report, std::string_view target_name)
{
  const std::string target(target_name);
  if (!report.enabled.contains(target)) {
    throw Error(ErrorCode::not_enabled, "package '" + target + "' is not enabled");
  }

  std::map<std::string, std::vector<std::string>> deps;
  std::map<std::string, std::vector<std::string>> rdeps;
  for (const auto& [from, to] : report.edges) {
    deps[from].push_back(to);
    rdeps[to].push_back(from);
  }

  // Only walk nodes that can still reach the target.
  std::set<std::string> reaches{target};
  std::deque<std::string> queue{target};
  while (!queue.empty()) {
    auto node = queue.front();
    queue.pop_front();
    for (const auto& up : rdeps[node]) {
      if (reaches.insert(up).second) {
        queue.push_back(up);
      }
    }
  }

  WhyResult result;
  bool truncated = false;
  std::vector<std::string> path;
  std::set<std::string> on_path;
  std::function<void(const std::string&)> walk = [&](const std::string& node) {
    if (truncated) {
      return;
    }
    path.push_back(node);
    on_path.insert(node);
    if (node == target) {
      if (result.paths.size() == kMaxWhyPaths) {
        truncated = true;
      } else {
        result.paths.push_back(path);
      }
    } else {
      for (const auto& dep : deps[node]) {
        if (reaches.contains(dep) && !on_path.contains(dep)) {
          walk(dep);
        }
      }
    }
    on_path.erase(node);
    path.pop_back();
  };
  for (const auto& root : report.requested) {
    if (reaches.contains(root)) {
      walk(root);
    }
  }

  std::sort(result.paths.begin(), result.paths.end());
  if (truncated) {
    result.diagnostics.push_back({Severity::warning, ErrorCode::truncated,
                                  "more than " + std::to_string(kMaxWhyPaths)
                                    + " dependency paths; output truncated",
                                  0});
  }
  return result;
}

std::string
export_dot(const ResolutionReport& report)
{
  std::string out = "digraph packages {\n";
  for (const auto& name : report.enabled) {
    out += "  \"" + name + "\"";
    if (report.requested.contains(name)) {
      out += " [style=bold]";
    }
    out += ";\n";
  }
  for (const auto& [from, to] : report.edges) {
    out += "  \"" + from + "\" -> \"" + to + "\";\n";
  }
  out += "}\n";
  return out;
}

std::string
serialize_report(const ResolutionReport& report)
{
  std::string out;
  append_names(out, "requested", report.requested);
  append_names(out, "enabled", report.enabled);
  append_names(out, "order", report.order);
  for (const auto& [from, to] : report.edges) {
    out += "edge " + from + " " + to + "\n";
  }
  for (const auto& [name, resolution] : report.externals) {
    out += "external " + name + " " + std::string(to_string(resolution.source));
    if (!resolution.provenance.empty()) {
      out += " " + resolution.provenance;
    }
    out += "\n";
  }
  return out;
}

} // namespace layerpm
