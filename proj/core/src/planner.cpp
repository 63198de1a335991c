#include "layerpm/planner.hpp"

#include <deque>

#include "layerpm/hash.hpp"

namespace layerpm {

namespace {

// Kahn layering: every round takes all packages whose planned deps are done.
std::vector<std::vector<std::string>>
layer(const std::set<std::string>& nodes, const std::set<Edge>& edges)
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

  std::vector<std::vector<std::string>> layers;
  std::vector<std::string> ready;
  for (const auto& [node, count] : pending) {
    if (count == 0) {
      ready.push_back(node);
    }
  }
  std::size_t placed = 0;
  while (!ready.empty()) {
    std::set<std::string> next;
    for (const auto& node : ready) {
      for (const auto& dependent : dependents[node]) {
        if (--pending[dependent] == 0) {
          next.insert(dependent);
        }
      }
    }
    placed += ready.size();
    layers.push_back(std::move(ready));
    ready.assign(next.begin(), next.end());
  }
  if (placed != nodes.size()) {
    throw Error(ErrorCode::cycle, "dependency cycle among planned packages");
  }
  return layers;
}

} // namespace

std::string_view
to_string(PlanReason reason)
{
  switch (reason) {
  case PlanReason::fresh: return "new";
  case PlanReason::invalidated: return "invalidated";
  case PlanReason::dependent: return "dependent";
  }
  return "new";
}

std::optional<PlanReason>
parse_plan_reason(std::string_view text)
{
  for (auto reason : {PlanReason::fresh, PlanReason::invalidated, PlanReason::dependent}) {
    if (to_string(reason) == text) {
      return reason;
    }
  }
  return std::nullopt;
}

std::string
current_hash(const PackageDecl& decl, const ExtraHash& extra)
{
  const std::string salt = extra ? extra(decl) : std::string{};
  if (salt.empty()) {
    return package_hash(decl);
  }
  return sha256_hex(canonical_block(decl) + "extra " + salt + "\n");
}

BuildPlan
plan(const PackageMap& map,
     const ResolutionReport& report,
     const InstallState& state,
     const ExtraHash& extra)
{
  verify_state(state);

  BuildPlan out;
  std::map<std::string, std::string> hashes;
  std::deque<std::string> queue;
  for (const auto& name : report.enabled) {
    auto hash = current_hash(map.at(name), extra);
    auto it = state.entries.find(name);
    if (it == state.entries.end()) {
      out.reasons.emplace(name, PlanReason::fresh);
      queue.push_back(name);
    } else if (it->second.hash != hash) {
      out.reasons.emplace(name, PlanReason::invalidated);
      queue.push_back(name);
    }
    hashes.emplace(name, std::move(hash));
  }

  std::map<std::string, std::vector<std::string>> dependents;
  for (const auto& [from, to] : report.edges) {
    dependents[to].push_back(from);
  }
  while (!queue.empty()) {
    auto node = queue.front();
    queue.pop_front();
    for (const auto& up : dependents[node]) {
      if (report.enabled.contains(up) && out.reasons.emplace(up, PlanReason::dependent).second) {
        queue.push_back(up);
      }
    }
  }

  std::set<std::string> planned;
  for (const auto& [name, reason] : out.reasons) {
    planned.insert(name);
    out.hashes.emplace(name, hashes.at(name));
  }
  out.layers = layer(planned, report.edges);
  out.plan_digest = sha256_hex(serialize_plan(out));
  return out;
}

std::set<std::string>
affected(const PackageMap& map, const std::set<std::string>& changed)
{
  std::map<std::string, std::vector<std::string>> dependents;
  for (const auto& [name, decl] : map.packages) {
    for (const auto& dep : decl.deps) {
      dependents[dep].push_back(name);
    }
  }
  std::set<std::string> out;
  std::deque<std::string> queue;
  for (const auto& name : changed) {
    map.at(name);
    if (out.insert(name).second) {
      queue.push_back(name);
    }
  }
  while (!queue.empty()) {
    auto node = queue.front();
    queue.pop_front();
    for (const auto& up : dependents[node]) {
      if (out.insert(up).second) {
        queue.push_back(up);
      }
    }
  }
  return out;
}

std::string
serialize_plan(const BuildPlan& plan)
{
  std::string out;
  for (std::size_t index = 0; index < plan.layers.size(); ++index) {
    for (const auto& name : plan.layers[index]) {
      out += std::to_string(index) + '\t' + name + '\t'
             + std::string(to_string(plan.reasons.at(name))) + '\n';
    }
  }
  return out;
}

} // namespace layerpm
