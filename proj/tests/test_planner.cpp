#include <doctest.h>

#include <random>

#include "layerpm/hash.hpp"
#include "layerpm/planner.hpp"
#include "support/fixture.hpp"
#include "support/oracles.hpp"

using namespace layerpm;

namespace {

ResolutionReport
closure_of(const PackageMap& map, std::set<std::string> enable)
{
  return resolve(map, Request{std::move(enable), {}, false}, {}).report;
}

InstallState
built(const PackageMap& map, const std::set<std::string>& names)
{
  InstallState state;
  for (const auto& name : names) {
    state.entries[name] = {package_hash(map.at(name)), "2026-01-01T00:00:00Z"};
  }
  state.state_digest = compute_state_digest(state);
  return state;
}

PackageMap
edited(PackageMap map, const std::string& name)
{
  auto decl = map.at(name);
  decl.libraries.push_back("libEdited");
  return testing::with_decl(std::move(map), std::move(decl));
}

std::set<std::string>
planned(const BuildPlan& plan)
{
  std::set<std::string> out;
  for (const auto& layer : plan.layers) {
    out.insert(layer.begin(), layer.end());
  }
  return out;
}

// Layer invariants: antichains, sorted, nonempty, deps earlier or built.
void
check_layers(const BuildPlan& plan, const ResolutionReport& report)
{
  std::map<std::string, std::size_t> layer_of;
  std::size_t count = 0;
  for (std::size_t i = 0; i < plan.layers.size(); ++i) {
    CHECK_FALSE(plan.layers[i].empty());
    CHECK(std::is_sorted(plan.layers[i].begin(), plan.layers[i].end()));
    for (const auto& name : plan.layers[i]) {
      CHECK(layer_of.emplace(name, i).second);
      ++count;
    }
  }
  CHECK(count == plan.reasons.size());
  for (const auto& [from, to] : report.edges) {
    if (layer_of.contains(from) && layer_of.contains(to)) {
      CHECK(layer_of.at(to) < layer_of.at(from));
    }
  }
}

} // namespace

TEST_CASE("plan: fresh chain builds one package per layer")
{
  const auto map = testing::fixture();
  const auto report = closure_of(map, {"mathmore"});
  const auto p = plan(map, report, {});
  CHECK(p.layers == std::vector<std::vector<std::string>>{{"core"}, {"mathcore"}, {"mathmore"}});
  for (const auto& [name, reason] : p.reasons) {
    CHECK(reason == PlanReason::fresh);
  }
  CHECK(serialize_plan(p) == "0\tcore\tnew\n1\tmathcore\tnew\n2\tmathmore\tnew\n");
  CHECK(p.plan_digest == sha256_hex(serialize_plan(p)));
  CHECK(p.hashes.at("mathmore") == package_hash(map.at("mathmore")));
}

TEST_CASE("plan: extending an installation builds only the new package")
{
  const auto map = testing::fixture();
  const auto report = closure_of(map, {"mathmore"});
  const auto state = built(map, {"core", "mathcore"});
  const auto p = plan(map, report, state);
  CHECK(p.layers == std::vector<std::vector<std::string>>{{"mathmore"}});
  CHECK(p.reasons == std::map<std::string, PlanReason>{{"mathmore", PlanReason::fresh}});
}

TEST_CASE("plan: nothing to do on a complete installation")
{
  const auto map = testing::fixture();
  const auto report = closure_of(map, {"tmva"});
  const auto p = plan(map, report, built(map, report.enabled));
  CHECK(p.empty());
  CHECK(p.package_count() == 0);
  CHECK(serialize_plan(p).empty());
  CHECK(p.plan_digest == sha256_hex(""));
}

TEST_CASE("plan: an edited declaration invalidates exactly its dependents")
{
  const auto map = testing::fixture();
  const auto report = closure_of(map, {"mathmore", "tmva"});
  const auto state = built(map, report.enabled);
  const auto changed = edited(map, "mathcore");

  auto expected = oracle::reverse_reachable(testing::graph_of(changed), {"mathcore"});
  std::erase_if(expected, [&](const auto& n) { return !report.enabled.contains(n); });
  CHECK(expected == std::set<std::string>{"mathcore", "mathmore", "tmva"});

  const auto p = plan(changed, report, state);
  CHECK(planned(p) == expected);
  CHECK(p.layers == std::vector<std::vector<std::string>>{{"mathcore"}, {"mathmore", "tmva"}});
  CHECK(p.reasons.at("mathcore") == PlanReason::invalidated);
  CHECK(p.reasons.at("mathmore") == PlanReason::dependent);
  CHECK(p.reasons.at("tmva") == PlanReason::dependent);
  CHECK(serialize_plan(p) == "0\tmathcore\tinvalidated\n1\tmathmore\tdependent\n1\ttmva\tdependent\n");
  check_layers(p, report);
}

TEST_CASE("plan: stale packages downstream of other stale packages stay invalidated")
{
  const auto map = testing::fixture();
  const auto report = closure_of(map, {"tmva"});
  const auto state = built(map, report.enabled);
  const auto changed = edited(edited(map, "mathcore"), "tmva");
  const auto p = plan(changed, report, state);
  CHECK(p.reasons.at("mathcore") == PlanReason::invalidated);
  CHECK(p.reasons.at("tmva") == PlanReason::invalidated);
  CHECK(p.reasons.size() == 2);
}

TEST_CASE("plan: packages built on top of an unbuilt dependency are rebuilt")
{
  const auto map = testing::fixture();
  const auto report = closure_of(map, {"mathmore"});
  const auto p = plan(map, report, built(map, {"core", "mathmore"}));
  CHECK(p.reasons.at("mathcore") == PlanReason::fresh);
  CHECK(p.reasons.at("mathmore") == PlanReason::dependent);
}

TEST_CASE("plan: state outside the closure is left alone")
{
  const auto map = testing::fixture();
  auto state = built(map, {"graf"});
  state.entries["graf"].hash = sha256_hex("stale");
  state.state_digest = compute_state_digest(state);
  const auto p = plan(map, closure_of(map, {"mathmore"}), state);
  CHECK_FALSE(p.reasons.contains("graf"));
}

TEST_CASE("plan: corrupt state is refused")
{
  const auto map = testing::fixture();
  auto state = built(map, {"core"});
  state.entries["core"].hash = sha256_hex("tampered");
  try {
    plan(map, closure_of(map, {"core"}), state);
    FAIL("expected E_STATE_CORRUPT");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::state_corrupt);
  }
}

TEST_CASE("plan: extra hash input participates in staleness")
{
  const auto map = testing::fixture();
  const auto report = closure_of(map, {"mathcore"});
  const auto state = built(map, report.enabled);
  CHECK(plan(map, report, state).empty());
  CHECK(plan(map, report, state, [](const PackageDecl&) { return std::string{}; }).empty());

  const ExtraHash source_tree = [](const PackageDecl& d) {
    return d.name == "mathcore" ? std::string("tree-v2") : std::string{};
  };
  const auto p = plan(map, report, state, source_tree);
  CHECK(p.reasons == std::map<std::string, PlanReason>{{"mathcore", PlanReason::invalidated}});
  CHECK(p.hashes.at("mathcore") == current_hash(map.at("mathcore"), source_tree));
  CHECK(p.hashes.at("mathcore") != package_hash(map.at("mathcore")));
}

TEST_CASE("affected")
{
  const auto map = testing::fixture();
  const auto graph = testing::graph_of(map);
  CHECK(affected(map, {"mathcore"}) == std::set<std::string>{"mathcore", "mathmore", "tmva"});
  CHECK(affected(map, {"mathcore"}) == oracle::reverse_reachable(graph, {"mathcore"}));
  CHECK(affected(map, {"graf"}) == std::set<std::string>{"graf"});
  CHECK(affected(map, {"core"}).size() == 6);
  CHECK(affected(map, {"core"}) == oracle::reverse_reachable(graph, {"core"}));
  CHECK(affected(map, {}).empty());
  CHECK_THROWS_AS(affected(map, {"roofit"}), Error);
}

TEST_CASE("parse_plan_reason round-trips names")
{
  for (auto reason : {PlanReason::fresh, PlanReason::invalidated, PlanReason::dependent}) {
    CHECK(parse_plan_reason(to_string(reason)) == reason);
  }
  CHECK_FALSE(parse_plan_reason("stale"));
}

TEST_CASE("property: incremental plans build exactly the missing closure")
{
  std::mt19937 rng(314);
  for (int round = 0; round < 150; ++round) {
    const auto graph = oracle::relabel(oracle::random_dag(rng, 2 + rng() % 40, 0.15), rng);
    const auto map = testing::map_of(graph);

    std::set<std::string> first;
    std::set<std::string> second;
    for (const auto& [name, deps] : graph) {
      const auto roll = rng() % 10;
      if (roll == 0) {
        first.insert(name);
      }
      if (roll <= 2) {
        second.insert(name);
      }
    }
    const auto built_set = oracle::reachable(graph, first);
    const auto state = built(map, built_set);
    const auto report = closure_of(map, second);

    std::set<std::string> expected;
    for (const auto& name : oracle::reachable(graph, second)) {
      if (!built_set.contains(name)) {
        expected.insert(name);
      }
    }
    const auto p = plan(map, report, state);
    CHECK(planned(p) == expected);
    for (const auto& [name, reason] : p.reasons) {
      CHECK(reason == PlanReason::fresh);
    }
    check_layers(p, report);
    CHECK(serialize_plan(plan(map, report, state)) == serialize_plan(p));
  }
}

TEST_CASE("property: editing one package invalidates exactly its affected set")
{
  std::mt19937 rng(2718);
  for (int round = 0; round < 150; ++round) {
    const auto graph = oracle::relabel(oracle::random_dag(rng, 2 + rng() % 30, 0.2), rng);
    const auto map = testing::map_of(graph);

    std::set<std::string> requested;
    for (const auto& [name, deps] : graph) {
      if (rng() % 4 == 0) {
        requested.insert(name);
      }
    }
    const auto report = closure_of(map, requested);
    const auto state = built(map, report.enabled);

    auto victim = std::next(graph.begin(), static_cast<long>(rng() % graph.size()))->first;
    const auto changed = edited(map, victim);
    auto expected = oracle::reverse_reachable(graph, {victim});
    std::erase_if(expected, [&](const auto& n) { return !report.enabled.contains(n); });

    const auto p = plan(changed, report, state);
    CHECK(planned(p) == expected);
    if (report.enabled.contains(victim)) {
      CHECK(p.reasons.at(victim) == PlanReason::invalidated);
    }
    for (const auto& [name, reason] : p.reasons) {
      if (name != victim) {
        CHECK(reason == PlanReason::dependent);
      }
    }
    check_layers(p, report);
  }
}
