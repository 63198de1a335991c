#include <benchmark/benchmark.h>

#include <random>
#include <variant>

#include "layerpm/planner.hpp"
#include "layerpm/pkgmap.hpp"
#include "layerpm/resolver.hpp"

using namespace layerpm;

namespace {

// Random DAG of `n` feature packages, each depending on about `degree`
// lower-numbered ones.
PackageMap
random_map(std::size_t n, double degree, unsigned seed = 42)
{
  std::mt19937 rng(seed);
  std::vector<PackageDecl> decls;
  for (std::size_t i = 0; i < n; ++i) {
    PackageDecl decl;
    decl.name = "p" + std::to_string(i);
    if (i > 0) {
      std::bernoulli_distribution edge(std::min(1.0, degree / static_cast<double>(i)));
      for (std::size_t j = 0; j < i; ++j) {
        if (edge(rng)) {
          decl.deps.insert("p" + std::to_string(j));
        }
      }
    }
    decls.push_back(std::move(decl));
  }
  return make_map(std::move(decls));
}

std::set<std::string>
all_names(const PackageMap& map)
{
  std::set<std::string> names;
  for (const auto& [name, decl] : map.packages) {
    names.insert(name);
  }
  return names;
}

void
BM_Resolve(benchmark::State& state)
{
  const auto map = random_map(static_cast<std::size_t>(state.range(0)), 5.0);
  const Request request{all_names(map), {}, false};
  for (auto _ : state) {
    benchmark::DoNotOptimize(resolve(map, request, {}));
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Resolve)->RangeMultiplier(4)->Range(64, 4096)->Complexity();

void
BM_Plan(benchmark::State& state)
{
  const auto map = random_map(static_cast<std::size_t>(state.range(0)), 5.0);
  const auto report = resolve(map, Request{all_names(map), {}, false}, {}).report;
  for (auto _ : state) {
    benchmark::DoNotOptimize(plan(map, report, {}));
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Plan)->RangeMultiplier(4)->Range(64, 4096)->Complexity();

void
BM_TopoOrder(benchmark::State& state)
{
  const auto map = random_map(static_cast<std::size_t>(state.range(0)), 5.0);
  const auto report = resolve(map, Request{all_names(map), {}, false}, {}).report;
  for (auto _ : state) {
    benchmark::DoNotOptimize(topo_order(report.enabled, report.edges));
  }
}
BENCHMARK(BM_TopoOrder)->Arg(1000);

void
BM_ParseMap(benchmark::State& state)
{
  const auto text = canonical_serialize(random_map(static_cast<std::size_t>(state.range(0)), 5.0));
  for (auto _ : state) {
    auto parsed = parse_map(text);
    benchmark::DoNotOptimize(std::holds_alternative<PackageMap>(parsed));
  }
  state.SetBytesProcessed(static_cast<int64_t>(state.iterations() * text.size()));
}
BENCHMARK(BM_ParseMap)->Arg(1000);

} // namespace

BENCHMARK_MAIN();
