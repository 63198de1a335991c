#pragma once

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>

#include "layerpm/pkgmap.hpp"
#include "oracles.hpp"

#ifndef LAYERPM_TEST_DATA_DIR
#error "LAYERPM_TEST_DATA_DIR must point at tests/data"
#endif

namespace testing {

inline std::filesystem::path
data_path(const std::string& name)
{
  return std::filesystem::path(LAYERPM_TEST_DATA_DIR) / name;
}

inline std::string
read_file(const std::filesystem::path& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot read " + path.string());
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

inline void
write_file(const std::filesystem::path& path, const std::string& text)
{
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
}

inline std::string
fixture_text()
{
  return read_file(data_path("packagemap.txt"));
}

inline layerpm::PackageMap
must_parse(const std::string& text)
{
  auto parsed = layerpm::parse_map(text);
  if (auto* diags = std::get_if<std::vector<layerpm::Diagnostic>>(&parsed)) {
    std::string all;
    for (const auto& d : *diags) {
      all += layerpm::format_diagnostic(d) + "\n";
    }
    throw std::runtime_error("fixture failed to parse:\n" + all);
  }
  return std::get<layerpm::PackageMap>(std::move(parsed));
}

inline layerpm::PackageMap
fixture()
{
  return must_parse(fixture_text());
}

// Same map with one declaration replaced (digest refreshed).
inline layerpm::PackageMap
with_decl(layerpm::PackageMap map, layerpm::PackageDecl decl)
{
  std::vector<layerpm::PackageDecl> decls;
  for (auto& [name, d] : map.packages) {
    if (name != decl.name) {
      decls.push_back(std::move(d));
    }
  }
  decls.push_back(std::move(decl));
  return layerpm::make_map(std::move(decls));
}

inline oracle::Graph
graph_of(const layerpm::PackageMap& map)
{
  oracle::Graph graph;
  for (const auto& [name, decl] : map.packages) {
    graph[name] = decl.deps;
  }
  return graph;
}

// Feature packages, no defaults, deps from the graph.
inline layerpm::PackageMap
map_of(const oracle::Graph& graph)
{
  std::vector<layerpm::PackageDecl> decls;
  for (const auto& [name, deps] : graph) {
    layerpm::PackageDecl decl;
    decl.name = name;
    decl.deps = deps;
    decls.push_back(std::move(decl));
  }
  return layerpm::make_map(std::move(decls));
}

class TempDir
{
public:
  TempDir()
  {
    static std::atomic<unsigned> counter{0};
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path()
            / ("layerpm-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir()
  {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& child) const { return path_ / child; }

private:
  std::filesystem::path path_;
};

inline std::size_t
line_count(const std::string& text)
{
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

} // namespace testing
