#include "layerpm/pkgmap.hpp"

#include <algorithm>
#include <deque>
#include <functional>
#include <sstream>

#include "layerpm/hash.hpp"

namespace layerpm {

namespace {

constexpr std::string_view kWhitespace = " \t\r";

std::string_view
trim(std::string_view s)
{
  const auto first = s.find_first_not_of(kWhitespace);
  if (first == std::string_view::npos) {
    return {};
  }
  const auto last = s.find_last_not_of(kWhitespace);
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view>
split_lines(std::string_view text)
{
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) {
      end = text.size();
    }
    lines.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  return lines;
}

std::string
join(const auto& items, std::string_view sep)
{
  std::string out;
  bool first = true;
  for (const auto& item : items) {
    if (!first) {
      out += sep;
    }
    out += item;
    first = false;
  }
  return out;
}

class Parser
{
public:
  ParseResult run(std::string_view text);

private:
  struct OpenBlock {
    PackageDecl decl;
    std::set<std::string> seen_keys;
    bool default_given = false;
    bool discard = false; // duplicate name: parse but drop
  };

  void error(ErrorCode code, std::size_t line, std::string message)
  {
    diags_.push_back({Severity::error, code, std::move(message), line});
  }

  void open(std::string_view content, std::size_t line);
  void in_block(std::string_view content, std::size_t line);
  void field(std::string_view content, std::size_t line);
  void close(std::size_t line);

  bool parse_list(std::string_view key,
                  std::string_view value,
                  std::size_t line,
                  bool (*valid)(std::string_view) noexcept,
                  std::vector<std::string>& out);

  std::optional<OpenBlock> block_;
  std::size_t block_line_ = 0;
  std::map<std::string, std::size_t> first_seen_;
  std::vector<PackageDecl> done_;
  std::vector<Diagnostic> diags_;
};

ParseResult
Parser::run(std::string_view text)
{
  const auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t lineno = i + 1;
    auto content = lines[i];
    if (auto hash = content.find('#'); hash != std::string_view::npos) {
      content = content.substr(0, hash);
    }
    content = trim(content);
    if (content.empty()) {
      continue;
    }
    if (!block_) {
      open(content, lineno);
    } else if (content.starts_with("package ") && content.find('{') != std::string_view::npos) {
      error(ErrorCode::syntax, block_line_,
            "unbalanced braces: block '" + block_->decl.name + "' is never closed");
      block_.reset();
      open(content, lineno);
    } else {
      in_block(content, lineno);
    }
  }
  if (block_) {
    error(ErrorCode::syntax, block_line_,
          "unbalanced braces: block '" + block_->decl.name + "' is never closed");
  }

  if (!diags_.empty()) {
    std::stable_sort(diags_.begin(), diags_.end(), [](const auto& a, const auto& b) {
      return a.line < b.line;
    });
    return diags_;
  }
  return make_map(std::move(done_));
}

void
Parser::open(std::string_view content, std::size_t line)
{
  if (content.front() == '}') {
    error(ErrorCode::syntax, line, "unbalanced braces: '}' outside a package block");
    return;
  }
  if (!content.starts_with("package") || content.size() == 7
      || kWhitespace.find(content[7]) == std::string_view::npos) {
    error(ErrorCode::syntax, line, "expected 'package NAME {'");
    return;
  }
  auto rest = trim(content.substr(7));
  const auto brace = rest.find('{');
  if (brace == std::string_view::npos) {
    error(ErrorCode::syntax, line, "expected '{' after package name");
    return;
  }
  const auto name = trim(rest.substr(0, brace));
  if (!is_identifier(name)) {
    error(ErrorCode::syntax, line, "malformed package name '" + std::string(name) + "'");
    return;
  }

  OpenBlock block;
  block.decl.name = std::string(name);
  block.decl.line = line;
  if (auto [it, inserted] = first_seen_.emplace(block.decl.name, line); !inserted) {
    error(ErrorCode::duplicate, line,
          "duplicate package '" + block.decl.name + "' (first declared on line "
            + std::to_string(it->second) + ")");
    block.discard = true;
  }
  block_ = std::move(block);
  block_line_ = line;

  in_block(trim(rest.substr(brace + 1)), line);
}

void
Parser::in_block(std::string_view content, std::size_t line)
{
  if (content.empty()) {
    return;
  }
  if (content.back() == '}') {
    const auto inner = trim(content.substr(0, content.size() - 1));
    if (!inner.empty()) {
      field(inner, line);
    }
    close(line);
    return;
  }
  field(content, line);
}

bool
Parser::parse_list(std::string_view key,
                   std::string_view value,
                   std::size_t line,
                   bool (*valid)(std::string_view) noexcept,
                   std::vector<std::string>& out)
{
  if (value.empty()) {
    return true;
  }
  std::set<std::string_view> seen;
  std::size_t start = 0;
  while (true) {
    auto comma = value.find(',', start);
    auto item = trim(value.substr(start, comma == std::string_view::npos ? value.npos : comma - start));
    if (item.empty()) {
      error(ErrorCode::syntax, line, "empty entry in '" + std::string(key) + "'");
      return false;
    }
    if (!valid(item)) {
      error(ErrorCode::syntax, line,
            "malformed identifier '" + std::string(item) + "' in '" + std::string(key) + "'");
      return false;
    }
    if (!seen.insert(item).second) {
      error(ErrorCode::syntax, line,
            "duplicate entry '" + std::string(item) + "' in '" + std::string(key) + "'");
      return false;
    }
    out.emplace_back(item);
    if (comma == std::string_view::npos) {
      break;
    }
    start = comma + 1;
  }
  return true;
}

void
Parser::field(std::string_view content, std::size_t line)
{
  const auto colon = content.find(':');
  if (colon == std::string_view::npos) {
    error(ErrorCode::syntax, line, "expected 'key: value'");
    return;
  }
  const auto key = trim(content.substr(0, colon));
  const auto value = trim(content.substr(colon + 1));
  static const std::set<std::string_view> kKeys = {
    "kind", "libraries", "deps", "builtins", "externals", "default", "build"};
  if (!kKeys.contains(key)) {
    error(ErrorCode::syntax, line, "unknown field key '" + std::string(key) + "'");
    return;
  }
  if (!block_->seen_keys.insert(std::string(key)).second) {
    error(ErrorCode::syntax, line, "field '" + std::string(key) + "' given twice");
    return;
  }
  if (key != "build" && value.find_first_of("{}") != std::string_view::npos) {
    error(ErrorCode::syntax, line, "unbalanced braces");
    return;
  }

  auto& decl = block_->decl;
  if (key == "kind") {
    if (value == "core") {
      decl.kind = PackageKind::core;
    } else if (value == "feature") {
      decl.kind = PackageKind::feature;
    } else {
      error(ErrorCode::syntax, line, "kind must be 'core' or 'feature'");
    }
  } else if (key == "default") {
    if (value == "on") {
      decl.default_on = true;
    } else if (value == "off") {
      decl.default_on = false;
    } else {
      error(ErrorCode::syntax, line, "default must be 'on' or 'off'");
      return;
    }
    block_->default_given = true;
  } else if (key == "build") {
    if (value.empty()) {
      error(ErrorCode::syntax, line, "empty build command");
      return;
    }
    decl.build = std::string(value);
  } else if (key == "libraries") {
    parse_list(key, value, line, &is_library_name, decl.libraries);
  } else {
    std::vector<std::string> items;
    if (!parse_list(key, value, line, &is_identifier, items)) {
      return;
    }
    if (key == "deps") {
      if (std::find(items.begin(), items.end(), decl.name) != items.end()) {
        error(ErrorCode::self_dependency, line, "package '" + decl.name + "' depends on itself");
        return;
      }
      decl.deps.insert(items.begin(), items.end());
    } else if (key == "builtins") {
      decl.builtins.insert(items.begin(), items.end());
    } else {
      decl.externals.insert(items.begin(), items.end());
    }
  }
}

void
Parser::close(std::size_t line)
{
  auto block = std::move(*block_);
  block_.reset();
  if (block.decl.kind == PackageKind::core) {
    if (block.default_given && !block.decl.default_on) {
      error(ErrorCode::syntax, line,
            "core package '" + block.decl.name + "' cannot be 'default: off'");
      return;
    }
    block.decl.default_on = true;
  }
  if (!block.discard) {
    done_.push_back(std::move(block.decl));
  }
}

// Shortest dependency cycle through `start`, restricted to `scc`. Neighbours
// are visited in name order so the result is deterministic.
std::vector<std::string>
cycle_through(const PackageMap& map, const std::string& start, const std::set<std::string>& scc)
{
  std::map<std::string, std::string> parent;
  std::deque<std::string> queue{start};
  std::set<std::string> visited{start};
  while (!queue.empty()) {
    auto current = queue.front();
    queue.pop_front();
    for (const auto& dep : map.packages.at(current).deps) {
      if (!scc.contains(dep)) {
        continue;
      }
      if (dep == start) {
        std::vector<std::string> path{start};
        for (auto node = current; node != start; node = parent.at(node)) {
          path.push_back(node);
        }
        std::reverse(path.begin() + 1, path.end());
        path.push_back(start);
        return path;
      }
      if (visited.insert(dep).second) {
        parent[dep] = current;
        queue.push_back(dep);
      }
    }
  }
  return {};
}

// Tarjan's algorithm over the known-dependency graph.
std::vector<std::set<std::string>>
strongly_connected(const PackageMap& map)
{
  std::map<std::string, std::size_t> index;
  std::map<std::string, std::size_t> low;
  std::set<std::string> on_stack;
  std::vector<std::string> stack;
  std::vector<std::set<std::string>> out;
  std::size_t counter = 0;

  std::function<void(const std::string&)> visit = [&](const std::string& node) {
    index[node] = low[node] = counter++;
    stack.push_back(node);
    on_stack.insert(node);
    for (const auto& dep : map.packages.at(node).deps) {
      if (!map.packages.contains(dep)) {
        continue;
      }
      if (!index.contains(dep)) {
        visit(dep);
        low[node] = std::min(low[node], low[dep]);
      } else if (on_stack.contains(dep)) {
        low[node] = std::min(low[node], index[dep]);
      }
    }
    if (low[node] == index[node]) {
      std::set<std::string> component;
      std::string member;
      do {
        member = stack.back();
        stack.pop_back();
        on_stack.erase(member);
        component.insert(member);
      } while (member != node);
      out.push_back(std::move(component));
    }
  };

  for (const auto& [name, decl] : map.packages) {
    if (!index.contains(name)) {
      visit(name);
    }
  }
  return out;
}

} // namespace

std::string_view
to_string(PackageKind kind)
{
  return kind == PackageKind::core ? "core" : "feature";
}

std::string
format_diagnostic(const Diagnostic& diag)
{
  std::ostringstream out;
  out << diag.line << ": " << (diag.severity == Severity::error ? "error" : "warning") << ' '
      << to_string(diag.code) << ": " << diag.message;
  return out.str();
}

bool
has_errors(const std::vector<Diagnostic>& diags)
{
  return std::any_of(diags.begin(), diags.end(), [](const auto& d) {
    return d.severity == Severity::error;
  });
}

const PackageDecl*
PackageMap::find(std::string_view name) const
{
  auto it = packages.find(std::string(name));
  return it == packages.end() ? nullptr : &it->second;
}

const PackageDecl&
PackageMap::at(std::string_view name) const
{
  if (const auto* decl = find(name)) {
    return *decl;
  }
  throw Error(ErrorCode::unknown_package, "unknown package '" + std::string(name) + "'");
}

bool
is_identifier(std::string_view text) noexcept
{
  if (text.empty() || text.front() < 'a' || text.front() > 'z') {
    return false;
  }
  return std::all_of(text.begin(), text.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_' || c == '-';
  });
}

bool
is_library_name(std::string_view text) noexcept
{
  if (text.empty()) {
    return false;
  }
  const char first = text.front();
  if (!((first >= 'a' && first <= 'z') || (first >= 'A' && first <= 'Z') || first == '_')) {
    return false;
  }
  return std::all_of(text.begin(), text.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_'
           || c == '-' || c == '.' || c == '+';
  });
}

ParseResult
parse_map(std::string_view text)
{
  return Parser{}.run(text);
}

std::vector<Diagnostic>
validate_map(const PackageMap& map)
{
  std::vector<Diagnostic> diags;
  for (const auto& [name, decl] : map.packages) {
    for (const auto& dep : decl.deps) {
      if (!map.packages.contains(dep)) {
        diags.push_back({Severity::error, ErrorCode::unknown_dep,
                         "package '" + name + "' depends on unknown package '" + dep + "'",
                         decl.line});
      }
    }
  }

  auto components = strongly_connected(map);
  std::sort(components.begin(), components.end());
  for (const auto& scc : components) {
    const auto& start = *scc.begin();
    const bool self_loop = map.packages.at(start).deps.contains(start);
    if (scc.size() < 2 && !self_loop) {
      continue;
    }
    const auto path = cycle_through(map, start, scc);
    diags.push_back({Severity::error, ErrorCode::cycle,
                     "dependency cycle: " + join(path, " -> "), map.packages.at(start).line});
  }
  return diags;
}

std::string
canonical_block(const PackageDecl& decl)
{
  std::string out;
  out += "package " + decl.name + " {\n";
  out += "  kind: " + std::string(to_string(decl.kind)) + "\n";
  const auto list = [&out](std::string_view key, const auto& items) {
    out += "  ";
    out += key;
    out += ':';
    if (!items.empty()) {
      out += ' ';
      out += join(items, ", ");
    }
    out += '\n';
  };
  list("libraries", decl.libraries);
  list("deps", decl.deps);
  list("builtins", decl.builtins);
  list("externals", decl.externals);
  out += std::string("  default: ") + (decl.default_on ? "on" : "off") + "\n";
  if (decl.build) {
    out += "  build: " + *decl.build + "\n";
  }
  out += "}\n";
  return out;
}

std::string
canonical_serialize(const PackageMap& map)
{
  std::string out;
  for (const auto& [name, decl] : map.packages) {
    out += canonical_block(decl);
  }
  return out;
}

std::string
package_hash(const PackageDecl& decl)
{
  return sha256_hex(canonical_block(decl));
}

PackageMap
make_map(std::vector<PackageDecl> decls)
{
  PackageMap map;
  for (auto& decl : decls) {
    auto name = decl.name;
    map.packages.insert_or_assign(std::move(name), std::move(decl));
  }
  map.source_digest = sha256_hex(canonical_serialize(map));
  return map;
}

} // namespace layerpm
