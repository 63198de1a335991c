#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "layerpm/error.hpp"

namespace layerpm {

enum class PackageKind { core, feature };

std::string_view to_string(PackageKind kind);

// One sub-package of the meta-package, as declared in the manifest.
struct PackageDecl {
  std::string name;
  PackageKind kind = PackageKind::feature;
  std::vector<std::string> libraries; // declaration order is kept
  std::set<std::string> deps;
  std::set<std::string> builtins;
  std::set<std::string> externals;
  bool default_on = false;
  // Optional shell command used by the default runner.
  std::optional<std::string> build;
  // Manifest line of the `package` keyword. Not part of the canonical form.
  std::size_t line = 0;
};

enum class Severity { error, warning };

struct Diagnostic {
  Severity severity = Severity::error;
  ErrorCode code = ErrorCode::syntax;
  std::string message;
  std::size_t line = 0;
};

// "LINE: error E_CODE: message"
std::string format_diagnostic(const Diagnostic& diag);

bool has_errors(const std::vector<Diagnostic>& diags);

// The package database. Keyed by name, so iteration is in name order.
struct PackageMap {
  std::map<std::string, PackageDecl> packages;
  std::string source_digest;

  const PackageDecl* find(std::string_view name) const;
  const PackageDecl& at(std::string_view name) const; // throws E_UNKNOWN_PKG
};

// Package, builtin and external names: [a-z][a-z0-9_-]*
bool is_identifier(std::string_view text) noexcept;

// Library names are looser since they mirror real targets (libCore, libRIO).
bool is_library_name(std::string_view text) noexcept;

using ParseResult = std::variant<PackageMap, std::vector<Diagnostic>>;

// Parses a manifest made of blocks of the form
//
//   package NAME {
//     kind: core|feature
//     libraries: libA, libB
//     deps: a, b
//     builtins: x
//     externals: y
//     default: on|off
//     build: shell command   # optional
//   }
//
// `#` starts a comment. The block opener and closer may share a line with a
// field. On failure every diagnostic found is returned; none are warnings.
ParseResult parse_map(std::string_view text);

// Referential integrity and acyclicity. Empty result means the map is valid.
std::vector<Diagnostic> validate_map(const PackageMap& map);

// Canonical text of one block / the whole map. Packages sorted by name, fields
// in fixed order, set-valued fields sorted, LF line endings.
std::string canonical_block(const PackageDecl& decl);
std::string canonical_serialize(const PackageMap& map);

// SHA-256 of the package's canonical block; the planner's staleness key.
std::string package_hash(const PackageDecl& decl);

// Builds a map from declarations and computes its digest. Does not validate.
PackageMap make_map(std::vector<PackageDecl> decls);

} // namespace layerpm
