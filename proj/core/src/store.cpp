#include "layerpm/store.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <ctime>
#include <fstream>
#include <sstream>
#include <vector>

#include "layerpm/hash.hpp"

namespace fs = std::filesystem;

namespace layerpm {

namespace {

std::vector<std::string_view>
split(std::string_view text, char sep)
{
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = text.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(text.substr(start));
      return out;
    }
    out.push_back(text.substr(start, pos - start));
    start = pos + 1;
  }
}

std::vector<std::string_view>
lines_of(std::string_view text)
{
  std::vector<std::string_view> out;
  if (text.empty()) {
    return out;
  }
  out = split(text, '\n');
  if (out.back().empty()) {
    out.pop_back();
  }
  return out;
}

std::string
chain_step(std::string_view previous, std::string_view name, std::string_view hash)
{
  std::string input(previous);
  input += name;
  input += ' ';
  input += hash;
  input += '\n';
  return sha256_hex(input);
}

[[noreturn]] void
corrupt(std::size_t line, const std::string& what)
{
  throw Error(ErrorCode::state_corrupt, "state line " + std::to_string(line) + ": " + what);
}

std::string
read_file(const fs::path& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::io, "cannot read " + path.string());
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::string
errno_text()
{
  return std::strerror(errno);
}

} // namespace

bool
InstallState::is_built(std::string_view name, std::string_view hash) const
{
  auto it = entries.find(std::string(name));
  return it != entries.end() && it->second.hash == hash;
}

std::string
InstallState::empty_digest()
{
  static const std::string digest = sha256_hex("");
  return digest;
}

std::string
compute_state_digest(const InstallState& state)
{
  auto chain = InstallState::empty_digest();
  for (const auto& [name, entry] : state.entries) {
    chain = chain_step(chain, name, entry.hash);
  }
  return chain;
}

void
verify_state(const InstallState& state)
{
  for (const auto& [name, entry] : state.entries) {
    if (!is_hex64(entry.hash)) {
      throw Error(ErrorCode::state_corrupt, "malformed hash for '" + name + "'");
    }
  }
  if (compute_state_digest(state) != state.state_digest) {
    throw Error(ErrorCode::state_corrupt, "state digest mismatch");
  }
}

std::string
serialize_state(const InstallState& state)
{
  std::string out;
  auto chain = InstallState::empty_digest();
  for (const auto& [name, entry] : state.entries) {
    chain = chain_step(chain, name, entry.hash);
    out += name + ' ' + entry.hash + ' ' + entry.built_at + ' ' + chain + '\n';
  }
  return out;
}

InstallState
parse_state(std::string_view text)
{
  InstallState state;
  auto chain = InstallState::empty_digest();
  std::size_t lineno = 0;
  for (auto line : lines_of(text)) {
    ++lineno;
    const auto fields = split(line, ' ');
    if (fields.size() != 4) {
      corrupt(lineno, "expected 4 fields");
    }
    const std::string name(fields[0]);
    if (!is_identifier(name)) {
      corrupt(lineno, "malformed package name");
    }
    if (!state.entries.empty() && state.entries.rbegin()->first >= name) {
      corrupt(lineno, "entries out of order or duplicated");
    }
    if (!is_hex64(fields[1]) || !is_hex64(fields[3])) {
      corrupt(lineno, "malformed hash");
    }
    if (fields[2].empty()) {
      corrupt(lineno, "missing timestamp");
    }
    chain = chain_step(chain, name, fields[1]);
    if (chain != fields[3]) {
      corrupt(lineno, "integrity digest mismatch");
    }
    state.entries.emplace(name, StateEntry{std::string(fields[1]), std::string(fields[2])});
  }
  state.state_digest = chain;
  return state;
}

fs::path
state_file(const fs::path& dir)
{
  return dir / "state.txt";
}

fs::path
lock_file(const fs::path& dir)
{
  return dir / "lock.txt";
}

fs::path
cache_dir(const fs::path& dir, std::string_view hash)
{
  return dir / "cache" / std::string(hash);
}

InstallState
load_state(const fs::path& dir)
{
  const auto path = state_file(dir);
  if (!fs::exists(path)) {
    return {};
  }
  return parse_state(read_file(path));
}

void
write_file_atomic(const fs::path& path, std::string_view content, const StoreHooks& hooks)
{
  std::string tmpl = path.string() + ".tmp.XXXXXX";
  const int fd = mkstemp(tmpl.data());
  if (fd < 0) {
    throw Error(ErrorCode::io, "cannot create temporary file for " + path.string() + ": " + errno_text());
  }
  const fs::path tmp = tmpl;
  bool closed = false;
  try {
    std::size_t written = 0;
    while (written < content.size()) {
      const auto n = ::write(fd, content.data() + written, content.size() - written);
      if (n < 0) {
        if (errno == EINTR) {
          continue;
        }
        throw Error(ErrorCode::io, "failed to write " + tmp.string() + ": " + errno_text());
      }
      written += static_cast<std::size_t>(n);
    }
    if (::fsync(fd) != 0) {
      throw Error(ErrorCode::io, "fsync failed for " + tmp.string() + ": " + errno_text());
    }
    closed = true;
    if (::close(fd) != 0) {
      throw Error(ErrorCode::io, "close failed for " + tmp.string() + ": " + errno_text());
    }
  } catch (...) {
    if (!closed) {
      ::close(fd);
    }
    ::unlink(tmp.c_str());
    throw;
  }

  try {
    if (hooks.before_rename) {
      hooks.before_rename(tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
      throw Error(ErrorCode::io, "failed to rename " + tmp.string() + " to " + path.string() + ": " + errno_text());
    }
  } catch (...) {
    ::unlink(tmp.c_str());
    throw;
  }

  // Persist the rename itself.
  const auto parent = path.has_parent_path() ? path.parent_path() : fs::path(".");
  if (const int dfd = ::open(parent.c_str(), O_RDONLY | O_DIRECTORY); dfd >= 0) {
    ::fsync(dfd);
    ::close(dfd);
  }
}

InstallState
record_built(const fs::path& dir,
             InstallState state,
             const std::string& name,
             const std::string& hash,
             const StoreHooks& hooks)
{
  if (!is_hex64(hash)) {
    throw Error(ErrorCode::state_corrupt, "refusing to record malformed hash for '" + name + "'");
  }
  fs::create_directories(dir);
  state.entries.insert_or_assign(name, StateEntry{hash, utc_timestamp()});
  state.state_digest = compute_state_digest(state);
  write_file_atomic(state_file(dir), serialize_state(state), hooks);
  return state;
}

std::string
serialize_lockfile(const Lockfile& lock)
{
  std::string out;
  for (const auto& [name, entry] : lock.resolutions) {
    out += "external " + name + ' ' + std::string(to_string(entry.source));
    if (!entry.provenance.empty()) {
      out += ' ' + entry.provenance;
    }
    out += '\n';
  }
  return out;
}

Lockfile
parse_lockfile(std::string_view text)
{
  Lockfile lock;
  std::size_t lineno = 0;
  for (auto line : lines_of(text)) {
    ++lineno;
    const auto bad = [&](const std::string& what) {
      throw Error(ErrorCode::state_corrupt, "lock line " + std::to_string(lineno) + ": " + what);
    };
    if (!line.starts_with("external ")) {
      bad("expected 'external NAME SOURCE [PROVENANCE]'");
    }
    line.remove_prefix(9);
    const auto name_end = line.find(' ');
    if (name_end == std::string_view::npos) {
      bad("missing source");
    }
    const auto name = line.substr(0, name_end);
    auto rest = line.substr(name_end + 1);
    const auto source_end = rest.find(' ');
    const auto source_text = rest.substr(0, source_end);
    const auto provenance =
      source_end == std::string_view::npos ? std::string_view{} : rest.substr(source_end + 1);
    const auto source = parse_external_source(source_text);
    if (!is_identifier(name)) {
      bad("malformed external name");
    }
    if (!source || *source == ExternalSource::missing) {
      bad("invalid source '" + std::string(source_text) + "'");
    }
    if (!lock.resolutions.emplace(std::string(name), LockEntry{*source, std::string(provenance)}).second) {
      bad("duplicate external '" + std::string(name) + "'");
    }
  }
  return lock;
}

Lockfile
read_lockfile(const fs::path& dir)
{
  const auto path = lock_file(dir);
  if (!fs::exists(path)) {
    return {};
  }
  return parse_lockfile(read_file(path));
}

void
write_lockfile(const fs::path& dir, const Lockfile& lock)
{
  fs::create_directories(dir);
  write_file_atomic(lock_file(dir), serialize_lockfile(lock));
}

Lockfile
merge_lockfile(Lockfile base, const ResolutionReport& report)
{
  for (const auto& [name, resolution] : report.externals) {
    if (resolution.source == ExternalSource::missing) {
      continue;
    }
    base.resolutions.insert_or_assign(name, LockEntry{resolution.source, resolution.provenance});
  }
  return base;
}

void
apply_lockfile(const PackageMap& map,
               ResolutionReport& report,
               const Lockfile& lock,
               const SystemProbe& probe)
{
  for (auto& [name, resolution] : report.externals) {
    auto it = lock.resolutions.find(name);
    if (it == lock.resolutions.end()) {
      continue;
    }
    const auto& locked = it->second;
    bool satisfiable = false;
    if (locked.source == ExternalSource::system) {
      satisfiable = probe.available.contains(name);
    } else if (locked.source == ExternalSource::builtin) {
      const auto* provider = map.find(locked.provenance);
      satisfiable = provider && report.enabled.contains(locked.provenance)
                    && provider->builtins.contains(name);
    }
    if (!satisfiable) {
      throw Error(ErrorCode::lock_conflict,
                  "locked resolution '" + name + " " + std::string(to_string(locked.source))
                    + "' is no longer satisfiable; rerun with --relock");
    }
    resolution.source = locked.source;
    resolution.provenance = locked.provenance;
  }
}

StateLock::StateLock(const fs::path& dir)
{
  fs::create_directories(dir);
  const auto path = dir / ".layerpm.lock";
  fd_ = ::open(path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
  if (fd_ < 0) {
    throw Error(ErrorCode::io, "cannot open " + path.string() + ": " + errno_text());
  }
  if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
    ::close(fd_);
    fd_ = -1;
    throw Error(ErrorCode::state_locked, "state directory " + dir.string() + " is locked by another executor");
  }
}

StateLock::~StateLock()
{
  if (fd_ >= 0) {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
}

std::string
utc_timestamp()
{
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buffer[32];
  std::strftime(buffer, sizeof buffer, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buffer;
}

} // namespace layerpm
