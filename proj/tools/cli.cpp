#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <sstream>

#include "layerpm/executor.hpp"
#include "layerpm/planner.hpp"
#include "layerpm/pkgmap.hpp"
#include "layerpm/resolver.hpp"
#include "layerpm/store.hpp"

namespace fs = std::filesystem;

namespace layerpm::cli {

namespace {

// Signals an already-reported failure with a given exit status.
struct Exit {
  int code;
};

int
exit_code_for(ErrorCode code)
{
  switch (code) {
  case ErrorCode::unknown_package:
  case ErrorCode::disabled_required:
  case ErrorCode::not_enabled: return kUnknownPackage;
  case ErrorCode::cycle:
  case ErrorCode::unknown_dep: return kGraphError;
  case ErrorCode::missing_external:
  case ErrorCode::lock_conflict: return kMissingExternal;
  case ErrorCode::runner_panic: return kBuildFailure;
  case ErrorCode::syntax:
  case ErrorCode::duplicate:
  case ErrorCode::self_dependency:
  case ErrorCode::probe_syntax: return kParseError;
  case ErrorCode::state_corrupt:
  case ErrorCode::state_locked:
  case ErrorCode::io:
  case ErrorCode::truncated: return kStateError;
  }
  return kStateError;
}

struct Options {
  std::string map_path = "packagemap.txt";
  std::string state_dir;
  std::string probe_path;
  bool porcelain = false;

  std::vector<std::string> packages;
  std::vector<std::string> disable;
  bool no_defaults = false;
  std::string policy = "system_first";
  bool relock = false;

  std::size_t jobs = 1;
  bool dry_run = false;
  bool fail_fast = false;

  std::string why_target;
  std::vector<std::string> given;
  std::string dot_out;
};

class Session
{
public:
  Session(const Options& options, std::ostream& out, std::ostream& err)
    : opt_(options), out_(out), err_(err)
  {
  }

  int validate();
  int resolve_cmd();
  int plan_cmd();
  int build_cmd(bool lazy_add);
  int why_cmd();
  int graph_cmd();
  int list_cmd();

private:
  std::string read_text(const std::string& path, int failure_code) const;
  const PackageMap& map();
  SystemProbe probe() const;
  Request request(bool include_defaults) const;
  ResolutionReport resolved(bool include_defaults, bool require_externals = true);
  void print_report(const ResolutionReport& report);

  const Options& opt_;
  std::ostream& out_;
  std::ostream& err_;
  std::optional<PackageMap> map_;
};

std::string
Session::read_text(const std::string& path, int failure_code) const
{
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    err_ << "layerpm: cannot read " << path << "\n";
    throw Exit{failure_code};
  }
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

const PackageMap&
Session::map()
{
  if (map_) {
    return *map_;
  }
  auto parsed = parse_map(read_text(opt_.map_path, kParseError));
  if (auto* diags = std::get_if<std::vector<Diagnostic>>(&parsed)) {
    for (const auto& diag : *diags) {
      err_ << opt_.map_path << ':' << format_diagnostic(diag) << "\n";
    }
    throw Exit{kParseError};
  }
  auto& parsed_map = std::get<PackageMap>(parsed);
  const auto diags = validate_map(parsed_map);
  for (const auto& diag : diags) {
    err_ << opt_.map_path << ':' << format_diagnostic(diag) << "\n";
  }
  if (has_errors(diags)) {
    throw Exit{kGraphError};
  }
  map_ = std::move(parsed_map);
  return *map_;
}

SystemProbe
Session::probe() const
{
  if (opt_.probe_path.empty()) {
    return {};
  }
  return parse_probe(read_text(opt_.probe_path, kParseError));
}

Request
Session::request(bool include_defaults) const
{
  Request req;
  req.enable.insert(opt_.packages.begin(), opt_.packages.end());
  req.disable.insert(opt_.disable.begin(), opt_.disable.end());
  req.include_defaults = include_defaults;
  return req;
}

// Resolution with the lockfile applied. Missing externals end the command.
ResolutionReport
Session::resolved(bool include_defaults, bool require_externals)
{
  const auto policy = parse_policy(opt_.policy);
  const auto system = probe();
  auto outcome = resolve(map(), request(include_defaults), system, *policy);
  if (!opt_.relock) {
    apply_lockfile(map(), outcome.report, read_lockfile(opt_.state_dir), system);
  }
  bool missing = false;
  for (const auto& [name, resolution] : outcome.report.externals) {
    missing = missing || resolution.source == ExternalSource::missing;
  }
  if (missing && require_externals) {
    print_report(outcome.report);
    err_ << "layerpm: " << to_string(ErrorCode::missing_external) << ": "
         << (outcome.error ? outcome.error->what() : "unresolved external dependency") << "\n";
    throw Exit{kMissingExternal};
  }
  return std::move(outcome.report);
}

void
Session::print_report(const ResolutionReport& report)
{
  if (opt_.porcelain) {
    out_ << serialize_report(report);
    return;
  }
  const auto names = [](const auto& items) {
    std::string text;
    for (const auto& item : items) {
      text += text.empty() ? item : " " + item;
    }
    return text;
  };
  out_ << "requested: " << names(report.requested) << "\n";
  out_ << "enabled (" << report.enabled.size() << "): " << names(report.enabled) << "\n";
  out_ << "order: " << names(report.order) << "\n";
  if (!report.externals.empty()) {
    out_ << "externals:\n";
    for (const auto& [name, resolution] : report.externals) {
      out_ << "  " << name << ": " << to_string(resolution.source);
      if (!resolution.provenance.empty()) {
        out_ << " (" << resolution.provenance << ")";
      }
      out_ << "\n";
    }
  }
}

int
Session::validate()
{
  const auto& m = map();
  if (opt_.porcelain) {
    out_ << canonical_serialize(m);
  } else {
    out_ << "ok: " << m.packages.size() << " packages, digest " << m.source_digest << "\n";
  }
  return kOk;
}

int
Session::resolve_cmd()
{
  print_report(resolved(!opt_.no_defaults));
  return kOk;
}

int
Session::plan_cmd()
{
  auto report = resolved(!opt_.no_defaults);
  auto state = load_state(opt_.state_dir);
  const auto build_plan = plan(map(), report, state);
  if (opt_.porcelain) {
    out_ << serialize_plan(build_plan);
  } else {
    out_ << (build_plan.empty() ? std::string(kNothingToBuild) + "\n" : serialize_plan(build_plan));
  }
  return kOk;
}

int
Session::build_cmd(bool lazy_add)
{
  // `add` builds exactly what was asked for plus its closure, never defaults.
  auto report = resolved(lazy_add ? false : !opt_.no_defaults);
  auto state = load_state(opt_.state_dir);
  const auto build_plan = plan(map(), report, state);

  if (opt_.dry_run) {
    out_ << dry_run(build_plan, report);
    return kOk;
  }

  if (lazy_add && !opt_.porcelain) {
    for (const auto& name : opt_.packages) {
      if (!build_plan.reasons.contains(name)) {
        out_ << "already installed: " << name << "\n";
      }
    }
  }

  const auto existing_lock = read_lockfile(opt_.state_dir);
  const auto lock = merge_lockfile(existing_lock, report);

  if (build_plan.empty()) {
    if (lock != existing_lock) {
      write_lockfile(opt_.state_dir, lock);
    }
    if (!opt_.porcelain) {
      out_ << kNothingToBuild << "\n";
    }
    return kOk;
  }

  ShellRunner runner;
  ExecuteOptions exec;
  exec.jobs = opt_.jobs;
  exec.fail_fast = opt_.fail_fast;
  const auto result = execute(map(), report, build_plan, runner, opt_.state_dir, state, exec);
  write_lockfile(opt_.state_dir, lock);

  for (const auto& entry : result.packages) {
    if (entry.outcome == Outcome::failed) {
      err_ << "layerpm: " << entry.name << " failed";
      if (entry.error) {
        err_ << " (" << to_string(*entry.error) << ")";
      }
      err_ << "\n";
      if (!entry.log.empty()) {
        err_ << entry.log << (entry.log.back() == '\n' ? "" : "\n");
      }
    }
  }

  if (opt_.porcelain) {
    out_ << serialize_execution(result);
  } else {
    for (const auto& entry : result.packages) {
      out_ << to_string(entry.outcome) << ' ' << entry.name << "\n";
    }
    out_ << result.packages.size() << (result.packages.size() == 1 ? " package: " : " packages: ") << result.count(Outcome::built) << " built, "
         << result.count(Outcome::failed) << " failed, " << result.count(Outcome::skipped)
         << " skipped\n";
  }
  return result.success() ? kOk : kBuildFailure;
}

int
Session::why_cmd()
{
  Options scoped = opt_;
  scoped.packages = opt_.given.empty() ? std::vector<std::string>{opt_.why_target} : opt_.given;
  Session inner(scoped, out_, err_);
  inner.map_ = map();
  auto report = inner.resolved(!opt_.no_defaults, false);
  if (!opt_.given.empty()) {
    report.requested = {opt_.given.begin(), opt_.given.end()};
  }
  const auto result = why(map(), report, opt_.why_target);
  for (const auto& diag : result.diagnostics) {
    err_ << "layerpm: " << format_diagnostic(diag) << "\n";
  }
  for (const auto& path : result.paths) {
    std::string line;
    for (const auto& node : path) {
      line += line.empty() ? node : " -> " + node;
    }
    out_ << line << "\n";
  }
  return kOk;
}

int
Session::graph_cmd()
{
  const auto dot = export_dot(resolved(!opt_.no_defaults, false));
  if (opt_.dot_out.empty()) {
    out_ << dot;
    return kOk;
  }
  write_file_atomic(opt_.dot_out, dot);
  if (!opt_.porcelain) {
    err_ << "wrote " << opt_.dot_out << "\n";
  }
  return kOk;
}

int
Session::list_cmd()
{
  const auto state = load_state(opt_.state_dir);
  for (const auto& [name, entry] : state.entries) {
    if (opt_.porcelain) {
      out_ << name << ' ' << entry.hash << "\n";
    } else {
      out_ << name << ' ' << entry.hash.substr(0, 12) << "\n";
    }
  }
  return kOk;
}

void
add_resolution_flags(CLI::App& command, Options& opt)
{
  command.add_flag("--no-defaults", opt.no_defaults, "Do not enable default-on packages");
  command.add_option("--disable", opt.disable, "Package that must stay disabled")->take_all();
  command.add_option("--policy", opt.policy, "External resolution policy")
    ->check(CLI::IsMember({"system_first", "builtin_first", "system_only"}));
  command.add_flag("--relock", opt.relock, "Ignore the lockfile and probe afresh");
}

} // namespace

int
run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
  Options opt;
  if (const char* env = std::getenv("LAYERPM_STATE"); env && *env) {
    opt.state_dir = env;
  } else {
    opt.state_dir = ".layerpm";
  }

  CLI::App app{"layerpm: layered lazy-install package manager"};
  app.fallthrough();
  app.require_subcommand(1);
  app.add_option("--map", opt.map_path, "Package map manifest")->capture_default_str();
  app.add_option("--state", opt.state_dir, "State directory (default: $LAYERPM_STATE or .layerpm)");
  app.add_option("--probe", opt.probe_path, "System probe file (NAME<TAB>provenance per line)");
  app.add_flag("--porcelain", opt.porcelain, "Machine-readable canonical output");

  auto* validate = app.add_subcommand("validate", "Check the package map");

  auto* resolve = app.add_subcommand("resolve", "Print the enabled closure and its order");
  resolve->add_option("packages", opt.packages, "Packages to enable");
  add_resolution_flags(*resolve, opt);

  auto* plan = app.add_subcommand("plan", "Print the incremental build plan");
  plan->add_option("packages", opt.packages, "Packages to enable");
  add_resolution_flags(*plan, opt);

  CLI::App* builds[2] = {
    app.add_subcommand("build", "Plan and build the requested packages"),
    app.add_subcommand("add", "Lazily install packages on top of the current state"),
  };
  for (auto* command : builds) {
    command->add_option("packages", opt.packages, "Packages to enable");
    command->add_option("--jobs,-j", opt.jobs, "Concurrent packages per layer")
      ->check(CLI::PositiveNumber);
    command->add_flag("--dry-run", opt.dry_run, "Print the plan without building");
    command->add_flag("--fail-fast", opt.fail_fast, "Stop starting packages after a failure");
    add_resolution_flags(*command, opt);
  }

  auto* why = app.add_subcommand("why", "Show dependency paths leading to a package");
  why->add_option("package", opt.why_target, "Package to explain")->required();
  why->add_option("--given", opt.given, "Requested packages")->take_all();
  add_resolution_flags(*why, opt);

  auto* graph = app.add_subcommand(
    "graph", "Export the enabled closure as Graphviz DOT (edges point dependent -> dependency)");
  graph->add_option("packages", opt.packages, "Packages to enable");
  graph->add_option("--out", opt.dot_out, "Write DOT to this file instead of stdout");
  add_resolution_flags(*graph, opt);

  auto* list = app.add_subcommand("list", "List built packages");

  std::vector<std::string> argv(args.size() > 1 ? args.begin() + 1 : args.end(), args.end());
  std::reverse(argv.begin(), argv.end());
  try {
    app.parse(argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  Session session(opt, out, err);
  try {
    if (validate->parsed()) {
      return session.validate();
    }
    if (resolve->parsed()) {
      return session.resolve_cmd();
    }
    if (plan->parsed()) {
      return session.plan_cmd();
    }
    if (builds[0]->parsed()) {
      return session.build_cmd(false);
    }
    if (builds[1]->parsed()) {
      return session.build_cmd(true);
    }
    if (why->parsed()) {
      return session.why_cmd();
    }
    if (graph->parsed()) {
      return session.graph_cmd();
    }
    if (list->parsed()) {
      return session.list_cmd();
    }
  } catch (const Exit& e) {
    return e.code;
  } catch (const Error& e) {
    err << "layerpm: " << to_string(e.code()) << ": " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "layerpm: " << e.what() << "\n";
    return kStateError;
  }
  return kOk;
}

} // namespace layerpm::cli
