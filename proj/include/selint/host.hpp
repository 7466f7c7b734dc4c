// Copyright (c) selint contributors.
// SPDX-License-Identifier: Apache-2.0
//
// Plugin lifecycle: registration, per-plugin configuration, profile loading,
// execution over a shared immutable policy, and finding aggregation.

#pragma once

#include <chrono>
#include <cstddef>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "selint/config.hpp"
#include "selint/errors.hpp"
#include "selint/findings.hpp"
#include "selint/m4.hpp"
#include "selint/model.hpp"
#include "selint/parse.hpp"

namespace selint {

// Read-only analysis surface shared by all plugins. The policy carries both
// the unexpanded and the attribute-expanded rule views; each plugin picks
// the view its semantics require.
struct AnalysisInput {
  const Policy& policy;
  const MacroTable& macros;
};

class Plugin {
 public:
  virtual ~Plugin() = default;
  virtual std::string_view name() const = 0;
  virtual std::string_view description() const = 0;

  // Reads and validates this plugin's config section. Unknown keys and
  // schema violations throw ConfigError.
  virtual void configure(const ConfigFile& config) = 0;

  // Pure analysis over the shared input; diagnostics are non-fatal notes.
  virtual std::vector<Finding> run(const AnalysisInput& input,
                                   DiagnosticSink& sink) const = 0;
};

// Compile-time plugin registration: adding a plugin means implementing
// Plugin and appending one factory here.
class PluginRegistry {
 public:
  using Factory = std::function<std::unique_ptr<Plugin>()>;

  void add(Factory factory) { factories_.push_back(std::move(factory)); }

  std::vector<std::unique_ptr<Plugin>> instantiate() const {
    std::vector<std::unique_ptr<Plugin>> plugins;
    plugins.reserve(factories_.size());
    for (const auto& factory : factories_) plugins.push_back(factory());
    return plugins;
  }

 private:
  std::vector<Factory> factories_;
};

struct Profile {
  std::string name;
  std::vector<std::string> enabled;
  std::string format = "text";  // text | machine
  ConfigFile config;
  ParserOptions parser_options;
};

// Reads a profile file and merges the plugin config files it references
// (paths resolved relative to the profile's directory).
inline Profile load_profile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read profile", path);
  std::ostringstream ss;
  ss << in.rdbuf();

  ConfigFile profile_file;
  profile_file.parse(ss.str(), path);
  profile_file.reject_unknown_keys(
      "profile", {"name", "plugins", "format", "configs",
                  "undeclared_references"});
  if (!profile_file.has_section("profile")) {
    throw ConfigError("missing [profile] section", path);
  }

  Profile profile;
  profile.name = profile_file.scalar_or("profile", "name", "unnamed");
  profile.enabled = profile_file.list("profile", "plugins");
  profile.format = profile_file.scalar_or("profile", "format", "text");
  if (profile.format != "text" && profile.format != "machine") {
    throw ConfigError("format must be 'text' or 'machine'", path,
                      "profile.format");
  }
  std::string undeclared =
      profile_file.scalar_or("profile", "undeclared_references", "error");
  if (undeclared == "warn") {
    profile.parser_options.undeclared_reference_is_error = false;
  } else if (undeclared != "error") {
    throw ConfigError("undeclared_references must be 'error' or 'warn'", path,
                      "profile.undeclared_references");
  }

  std::filesystem::path base = std::filesystem::path(path).parent_path();
  for (const auto& rel : profile_file.list("profile", "configs")) {
    std::filesystem::path config_path(rel);
    if (config_path.is_relative()) config_path = base / config_path;
    std::ifstream cfg_in(config_path, std::ios::binary);
    if (!cfg_in) {
      throw ConfigError("cannot read config file", config_path.string());
    }
    std::ostringstream cfg_ss;
    cfg_ss << cfg_in.rdbuf();
    profile.config.parse(cfg_ss.str(), config_path.string());
  }
  return profile;
}

struct PluginStats {
  std::string plugin;
  double seconds = 0;
  std::size_t findings = 0;
};

struct RunStats {
  std::size_t expanded_rule_count = 0;
  std::vector<PluginStats> plugins;
  std::size_t peak_rss_kb = 0;
};

struct RunOutcome {
  std::vector<Finding> findings;
  DiagnosticSink diagnostics;
  std::optional<std::string> failed_plugin;
  std::string failure_message;
  RunStats stats;
};

// Peak resident set size of this process in KiB, 0 where unavailable.
inline std::size_t read_peak_rss_kb() {
  std::ifstream status("/proc/self/status");
  std::string line;
  while (std::getline(status, line)) {
    if (line.rfind("VmHWM:", 0) == 0) {
      std::size_t kb = 0;
      std::sscanf(line.c_str(), "VmHWM: %zu", &kb);
      return kb;
    }
  }
  return 0;
}

// Runs the profile's enabled plugins in order. All plugins are configured
// before any runs, so a config schema violation aborts the whole run
// (ConfigError propagates). An internal plugin failure stops execution and
// is reported in the outcome; findings from completed plugins are kept.
inline RunOutcome run_profile(const Policy& policy, const MacroTable& macros,
                              const Profile& profile,
                              const PluginRegistry& registry) {
  RunOutcome outcome;
  outcome.stats.expanded_rule_count = policy.expanded_rule_count;

  auto plugins = registry.instantiate();
  std::vector<Plugin*> enabled;
  for (const auto& name : profile.enabled) {
    Plugin* found = nullptr;
    for (const auto& plugin : plugins) {
      if (plugin->name() == name) {
        found = plugin.get();
        break;
      }
    }
    if (!found) {
      throw ConfigError("profile enables unknown plugin '" + name + "'");
    }
    if (!profile.config.has_section(name)) {
      throw ConfigError("no config section for enabled plugin", "", name);
    }
    enabled.push_back(found);
  }

  for (Plugin* plugin : enabled) {
    plugin->configure(profile.config);
  }

  AnalysisInput input{policy, macros};
  for (Plugin* plugin : enabled) {
    auto start = std::chrono::steady_clock::now();
    try {
      auto findings = plugin->run(input, outcome.diagnostics);
      outcome.findings.insert(outcome.findings.end(),
                              std::make_move_iterator(findings.begin()),
                              std::make_move_iterator(findings.end()));
      std::chrono::duration<double> elapsed =
          std::chrono::steady_clock::now() - start;
      outcome.stats.plugins.push_back(PluginStats{
          std::string(plugin->name()), elapsed.count(), findings.size()});
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      outcome.failed_plugin = std::string(plugin->name());
      outcome.failure_message = e.what();
      break;
    }
  }

  sort_findings(outcome.findings);
  outcome.stats.peak_rss_kb = read_peak_rss_kb();
  return outcome;
}

}  // namespace selint
