// Copyright (c) selint contributors.
// SPDX-License-Identifier: Apache-2.0
//
// Command-line frontend: sources -> parser -> plugin host -> findings.
// Findings go to stdout, diagnostics and stats to stderr. Exit codes:
// 0 clean, 1 findings under --strict, 2 neverallow violations,
// 3 configuration or parse error.

#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "selint/selint.hpp"

namespace {

constexpr int kExitClean = 0;
constexpr int kExitStrictFindings = 1;
constexpr int kExitViolations = 2;
constexpr int kExitError = 3;

std::string resolve_profile_path(const std::string& flag_value) {
  if (!flag_value.empty()) return flag_value;
  if (const char* env = std::getenv("SELINT_PROFILE"); env && *env) {
    return env;
  }
  return "./selint-profile";
}

void print_diagnostics(const selint::DiagnosticSink& diagnostics) {
  for (const auto& d : diagnostics) {
    std::cerr << "warning: ";
    if (d.location) std::cerr << d.location->str() << ": ";
    std::cerr << d.message << '\n';
  }
}

std::vector<std::string> split_csv(const std::string& text) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t comma = text.find(',', start);
    if (comma == std::string::npos) comma = text.size();
    std::string part = text.substr(start, comma - start);
    if (!part.empty()) parts.push_back(std::move(part));
    if (comma == text.size()) break;
    start = comma + 1;
  }
  return parts;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"selint: a source-level SEAndroid policy linter"};
  std::vector<std::string> policy_dirs;
  std::string profile_flag;
  std::string plugins_flag;
  std::string criterion_flag;
  std::string format_flag;
  bool strict = false;
  bool list_plugins = false;
  bool stats = false;

  app.add_option("--policy", policy_dirs,
                 "Policy source directory (repeatable, ordered)")
      ->take_all();
  app.add_option("--profile", profile_flag,
                 "Profile file (default: $SELINT_PROFILE or ./selint-profile)");
  app.add_option("--plugins", plugins_flag,
                 "Comma-separated plugin names; replaces the profile's list");
  app.add_option("--criterion", criterion_flag,
                 "Override the risky_rules scoring criterion");
  app.add_option("--format", format_flag, "Output format: text or machine")
      ->check(CLI::IsMember({"text", "machine"}));
  app.add_flag("--strict", strict, "Exit nonzero when any finding is emitted");
  app.add_flag("--list-plugins", list_plugins,
               "List registered plugins and exit");
  app.add_flag("--stats", stats,
               "Print rule counts, plugin timings, and peak memory to stderr");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }

  const selint::PluginRegistry registry = selint::builtin_registry();

  if (list_plugins) {
    for (const auto& plugin : registry.instantiate()) {
      std::cout << plugin->name() << ": " << plugin->description() << '\n';
    }
    return kExitClean;
  }

  try {
    selint::Profile profile =
        selint::load_profile(resolve_profile_path(profile_flag));
    if (!plugins_flag.empty()) {
      profile.enabled = split_csv(plugins_flag);
    }
    if (!criterion_flag.empty()) {
      profile.config.set_scalar("risky_rules", "criterion", criterion_flag);
    }
    if (!format_flag.empty()) profile.format = format_flag;

    if (policy_dirs.empty()) {
      std::cerr << "error: no policy sources (pass --policy DIR)\n";
      return kExitError;
    }
    selint::SourceSet sources = selint::load_source_set(policy_dirs);
    if (sources.files.empty() && sources.macro_files.empty()) {
      std::cerr << "error: no policy sources in the given directories\n";
      return kExitError;
    }

    selint::ParseOutput parsed =
        selint::parse_policy(sources, profile.parser_options);
    parsed.policy =
        selint::expand_attributes(std::move(parsed.policy), parsed.diagnostics);

    selint::RunOutcome outcome = selint::run_profile(
        parsed.policy, parsed.macros, profile, registry);

    print_diagnostics(parsed.diagnostics);
    print_diagnostics(outcome.diagnostics);

    if (profile.format == "machine") {
      std::cout << selint::format_machine(outcome.findings);
    } else {
      std::cout << selint::format_text(outcome.findings);
    }

    if (stats) {
      std::cerr << "stats: expanded rules: "
                << outcome.stats.expanded_rule_count << '\n';
      for (const auto& p : outcome.stats.plugins) {
        std::cerr << "stats: plugin " << p.plugin << ": " << p.seconds
                  << " s, " << p.findings << " findings\n";
      }
      std::cerr << "stats: peak rss: " << outcome.stats.peak_rss_kb
                << " KiB\n";
    }

    if (outcome.failed_plugin) {
      std::cerr << "error: plugin '" << *outcome.failed_plugin
                << "' failed: " << outcome.failure_message << '\n';
      return kExitError;
    }
    if (selint::has_violation(outcome.findings)) return kExitViolations;
    if (strict && !outcome.findings.empty()) return kExitStrictFindings;
    return kExitClean;
  } catch (const selint::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  } catch (const selint::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  } catch (const selint::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
}
