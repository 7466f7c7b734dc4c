// Copyright (c) selint contributors.
// SPDX-License-Identifier: Apache-2.0
//
// Shared test helpers: in-memory policy parsing, plugin driving, temp
// directories, and subprocess capture for CLI tests.

#pragma once

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "selint/selint.hpp"

namespace selint::test {

// Parses a single policy file, optionally preceded by a te_macros file.
inline ParseOutput parse_text(const std::string& policy_text,
                              const std::string& macro_text = "",
                              const ParserOptions& options = {}) {
  SourceSet src;
  if (!macro_text.empty()) {
    src.files.push_back(SourceFile{"te_macros", macro_text});
    src.macro_files.insert("te_macros");
  }
  src.files.push_back(SourceFile{"policy.te", policy_text});
  return parse_policy(src, options);
}

// Same, with a global_macros file as well.
inline ParseOutput parse_text_with_globals(const std::string& policy_text,
                                           const std::string& global_text,
                                           const std::string& macro_text = "",
                                           const ParserOptions& options = {}) {
  SourceSet src;
  src.files.push_back(SourceFile{"global_macros", global_text});
  src.macro_files.insert("global_macros");
  if (!macro_text.empty()) {
    src.files.push_back(SourceFile{"te_macros", macro_text});
    src.macro_files.insert("te_macros");
  }
  src.files.push_back(SourceFile{"policy.te", policy_text});
  return parse_policy(src, options);
}

inline void build_expanded_view(ParseOutput& out) {
  out.policy = expand_attributes(std::move(out.policy), out.diagnostics);
}

inline ConfigFile config_from(const std::string& text,
                              const std::string& path = "test.conf") {
  ConfigFile config;
  config.parse(text, path);
  return config;
}

// Configures and runs one plugin over a parsed policy.
inline std::vector<Finding> run_plugin(Plugin& plugin,
                                       const std::string& config_text,
                                       const ParseOutput& out,
                                       DiagnosticSink* sink = nullptr) {
  plugin.configure(config_from(config_text));
  DiagnosticSink local;
  AnalysisInput input{out.policy, out.macros};
  auto findings = plugin.run(input, sink ? *sink : local);
  std::sort(findings.begin(), findings.end(), finding_less);
  return findings;
}

// Unique scratch directory, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::mt19937_64 rng{std::random_device{}()};
    auto base = std::filesystem::temp_directory_path();
    for (int attempt = 0; attempt < 64; ++attempt) {
      auto candidate = base / (tag + "-" + std::to_string(rng()));
      std::error_code ec;
      if (std::filesystem::create_directory(candidate, ec)) {
        path_ = candidate;
        return;
      }
    }
    throw std::runtime_error("cannot create temp dir for " + tag);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string str() const { return path_.string(); }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& path,
                       const std::string& contents) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << contents;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct ProcessResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

inline std::string shell_quote(const std::string& s) {
  std::string quoted = "'";
  for (char c : s) {
    if (c == '\'') {
      quoted += "'\\''";
    } else {
      quoted += c;
    }
  }
  quoted += "'";
  return quoted;
}

// Runs argv with optional env assignments, capturing both streams.
inline ProcessResult run_process(
    const std::vector<std::string>& argv,
    const std::vector<std::pair<std::string, std::string>>& env = {},
    const std::string& workdir = "") {
  TempDir capture("selint-capture");
  auto out_path = capture.path() / "out";
  auto err_path = capture.path() / "err";

  std::string command;
  if (!workdir.empty()) {
    command += "cd " + shell_quote(workdir) + " && ";
  }
  for (const auto& [key, value] : env) {
    command += key + "=" + shell_quote(value) + " ";
  }
  for (const auto& arg : argv) {
    command += shell_quote(arg);
    command += ' ';
  }
  command += "> " + shell_quote(out_path.string()) + " 2> " +
             shell_quote(err_path.string());

  int status = std::system(command.c_str());
  ProcessResult result;
  if (status != -1 && WIFEXITED(status)) {
    result.exit_code = WEXITSTATUS(status);
  }
  result.out = read_file(out_path);
  result.err = read_file(err_path);
  return result;
}

inline std::string selint_bin() { return SELINT_BIN; }
inline std::string repo_dir() { return SELINT_REPO_DIR; }
inline std::string default_profile() {
  return repo_dir() + std::string("/profiles/default/selint-profile");
}
inline std::string fixture_dir(const std::string& name) {
  return repo_dir() + std::string("/tests/fixtures/") + name;
}

}  // namespace selint::test
