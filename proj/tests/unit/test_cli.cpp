// Copyright (c) selint contributors.
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <string>
#include <vector>

#include "support/helpers.hpp"

using namespace selint;
using test::default_profile;
using test::fixture_dir;
using test::repo_dir;
using test::run_process;
using test::selint_bin;

namespace {

test::ProcessResult run_cli(std::vector<std::string> args,
                            const std::vector<std::pair<std::string, std::string>>&
                                env = {}) {
  std::vector<std::string> argv{selint_bin()};
  argv.insert(argv.end(), args.begin(), args.end());
  return run_process(argv, env, repo_dir());
}

}  // namespace

TEST_CASE("default profile reports macro suggestions and risk scores") {
  auto result = run_cli({"--policy", "tests/fixtures/logd", "--profile",
                         default_profile()});
  REQUIRE(result.exit_code == 0);
  CHECK(result.out ==
        "1.00: tests/fixtures/logd/logd.te:4: allow logd rootfs:dir { getattr "
        "create open read search ioctl };\n"
        "    suggestion: allow logd rootfs:dir { r_dir_perms create };\n"
        "0.00: tests/fixtures/logd/logd.te:4: allow logd rootfs:dir { create "
        "getattr ioctl open read search };\n");
  CHECK(result.err.find("warning: identifier 'logd' is not assigned to any "
                        "bin; scored 0") != std::string::npos);
}

TEST_CASE("parametrized macro suggestions name the replaced rules") {
  auto result = run_cli({"--policy", "tests/fixtures/sockets", "--profile",
                         default_profile(), "--plugins",
                         "parametrized_macros"});
  REQUIRE(result.exit_code == 0);
  CHECK(result.out ==
        "1.00: tests/fixtures/sockets/policy.te:5: unix_socket_connect(a, b, c)\n"
        "    replaces tests/fixtures/sockets/policy.te:5: allow a "
        "b_socket:sock_file write;\n"
        "    replaces tests/fixtures/sockets/policy.te:6: allow a "
        "c:unix_stream_socket connectto;\n"
        "    suggestion: unix_socket_connect(a, b, c)\n");
  CHECK(result.err.empty());
}

TEST_CASE("risk and trust criteria order the same rules differently") {
  auto risk = run_cli({"--policy", "tests/fixtures/appdomain", "--profile",
                       default_profile(), "--plugins", "risky_rules"});
  REQUIRE(risk.exit_code == 0);
  CHECK(risk.out ==
        "1.00: tests/fixtures/appdomain/app.te:6: allow untrusted_app "
        "system_file:file execute;\n"
        "0.50: tests/fixtures/appdomain/app.te:5: allow untrusted_app "
        "security_file:dir { getattr search };\n");
  CHECK(risk.err.empty());

  auto trust = run_cli({"--policy", "tests/fixtures/appdomain", "--profile",
                        default_profile(), "--plugins", "risky_rules",
                        "--criterion", "trust_lh"});
  REQUIRE(trust.exit_code == 0);
  CHECK(trust.out ==
        "1.00: tests/fixtures/appdomain/app.te:5: allow untrusted_app "
        "security_file:dir { getattr search };\n"
        "0.58: tests/fixtures/appdomain/app.te:6: allow untrusted_app "
        "system_file:file execute;\n");
}

TEST_CASE("machine format emits one JSON record per finding") {
  auto result = run_cli({"--policy", "tests/fixtures/appdomain", "--profile",
                         default_profile(), "--plugins", "risky_rules",
                         "--format", "machine"});
  REQUIRE(result.exit_code == 0);
  CHECK(result.out ==
        "{\"plugin\":\"risky_rules\",\"severity\":\"info\",\"score\":1.0,"
        "\"file\":\"tests/fixtures/appdomain/app.te\",\"line\":6,"
        "\"rule\":\"allow untrusted_app system_file:file execute;\","
        "\"message\":\"\",\"suggestion\":null}\n"
        "{\"plugin\":\"risky_rules\",\"severity\":\"info\",\"score\":0.5,"
        "\"file\":\"tests/fixtures/appdomain/app.te\",\"line\":5,"
        "\"rule\":\"allow untrusted_app security_file:dir { getattr search "
        "};\",\"message\":\"\",\"suggestion\":null}\n");
}

TEST_CASE("violations exit with code 2") {
  test::TempDir dir("selint-cli");
  test::write_file(dir.path() / "profile",
                   "[profile]\nname = gate\nplugins = [ user_neverallows ]\n"
                   "configs = [ un.conf ]\n");
  test::write_file(dir.path() / "un.conf",
                   "[user_neverallows]\nrules = [ \"neverallow untrusted_app "
                   "security_file:dir search;\" ]\n");
  auto result = run_cli({"--policy", "tests/fixtures/appdomain", "--profile",
                         (dir.path() / "profile").string()});
  REQUIRE(result.exit_code == 2);
  CHECK(result.out ==
        "tests/fixtures/appdomain/app.te:5: allow untrusted_app security_file:dir "
        "{ getattr search };\n"
        "    violates: neverallow untrusted_app security_file:dir search;\n"
        "    forbidden: search\n");
}

TEST_CASE("strict mode exits 1 when any finding exists") {
  auto result = run_cli({"--policy", "tests/fixtures/logd", "--profile",
                         default_profile(), "--strict"});
  CHECK(result.exit_code == 1);

  test::TempDir dir("selint-clean");
  test::write_file(dir.path() / "clean.te", "type a;\n");
  auto clean = run_cli({"--policy", (dir.path()).string(), "--profile",
                        default_profile(), "--strict"});
  CHECK(clean.exit_code == 0);
  CHECK(clean.out.empty());
}

TEST_CASE("fatal problems exit 3 with a single error line") {
  auto missing = run_cli({"--policy", "tests/fixtures/nowhere", "--profile",
                          default_profile()});
  CHECK(missing.exit_code == 3);
  CHECK(missing.err ==
        "error: policy directory not found: tests/fixtures/nowhere\n");

  test::TempDir empty("selint-empty");
  auto no_sources = run_cli({"--policy", empty.str(), "--profile",
                             default_profile()});
  CHECK(no_sources.exit_code == 3);
  CHECK(no_sources.err == "error: no policy sources in the given directories\n");

  auto no_dir = run_cli({"--profile", default_profile()});
  CHECK(no_dir.exit_code == 3);
  CHECK(no_dir.err == "error: no policy sources (pass --policy DIR)\n");

  auto bad_plugin = run_cli({"--policy", "tests/fixtures/appdomain", "--profile",
                             default_profile(), "--plugins", "ghost"});
  CHECK(bad_plugin.exit_code == 3);
  CHECK(bad_plugin.err.find("unknown plugin 'ghost'") != std::string::npos);

  test::TempDir broken("selint-broken");
  test::write_file(broken.path() / "bad.te", "type ;\n");
  auto parse_fail = run_cli({"--policy", broken.str(), "--profile",
                             default_profile()});
  CHECK(parse_fail.exit_code == 3);
  CHECK(parse_fail.err.rfind("error: ", 0) == 0);
  CHECK(parse_fail.err.find("bad.te:1") != std::string::npos);

  auto bad_flag = run_cli({"--bogus"});
  CHECK(bad_flag.exit_code == 3);

  auto bad_format = run_cli({"--policy", "tests/fixtures/appdomain", "--profile",
                             default_profile(), "--format", "xml"});
  CHECK(bad_format.exit_code == 3);
}

TEST_CASE("the profile can come from the environment") {
  auto result = run_cli({"--policy", "tests/fixtures/appdomain", "--plugins",
                         "risky_rules"},
                        {{"SELINT_PROFILE", default_profile()}});
  REQUIRE(result.exit_code == 0);
  CHECK(result.out.find("1.00: tests/fixtures/appdomain/app.te:6:") !=
        std::string::npos);
}

TEST_CASE("list-plugins names every builtin with its description") {
  auto result = run_cli({"--list-plugins"});
  REQUIRE(result.exit_code == 0);
  CHECK(result.out ==
        "simple_macros: suggest permission_set macros for individually listed "
        "permissions\n"
        "parametrized_macros: suggest rule_block macro usages with concrete "
        "arguments\n"
        "risky_rules: score rules by configurable risk or trust criteria\n"
        "unnecessary_rules: detect incomplete rule tuples, debug rules, and "
        "ineffective permissions\n"
        "user_neverallows: enforce analyst-supplied neverallow rules\n");
}

TEST_CASE("stats go to stderr") {
  auto result = run_cli({"--policy", "tests/fixtures/appdomain", "--profile",
                         default_profile(), "--plugins", "risky_rules",
                         "--stats"});
  REQUIRE(result.exit_code == 0);
  CHECK(result.err.find("stats: expanded rules: 2\n") != std::string::npos);
  CHECK(result.err.find("stats: plugin risky_rules: ") != std::string::npos);
  CHECK(result.err.find("stats: peak rss: ") != std::string::npos);
}

TEST_CASE("an AOSP style tree surfaces tuple and constraint findings") {
  std::vector<std::string> args{"--policy", "tests/fixtures/aosp/system",
                                "tests/fixtures/aosp/vendor", "--profile",
                                default_profile()};
  auto first = run_cli(args);
  REQUIRE(first.exit_code == 0);
  CHECK(first.out.find("tuple 'domain_transition' incomplete") !=
        std::string::npos);
  CHECK(first.out.find(
            "missing: allow widget widget_exec:file { create write };") !=
        std::string::npos);
  CHECK(first.out.find("may be ineffective ('file_use')") !=
        std::string::npos);

  auto second = run_cli(args);
  CHECK(second.exit_code == first.exit_code);
  CHECK(second.out == first.out);
  CHECK(second.err == first.err);
}

TEST_CASE("help prints usage") {
  auto result = run_cli({"--help"});
  CHECK(result.exit_code == 0);
  CHECK(result.out.find("--policy") != std::string::npos);
}
