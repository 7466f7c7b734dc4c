// Copyright (c) selint contributors.
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include "selint/findings.hpp"

using namespace selint;

namespace {

Finding make(const std::string& plugin, std::optional<double> score,
             const std::string& file, std::size_t line,
             const std::string& rule) {
  Finding f;
  f.plugin = plugin;
  f.score = score;
  f.location = SourceLocation{file, line};
  f.rule_text = rule;
  return f;
}

}  // namespace

TEST_CASE("sort_findings is total and deterministic") {
  std::vector<Finding> findings;
  findings.push_back(make("p", std::nullopt, "a.te", 1, "allow a a:file read;"));
  findings.push_back(make("p", 0.25, "z.te", 9, "r"));
  findings.push_back(make("p", 1.0, "b.te", 2, "r"));
  findings.push_back(make("p", 0.25, "a.te", 9, "r"));
  findings.push_back(make("p", 0.25, "a.te", 3, "r"));
  sort_findings(findings);

  CHECK(findings[0].score == 1.0);
  CHECK(findings[1].location == SourceLocation{"a.te", 3});
  CHECK(findings[2].location == SourceLocation{"a.te", 9});
  CHECK(findings[3].location == SourceLocation{"z.te", 9});
  CHECK_FALSE(findings[4].score.has_value());

  auto again = findings;
  std::reverse(again.begin(), again.end());
  sort_findings(again);
  CHECK(again == findings);
}

TEST_CASE("ties fall back to rule text then plugin then message") {
  Finding a = make("alpha", 0.5, "f.te", 4, "rule a");
  Finding b = make("beta", 0.5, "f.te", 4, "rule a");
  Finding c = make("alpha", 0.5, "f.te", 4, "rule b");
  CHECK(finding_less(a, b));
  CHECK(finding_less(a, c));
  CHECK(finding_less(b, c));
  CHECK_FALSE(finding_less(c, a));
}

TEST_CASE("format_score renders two decimals") {
  CHECK(format_score(1.0) == "1.00");
  CHECK(format_score(0.5) == "0.50");
  CHECK(format_score(35.0 / 60.0) == "0.58");
  CHECK(format_score(0.0) == "0.00");
}

TEST_CASE("format_text renders score prefix, message lines, suggestion") {
  Finding f = make("simple_macros", 1.0, "logd.te", 4,
                   "allow logd rootfs:dir { getattr create open read search ioctl };");
  f.suggestion = "allow logd rootfs:dir { r_dir_perms create };";
  std::string expected =
      "1.00: logd.te:4: allow logd rootfs:dir { getattr create open read "
      "search ioctl };\n"
      "    suggestion: allow logd rootfs:dir { r_dir_perms create };\n";
  CHECK(format_text({f}) == expected);

  Finding plain = make("unnecessary_rules", std::nullopt, "w.te", 8,
                       "type_transition w we:file wd;");
  plain.message = "tuple 'domain_transition' incomplete\nmissing: x;";
  CHECK(format_text({plain}) ==
        "w.te:8: type_transition w we:file wd;\n"
        "    tuple 'domain_transition' incomplete\n"
        "    missing: x;\n");
}

TEST_CASE("format_machine emits one JSON object per line") {
  Finding f = make("risky_rules", 1.0, "app.te", 6,
                   "allow untrusted_app system_file:file execute;");
  f.severity = Severity::info;
  std::string line = format_machine({f});
  CHECK(line ==
        "{\"plugin\":\"risky_rules\",\"severity\":\"info\",\"score\":1.0,"
        "\"file\":\"app.te\",\"line\":6,"
        "\"rule\":\"allow untrusted_app system_file:file execute;\","
        "\"message\":\"\",\"suggestion\":null}\n");

  Finding bare = make("user_neverallows", std::nullopt, "a.te", 1, "r;");
  bare.severity = Severity::violation;
  bare.message = "violates: neverallow a b:file read;";
  auto parsed = nlohmann::json::parse(format_machine({bare}));
  CHECK(parsed["score"].is_null());
  CHECK(parsed["severity"] == "violation");
  CHECK(parsed["suggestion"].is_null());
}

TEST_CASE("severity names and violation detection") {
  CHECK(to_string(Severity::info) == "info");
  CHECK(to_string(Severity::suggestion) == "suggestion");
  CHECK(to_string(Severity::warning) == "warning");
  CHECK(to_string(Severity::violation) == "violation");

  std::vector<Finding> findings{make("p", std::nullopt, "f", 1, "r")};
  CHECK_FALSE(has_violation(findings));
  findings[0].severity = Severity::violation;
  CHECK(has_violation(findings));
}
