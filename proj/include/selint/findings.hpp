// Copyright (c) selint contributors.
// SPDX-License-Identifier: Apache-2.0
//
// Finding type, deterministic ordering, and the two output formats: human
// text (`SCORE: FILE:LINE: RULE`) and machine (one JSON record per line).

#pragma once

#include <algorithm>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "selint/model.hpp"

namespace selint {

enum class Severity { info, suggestion, warning, violation };

inline std::string_view to_string(Severity severity) {
  switch (severity) {
    case Severity::info: return "info";
    case Severity::suggestion: return "suggestion";
    case Severity::warning: return "warning";
    case Severity::violation: return "violation";
  }
  return "?";
}

struct Finding {
  std::string plugin;
  Severity severity = Severity::info;
  std::optional<double> score;  // in [0,1] when present
  SourceLocation location;
  std::string rule_text;
  std::string message;
  std::optional<std::string> suggestion;

  bool operator==(const Finding&) const = default;
};

// Scored findings first, by descending score, then file, line, rule text.
// Remaining fields break residual ties so the order is total.
inline bool finding_less(const Finding& a, const Finding& b) {
  if (a.score.has_value() != b.score.has_value()) return a.score.has_value();
  if (a.score && b.score && *a.score != *b.score) return *a.score > *b.score;
  if (a.location.file != b.location.file) {
    return a.location.file < b.location.file;
  }
  if (a.location.line != b.location.line) {
    return a.location.line < b.location.line;
  }
  if (a.rule_text != b.rule_text) return a.rule_text < b.rule_text;
  if (a.plugin != b.plugin) return a.plugin < b.plugin;
  if (a.message != b.message) return a.message < b.message;
  return a.suggestion < b.suggestion;
}

inline void sort_findings(std::vector<Finding>& findings) {
  std::sort(findings.begin(), findings.end(), finding_less);
}

inline std::string format_score(double score) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", score);
  return buf;
}

inline std::string format_text(const std::vector<Finding>& findings) {
  std::string out;
  for (const auto& f : findings) {
    if (f.score) {
      out += format_score(*f.score);
      out += ": ";
    }
    out += f.location.str();
    out += ": ";
    out += f.rule_text;
    out += '\n';
    if (!f.message.empty()) {
      std::size_t start = 0;
      while (start <= f.message.size()) {
        std::size_t end = f.message.find('\n', start);
        if (end == std::string::npos) end = f.message.size();
        out += "    ";
        out += f.message.substr(start, end - start);
        out += '\n';
        if (end == f.message.size()) break;
        start = end + 1;
      }
    }
    if (f.suggestion) {
      out += "    suggestion: ";
      out += *f.suggestion;
      out += '\n';
    }
  }
  return out;
}

// One self-delimiting JSON record per finding, every field present or
// explicitly null, for CI parsing.
inline std::string format_machine(const std::vector<Finding>& findings) {
  std::string out;
  for (const auto& f : findings) {
    nlohmann::ordered_json record;
    record["plugin"] = f.plugin;
    record["severity"] = to_string(f.severity);
    if (f.score) record["score"] = *f.score;
    else record["score"] = nullptr;
    record["file"] = f.location.file;
    record["line"] = f.location.line;
    record["rule"] = f.rule_text;
    record["message"] = f.message;
    if (f.suggestion) record["suggestion"] = *f.suggestion;
    else record["suggestion"] = nullptr;
    out += record.dump();
    out += '\n';
  }
  return out;
}

inline bool has_violation(const std::vector<Finding>& findings) {
  return std::any_of(findings.begin(), findings.end(), [](const Finding& f) {
    return f.severity == Severity::violation;
  });
}

}  // namespace selint
