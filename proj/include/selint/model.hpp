// Copyright (c) selint contributors.
// SPDX-License-Identifier: Apache-2.0
//
// Immutable domain model for a parsed, attribute-resolved type-enforcement
// policy, with every rule mapped back to the source statement it came from.

#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include "selint/errors.hpp"

namespace selint {

// Type, domain, attribute, class and permission names. Letters, digits,
// '_', '-', '.'; never empty, no whitespace or punctuation.
inline bool is_identifier(std::string_view token) {
  if (token.empty()) return false;
  for (char c : token) {
    bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
              (c >= '0' && c <= '9') || c == '_' || c == '-' || c == '.';
    if (!ok) return false;
  }
  return true;
}

struct SourceLocation {
  std::string file;
  std::size_t line = 0;  // 1-based line of the unexpanded statement

  bool operator==(const SourceLocation&) const = default;
  auto operator<=>(const SourceLocation&) const = default;

  std::string str() const { return file + ":" + std::to_string(line); }
};

enum class RuleKind { allow, neverallow, type_transition };

inline std::string_view to_string(RuleKind kind) {
  switch (kind) {
    case RuleKind::allow: return "allow";
    case RuleKind::neverallow: return "neverallow";
    case RuleKind::type_transition: return "type_transition";
  }
  return "?";
}

// Sorts and deduplicates a permission list in place.
inline void normalize_permissions(std::vector<std::string>& perms) {
  std::sort(perms.begin(), perms.end());
  perms.erase(std::unique(perms.begin(), perms.end()), perms.end());
}

// Access-vector rule: allow or neverallow. The target may be the literal
// token "self", which is never attribute-expanded.
struct AVRule {
  RuleKind kind = RuleKind::allow;
  std::string source;
  std::string target;
  std::string security_class;
  std::vector<std::string> permissions;  // sorted, unique, non-empty

  bool operator==(const AVRule&) const = default;
};

// Default-type rule. Only the type_transition kind is modeled.
struct TERule {
  std::string source;
  std::string target;
  std::string security_class;
  std::string default_type;

  bool operator==(const TERule&) const = default;
};

using Rule = std::variant<AVRule, TERule>;

// Canonical key "kind source target:class". Excludes permissions and the
// transition default so rules differing only in those share a key.
inline std::string rule_key(const Rule& rule) {
  if (const auto* av = std::get_if<AVRule>(&rule)) {
    std::string key{to_string(av->kind)};
    key += ' ';
    key += av->source;
    key += ' ';
    key += av->target;
    key += ':';
    key += av->security_class;
    return key;
  }
  const auto& te = std::get<TERule>(rule);
  std::string key = "type_transition ";
  key += te.source;
  key += ' ';
  key += te.target;
  key += ':';
  key += te.security_class;
  return key;
}

// Canonical single-line statement text. Multi-permission sets render braced
// and sorted; a single permission renders bare.
inline std::string render_rule(const Rule& rule) {
  if (const auto* av = std::get_if<AVRule>(&rule)) {
    std::string out{to_string(av->kind)};
    out += ' ';
    out += av->source;
    out += ' ';
    out += av->target;
    out += ':';
    out += av->security_class;
    out += ' ';
    if (av->permissions.size() == 1) {
      out += av->permissions.front();
    } else {
      out += "{ ";
      for (const auto& p : av->permissions) {
        out += p;
        out += ' ';
      }
      out += '}';
    }
    out += ';';
    return out;
  }
  const auto& te = std::get<TERule>(rule);
  return "type_transition " + te.source + " " + te.target + ":" +
         te.security_class + " " + te.default_type + ";";
}

struct MacroUsageRef {
  std::string name;
  std::vector<std::string> args;

  bool operator==(const MacroUsageRef&) const = default;

  std::string str() const {
    std::string out = name + "(";
    for (std::size_t i = 0; i < args.size(); ++i) {
      if (i) out += ", ";
      out += args[i];
    }
    out += ")";
    return out;
  }
};

// One policy statement plus where it came from. Rules produced by a macro
// usage carry via_macro; replicas produced by attribute expansion carry the
// attribute name they were expanded from.
struct MappedRule {
  Rule rule;
  SourceLocation location;
  std::string origin_text;  // exact unexpanded source statement
  std::optional<MacroUsageRef> via_macro;
  std::vector<SourceLocation> contributing;  // merged-in duplicate statements
  std::optional<std::string> source_attribute;
  std::optional<std::string> target_attribute;

  bool operator==(const MappedRule&) const = default;
};

struct SecurityClass {
  std::string name;
  // Permission vocabulary; empty when no access-vector definitions were seen.
  std::set<std::string> known_permissions;

  bool operator==(const SecurityClass&) const = default;
};

struct MacroUsageSite {
  std::string name;
  std::vector<std::string> args;
  SourceLocation location;

  bool operator==(const MacroUsageSite&) const = default;
};

// Non-fatal parser or plugin message, reported on stderr by the CLI.
struct Diagnostic {
  std::string message;
  std::optional<SourceLocation> location;

  bool operator==(const Diagnostic&) const = default;
};

using DiagnosticSink = std::vector<Diagnostic>;

inline void warn(DiagnosticSink& sink, std::string message,
                 std::optional<SourceLocation> location = std::nullopt) {
  sink.push_back(Diagnostic{std::move(message), std::move(location)});
}

// A parsed policy. `rules` is the merged, unexpanded view; `expanded_rules`
// is the attribute-expanded view produced by expand_attributes(). Immutable
// after construction and safe to share across concurrent plugin runs.
struct Policy {
  std::vector<MappedRule> rules;
  std::vector<MappedRule> neverallows;
  std::set<std::string> types;
  std::map<std::string, std::set<std::string>> attributes;  // attr -> members
  std::map<std::string, SecurityClass> classes;
  std::vector<MacroUsageSite> macro_usages;
  std::vector<MappedRule> expanded_rules;
  bool expanded_view_built = false;
  std::size_t expanded_rule_count = 0;

  bool operator==(const Policy&) const = default;

  bool is_declared(const std::string& id) const {
    return types.count(id) != 0 || attributes.count(id) != 0;
  }

  const std::set<std::string>* attribute_members(const std::string& id) const {
    auto it = attributes.find(id);
    return it == attributes.end() ? nullptr : &it->second;
  }
};

// Merges AVRules sharing a rule_key by permission-set union. The merged rule
// keeps the earliest statement's location and origin and records the other
// contributing locations. TERules are never merged; two transitions with the
// same key but different defaults are an error naming both statements.
inline std::vector<MappedRule> merge_rules(std::vector<MappedRule> rules) {
  std::vector<MappedRule> merged;
  merged.reserve(rules.size());
  std::unordered_map<std::string, std::size_t> first_av;
  std::unordered_map<std::string, std::size_t> first_te;

  for (auto& mapped : rules) {
    std::string key = rule_key(mapped.rule);
    if (const auto* av = std::get_if<AVRule>(&mapped.rule)) {
      auto [it, inserted] = first_av.emplace(std::move(key), merged.size());
      if (inserted) {
        merged.push_back(std::move(mapped));
        continue;
      }
      MappedRule& target = merged[it->second];
      auto& perms = std::get<AVRule>(target.rule).permissions;
      perms.insert(perms.end(), av->permissions.begin(), av->permissions.end());
      normalize_permissions(perms);
      target.contributing.push_back(mapped.location);
      target.contributing.insert(target.contributing.end(),
                                 mapped.contributing.begin(),
                                 mapped.contributing.end());
    } else {
      const auto& te = std::get<TERule>(mapped.rule);
      auto [it, inserted] = first_te.emplace(std::move(key), merged.size());
      if (!inserted) {
        const auto& prior = std::get<TERule>(merged[it->second].rule);
        if (prior.default_type != te.default_type) {
          throw ParseError("conflicting type_transition defaults '" +
                               prior.default_type + "' (" +
                               merged[it->second].location.str() + ") and '" +
                               te.default_type + "' for " + it->first,
                           mapped.location.file, mapped.location.line);
        }
      }
      merged.push_back(std::move(mapped));
    }
  }
  return merged;
}

}  // namespace selint
