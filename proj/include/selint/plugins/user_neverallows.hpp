// Copyright (c) selint contributors.
// SPDX-License-Identifier: Apache-2.0
//
// Enforces analyst-supplied neverallow statements against the expanded rule
// set. Statements use policy syntax with set expressions: identifiers,
// `{ a b }` unions, `~` complements, `*` wildcards, and `self` targets.
// Attributes expand to their members; type and class complements resolve
// against the declared types and observed classes at check time, and a
// complemented permission set excludes its names from whatever each rule
// grants.

#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "selint/config.hpp"
#include "selint/errors.hpp"
#include "selint/findings.hpp"
#include "selint/host.hpp"
#include "selint/model.hpp"
#include "selint/statement.hpp"

namespace selint {

// One position of a neverallow spec.
struct SetExpr {
  bool complement = false;
  bool wildcard = false;
  bool self_ref = false;  // target position only
  std::vector<std::string> ids;

  bool operator==(const SetExpr&) const = default;
};

struct NeverallowSpec {
  std::string text;  // collapsed statement, used in finding messages
  SetExpr source;
  SetExpr target;
  SetExpr classes;
  SetExpr permissions;

  bool operator==(const NeverallowSpec&) const = default;
};

namespace detail {

inline SetExpr parse_set_expr(const std::vector<Token>& tokens, std::size_t& i,
                              bool allow_self, const std::string& context) {
  auto fail = [&](const std::string& message) -> ConfigError {
    return ConfigError(message, "", context);
  };
  SetExpr expr;
  if (i < tokens.size() && tokens[i].text == "~") {
    expr.complement = true;
    ++i;
  }
  if (i >= tokens.size()) throw fail("unexpected end of neverallow statement");
  const std::string& tok = tokens[i].text;
  if (tok == "*") {
    if (expr.complement) throw fail("'~*' is an empty set");
    expr.wildcard = true;
    ++i;
    return expr;
  }
  auto add = [&](const std::string& id) {
    if (id == "self") {
      if (!allow_self) throw fail("'self' is only valid as a target");
      if (expr.complement) throw fail("'self' cannot be complemented");
      expr.self_ref = true;
      return;
    }
    if (!is_identifier(id)) throw fail("expected identifier, got '" + id + "'");
    expr.ids.push_back(id);
  };
  if (tok == "{") {
    ++i;
    while (i < tokens.size() && tokens[i].text != "}") add(tokens[i++].text);
    if (i >= tokens.size()) throw fail("unterminated '{' in set");
    ++i;  // consume '}'
    if (expr.ids.empty() && !expr.self_ref) throw fail("empty set");
  } else {
    add(tok);
    ++i;
  }
  std::sort(expr.ids.begin(), expr.ids.end());
  expr.ids.erase(std::unique(expr.ids.begin(), expr.ids.end()),
                 expr.ids.end());
  return expr;
}

}  // namespace detail

inline NeverallowSpec parse_neverallow_spec(const std::string& text,
                                            const std::string& context) {
  std::vector<Token> tokens;
  try {
    tokens = tokenize(text, context, 1);
  } catch (const ParseError& e) {
    throw ConfigError(e.what(), "", context);
  }
  auto fail = [&](const std::string& message) -> ConfigError {
    return ConfigError(message + " in '" + text + "'", "", context);
  };
  if (tokens.empty() || tokens.front().text != "neverallow") {
    throw fail("expected a neverallow statement");
  }
  std::size_t i = 1;
  NeverallowSpec spec;
  spec.text = collapse_whitespace(text);
  spec.source = detail::parse_set_expr(tokens, i, false, context);
  spec.target = detail::parse_set_expr(tokens, i, true, context);
  if (i >= tokens.size() || tokens[i].text != ":") throw fail("expected ':'");
  ++i;
  spec.classes = detail::parse_set_expr(tokens, i, false, context);
  spec.permissions = detail::parse_set_expr(tokens, i, false, context);
  if (i >= tokens.size() || tokens[i].text != ";") throw fail("expected ';'");
  ++i;
  if (i != tokens.size()) throw fail("trailing tokens");
  return spec;
}

namespace detail {

// Expands attributes and validates that every identifier is a declared type
// or attribute; returns concrete types.
inline std::set<std::string> resolve_type_ids(const std::vector<std::string>& ids,
                                              const Policy& policy,
                                              const std::string& context) {
  std::set<std::string> out;
  std::vector<std::string> unknown;
  for (const auto& id : ids) {
    if (auto it = policy.attributes.find(id); it != policy.attributes.end()) {
      out.insert(it->second.begin(), it->second.end());
    } else if (policy.types.count(id)) {
      out.insert(id);
    } else {
      unknown.push_back(id);
    }
  }
  if (!unknown.empty()) {
    std::string message = "unknown identifiers:";
    for (const auto& id : unknown) {
      message += ' ';
      message += id;
    }
    throw ConfigError(message, "", context);
  }
  return out;
}

// Resolved spec positions; nullopt set = wildcard (matches anything). When
// permissions_complement is set, `permissions` holds the excluded names and
// a rule's infringing permissions are whatever else it grants.
struct ResolvedSpec {
  const NeverallowSpec* spec = nullptr;
  std::optional<std::set<std::string>> sources;
  std::optional<std::set<std::string>> targets;
  bool target_self = false;
  std::optional<std::set<std::string>> classes;
  std::optional<std::set<std::string>> permissions;
  bool permissions_complement = false;
};

inline ResolvedSpec resolve_neverallow_spec(const NeverallowSpec& spec,
                                            const Policy& policy,
                                            const std::string& context) {
  ResolvedSpec resolved;
  resolved.spec = &spec;

  auto resolve_types = [&](const SetExpr& expr)
      -> std::optional<std::set<std::string>> {
    if (expr.wildcard) return std::nullopt;
    std::set<std::string> named = resolve_type_ids(expr.ids, policy, context);
    if (!expr.complement) return named;
    std::set<std::string> out;
    for (const auto& type : policy.types) {
      if (!named.count(type)) out.insert(type);
    }
    return out;
  };
  resolved.sources = resolve_types(spec.source);
  resolved.targets = resolve_types(spec.target);
  resolved.target_self = spec.target.self_ref;

  if (spec.classes.wildcard) {
    resolved.classes = std::nullopt;
  } else if (!spec.classes.complement) {
    resolved.classes.emplace(spec.classes.ids.begin(), spec.classes.ids.end());
  } else {
    std::set<std::string> named(spec.classes.ids.begin(),
                                spec.classes.ids.end());
    std::set<std::string> out;
    for (const auto& [class_name, cls] : policy.classes) {
      if (!named.count(class_name)) out.insert(class_name);
    }
    resolved.classes = std::move(out);
  }

  if (spec.permissions.wildcard) {
    resolved.permissions = std::nullopt;
  } else {
    // Permissions have no declaration universe; a complemented set is kept
    // as the excluded names and applied per rule as a set difference.
    resolved.permissions_complement = spec.permissions.complement;
    resolved.permissions.emplace(spec.permissions.ids.begin(),
                                 spec.permissions.ids.end());
  }
  return resolved;
}

// Forbidden permissions the rule grants, empty when the rule does not
// infringe the spec.
inline std::vector<std::string> infringing_permissions(
    const ResolvedSpec& spec, const AVRule& rule) {
  if (rule.kind != RuleKind::allow) return {};
  if (spec.sources && !spec.sources->count(rule.source)) return {};
  bool target_ok = false;
  if (spec.target_self &&
      (rule.target == "self" || rule.target == rule.source)) {
    target_ok = true;
  }
  if (!target_ok && spec.targets) {
    // A literal self target stands for the source type.
    const std::string& effective =
        rule.target == "self" ? rule.source : rule.target;
    target_ok = spec.targets->count(effective) != 0;
  }
  if (!spec.targets && !spec.target_self) {
    target_ok = true;  // wildcard matches any target, self included
  }
  if (!target_ok) return {};
  if (spec.classes && !spec.classes->count(rule.security_class)) return {};
  if (!spec.permissions) return rule.permissions;
  std::vector<std::string> hit;
  if (spec.permissions_complement) {
    std::set_difference(rule.permissions.begin(), rule.permissions.end(),
                        spec.permissions->begin(), spec.permissions->end(),
                        std::back_inserter(hit));
  } else {
    std::set_intersection(rule.permissions.begin(), rule.permissions.end(),
                          spec.permissions->begin(), spec.permissions->end(),
                          std::back_inserter(hit));
  }
  return hit;
}

}  // namespace detail

class UserNeverallowsPlugin final : public Plugin {
 public:
  std::string_view name() const override { return "user_neverallows"; }
  std::string_view description() const override {
    return "enforce analyst-supplied neverallow rules";
  }

  void configure(const ConfigFile& config) override {
    config.reject_unknown_keys("user_neverallows", {"rules"});
    specs_.clear();
    for (const auto& statement : config.list("user_neverallows", "rules")) {
      specs_.push_back(
          parse_neverallow_spec(statement, "user_neverallows.rules"));
    }
  }

  std::vector<Finding> run(const AnalysisInput& input,
                           DiagnosticSink& sink) const override {
    std::vector<Finding> findings;
    if (specs_.empty()) return findings;
    const Policy& policy = input.policy;
    const std::vector<MappedRule>* rules = &policy.expanded_rules;
    if (!policy.expanded_view_built) {
      warn(sink, "expanded view not built; checking unexpanded rules");
      rules = &policy.rules;
    }

    std::map<std::string, std::vector<const MappedRule*>> by_source;
    for (const auto& mapped : *rules) {
      if (const auto* av = std::get_if<AVRule>(&mapped.rule)) {
        if (av->kind == RuleKind::allow) {
          by_source[av->source].push_back(&mapped);
        }
      }
    }

    for (const auto& spec : specs_) {
      auto resolved = detail::resolve_neverallow_spec(spec, policy,
                                                      "user_neverallows.rules");
      auto check = [&](const MappedRule& mapped) {
        const auto& av = std::get<AVRule>(mapped.rule);
        auto forbidden = detail::infringing_permissions(resolved, av);
        if (forbidden.empty()) return;
        Finding finding;
        finding.plugin = std::string(name());
        finding.severity = Severity::violation;
        finding.location = mapped.location;
        finding.rule_text = render_rule(mapped.rule);
        std::string message = "violates: " + spec.text + "\nforbidden:";
        for (const auto& perm : forbidden) {
          message += ' ';
          message += perm;
        }
        finding.message = std::move(message);
        findings.push_back(std::move(finding));
      };

      if (resolved.sources && resolved.sources->size() < by_source.size()) {
        for (const auto& source : *resolved.sources) {
          auto it = by_source.find(source);
          if (it == by_source.end()) continue;
          for (const MappedRule* mapped : it->second) check(*mapped);
        }
      } else {
        for (const auto& [source, bucket] : by_source) {
          for (const MappedRule* mapped : bucket) check(*mapped);
        }
      }
    }
    return findings;
  }

 private:
  std::vector<NeverallowSpec> specs_;
};

}  // namespace selint
