// Copyright (c) selint contributors.
// SPDX-License-Identifier: Apache-2.0
//
// Rule templates: concrete rule shapes with argument placeholders in type
// positions. Built either by expanding a macro with sentinel arguments
// (parametrized-macro search) or by parsing $ARGn statements from config
// (tuple checks). A placeholder may carry a literal suffix, so `$2_socket`
// matches `b_socket` and binds `b`.

#pragma once

#include <algorithm>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "selint/errors.hpp"
#include "selint/m4.hpp"
#include "selint/model.hpp"
#include "selint/statement.hpp"

namespace selint {
namespace detail {

inline constexpr std::string_view kPlaceholderPrefix = "selint_placeholder_";

inline std::string placeholder_name(int k) {
  return std::string(kPlaceholderPrefix) + static_cast<char>('0' + k);
}

// One type-position slot: a literal token, or argument `arg` (1-based) plus
// a required literal suffix.
struct FieldPattern {
  int arg = 0;  // 0 = literal
  std::string text;

  bool operator==(const FieldPattern&) const = default;

  bool is_literal() const { return arg == 0; }

  std::string instantiate(const std::vector<std::string>& values) const {
    return is_literal() ? text : values[static_cast<std::size_t>(arg - 1)] + text;
  }

  // Matches `token`, binding or checking the argument slot. `binding` uses
  // "" for unbound slots. Leaves `binding` untouched on failure only when
  // the slot was already bound; callers work on a copy.
  bool match(const std::string& token,
             std::vector<std::string>& binding) const {
    if (is_literal()) return token == text;
    std::string stem;
    if (text.empty()) {
      stem = token;
    } else {
      if (token.size() <= text.size()) return false;
      if (token.compare(token.size() - text.size(), text.size(), text) != 0) {
        return false;
      }
      stem = token.substr(0, token.size() - text.size());
    }
    if (!is_identifier(stem)) return false;
    std::string& slot = binding[static_cast<std::size_t>(arg - 1)];
    if (slot.empty()) {
      slot = stem;
      return true;
    }
    return slot == stem;
  }
};

struct TemplateAV {
  RuleKind kind = RuleKind::allow;
  FieldPattern source;
  FieldPattern target;
  std::string security_class;
  std::vector<std::string> permissions;  // sorted, unique

  bool operator==(const TemplateAV&) const = default;
};

struct TemplateTE {
  FieldPattern source;
  FieldPattern target;
  FieldPattern default_type;
  std::string security_class;

  bool operator==(const TemplateTE&) const = default;
};

using RuleTemplate = std::variant<TemplateAV, TemplateTE>;

inline void collect_template_args(const RuleTemplate& t, std::set<int>& args) {
  auto add = [&](const FieldPattern& p) {
    if (p.arg > 0) args.insert(p.arg);
  };
  if (const auto* av = std::get_if<TemplateAV>(&t)) {
    add(av->source);
    add(av->target);
  } else {
    const auto& te = std::get<TemplateTE>(t);
    add(te.source);
    add(te.target);
    add(te.default_type);
  }
}

// True when every argument the template references is bound.
inline bool template_bound(const RuleTemplate& t,
                           const std::vector<std::string>& binding) {
  std::set<int> args;
  collect_template_args(t, args);
  for (int a : args) {
    if (binding[static_cast<std::size_t>(a - 1)].empty()) return false;
  }
  return true;
}

inline Rule instantiate_template(const RuleTemplate& t,
                                 const std::vector<std::string>& values) {
  if (const auto* av = std::get_if<TemplateAV>(&t)) {
    AVRule rule;
    rule.kind = av->kind;
    rule.source = av->source.instantiate(values);
    rule.target = av->target.instantiate(values);
    rule.security_class = av->security_class;
    rule.permissions = av->permissions;
    return rule;
  }
  const auto& te = std::get<TemplateTE>(t);
  return TERule{te.source.instantiate(values), te.target.instantiate(values),
                te.security_class, te.default_type.instantiate(values)};
}

// Matches a template against a concrete rule, extending `binding` (copy-in,
// committed by the caller on success).
inline bool match_template(const RuleTemplate& t, const Rule& rule,
                           std::vector<std::string>& binding) {
  if (const auto* tav = std::get_if<TemplateAV>(&t)) {
    const auto* av = std::get_if<AVRule>(&rule);
    if (!av || av->kind != tav->kind) return false;
    if (av->security_class != tav->security_class) return false;
    if (!std::includes(av->permissions.begin(), av->permissions.end(),
                       tav->permissions.begin(), tav->permissions.end())) {
      return false;
    }
    return tav->source.match(av->source, binding) &&
           tav->target.match(av->target, binding);
  }
  const auto& tte = std::get<TemplateTE>(t);
  const auto* te = std::get_if<TERule>(&rule);
  if (!te || te->security_class != tte.security_class) return false;
  return tte.source.match(te->source, binding) &&
         tte.target.match(te->target, binding) &&
         tte.default_type.match(te->default_type, binding);
}

inline std::optional<FieldPattern> decompose_sentinel_field(
    const std::string& field, int arity) {
  std::size_t pos = field.find(kPlaceholderPrefix);
  if (pos == std::string::npos) return FieldPattern{0, field};
  if (pos != 0) return std::nullopt;
  std::size_t digit_at = kPlaceholderPrefix.size();
  if (digit_at >= field.size()) return std::nullopt;
  int k = field[digit_at] - '0';
  if (k < 1 || k > arity) return std::nullopt;
  std::string suffix = field.substr(digit_at + 1);
  if (suffix.find(kPlaceholderPrefix) != std::string::npos) return std::nullopt;
  return FieldPattern{k, std::move(suffix)};
}

struct MacroTemplateSet {
  std::string macro;
  int arity = 0;
  std::vector<RuleTemplate> templates;
};

// Expands `def` with sentinel arguments and decomposes the produced rules
// into templates. Returns nullopt (with a warning) for macros the search
// cannot represent: placeholders in class or permission positions, compound
// placeholder shapes, failing expansions, or empty rule lists.
inline std::optional<MacroTemplateSet> extract_templates(
    const MacroDefinition& def, const MacroTable& table,
    DiagnosticSink& sink) {
  if (def.kind != MacroKind::rule_block || def.arity < 1) return std::nullopt;

  std::vector<std::string> sentinels;
  for (int k = 1; k <= def.arity; ++k) sentinels.push_back(placeholder_name(k));

  MacroExpansion expansion;
  try {
    expansion = expand(def, sentinels, table, sink);
  } catch (const ParseError& e) {
    warn(sink, "macro '" + def.name + "' not searchable: " + e.what(),
         def.origin);
    return std::nullopt;
  }
  if (expansion.produced_rules.empty()) {
    warn(sink, "macro '" + def.name + "' expands to no rules", def.origin);
    return std::nullopt;
  }

  auto unsupported = [&](const char* what) {
    warn(sink,
         "macro '" + def.name + "' not searchable: unsupported " + what,
         def.origin);
  };
  auto has_sentinel = [](const std::string& s) {
    return s.find(kPlaceholderPrefix) != std::string::npos;
  };

  MacroTemplateSet out{def.name, def.arity, {}};
  for (const auto& rule : expansion.produced_rules) {
    if (const auto* av = std::get_if<AVRule>(&rule)) {
      if (has_sentinel(av->security_class)) {
        unsupported("placeholder in class position");
        return std::nullopt;
      }
      for (const auto& perm : av->permissions) {
        if (has_sentinel(perm)) {
          unsupported("placeholder in permission position");
          return std::nullopt;
        }
      }
      auto source = decompose_sentinel_field(av->source, def.arity);
      auto target = decompose_sentinel_field(av->target, def.arity);
      if (!source || !target) {
        unsupported("placeholder shape");
        return std::nullopt;
      }
      out.templates.push_back(TemplateAV{av->kind, std::move(*source),
                                         std::move(*target),
                                         av->security_class, av->permissions});
    } else {
      const auto& te = std::get<TERule>(rule);
      if (has_sentinel(te.security_class)) {
        unsupported("placeholder in class position");
        return std::nullopt;
      }
      auto source = decompose_sentinel_field(te.source, def.arity);
      auto target = decompose_sentinel_field(te.target, def.arity);
      auto dflt = decompose_sentinel_field(te.default_type, def.arity);
      if (!source || !target || !dflt) {
        unsupported("placeholder shape");
        return std::nullopt;
      }
      out.templates.push_back(TemplateTE{std::move(*source), std::move(*target),
                                         std::move(*dflt),
                                         te.security_class});
    }
  }
  return out;
}

// Parses one rule statement whose type positions may use $ARG0..$ARG9
// placeholders (optionally with a literal suffix, `$ARG1_socket`). Used for
// configured rule tuples; errors are ConfigErrors naming `context`.
inline RuleTemplate parse_template_statement(std::string_view text,
                                             const std::string& context) {
  std::vector<Token> tokens;
  try {
    tokens = tokenize(text, context, 1);
  } catch (const ParseError& e) {
    throw ConfigError(e.what(), "", context);
  }
  if (tokens.empty() || !is_rule_head(tokens.front().text)) {
    throw ConfigError(
        "template must be an allow, neverallow, or type_transition statement",
        "", context);
  }
  const std::string head = tokens.front().text;
  std::size_t i = 1;

  auto field = [&](const char* what) {
    if (i >= tokens.size()) {
      throw ConfigError(std::string("missing ") + what, "", context);
    }
    const std::string& tok = tokens[i++].text;
    if (tok.rfind("$ARG", 0) == 0) {
      if (tok.size() < 5 || tok[4] < '0' || tok[4] > '9') {
        throw ConfigError("malformed placeholder '" + tok + "'", "", context);
      }
      return FieldPattern{tok[4] - '0' + 1, tok.substr(5)};
    }
    if (!is_identifier(tok)) {
      throw ConfigError(std::string("expected ") + what + ", got '" + tok + "'",
                        "", context);
    }
    return FieldPattern{0, tok};
  };
  auto literal = [&](const char* what) {
    if (i >= tokens.size() || !is_identifier(tokens[i].text)) {
      throw ConfigError(std::string("expected ") + what, "", context);
    }
    return tokens[i++].text;
  };
  auto punct = [&](const char* p) {
    if (i >= tokens.size() || tokens[i].text != p) {
      throw ConfigError(std::string("expected '") + p + "'", "", context);
    }
    ++i;
  };

  FieldPattern source = field("source");
  FieldPattern target = field("target");
  punct(":");
  std::string security_class = literal("security class");

  if (head == "type_transition") {
    FieldPattern dflt = field("default type");
    punct(";");
    if (i != tokens.size()) {
      throw ConfigError("trailing tokens after template", "", context);
    }
    return TemplateTE{std::move(source), std::move(target), std::move(dflt),
                      std::move(security_class)};
  }

  std::vector<std::string> perms;
  bool braced = i < tokens.size() && tokens[i].text == "{";
  if (braced) {
    ++i;
    while (i < tokens.size() && tokens[i].text != "}") {
      perms.push_back(literal("permission"));
    }
    punct("}");
  } else {
    perms.push_back(literal("permission"));
  }
  punct(";");
  if (i != tokens.size()) {
    throw ConfigError("trailing tokens after template", "", context);
  }
  if (perms.empty()) {
    throw ConfigError("empty permission set in template", "", context);
  }
  normalize_permissions(perms);
  return TemplateAV{head == "allow" ? RuleKind::allow : RuleKind::neverallow,
                    std::move(source), std::move(target),
                    std::move(security_class), std::move(perms)};
}

}  // namespace detail
}  // namespace selint
