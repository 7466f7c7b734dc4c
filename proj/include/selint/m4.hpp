// Copyright (c) selint contributors.
// SPDX-License-Identifier: Apache-2.0
//
// M4 macro engine covering the subset SEAndroid policies use: define() with
// one quoting level, $1..$9 substitution, nested macro calls, # and dnl
// comments. ifelse/ifdef/diversions are rejected loudly so no rule is ever
// silently dropped.

#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "selint/errors.hpp"
#include "selint/model.hpp"
#include "selint/statement.hpp"

namespace selint {

enum class MacroKind { permission_set, rule_block };

inline std::string_view to_string(MacroKind kind) {
  return kind == MacroKind::permission_set ? "permission_set" : "rule_block";
}

struct MacroDefinition {
  std::string name;
  int arity = 0;  // highest $n referenced in body
  std::string body;
  SourceLocation origin;
  MacroKind kind = MacroKind::rule_block;

  bool operator==(const MacroDefinition&) const = default;
};

// Name-keyed macro table. Immutable once macro files are parsed; expansion
// never mutates it.
class MacroTable {
 public:
  const MacroDefinition* find(const std::string& name) const {
    auto it = defs_.find(name);
    return it == defs_.end() ? nullptr : &it->second;
  }

  bool contains(const std::string& name) const { return defs_.count(name) != 0; }

  // Later definitions replace earlier ones with a warning.
  void define(MacroDefinition def, DiagnosticSink& sink) {
    auto it = defs_.find(def.name);
    if (it != defs_.end()) {
      warn(sink,
           "macro '" + def.name + "' redefined, previous definition at " +
               it->second.origin.str(),
           def.origin);
      it->second = std::move(def);
      return;
    }
    defs_.emplace(def.name, std::move(def));
  }

  const std::map<std::string, MacroDefinition>& all() const { return defs_; }
  std::map<std::string, MacroDefinition>& all() { return defs_; }
  std::size_t size() const { return defs_.size(); }

  bool operator==(const MacroTable&) const = default;

 private:
  std::map<std::string, MacroDefinition> defs_;
};

struct MacroExpansion {
  MacroDefinition definition;
  std::vector<std::string> args;
  std::string expanded_text;
  std::vector<Rule> produced_rules;              // kind == rule_block
  std::vector<std::string> produced_permissions;  // kind == permission_set

  bool operator==(const MacroExpansion&) const = default;
};

namespace detail {

inline const char* kForbiddenM4[] = {"ifelse", "ifdef", "ifndef", "divert",
                                     "undivert"};

inline bool is_forbidden_m4(std::string_view word) {
  for (const char* f : kForbiddenM4) {
    if (word == f) return true;
  }
  return false;
}

// Scans a definition body once: rejects unsupported constructs and returns
// the arity (highest $n).
inline int validate_body(std::string_view body, const std::string& file,
                         std::size_t line) {
  int arity = 0;
  std::size_t i = 0;
  while (i < body.size()) {
    char c = body[i];
    if (c == '\n') {
      ++line;
      ++i;
      continue;
    }
    if (c == '`' || c == '\'') {
      throw ParseError("nested quoting in macro body is not supported", file,
                       line);
    }
    if (c == '$') {
      if (i + 1 >= body.size() || body[i + 1] < '1' || body[i + 1] > '9') {
        throw ParseError("unsupported placeholder after '$' (only $1..$9)",
                         file, line);
      }
      arity = std::max(arity, body[i + 1] - '0');
      i += 2;
      continue;
    }
    if (is_identifier_char(c)) {
      std::size_t j = i;
      while (j < body.size() && is_identifier_char(body[j])) ++j;
      std::string_view word = body.substr(i, j - i);
      if (is_forbidden_m4(word)) {
        throw ParseError("m4 '" + std::string(word) + "' is not supported",
                         file, line);
      }
      i = j;
      continue;
    }
    ++i;
  }
  return arity;
}

inline std::string substitute_args(const MacroDefinition& def,
                                   const std::vector<std::string>& args) {
  std::string out;
  out.reserve(def.body.size());
  std::size_t i = 0;
  while (i < def.body.size()) {
    char c = def.body[i];
    if (c == '$' && i + 1 < def.body.size() && def.body[i + 1] >= '1' &&
        def.body[i + 1] <= '9') {
      std::size_t k = static_cast<std::size_t>(def.body[i + 1] - '1');
      out += args.at(k);
      i += 2;
      continue;
    }
    out += c;
    ++i;
  }
  return out;
}

inline std::string render_cycle(const std::vector<std::string>& stack,
                                const std::string& name) {
  std::string out;
  auto it = std::find(stack.begin(), stack.end(), name);
  for (; it != stack.end(); ++it) out += *it + " -> ";
  out += name;
  return out;
}

// Splices nested macro references left to right. Recursion fully expands
// each splice, so a single pass reaches the fixpoint.
inline std::string expand_text(const MacroDefinition& def,
                               const std::vector<std::string>& args,
                               const MacroTable& table,
                               std::vector<std::string>& stack) {
  if (std::find(stack.begin(), stack.end(), def.name) != stack.end()) {
    throw ParseError("cyclic macro reference: " + render_cycle(stack, def.name),
                     def.origin.file, def.origin.line);
  }
  if (args.size() != static_cast<std::size_t>(def.arity)) {
    throw ParseError("macro '" + def.name + "' expects " +
                         std::to_string(def.arity) + " argument(s), got " +
                         std::to_string(args.size()),
                     def.origin.file, def.origin.line);
  }
  stack.push_back(def.name);
  std::string text = substitute_args(def, args);
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    char c = text[i];
    if (!is_identifier_char(c)) {
      out += c;
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && is_identifier_char(text[j])) ++j;
    std::string word(text.substr(i, j - i));
    const MacroDefinition* nested = table.find(word);
    if (!nested) {
      if (j < text.size() && text[j] == '(') {
        throw ParseError("unknown macro '" + word + "' referenced by '" +
                             def.name + "'",
                         def.origin.file, def.origin.line);
      }
      out += word;
      i = j;
      continue;
    }
    if (j < text.size() && text[j] == '(') {
      std::vector<std::string> nested_args;
      std::size_t pos = j + 1;
      auto skip_ws = [&] {
        while (pos < text.size() && is_space(text[pos])) ++pos;
      };
      skip_ws();
      if (pos < text.size() && text[pos] == ')') {
        ++pos;
      } else {
        while (true) {
          skip_ws();
          std::size_t arg_start = pos;
          while (pos < text.size() && is_identifier_char(text[pos])) ++pos;
          if (pos == arg_start) {
            throw ParseError(
                "argument of macro '" + word +
                    "' must be an identifier (macro calls as arguments are "
                    "not supported)",
                def.origin.file, def.origin.line);
          }
          nested_args.emplace_back(text.substr(arg_start, pos - arg_start));
          skip_ws();
          if (pos < text.size() && text[pos] == ',') {
            ++pos;
            continue;
          }
          if (pos < text.size() && text[pos] == ')') {
            ++pos;
            break;
          }
          throw ParseError("expected ',' or ')' in call of macro '" + word +
                               "'",
                           def.origin.file, def.origin.line);
        }
      }
      out += expand_text(*nested, nested_args, table, stack);
      i = pos;
      continue;
    }
    if (nested->arity != 0) {
      throw ParseError("macro '" + word + "' requires " +
                           std::to_string(nested->arity) +
                           " argument(s) but is referenced bare",
                       def.origin.file, def.origin.line);
    }
    out += expand_text(*nested, {}, table, stack);
    i = j;
  }
  stack.pop_back();
  return out;
}

}  // namespace detail

inline std::string expand_text(const MacroDefinition& def,
                               const std::vector<std::string>& args,
                               const MacroTable& table) {
  std::vector<std::string> stack;
  return detail::expand_text(def, args, table, stack);
}

// Flattens one permission atom: an identifier, a permission_set macro name
// (spliced), or a brace group (recursively flattened). Used for both rule
// permission lists and permission_set macro bodies.
inline void parse_permission_atoms(const std::vector<Token>& tokens,
                                   std::size_t& i, const MacroTable& table,
                                   std::vector<std::string>& out,
                                   std::vector<MacroUsageRef>* used_macros,
                                   const std::string& file, int depth);

// Fully expands a permission_set macro to its sorted permission set.
inline std::vector<std::string> produce_permissions(const MacroDefinition& def,
                                                    const MacroTable& table) {
  std::string text = expand_text(def, {}, table);
  std::vector<Token> tokens =
      tokenize(text, def.origin.file, def.origin.line);
  std::vector<std::string> perms;
  std::size_t i = 0;
  while (i < tokens.size()) {
    parse_permission_atoms(tokens, i, table, perms, nullptr, def.origin.file,
                           0);
  }
  if (perms.empty()) {
    throw ParseError("permission_set macro '" + def.name +
                         "' expands to no permissions",
                     def.origin.file, def.origin.line);
  }
  normalize_permissions(perms);
  return perms;
}

inline void parse_permission_atoms(const std::vector<Token>& tokens,
                                   std::size_t& i, const MacroTable& table,
                                   std::vector<std::string>& out,
                                   std::vector<MacroUsageRef>* used_macros,
                                   const std::string& file, int depth) {
  if (depth > 32) {
    throw ParseError("permission set nesting too deep", file,
                     i < tokens.size() ? tokens[i].line : 0);
  }
  if (i >= tokens.size()) {
    throw ParseError("expected permission", file,
                     tokens.empty() ? 0 : tokens.back().line);
  }
  const Token& tok = tokens[i];
  if (tok.text == "{") {
    ++i;
    while (i < tokens.size() && tokens[i].text != "}") {
      parse_permission_atoms(tokens, i, table, out, used_macros, file,
                             depth + 1);
    }
    if (i >= tokens.size()) {
      throw ParseError("unbalanced '{' in permission set", file, tok.line);
    }
    ++i;  // consume '}'
    return;
  }
  if (!is_identifier(tok.text)) {
    throw ParseError("expected permission, got '" + tok.text + "'", file,
                     tok.line);
  }
  if (const MacroDefinition* def = table.find(tok.text)) {
    if (def->kind != MacroKind::permission_set) {
      throw ParseError("rule_block macro '" + tok.text +
                           "' used in permission position",
                       file, tok.line);
    }
    auto perms = produce_permissions(*def, table);
    out.insert(out.end(), perms.begin(), perms.end());
    if (used_macros) used_macros->push_back(MacroUsageRef{tok.text, {}});
    ++i;
    return;
  }
  out.push_back(tok.text);
  ++i;
}

// Parses one allow/neverallow/type_transition statement from tokens. The head
// token must be one of those three. Returns nullopt (with a warning) for
// rules using set syntax ({...}, ~, *) in type positions, which the model's
// single-identifier fields cannot represent.
inline std::optional<Rule> parse_rule_statement(
    const std::vector<Token>& tokens, const MacroTable& table,
    const std::string& file, std::vector<MacroUsageRef>* used_macros,
    DiagnosticSink& sink) {
  const std::string& head = tokens.at(0).text;
  const std::size_t head_line = tokens.at(0).line;

  // Set syntax ({...}, ~, *) in type or class positions, complement or
  // wildcard permissions, and brace sets in type_transition statements are
  // not representable by single-identifier rule fields.
  std::size_t colon = 1;
  while (colon < tokens.size() && tokens[colon].text != ":") ++colon;
  bool set_like = false;
  for (std::size_t k = 1; k < colon && k < tokens.size(); ++k) {
    const std::string& t = tokens[k].text;
    if (t == "{" || t == "}" || t == "~" || t == "*") set_like = true;
  }
  for (std::size_t k = colon + 1; !set_like && k < tokens.size(); ++k) {
    const std::string& t = tokens[k].text;
    if (t == "~" || t == "*") set_like = true;
    if (k == colon + 1 && t == "{") set_like = true;
    if (head == "type_transition" && (t == "{" || t == "}")) set_like = true;
  }
  if (set_like) {
    warn(sink,
         head + " with set syntax is not representable; statement skipped",
         SourceLocation{file, head_line});
    return std::nullopt;
  }

  std::size_t i = 1;
  auto expect_identifier = [&](const char* what) {
    if (i >= tokens.size() || !is_identifier(tokens[i].text)) {
      throw ParseError(std::string("expected ") + what + " in '" + head +
                           "' statement",
                       file,
                       i < tokens.size() ? tokens[i].line : head_line);
    }
    return tokens[i++].text;
  };
  auto expect_punct = [&](const char* p) {
    if (i >= tokens.size() || tokens[i].text != p) {
      throw ParseError(std::string("expected '") + p + "' in '" + head +
                           "' statement",
                       file,
                       i < tokens.size() ? tokens[i].line : head_line);
    }
    ++i;
  };

  std::string source = expect_identifier("source type");
  std::string target = expect_identifier("target type");
  expect_punct(":");
  std::string security_class = expect_identifier("security class");

  if (head == "type_transition") {
    std::string default_type = expect_identifier("default type");
    expect_punct(";");
    if (i != tokens.size()) {
      throw ParseError("trailing tokens after type_transition statement", file,
                       tokens[i].line);
    }
    return Rule{TERule{source, target, security_class, default_type}};
  }

  std::vector<std::string> perms;
  while (i < tokens.size() && tokens[i].text != ";") {
    parse_permission_atoms(tokens, i, table, perms, used_macros, file, 0);
  }
  expect_punct(";");
  if (i != tokens.size()) {
    throw ParseError("trailing tokens after '" + head + "' statement", file,
                     tokens[i].line);
  }
  if (perms.empty()) {
    throw ParseError("empty permission set in '" + head + "' statement", file,
                     head_line);
  }
  normalize_permissions(perms);
  AVRule rule;
  rule.kind = head == "allow" ? RuleKind::allow : RuleKind::neverallow;
  rule.source = std::move(source);
  rule.target = std::move(target);
  rule.security_class = std::move(security_class);
  rule.permissions = std::move(perms);
  return Rule{std::move(rule)};
}

inline bool is_rule_head(std::string_view head) {
  return head == "allow" || head == "neverallow" || head == "type_transition";
}

// Deterministic kind classification. permission_set iff arity is 0 and the
// full expansion is a (possibly braced) permission list with no ';'. A body
// that is neither, e.g. a single bare name, classifies rule_block; the
// caller decides whether that deserves a warning.
inline MacroKind classify(const MacroDefinition& def, const MacroTable& table,
                          bool* ambiguous = nullptr) {
  if (ambiguous) *ambiguous = false;
  if (def.arity > 0) return MacroKind::rule_block;
  std::string text;
  try {
    text = expand_text(def, {}, table);
  } catch (const ParseError&) {
    if (ambiguous) *ambiguous = true;
    return MacroKind::rule_block;
  }
  if (text.find(';') != std::string::npos) return MacroKind::rule_block;
  std::vector<Token> tokens;
  try {
    tokens = tokenize(text, def.origin.file, def.origin.line);
  } catch (const ParseError&) {
    if (ambiguous) *ambiguous = true;
    return MacroKind::rule_block;
  }
  if (tokens.empty()) {
    if (ambiguous) *ambiguous = true;
    return MacroKind::rule_block;
  }
  bool braced = tokens.front().text == "{";
  std::size_t first = braced ? 1 : 0;
  std::size_t last = tokens.size();
  if (braced) {
    if (tokens.back().text != "}" || tokens.size() < 3) {
      if (ambiguous) *ambiguous = true;
      return MacroKind::rule_block;
    }
    --last;
  }
  for (std::size_t k = first; k < last; ++k) {
    if (!is_identifier(tokens[k].text)) {
      if (ambiguous) *ambiguous = true;
      return MacroKind::rule_block;
    }
  }
  if (!braced && last - first < 2) {
    if (ambiguous) *ambiguous = true;
    return MacroKind::rule_block;
  }
  return MacroKind::permission_set;
}

// Parses one macro definition file: a sequence of define(`name', `body')
// blocks with # and dnl comments. Returns the extended table; every
// definition in the table is (re)classified afterwards, warning only about
// this file's ambiguous bodies.
inline MacroTable parse_macro_file(std::string_view text,
                                   const std::string& file, MacroTable table,
                                   DiagnosticSink& sink) {
  std::size_t line = 1;
  std::size_t i = 0;
  const std::size_t n = text.size();
  std::vector<std::string> added;

  auto advance = [&](std::size_t& pos) {
    if (text[pos] == '\n') ++line;
    ++pos;
  };
  auto skip_ws_comments = [&] {
    while (i < n) {
      if (is_space(text[i])) {
        advance(i);
        continue;
      }
      if (text[i] == '#') {
        while (i < n && text[i] != '\n') ++i;
        continue;
      }
      if (text.compare(i, 3, "dnl") == 0 &&
          (i + 3 >= n || !is_identifier_char(text[i + 3]))) {
        while (i < n && text[i] != '\n') ++i;
        continue;
      }
      break;
    }
  };

  while (true) {
    skip_ws_comments();
    if (i >= n) break;

    const std::size_t stmt_line = line;
    std::size_t j = i;
    while (j < n && is_identifier_char(text[j])) ++j;
    std::string word(text.substr(i, j - i));
    if (word != "define") {
      if (detail::is_forbidden_m4(word)) {
        throw ParseError("m4 '" + word + "' is not supported", file, stmt_line);
      }
      throw ParseError("expected define(...), got '" +
                           (word.empty() ? std::string(1, text[i]) : word) +
                           "'",
                       file, stmt_line);
    }
    i = j;
    skip_ws_comments();
    if (i >= n || text[i] != '(') {
      throw ParseError("expected '(' after define", file, stmt_line);
    }
    advance(i);
    skip_ws_comments();
    if (i >= n || text[i] != '`') {
      throw ParseError("expected quoted macro name", file, stmt_line);
    }
    advance(i);
    std::size_t name_start = i;
    while (i < n && is_identifier_char(text[i])) ++i;
    std::string name(text.substr(name_start, i - name_start));
    if (!is_identifier(name)) {
      throw ParseError("invalid macro name", file, stmt_line);
    }
    if (i >= n || text[i] != '\'') {
      throw ParseError("unbalanced quote in macro name", file, stmt_line);
    }
    advance(i);
    skip_ws_comments();
    if (i >= n || text[i] != ',') {
      throw ParseError("expected ',' after macro name", file, stmt_line);
    }
    advance(i);
    skip_ws_comments();
    if (i >= n || text[i] != '`') {
      throw ParseError("expected quoted macro body", file, stmt_line);
    }
    advance(i);

    const std::size_t body_line = line;
    std::size_t body_start = i;
    int quote_depth = 1;
    while (i < n && quote_depth > 0) {
      if (text[i] == '`') ++quote_depth;
      else if (text[i] == '\'') --quote_depth;
      if (quote_depth > 0) advance(i);
    }
    if (quote_depth != 0) {
      throw ParseError("unbalanced quote in macro body", file, body_line);
    }
    std::string body(text.substr(body_start, i - body_start));
    advance(i);  // closing quote
    skip_ws_comments();
    if (i >= n || text[i] != ')') {
      throw ParseError("expected ')' closing define", file, stmt_line);
    }
    advance(i);

    MacroDefinition def;
    def.name = std::move(name);
    def.arity = detail::validate_body(body, file, body_line);
    def.body = std::move(body);
    def.origin = SourceLocation{file, stmt_line};
    added.push_back(def.name);
    table.define(std::move(def), sink);
  }

  for (auto& [name, def] : table.all()) {
    bool ambiguous = false;
    def.kind = classify(def, table, &ambiguous);
    if (ambiguous &&
        std::find(added.begin(), added.end(), name) != added.end()) {
      warn(sink,
           "macro '" + name +
               "' body is neither a rule block nor a permission list; "
               "treated as rule_block",
           def.origin);
    }
  }
  return table;
}

// Expands a macro usage. rule_block expansions are split and parsed into
// rules; statements of other kinds inside an expansion are skipped with a
// warning. permission_set expansions yield the flattened permission set.
inline MacroExpansion expand(const MacroDefinition& def,
                             const std::vector<std::string>& args,
                             const MacroTable& table, DiagnosticSink& sink) {
  MacroExpansion result;
  result.definition = def;
  result.args = args;
  result.expanded_text = expand_text(def, args, table);

  if (def.kind == MacroKind::permission_set) {
    result.produced_permissions = produce_permissions(def, table);
    return result;
  }

  auto statements = split_statements(result.expanded_text, def.origin.file,
                                     def.origin.line);
  for (const auto& stmt : statements) {
    auto tokens = tokenize(stmt.text, def.origin.file, stmt.location.line);
    if (tokens.empty()) continue;
    if (!is_rule_head(tokens.front().text)) {
      warn(sink,
           "statement kind '" + tokens.front().text + "' in expansion of '" +
               def.name + "' ignored",
           stmt.location);
      continue;
    }
    auto rule = parse_rule_statement(tokens, table, def.origin.file, nullptr,
                                     sink);
    if (rule) result.produced_rules.push_back(std::move(*rule));
  }
  return result;
}

}  // namespace selint
