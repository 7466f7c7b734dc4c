// Copyright (c) selint contributors.
// SPDX-License-Identifier: Apache-2.0
//
// Policy parser: turns an ordered set of policy source files into a Policy.
// Macro files are parsed first, then .te statements are tokenized, macro
// usages expanded, declarations resolved policy-wide, and duplicates merged.

#pragma once

#include <algorithm>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "selint/errors.hpp"
#include "selint/m4.hpp"
#include "selint/model.hpp"
#include "selint/statement.hpp"

namespace selint {

struct SourceFile {
  std::string path;
  std::string contents;

  bool operator==(const SourceFile&) const = default;
};

// Ordered policy sources. Order is significant: macro files are expected
// first, and later files may reference earlier declarations.
struct SourceSet {
  std::vector<SourceFile> files;
  std::set<std::string> macro_files;

  bool operator==(const SourceSet&) const = default;
};

struct ParserOptions {
  // When false, references to undeclared types/attributes warn instead of
  // failing, and the offending rule is kept.
  bool undeclared_reference_is_error = true;

  bool operator==(const ParserOptions&) const = default;
};

struct ParseOutput {
  Policy policy;
  MacroTable macros;
  DiagnosticSink diagnostics;
};

// Reads an ordered list of directories in the AOSP layout: per directory,
// `global_macros` then `te_macros` are macro files and `*.te` files are
// policy sources. All macro files precede all policy files, mirroring how
// the m4 pipeline concatenates its inputs.
inline SourceSet load_source_set(const std::vector<std::string>& dirs) {
  namespace fs = std::filesystem;
  SourceSet src;
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error("cannot read policy source: " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };

  std::vector<std::string> macro_paths;
  std::vector<std::string> te_paths;
  for (const auto& dir : dirs) {
    fs::path d(dir);
    if (!fs::is_directory(d)) {
      throw Error("policy directory not found: " + dir);
    }
    for (const char* name : {"global_macros", "te_macros"}) {
      fs::path p = d / name;
      if (fs::is_regular_file(p)) macro_paths.push_back(p.string());
    }
    std::vector<std::string> te;
    for (const auto& entry : fs::directory_iterator(d)) {
      if (entry.is_regular_file() && entry.path().extension() == ".te") {
        te.push_back(entry.path().string());
      }
    }
    std::sort(te.begin(), te.end());
    te_paths.insert(te_paths.end(), te.begin(), te.end());
  }
  for (const auto& p : macro_paths) {
    src.files.push_back(SourceFile{p, slurp(p)});
    src.macro_files.insert(p);
  }
  for (const auto& p : te_paths) {
    src.files.push_back(SourceFile{p, slurp(p)});
  }
  return src;
}

namespace detail {

struct UsageBlock {
  std::string text;
  std::size_t line = 0;
};

struct ParsedUsage {
  std::string name;
  std::vector<std::string> args;
  std::vector<UsageBlock> blocks;
};

// Scans a macro-call statement `name(arg, ..., `block', ...)`. Identifier
// arguments and backquoted block arguments may mix; anything else is an
// error.
inline ParsedUsage parse_macro_usage(std::string_view text,
                                     const SourceLocation& loc) {
  ParsedUsage usage;
  std::size_t line = loc.line;
  std::size_t i = 0;
  const std::size_t n = text.size();
  auto advance = [&](std::size_t& pos) {
    if (text[pos] == '\n') ++line;
    ++pos;
  };
  auto skip_ws = [&] {
    while (i < n && is_space(text[i])) advance(i);
  };

  skip_ws();
  std::size_t name_start = i;
  while (i < n && is_identifier_char(text[i])) ++i;
  usage.name = std::string(text.substr(name_start, i - name_start));
  skip_ws();
  if (i >= n || text[i] != '(') {
    throw ParseError("malformed macro usage", loc.file, loc.line);
  }
  advance(i);
  skip_ws();
  if (i < n && text[i] == ')') {
    return usage;
  }
  while (true) {
    skip_ws();
    if (i >= n) throw ParseError("unterminated macro usage", loc.file, loc.line);
    if (text[i] == '`') {
      advance(i);
      const std::size_t block_line = line;
      const std::size_t block_start = i;
      int depth = 1;
      while (i < n && depth > 0) {
        if (text[i] == '`') ++depth;
        else if (text[i] == '\'') --depth;
        if (depth > 0) advance(i);
      }
      if (depth != 0) {
        throw ParseError("unbalanced quote in macro usage", loc.file,
                         block_line);
      }
      usage.blocks.push_back(UsageBlock{
          std::string(text.substr(block_start, i - block_start)), block_line});
      advance(i);
    } else if (is_identifier_char(text[i])) {
      std::size_t arg_start = i;
      while (i < n && is_identifier_char(text[i])) ++i;
      usage.args.emplace_back(text.substr(arg_start, i - arg_start));
    } else {
      throw ParseError("macro argument must be an identifier or quoted block",
                       loc.file, line);
    }
    skip_ws();
    if (i < n && text[i] == ',') {
      advance(i);
      continue;
    }
    if (i < n && text[i] == ')') break;
    throw ParseError("expected ',' or ')' in macro usage", loc.file, line);
  }
  return usage;
}

inline bool is_macro_call_form(std::string_view text) {
  std::size_t i = 0;
  while (i < text.size() && is_space(text[i])) ++i;
  std::size_t start = i;
  while (i < text.size() && is_identifier_char(text[i])) ++i;
  if (i == start) return false;
  while (i < text.size() && is_space(text[i])) ++i;
  return i < text.size() && text[i] == '(';
}

inline const char* kXpermHeads[] = {"allowxperm", "auditallowxperm",
                                    "dontauditxperm", "neverallowxperm"};

inline bool is_xperm_head(std::string_view head) {
  for (const char* h : kXpermHeads) {
    if (head == h) return true;
  }
  return false;
}

// Mutable state threaded through statement processing before resolution.
struct ParseState {
  std::vector<MappedRule> pending_rules;
  std::set<std::string> types;
  std::set<std::string> attributes;
  // (type, attribute, location) memberships awaiting validation
  std::vector<std::pair<std::pair<std::string, std::string>, SourceLocation>>
      memberships;
  std::vector<MacroUsageSite> usages;
};

inline std::string expect_decl_identifier(const std::vector<Token>& tokens,
                                          std::size_t& i,
                                          const std::string& file,
                                          const char* what) {
  if (i >= tokens.size() || !is_identifier(tokens[i].text)) {
    throw ParseError(std::string("expected ") + what, file,
                     i < tokens.size() ? tokens[i].line : tokens.back().line);
  }
  return tokens[i++].text;
}

// Handles one statement; `guard` carries the enclosing debug-guard usage when
// processing a quoted block.
inline void process_statement(const RawStatement& stmt, const MacroTable& table,
                              ParseState& state, DiagnosticSink& sink,
                              const std::optional<MacroUsageRef>& guard,
                              int depth) {
  if (depth > 16) {
    throw ParseError("macro blocks nested too deep", stmt.location.file,
                     stmt.location.line);
  }
  const std::string& file = stmt.location.file;

  if (is_macro_call_form(stmt.text)) {
    ParsedUsage usage = parse_macro_usage(stmt.text, stmt.location);
    state.usages.push_back(
        MacroUsageSite{usage.name, usage.args, stmt.location});

    if (!usage.blocks.empty()) {
      MacroUsageRef ref{usage.name, usage.args};
      for (const auto& block : usage.blocks) {
        auto inner = split_statements(block.text, file, block.line);
        for (const auto& inner_stmt : inner) {
          process_statement(inner_stmt, table, state, sink,
                            guard ? guard : std::optional<MacroUsageRef>(ref),
                            depth + 1);
        }
      }
      return;
    }

    const MacroDefinition* def = table.find(usage.name);
    if (!def) {
      throw ParseError("unknown macro '" + usage.name + "'", file,
                       stmt.location.line);
    }
    if (def->kind != MacroKind::rule_block) {
      throw ParseError("permission_set macro '" + usage.name +
                           "' cannot be used as a statement",
                       file, stmt.location.line);
    }
    MacroExpansion expansion;
    try {
      expansion = expand(*def, usage.args, table, sink);
    } catch (const ParseError& e) {
      throw ParseError(std::string("in expansion of '") + usage.name +
                           "': " + e.what(),
                       file, stmt.location.line);
    }
    MacroUsageRef ref{usage.name, usage.args};
    std::string origin = collapse_whitespace(strip_comments(stmt.text));
    for (auto& rule : expansion.produced_rules) {
      MappedRule mapped;
      mapped.rule = std::move(rule);
      mapped.location = stmt.location;
      mapped.origin_text = origin;
      mapped.via_macro = guard ? guard : std::optional<MacroUsageRef>(ref);
      state.pending_rules.push_back(std::move(mapped));
    }
    return;
  }

  auto tokens = tokenize(stmt.text, file, stmt.location.line);
  if (tokens.empty()) return;
  const std::string& head = tokens.front().text;

  if (is_rule_head(head)) {
    std::vector<MacroUsageRef> perm_macros;
    auto rule = parse_rule_statement(tokens, table, file, &perm_macros, sink);
    for (auto& used : perm_macros) {
      state.usages.push_back(
          MacroUsageSite{used.name, used.args, stmt.location});
    }
    if (!rule) return;
    MappedRule mapped;
    mapped.rule = std::move(*rule);
    mapped.location = stmt.location;
    mapped.origin_text = collapse_whitespace(strip_comments(stmt.text));
    mapped.via_macro = guard;
    state.pending_rules.push_back(std::move(mapped));
    return;
  }

  if (head == "type" || head == "attribute" || head == "typeattribute") {
    std::size_t i = 1;
    if (head == "attribute") {
      std::string name = expect_decl_identifier(tokens, i, file, "attribute name");
      state.attributes.insert(std::move(name));
    } else if (head == "type") {
      std::string name = expect_decl_identifier(tokens, i, file, "type name");
      state.types.insert(name);
      while (i < tokens.size() && tokens[i].text == ",") {
        ++i;
        std::string attr =
            expect_decl_identifier(tokens, i, file, "attribute name");
        state.memberships.push_back({{name, std::move(attr)}, stmt.location});
      }
    } else {
      std::string name = expect_decl_identifier(tokens, i, file, "type name");
      std::string attr =
          expect_decl_identifier(tokens, i, file, "attribute name");
      state.memberships.push_back({{name, std::move(attr)}, stmt.location});
      while (i < tokens.size() && tokens[i].text == ",") {
        ++i;
        std::string more =
            expect_decl_identifier(tokens, i, file, "attribute name");
        state.memberships.push_back({{name, std::move(more)}, stmt.location});
      }
    }
    if (i >= tokens.size() || tokens[i].text != ";") {
      throw ParseError("expected ';' after '" + head + "' statement", file,
                       stmt.location.line);
    }
    if (i + 1 != tokens.size()) {
      throw ParseError("trailing tokens after '" + head + "' statement", file,
                       tokens[i + 1].line);
    }
    return;
  }

  if (is_xperm_head(head)) {
    throw ParseError("extended permission statements are not supported: '" +
                         collapse_whitespace(strip_comments(stmt.text)) + "'",
                     file, stmt.location.line);
  }

  warn(sink, "unknown statement kind '" + head + "' skipped", stmt.location);
}

}  // namespace detail

// Warns about rule permissions absent from a class's known vocabulary.
// Classes with empty vocabularies are not checked.
inline void validate_class_vocabulary(const Policy& policy,
                                      DiagnosticSink& sink) {
  auto check = [&](const std::vector<MappedRule>& rules) {
    for (const auto& mapped : rules) {
      const auto* av = std::get_if<AVRule>(&mapped.rule);
      if (!av) continue;
      auto it = policy.classes.find(av->security_class);
      if (it == policy.classes.end() || it->second.known_permissions.empty()) {
        continue;
      }
      for (const auto& perm : av->permissions) {
        if (!it->second.known_permissions.count(perm)) {
          warn(sink,
               "permission '" + perm + "' is not defined for class '" +
                   av->security_class + "'",
               mapped.location);
        }
      }
    }
  };
  check(policy.rules);
  check(policy.neverallows);
}

inline ParseOutput parse_policy(const SourceSet& src,
                                const ParserOptions& options = {}) {
  ParseOutput out;
  MacroTable table;

  for (const auto& file : src.files) {
    if (src.macro_files.count(file.path)) {
      table = parse_macro_file(file.contents, file.path, std::move(table),
                               out.diagnostics);
    }
  }

  detail::ParseState state;
  for (const auto& file : src.files) {
    if (src.macro_files.count(file.path)) continue;
    auto statements = split_statements(file.contents, file.path);
    for (const auto& stmt : statements) {
      detail::process_statement(stmt, table, state, out.diagnostics,
                                std::nullopt, 0);
    }
  }

  Policy& policy = out.policy;
  policy.types = std::move(state.types);
  for (const auto& attr : state.attributes) {
    policy.attributes.emplace(attr, std::set<std::string>{});
  }

  auto undeclared = [&](const std::string& id, const SourceLocation& loc,
                        const char* context) {
    std::string message = std::string("undeclared identifier '") + id +
                          "' referenced by " + context;
    if (options.undeclared_reference_is_error) {
      throw ParseError(message, loc.file, loc.line);
    }
    warn(out.diagnostics, message, loc);
  };

  for (auto& [membership, loc] : state.memberships) {
    auto& [type_name, attr_name] = membership;
    if (!policy.types.count(type_name)) {
      undeclared(type_name, loc, "attribute membership");
      continue;
    }
    auto it = policy.attributes.find(attr_name);
    if (it == policy.attributes.end()) {
      undeclared(attr_name, loc, "attribute membership");
      continue;
    }
    it->second.insert(type_name);
  }

  for (auto& mapped : state.pending_rules) {
    if (const auto* av = std::get_if<AVRule>(&mapped.rule)) {
      if (!policy.is_declared(av->source)) {
        undeclared(av->source, mapped.location, "rule source");
      }
      if (av->target != "self" && !policy.is_declared(av->target)) {
        undeclared(av->target, mapped.location, "rule target");
      }
      policy.classes.emplace(av->security_class,
                             SecurityClass{av->security_class, {}});
    } else {
      const auto& te = std::get<TERule>(mapped.rule);
      if (!policy.is_declared(te.source)) {
        undeclared(te.source, mapped.location, "rule source");
      }
      if (!policy.is_declared(te.target)) {
        undeclared(te.target, mapped.location, "rule target");
      }
      if (!policy.is_declared(te.default_type)) {
        undeclared(te.default_type, mapped.location, "transition default");
      }
      policy.classes.emplace(te.security_class,
                             SecurityClass{te.security_class, {}});
    }
  }

  std::vector<MappedRule> granting;
  std::vector<MappedRule> nevers;
  for (auto& mapped : state.pending_rules) {
    const auto* av = std::get_if<AVRule>(&mapped.rule);
    if (av && av->kind == RuleKind::neverallow) {
      nevers.push_back(std::move(mapped));
    } else {
      granting.push_back(std::move(mapped));
    }
  }
  policy.rules = merge_rules(std::move(granting));
  policy.neverallows = merge_rules(std::move(nevers));
  policy.macro_usages = std::move(state.usages);

  validate_class_vocabulary(policy, out.diagnostics);
  out.macros = std::move(table);
  return out;
}

// Builds the attribute-expanded view: each rule whose source or target names
// an attribute is replicated per member type, keeping the original location
// and recording the attribute it came from. The literal target `self` is
// never expanded. Rules over empty attributes vanish from the view with a
// warning.
inline Policy expand_attributes(Policy policy, DiagnosticSink& sink) {
  policy.expanded_rules.clear();

  auto members_of = [&](const std::string& id)
      -> std::optional<std::vector<std::string>> {
    auto it = policy.attributes.find(id);
    if (it == policy.attributes.end()) return std::nullopt;
    return std::vector<std::string>(it->second.begin(), it->second.end());
  };

  for (const auto& mapped : policy.rules) {
    std::string source, target;
    if (const auto* av = std::get_if<AVRule>(&mapped.rule)) {
      source = av->source;
      target = av->target;
    } else {
      const auto& te = std::get<TERule>(mapped.rule);
      source = te.source;
      target = te.target;
    }

    auto source_members = members_of(source);
    std::optional<std::vector<std::string>> target_members;
    if (target != "self") target_members = members_of(target);

    if ((source_members && source_members->empty()) ||
        (target_members && target_members->empty())) {
      const std::string& empty_attr =
          source_members && source_members->empty() ? source : target;
      warn(sink,
           "rule over empty attribute '" + empty_attr +
               "' produces no expanded rules",
           mapped.location);
      continue;
    }

    std::vector<std::string> sources =
        source_members ? *source_members : std::vector<std::string>{source};
    std::vector<std::string> targets =
        target_members ? *target_members : std::vector<std::string>{target};

    for (const auto& s : sources) {
      for (const auto& t : targets) {
        MappedRule replica = mapped;
        if (const auto* av = std::get_if<AVRule>(&mapped.rule)) {
          AVRule copy = *av;
          copy.source = s;
          copy.target = t;
          replica.rule = std::move(copy);
        } else {
          TERule copy = std::get<TERule>(mapped.rule);
          copy.source = s;
          copy.target = t;
          replica.rule = std::move(copy);
        }
        if (source_members) replica.source_attribute = source;
        if (target_members) replica.target_attribute = target;
        policy.expanded_rules.push_back(std::move(replica));
      }
    }
  }

  policy.expanded_view_built = true;
  policy.expanded_rule_count = policy.expanded_rules.size();
  return policy;
}

}  // namespace selint
