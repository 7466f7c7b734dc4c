// Copyright (c) selint contributors.
// SPDX-License-Identifier: Apache-2.0
//
// Suggests rule_block macro usages with concrete arguments. A macro's body is
// expanded once with placeholder arguments to obtain rule templates; the
// search then binds arguments from matching policy rules, anchoring on the
// template that references the most arguments and refining the rest. Every
// anchor is tried in turn, so any binding whose score clears the threshold is
// found; scores are (templates found in the policy) / (templates total).

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
#include "selint/detail/pattern.hpp"
#include "selint/errors.hpp"
#include "selint/findings.hpp"
#include "selint/host.hpp"
#include "selint/m4.hpp"
#include "selint/model.hpp"

namespace selint {

struct ArgumentBinding {
  std::string macro;
  std::vector<std::string> values;  // one per macro argument
  double score = 0.0;

  bool operator==(const ArgumentBinding&) const = default;
};

namespace detail {

// Key-indexed view over the unexpanded rules, shared by all macro searches.
struct PolicyRuleIndex {
  std::vector<const MappedRule*> av;  // granting rules and neverallows
  std::vector<const MappedRule*> te;
  std::map<std::string, const MappedRule*> av_by_key;
  std::map<std::string, std::vector<const MappedRule*>> te_by_key;

  static PolicyRuleIndex build(const Policy& policy) {
    PolicyRuleIndex index;
    auto add = [&](const MappedRule& mapped) {
      if (std::holds_alternative<AVRule>(mapped.rule)) {
        index.av.push_back(&mapped);
        index.av_by_key.emplace(rule_key(mapped.rule), &mapped);
      } else {
        index.te.push_back(&mapped);
        index.te_by_key[rule_key(mapped.rule)].push_back(&mapped);
      }
    };
    for (const auto& mapped : policy.rules) add(mapped);
    for (const auto& mapped : policy.neverallows) add(mapped);
    return index;
  }

  // The policy rule satisfying `rule`: superset permissions for access
  // vectors, exact default type for transitions. Null when absent.
  const MappedRule* find(const Rule& rule) const {
    if (const auto* want = std::get_if<AVRule>(&rule)) {
      auto it = av_by_key.find(rule_key(rule));
      if (it == av_by_key.end()) return nullptr;
      const auto& have = std::get<AVRule>(it->second->rule).permissions;
      return std::includes(have.begin(), have.end(), want->permissions.begin(),
                           want->permissions.end())
                 ? it->second
                 : nullptr;
    }
    auto it = te_by_key.find(rule_key(rule));
    if (it == te_by_key.end()) return nullptr;
    const auto& want_default = std::get<TERule>(rule).default_type;
    for (const MappedRule* entry : it->second) {
      if (std::get<TERule>(entry->rule).default_type == want_default) {
        return entry;
      }
    }
    return nullptr;
  }
};

// Candidate argument values: every type-position token of the policy, plus
// the stems obtained by stripping a template suffix from such a token. The
// brute-force oracle enumerates exactly this universe.
inline std::vector<std::string> binding_universe(
    const Policy& policy, const MacroTemplateSet& templates) {
  std::set<std::string> tokens;
  auto add_rule = [&](const MappedRule& mapped) {
    if (const auto* av = std::get_if<AVRule>(&mapped.rule)) {
      tokens.insert(av->source);
      tokens.insert(av->target);
    } else {
      const auto& te = std::get<TERule>(mapped.rule);
      tokens.insert(te.source);
      tokens.insert(te.target);
      tokens.insert(te.default_type);
    }
  };
  for (const auto& mapped : policy.rules) add_rule(mapped);
  for (const auto& mapped : policy.neverallows) add_rule(mapped);

  std::set<std::string> suffixes;
  auto add_suffix = [&](const FieldPattern& p) {
    if (p.arg > 0 && !p.text.empty()) suffixes.insert(p.text);
  };
  for (const auto& t : templates.templates) {
    if (const auto* av = std::get_if<TemplateAV>(&t)) {
      add_suffix(av->source);
      add_suffix(av->target);
    } else {
      const auto& te = std::get<TemplateTE>(t);
      add_suffix(te.source);
      add_suffix(te.target);
      add_suffix(te.default_type);
    }
  }

  std::set<std::string> universe = tokens;
  for (const auto& token : tokens) {
    for (const auto& suffix : suffixes) {
      if (token.size() > suffix.size() &&
          token.compare(token.size() - suffix.size(), suffix.size(), suffix) ==
              0) {
        std::string stem = token.substr(0, token.size() - suffix.size());
        if (is_identifier(stem)) universe.insert(std::move(stem));
      }
    }
  }
  return {universe.begin(), universe.end()};
}

struct BindingSearchResult {
  std::vector<ArgumentBinding> bindings;  // sorted by values
  bool truncated = false;
};

inline BindingSearchResult search_bindings_impl(const Policy& policy,
                                                const MacroTemplateSet& templates,
                                                const PolicyRuleIndex& index,
                                                double threshold,
                                                std::size_t cap) {
  BindingSearchResult result;
  const std::size_t arity = static_cast<std::size_t>(templates.arity);
  const std::size_t total = templates.templates.size();
  std::size_t examined = 0;
  auto charge = [&]() {
    if (++examined > cap) {
      result.truncated = true;
      return false;
    }
    return true;
  };
  auto rules_for = [&](const RuleTemplate& t) -> const auto& {
    return std::holds_alternative<TemplateAV>(t) ? index.av : index.te;
  };

  // Anchor order: most referenced arguments first, body order on ties.
  std::vector<std::size_t> order(total);
  for (std::size_t i = 0; i < total; ++i) order[i] = i;
  std::vector<std::size_t> arg_counts(total);
  for (std::size_t i = 0; i < total; ++i) {
    std::set<int> args;
    collect_template_args(templates.templates[i], args);
    arg_counts[i] = args.size();
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return arg_counts[a] > arg_counts[b];
  });

  // Each pass seeds from one anchor and refines only against templates later
  // in the anchor order; a binding whose earliest matched template is T is
  // discovered by the pass anchored at T. Unextended bindings are kept so a
  // template that fails to match never discards viable candidates.
  std::set<std::vector<std::string>> partials;
  for (std::size_t oi = 0; oi < total; ++oi) {
    const RuleTemplate& anchor = templates.templates[order[oi]];
    std::set<std::vector<std::string>> current;
    for (const MappedRule* mapped : rules_for(anchor)) {
      std::vector<std::string> binding(arity);
      if (match_template(anchor, mapped->rule, binding)) {
        if (!charge()) return result;
        current.insert(std::move(binding));
      }
    }
    for (std::size_t oj = oi + 1; oj < total && !current.empty(); ++oj) {
      const RuleTemplate& t = templates.templates[order[oj]];
      std::set<std::vector<std::string>> next = current;
      for (const auto& binding : current) {
        if (template_bound(t, binding)) continue;
        for (const MappedRule* mapped : rules_for(t)) {
          std::vector<std::string> extended = binding;
          if (match_template(t, mapped->rule, extended) &&
              extended != binding) {
            if (!charge()) return result;
            next.insert(std::move(extended));
          }
        }
      }
      current = std::move(next);
    }
    for (const auto& binding : current) partials.insert(binding);
  }

  // Complete remaining slots over the universe, then rescore each candidate
  // exactly; partial bindings that cannot reach the threshold are dropped.
  const std::vector<std::string> universe = binding_universe(policy, templates);
  std::set<std::vector<std::string>> candidates;
  for (const auto& partial : partials) {
    std::size_t matched_now = 0;
    std::size_t open = 0;
    for (const auto& t : templates.templates) {
      if (!template_bound(t, partial)) {
        ++open;
      } else if (index.find(instantiate_template(t, partial))) {
        ++matched_now;
      }
    }
    if (static_cast<double>(matched_now + open) / static_cast<double>(total) <
        threshold) {
      continue;
    }
    std::vector<std::size_t> slots;
    for (std::size_t k = 0; k < arity; ++k) {
      if (partial[k].empty()) slots.push_back(k);
    }
    if (!slots.empty() && universe.empty()) continue;
    std::vector<std::size_t> odometer(slots.size(), 0);
    while (true) {
      std::vector<std::string> values = partial;
      for (std::size_t s = 0; s < slots.size(); ++s) {
        values[slots[s]] = universe[odometer[s]];
      }
      if (!charge()) return result;
      candidates.insert(std::move(values));
      std::size_t s = slots.size();
      while (s > 0 && ++odometer[s - 1] == universe.size()) {
        odometer[--s] = 0;
      }
      if (s == 0) break;
    }
  }

  for (const auto& values : candidates) {
    if (!charge()) return result;
    std::size_t matched = 0;
    for (const auto& t : templates.templates) {
      if (index.find(instantiate_template(t, values))) ++matched;
    }
    double score = static_cast<double>(matched) / static_cast<double>(total);
    if (score >= threshold) {
      result.bindings.push_back(ArgumentBinding{templates.macro, values, score});
    }
  }
  return result;
}

}  // namespace detail

// Exact binding search for one macro. On truncation the binding list is
// empty and `truncated` is set.
inline detail::BindingSearchResult search_bindings(
    const Policy& policy, const MacroDefinition& def, const MacroTable& table,
    double threshold, std::size_t cap, DiagnosticSink& sink) {
  auto templates = detail::extract_templates(def, table, sink);
  if (!templates) return {};
  auto index = detail::PolicyRuleIndex::build(policy);
  auto result = detail::search_bindings_impl(policy, *templates, index,
                                             threshold, cap);
  if (result.truncated) result.bindings.clear();
  return result;
}

// Test oracle: enumerates the full candidate cross product, expands the
// macro for each tuple, and scores by scanning the rule lists directly.
inline std::vector<ArgumentBinding> brute_force_bindings(
    const Policy& policy, const MacroDefinition& def, const MacroTable& table,
    double threshold) {
  std::vector<ArgumentBinding> out;
  DiagnosticSink scratch;
  auto templates = detail::extract_templates(def, table, scratch);
  if (!templates) return out;
  const std::vector<std::string> universe =
      detail::binding_universe(policy, *templates);
  const std::size_t arity = static_cast<std::size_t>(def.arity);
  if (arity > 0 && universe.empty()) return out;

  auto found = [&](const Rule& rule) {
    auto scan = [&](const std::vector<MappedRule>& list) {
      for (const auto& mapped : list) {
        if (const auto* want = std::get_if<AVRule>(&rule)) {
          const auto* have = std::get_if<AVRule>(&mapped.rule);
          if (!have || have->kind != want->kind ||
              have->source != want->source || have->target != want->target ||
              have->security_class != want->security_class) {
            continue;
          }
          if (std::includes(have->permissions.begin(), have->permissions.end(),
                            want->permissions.begin(),
                            want->permissions.end())) {
            return true;
          }
        } else if (const auto* have = std::get_if<TERule>(&mapped.rule)) {
          if (*have == std::get<TERule>(rule)) return true;
        }
      }
      return false;
    };
    return scan(policy.rules) || scan(policy.neverallows);
  };

  std::vector<std::size_t> odometer(arity, 0);
  while (true) {
    std::vector<std::string> values;
    values.reserve(arity);
    for (std::size_t k = 0; k < arity; ++k) values.push_back(universe[odometer[k]]);

    DiagnosticSink ignore;
    std::optional<MacroExpansion> expansion;
    try {
      expansion = expand(def, values, table, ignore);
    } catch (const ParseError&) {
    }
    if (expansion && !expansion->produced_rules.empty()) {
      std::size_t matched = 0;
      for (const auto& rule : expansion->produced_rules) {
        if (found(rule)) ++matched;
      }
      double score = static_cast<double>(matched) /
                     static_cast<double>(expansion->produced_rules.size());
      if (score >= threshold) {
        out.push_back(ArgumentBinding{def.name, std::move(values), score});
      }
    }

    std::size_t k = arity;
    while (k > 0 && ++odometer[k - 1] == universe.size()) {
      odometer[--k] = 0;
    }
    if (k == 0) break;
  }
  return out;
}

class ParametrizedMacrosPlugin final : public Plugin {
 public:
  std::string_view name() const override { return "parametrized_macros"; }
  std::string_view description() const override {
    return "suggest rule_block macro usages with concrete arguments";
  }

  void configure(const ConfigFile& config) override {
    config.reject_unknown_keys("parametrized_macros",
                               {"threshold", "binding_cap", "ignored_macros"});
    threshold_ = config.number("parametrized_macros", "threshold", 0.8);
    if (threshold_ <= 0.0 || threshold_ > 1.0) {
      throw ConfigError("threshold must be in (0, 1]", "",
                        "parametrized_macros.threshold");
    }
    double cap = config.number("parametrized_macros", "binding_cap",
                               static_cast<double>(kDefaultCap));
    if (cap < 1.0 || cap > 1e15) {
      throw ConfigError("binding_cap must be in [1, 1e15]", "",
                        "parametrized_macros.binding_cap");
    }
    binding_cap_ = static_cast<std::size_t>(cap);
    auto ignored = config.list("parametrized_macros", "ignored_macros");
    ignored_macros_.clear();
    ignored_macros_.insert(ignored.begin(), ignored.end());
  }

  std::vector<Finding> run(const AnalysisInput& input,
                           DiagnosticSink& sink) const override {
    std::vector<Finding> findings;
    const Policy& policy = input.policy;
    const auto index = detail::PolicyRuleIndex::build(policy);

    for (const auto& [macro_name, def] : input.macros.all()) {
      if (def.kind != MacroKind::rule_block || def.arity < 1) continue;
      if (ignored_macros_.count(macro_name)) continue;
      auto templates = detail::extract_templates(def, input.macros, sink);
      if (!templates) continue;

      auto result = detail::search_bindings_impl(policy, *templates, index,
                                                 threshold_, binding_cap_);
      if (result.truncated) {
        warn(sink,
             "binding search for macro '" + macro_name +
                 "' exceeded binding_cap; no suggestions emitted",
             def.origin);
        continue;
      }
      for (const auto& binding : result.bindings) {
        if (already_used(policy, macro_name, binding.values)) continue;
        findings.push_back(
            make_finding(*templates, binding, index));
      }
    }
    return findings;
  }

 private:
  static constexpr std::size_t kDefaultCap = 10'000'000;

  static bool already_used(const Policy& policy, const std::string& macro,
                           const std::vector<std::string>& values) {
    for (const auto& usage : policy.macro_usages) {
      if (usage.name == macro && usage.args == values) return true;
    }
    return false;
  }

  Finding make_finding(const detail::MacroTemplateSet& templates,
                       const ArgumentBinding& binding,
                       const detail::PolicyRuleIndex& index) const {
    Finding finding;
    finding.plugin = std::string(name());
    finding.severity = Severity::suggestion;
    finding.score = binding.score;

    std::string message;
    std::optional<SourceLocation> earliest;
    for (const auto& t : templates.templates) {
      Rule rule = detail::instantiate_template(t, binding.values);
      std::string line;
      if (const MappedRule* hit = index.find(rule)) {
        line = "replaces " + hit->location.str() + ": " +
               render_rule(hit->rule);
        if (const auto* want = std::get_if<AVRule>(&rule)) {
          const auto& have = std::get<AVRule>(hit->rule).permissions;
          std::vector<std::string> residual;
          std::set_difference(have.begin(), have.end(),
                              want->permissions.begin(),
                              want->permissions.end(),
                              std::back_inserter(residual));
          if (!residual.empty()) {
            line += " (residual:";
            for (const auto& perm : residual) {
              line += ' ';
              line += perm;
            }
            line += ')';
          }
        }
        if (!earliest || hit->location < *earliest) earliest = hit->location;
      } else {
        line = "missing: " + render_rule(rule);
      }
      if (!message.empty()) message += '\n';
      message += line;
    }

    const std::string usage =
        MacroUsageRef{templates.macro, binding.values}.str();
    if (earliest) finding.location = *earliest;
    finding.rule_text = usage;
    finding.message = std::move(message);
    finding.suggestion = usage;
    return finding;
  }

  double threshold_ = 0.8;
  std::size_t binding_cap_ = kDefaultCap;
  std::set<std::string> ignored_macros_;
};

}  // namespace selint
