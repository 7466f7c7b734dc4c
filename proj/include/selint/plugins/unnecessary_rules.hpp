// Copyright (c) selint contributors.
// SPDX-License-Identifier: Apache-2.0
//
// Three detectors for rules that grant nothing by themselves:
//   tuples:      a rule matching a tuple's first template must be accompanied
//                by every later template, instantiated with the same bindings
//   debug:       rules referencing configured debug types outside a
//                recognized guard macro
//   constraints: permissions effective only alongside required permissions on
//                the same key or alternative permissions on a related class

#pragma once

#include <algorithm>
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
#include "selint/model.hpp"
#include "selint/plugins/parametrized_macros.hpp"

namespace selint {

class UnnecessaryRulesPlugin final : public Plugin {
 public:
  std::string_view name() const override { return "unnecessary_rules"; }
  std::string_view description() const override {
    return "detect incomplete rule tuples, debug rules, and ineffective "
           "permissions";
  }

  void configure(const ConfigFile& config) override {
    config.reject_unknown_keys("unnecessary_rules",
                               {"debug_types", "debug_guards"});
    for (const auto& section : config.section_names()) {
      if (section.rfind("unnecessary_rules.", 0) != 0) continue;
      if (section.rfind("unnecessary_rules.tuple.", 0) == 0 ||
          section.rfind("unnecessary_rules.constraint.", 0) == 0) {
        continue;
      }
      throw ConfigError("unknown subsection '" + section + "'", "", section);
    }

    debug_types_.clear();
    for (const auto& id : config.list("unnecessary_rules", "debug_types")) {
      if (!is_identifier(id)) {
        throw ConfigError("invalid debug type '" + id + "'", "",
                          "unnecessary_rules.debug_types");
      }
      debug_types_.insert(id);
    }
    debug_guards_ = {"userdebug_or_eng"};
    if (config.find("unnecessary_rules", "debug_guards")) {
      auto guards = config.list("unnecessary_rules", "debug_guards");
      debug_guards_.clear();
      debug_guards_.insert(guards.begin(), guards.end());
    }

    tuples_.clear();
    for (const auto& tuple_name :
         config.subsections("unnecessary_rules.tuple")) {
      const std::string section = "unnecessary_rules.tuple." + tuple_name;
      config.reject_unknown_keys(section, {"templates"});
      auto statements = config.list(section, "templates");
      if (statements.size() < 2) {
        throw ConfigError("a tuple needs at least two templates", "", section);
      }
      Tuple tuple;
      tuple.name = tuple_name;
      for (const auto& statement : statements) {
        tuple.templates.push_back(
            detail::parse_template_statement(statement, section));
      }
      std::set<int> first_args;
      detail::collect_template_args(tuple.templates.front(), first_args);
      int max_arg = first_args.empty() ? 0 : *first_args.rbegin();
      for (std::size_t i = 1; i < tuple.templates.size(); ++i) {
        std::set<int> args;
        detail::collect_template_args(tuple.templates[i], args);
        for (int arg : args) {
          if (!first_args.count(arg)) {
            throw ConfigError(
                "the first template must reference every placeholder used by "
                "later templates",
                "", section);
          }
        }
      }
      tuple.arity = max_arg;
      tuples_.push_back(std::move(tuple));
    }

    constraints_.clear();
    for (const auto& constraint_name :
         config.subsections("unnecessary_rules.constraint")) {
      const std::string section =
          "unnecessary_rules.constraint." + constraint_name;
      config.reject_unknown_keys(
          section, {"trigger_class", "trigger_perms", "required_perms",
                    "alternative_class", "alternative_perms"});
      Constraint constraint;
      constraint.name = constraint_name;
      constraint.trigger_class = config.scalar_or(section, "trigger_class", "");
      if (!is_identifier(constraint.trigger_class)) {
        throw ConfigError("trigger_class must be an identifier", "", section);
      }
      constraint.trigger_perms = config.list(section, "trigger_perms");
      if (constraint.trigger_perms.empty()) {
        throw ConfigError("trigger_perms must be non-empty", "", section);
      }
      constraint.required_perms = config.list(section, "required_perms");
      constraint.alternative_perms =
          config.list(section, "alternative_perms");
      constraint.alternative_class =
          config.scalar_or(section, "alternative_class", "");
      if (constraint.required_perms.empty() &&
          constraint.alternative_perms.empty()) {
        throw ConfigError(
            "at least one of required_perms and alternative_perms must be "
            "non-empty",
            "", section);
      }
      if (!constraint.alternative_perms.empty() &&
          !is_identifier(constraint.alternative_class)) {
        throw ConfigError(
            "alternative_class must be an identifier when alternative_perms "
            "is set",
            "", section);
      }
      normalize_permissions(constraint.trigger_perms);
      normalize_permissions(constraint.required_perms);
      normalize_permissions(constraint.alternative_perms);
      constraints_.push_back(std::move(constraint));
    }
  }

  std::vector<Finding> run(const AnalysisInput& input,
                           DiagnosticSink& sink) const override {
    std::vector<Finding> findings;
    const auto index = detail::PolicyRuleIndex::build(input.policy);
    check_tuples(index, findings);
    check_debug(input.policy, sink, findings);
    check_ineffective_perms(input.policy, index, findings);
    return findings;
  }

 private:
  struct Tuple {
    std::string name;
    std::vector<detail::RuleTemplate> templates;
    int arity = 0;
  };
  struct Constraint {
    std::string name;
    std::string trigger_class;
    std::vector<std::string> trigger_perms;
    std::vector<std::string> required_perms;
    std::string alternative_class;
    std::vector<std::string> alternative_perms;
  };

  void check_tuples(const detail::PolicyRuleIndex& index,
                    std::vector<Finding>& findings) const {
    for (const auto& tuple : tuples_) {
      const detail::RuleTemplate& first = tuple.templates.front();
      const auto& candidates =
          std::holds_alternative<detail::TemplateAV>(first) ? index.av
                                                            : index.te;
      for (const MappedRule* mapped : candidates) {
        std::vector<std::string> binding(
            static_cast<std::size_t>(tuple.arity));
        if (!detail::match_template(first, mapped->rule, binding)) continue;

        std::vector<std::string> missing;
        for (std::size_t i = 1; i < tuple.templates.size(); ++i) {
          Rule wanted =
              detail::instantiate_template(tuple.templates[i], binding);
          if (!index.find(wanted)) missing.push_back(render_rule(wanted));
        }
        if (missing.empty()) continue;

        Finding finding;
        finding.plugin = std::string(name());
        finding.severity = Severity::warning;
        finding.location = mapped->location;
        finding.rule_text = mapped->origin_text;
        std::string message = "tuple '" + tuple.name + "' incomplete";
        for (const auto& rule : missing) message += "\nmissing: " + rule;
        finding.message = std::move(message);
        findings.push_back(std::move(finding));
      }
    }
  }

  void check_debug(const Policy& policy, DiagnosticSink& sink,
                   std::vector<Finding>& findings) const {
    if (debug_types_.empty()) return;
    const std::vector<MappedRule>* rules = &policy.expanded_rules;
    if (!policy.expanded_view_built) {
      warn(sink, "expanded view not built; checking unexpanded rules");
      rules = &policy.rules;
    }
    for (const auto& mapped : *rules) {
      if (mapped.via_macro && debug_guards_.count(mapped.via_macro->name)) {
        continue;
      }
      std::set<std::string> matched;
      auto note = [&](const std::string& id) {
        if (debug_types_.count(id)) matched.insert(id);
      };
      if (const auto* av = std::get_if<AVRule>(&mapped.rule)) {
        note(av->source);
        note(av->target);
      } else {
        const auto& te = std::get<TERule>(mapped.rule);
        note(te.source);
        note(te.target);
        note(te.default_type);
      }
      if (matched.empty()) continue;

      Finding finding;
      finding.plugin = std::string(name());
      finding.severity = Severity::warning;
      finding.location = mapped.location;
      finding.rule_text = render_rule(mapped.rule);
      std::string message = "references debug type";
      if (matched.size() > 1) message += 's';
      for (const auto& id : matched) {
        message += ' ';
        message += id;
      }
      finding.message = std::move(message);
      findings.push_back(std::move(finding));
    }
  }

  void check_ineffective_perms(const Policy& policy,
                               const detail::PolicyRuleIndex& index,
                               std::vector<Finding>& findings) const {
    for (const auto& mapped : policy.rules) {
      const auto* av = std::get_if<AVRule>(&mapped.rule);
      if (!av || av->kind != RuleKind::allow) continue;
      for (const auto& constraint : constraints_) {
        if (av->security_class != constraint.trigger_class) continue;
        std::vector<std::string> triggered;
        std::set_intersection(av->permissions.begin(), av->permissions.end(),
                              constraint.trigger_perms.begin(),
                              constraint.trigger_perms.end(),
                              std::back_inserter(triggered));
        if (triggered.empty()) continue;

        // Required side: all required permissions on this rule's own key,
        // which is aggregated by the pre-check merge.
        if (!constraint.required_perms.empty() &&
            std::includes(av->permissions.begin(), av->permissions.end(),
                          constraint.required_perms.begin(),
                          constraint.required_perms.end())) {
          continue;
        }
        const std::vector<std::string>* alternative_granted = nullptr;
        if (!constraint.alternative_perms.empty()) {
          AVRule probe{RuleKind::allow, av->source, av->target,
                       constraint.alternative_class, {}};
          auto it = index.av_by_key.find(rule_key(Rule{probe}));
          if (it != index.av_by_key.end()) {
            alternative_granted =
                &std::get<AVRule>(it->second->rule).permissions;
            if (std::includes(alternative_granted->begin(),
                              alternative_granted->end(),
                              constraint.alternative_perms.begin(),
                              constraint.alternative_perms.end())) {
              continue;
            }
          }
        }

        std::string message = "permissions {";
        for (const auto& perm : triggered) {
          message += ' ';
          message += perm;
        }
        message += " } may be ineffective ('" + constraint.name + "')";
        if (!constraint.required_perms.empty()) {
          std::vector<std::string> missing;
          std::set_difference(constraint.required_perms.begin(),
                              constraint.required_perms.end(),
                              av->permissions.begin(), av->permissions.end(),
                              std::back_inserter(missing));
          message += "\nmissing on " + constraint.trigger_class + ":";
          for (const auto& perm : missing) {
            message += ' ';
            message += perm;
          }
        }
        if (!constraint.alternative_perms.empty()) {
          std::vector<std::string> missing;
          if (alternative_granted) {
            std::set_difference(constraint.alternative_perms.begin(),
                                constraint.alternative_perms.end(),
                                alternative_granted->begin(),
                                alternative_granted->end(),
                                std::back_inserter(missing));
          } else {
            missing = constraint.alternative_perms;
          }
          message += "\nmissing on " + constraint.alternative_class + ":";
          for (const auto& perm : missing) {
            message += ' ';
            message += perm;
          }
        }

        Finding finding;
        finding.plugin = std::string(name());
        finding.severity = Severity::warning;
        finding.location = mapped.location;
        finding.rule_text = mapped.origin_text;
        finding.message = std::move(message);
        findings.push_back(std::move(finding));
      }
    }
  }

  std::set<std::string> debug_types_;
  std::set<std::string> debug_guards_;
  std::vector<Tuple> tuples_;
  std::vector<Constraint> constraints_;
};

}  // namespace selint
