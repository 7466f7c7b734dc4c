// Copyright (c) selint contributors.
// SPDX-License-Identifier: Apache-2.0
//
// Suggests replacing individually listed permissions with permission_set
// macros: a macro scores the fraction of its permissions the rule already
// grants; candidates at or above the threshold enter a greedy cover.

#pragma once

#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "selint/config.hpp"
#include "selint/findings.hpp"
#include "selint/host.hpp"
#include "selint/m4.hpp"
#include "selint/model.hpp"

namespace selint {

class SimpleMacrosPlugin final : public Plugin {
 public:
  std::string_view name() const override { return "simple_macros"; }
  std::string_view description() const override {
    return "suggest permission_set macros for individually listed permissions";
  }

  void configure(const ConfigFile& config) override {
    config.reject_unknown_keys(
        "simple_macros", {"threshold", "ignored_macros", "ignored_rules"});
    threshold_ = config.number("simple_macros", "threshold", 0.8);
    if (threshold_ <= 0.0 || threshold_ > 1.0) {
      throw ConfigError("threshold must be in (0, 1]", "",
                        "simple_macros.threshold");
    }
    auto ignored_macros = config.list("simple_macros", "ignored_macros");
    ignored_macros_.clear();
    ignored_macros_.insert(ignored_macros.begin(), ignored_macros.end());
    auto ignored_rules = config.list("simple_macros", "ignored_rules");
    ignored_rules_.clear();
    ignored_rules_.insert(ignored_rules.begin(), ignored_rules.end());
  }

  std::vector<Finding> run(const AnalysisInput& input,
                           DiagnosticSink&) const override {
    std::vector<Finding> findings;
    const Policy& policy = input.policy;

    struct Candidate {
      std::string name;
      std::vector<std::string> perms;
    };
    std::vector<Candidate> macros;
    for (const auto& [macro_name, def] : input.macros.all()) {
      if (def.kind != MacroKind::permission_set) continue;
      if (ignored_macros_.count(macro_name)) continue;
      macros.push_back(
          Candidate{macro_name, produce_permissions(def, input.macros)});
    }
    if (macros.empty()) return findings;

    // Statements that already reference a permission_set macro keep their
    // shape; the parser records those usages by location.
    std::set<SourceLocation> macro_statement_locations;
    for (const auto& usage : policy.macro_usages) {
      const MacroDefinition* def = input.macros.find(usage.name);
      if (def && def->kind == MacroKind::permission_set) {
        macro_statement_locations.insert(usage.location);
      }
    }

    for (const auto& mapped : policy.rules) {
      const auto* av = std::get_if<AVRule>(&mapped.rule);
      if (!av || av->kind != RuleKind::allow) continue;
      if (mapped.via_macro) continue;
      if (macro_statement_locations.count(mapped.location)) continue;
      if (ignored_rules_.count(rule_key(mapped.rule))) continue;
      if (av->permissions.size() < 2) continue;

      const std::set<std::string> rule_perms(av->permissions.begin(),
                                             av->permissions.end());
      const std::set<std::string>* vocabulary = nullptr;
      if (auto it = policy.classes.find(av->security_class);
          it != policy.classes.end() &&
          !it->second.known_permissions.empty()) {
        vocabulary = &it->second.known_permissions;
      }

      struct Scored {
        const Candidate* macro;
        double score;
      };
      std::vector<Scored> candidates;
      for (const auto& macro : macros) {
        if (vocabulary) {
          bool applicable = true;
          for (const auto& perm : macro.perms) {
            if (!vocabulary->count(perm)) {
              applicable = false;
              break;
            }
          }
          if (!applicable) continue;
        }
        std::size_t overlap = 0;
        for (const auto& perm : macro.perms) {
          overlap += rule_perms.count(perm);
        }
        double score =
            static_cast<double>(overlap) / static_cast<double>(macro.perms.size());
        if (score >= threshold_) candidates.push_back(Scored{&macro, score});
      }
      if (candidates.empty()) continue;

      // Greedy cover: highest score, then largest macro, then name. A macro
      // is picked only while it covers at least two still-uncovered
      // permissions, so every pick strictly shortens the rewritten rule.
      std::set<std::string> uncovered = rule_perms;
      std::vector<const Scored*> selected;
      double min_score = 1.0;
      while (true) {
        const Scored* best = nullptr;
        for (const auto& candidate : candidates) {
          std::size_t covers = 0;
          for (const auto& perm : candidate.macro->perms) {
            covers += uncovered.count(perm);
          }
          if (covers < 2) continue;
          if (!best || candidate.score > best->score ||
              (candidate.score == best->score &&
               (candidate.macro->perms.size() > best->macro->perms.size() ||
                (candidate.macro->perms.size() == best->macro->perms.size() &&
                 candidate.macro->name < best->macro->name)))) {
            best = &candidate;
          }
        }
        if (!best) break;
        selected.push_back(best);
        min_score = std::min(min_score, best->score);
        for (const auto& perm : best->macro->perms) uncovered.erase(perm);
      }
      if (selected.empty()) continue;

      std::vector<std::string> added;
      for (const auto* pick : selected) {
        for (const auto& perm : pick->macro->perms) {
          if (!rule_perms.count(perm)) added.push_back(perm);
        }
      }
      normalize_permissions(added);

      std::vector<std::string> rewritten;
      for (const auto* pick : selected) rewritten.push_back(pick->macro->name);
      rewritten.insert(rewritten.end(), uncovered.begin(), uncovered.end());
      if (rewritten.size() >= av->permissions.size()) continue;

      std::string perm_text;
      if (rewritten.size() == 1) {
        perm_text = rewritten.front();
      } else {
        perm_text = "{ ";
        for (const auto& item : rewritten) {
          perm_text += item;
          perm_text += ' ';
        }
        perm_text += '}';
      }

      Finding finding;
      finding.plugin = std::string(name());
      finding.severity = Severity::suggestion;
      finding.score = min_score;
      finding.location = mapped.location;
      finding.rule_text = mapped.origin_text;
      if (!added.empty()) {
        std::string delta = "adds permissions not granted by the original:";
        for (const auto& perm : added) {
          delta += ' ';
          delta += perm;
        }
        finding.message = delta;
      }
      finding.suggestion = std::string(to_string(av->kind)) + " " + av->source +
                           " " + av->target + ":" + av->security_class + " " +
                           perm_text + ";";
      findings.push_back(std::move(finding));
    }
    return findings;
  }

 private:
  double threshold_ = 0.8;
  std::set<std::string> ignored_macros_;
  std::set<std::string> ignored_rules_;
};

}  // namespace selint
