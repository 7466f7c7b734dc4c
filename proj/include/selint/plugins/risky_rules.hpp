// Copyright (c) selint contributors.
// SPDX-License-Identifier: Apache-2.0
//
// Scores every granting rule of the expanded view by configurable partial
// scores. Identifiers are grouped into bins carrying a risk and a trust
// value in [0, 30]; permissions carry tier coefficients. Criteria:
//   risk:     (risk(domain) + risk(type)) / M * max tier coefficient,
//             capability-to-self rules use (risk(domain) + capability) / M,
//             type_transition rules omit the coefficient
//   trust_*:  high/low combinations of trust(domain) and trust(type), where
//             a low side contributes M/2 - score; permissions are ignored
// M = 60 normalizes every numerator to [0, 1].

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

namespace selint {

enum class ScoringCriterion { risk, trust_hh, trust_hl, trust_lh, trust_ll };

inline std::string_view to_string(ScoringCriterion criterion) {
  switch (criterion) {
    case ScoringCriterion::risk: return "risk";
    case ScoringCriterion::trust_hh: return "trust_hh";
    case ScoringCriterion::trust_hl: return "trust_hl";
    case ScoringCriterion::trust_lh: return "trust_lh";
    case ScoringCriterion::trust_ll: return "trust_ll";
  }
  return "?";
}

inline std::optional<ScoringCriterion> parse_criterion(std::string_view text) {
  if (text == "risk") return ScoringCriterion::risk;
  if (text == "trust_hh") return ScoringCriterion::trust_hh;
  if (text == "trust_hl") return ScoringCriterion::trust_hl;
  if (text == "trust_lh") return ScoringCriterion::trust_lh;
  if (text == "trust_ll") return ScoringCriterion::trust_ll;
  return std::nullopt;
}

class RiskyRulesPlugin final : public Plugin {
 public:
  static constexpr double kBinMax = 30.0;  // maximum partial score
  static constexpr double kM = 2.0 * kBinMax;

  std::string_view name() const override { return "risky_rules"; }
  std::string_view description() const override {
    return "score rules by configurable risk or trust criteria";
  }

  void configure(const ConfigFile& config) override {
    config.reject_unknown_keys(
        "risky_rules",
        {"criterion", "capability_score", "min_score", "unbinned_policy"});
    for (const auto& section : config.section_names()) {
      if (section.rfind("risky_rules.", 0) != 0) continue;
      if (section.rfind("risky_rules.bin.", 0) == 0 ||
          section.rfind("risky_rules.tier.", 0) == 0) {
        continue;
      }
      throw ConfigError("unknown subsection '" + section + "'", "", section);
    }

    std::string criterion_text =
        config.scalar_or("risky_rules", "criterion", "risk");
    auto criterion = parse_criterion(criterion_text);
    if (!criterion) {
      throw ConfigError("unknown criterion '" + criterion_text + "'", "",
                        "risky_rules.criterion");
    }
    criterion_ = *criterion;

    capability_score_ =
        config.number("risky_rules", "capability_score", kBinMax);
    if (capability_score_ < 0.0 || capability_score_ > kBinMax) {
      throw ConfigError("capability_score must be in [0, 30]", "",
                        "risky_rules.capability_score");
    }
    min_score_ = config.number("risky_rules", "min_score", 0.0);
    if (min_score_ < 0.0 || min_score_ > 1.0) {
      throw ConfigError("min_score must be in [0, 1]", "",
                        "risky_rules.min_score");
    }
    std::string unbinned =
        config.scalar_or("risky_rules", "unbinned_policy", "warn");
    if (unbinned != "warn" && unbinned != "error") {
      throw ConfigError("unbinned_policy must be 'warn' or 'error'", "",
                        "risky_rules.unbinned_policy");
    }
    unbinned_error_ = unbinned == "error";

    bins_.clear();
    bin_of_.clear();
    for (const auto& bin_name : config.subsections("risky_rules.bin")) {
      const std::string section = "risky_rules.bin." + bin_name;
      config.reject_unknown_keys(section,
                                 {"members", "score_risk", "score_trust"});
      Bin bin;
      bin.name = bin_name;
      bin.risk = config.number(section, "score_risk", 0.0);
      bin.trust = config.number(section, "score_trust", 0.0);
      if (bin.risk < 0.0 || bin.risk > kBinMax || bin.trust < 0.0 ||
          bin.trust > kBinMax) {
        throw ConfigError("bin scores must be in [0, 30]", "", section);
      }
      for (const auto& member : config.list(section, "members")) {
        auto [it, inserted] = bin_of_.emplace(member, bins_.size());
        if (!inserted) {
          throw ConfigError("identifier '" + member + "' is in bins '" +
                                bins_[it->second].name + "' and '" + bin_name +
                                "'",
                            "", section);
        }
      }
      bins_.push_back(std::move(bin));
    }

    static const std::vector<std::string> kTierOrder{"perms_high", "perms_med",
                                                     "perms_low"};
    coefficient_of_.clear();
    std::map<std::string, double> tier_coefficients;
    for (const auto& tier_name : config.subsections("risky_rules.tier")) {
      const std::string section = "risky_rules.tier." + tier_name;
      if (std::find(kTierOrder.begin(), kTierOrder.end(), tier_name) ==
          kTierOrder.end()) {
        throw ConfigError(
            "tier must be perms_high, perms_med, or perms_low", "", section);
      }
      config.reject_unknown_keys(section, {"permissions", "coefficient"});
      double coefficient = config.number(section, "coefficient", 1.0);
      if (coefficient <= 0.0 || coefficient > 1.0) {
        throw ConfigError("coefficient must be in (0, 1]", "", section);
      }
      tier_coefficients[tier_name] = coefficient;
      for (const auto& perm : config.list(section, "permissions")) {
        auto [it, inserted] = coefficient_of_.emplace(perm, coefficient);
        if (!inserted) {
          throw ConfigError("permission '" + perm + "' is in multiple tiers",
                            "", section);
        }
      }
    }
    double previous = 1.0;
    for (const auto& tier_name : kTierOrder) {
      auto it = tier_coefficients.find(tier_name);
      if (it == tier_coefficients.end()) continue;
      if (it->second > previous) {
        throw ConfigError(
            "tier coefficients must be ordered perms_high >= perms_med >= "
            "perms_low",
            "", "risky_rules.tier." + tier_name);
      }
      previous = it->second;
    }
  }

  std::vector<Finding> run(const AnalysisInput& input,
                           DiagnosticSink& sink) const override {
    std::vector<Finding> findings;
    const Policy& policy = input.policy;
    const std::vector<MappedRule>* rules = &policy.expanded_rules;
    if (!policy.expanded_view_built) {
      warn(sink, "expanded view not built; scoring unexpanded rules");
      rules = &policy.rules;
    }

    std::set<std::string> warned_ids;
    std::set<std::string> warned_perms;
    for (const auto& mapped : *rules) {
      double score = 0.0;
      if (const auto* av = std::get_if<AVRule>(&mapped.rule)) {
        if (av->kind != RuleKind::allow) continue;
        score = score_allow(*av, sink, warned_ids, warned_perms);
      } else {
        const auto& te = std::get<TERule>(mapped.rule);
        score = score_pair(te.source, te.target, sink, warned_ids);
      }
      if (score < min_score_) continue;

      Finding finding;
      finding.plugin = std::string(name());
      finding.severity = Severity::info;
      finding.score = score;
      finding.location = mapped.location;
      finding.rule_text = render_rule(mapped.rule);
      findings.push_back(std::move(finding));
    }
    return findings;
  }

 private:
  struct Bin {
    std::string name;
    double risk = 0.0;
    double trust = 0.0;
  };

  double partial(const std::string& id, bool trust, DiagnosticSink& sink,
                 std::set<std::string>& warned) const {
    auto it = bin_of_.find(id);
    if (it != bin_of_.end()) {
      const Bin& bin = bins_[it->second];
      return trust ? bin.trust : bin.risk;
    }
    if (unbinned_error_) {
      throw ConfigError("identifier '" + id + "' is not assigned to any bin",
                        "", "risky_rules.bin");
    }
    if (warned.insert(id).second) {
      warn(sink, "identifier '" + id + "' is not assigned to any bin; scored 0");
    }
    return 0.0;
  }

  // Risk and trust formulas over the (domain, type) pair; a self target
  // scores as the source identifier.
  double score_pair(const std::string& domain, const std::string& target,
                    DiagnosticSink& sink, std::set<std::string>& warned) const {
    const std::string& type = target == "self" ? domain : target;
    if (criterion_ == ScoringCriterion::risk) {
      return (partial(domain, false, sink, warned) +
              partial(type, false, sink, warned)) /
             kM;
    }
    const double kH = kM / 2.0;
    double d = partial(domain, true, sink, warned);
    double t = partial(type, true, sink, warned);
    if (criterion_ == ScoringCriterion::trust_lh ||
        criterion_ == ScoringCriterion::trust_ll) {
      d = kH - d;
    }
    if (criterion_ == ScoringCriterion::trust_hl ||
        criterion_ == ScoringCriterion::trust_ll) {
      t = kH - t;
    }
    return (d + t) / kM;
  }

  double score_allow(const AVRule& av, DiagnosticSink& sink,
                     std::set<std::string>& warned_ids,
                     std::set<std::string>& warned_perms) const {
    if (criterion_ != ScoringCriterion::risk) {
      return score_pair(av.source, av.target, sink, warned_ids);
    }
    if (av.security_class == "capability" && av.target == "self") {
      return (partial(av.source, false, sink, warned_ids) +
              capability_score_) /
             kM;
    }
    double coefficient = 0.0;
    for (const auto& perm : av.permissions) {
      auto it = coefficient_of_.find(perm);
      if (it != coefficient_of_.end()) {
        coefficient = std::max(coefficient, it->second);
      } else {
        coefficient = 1.0;
        if (warned_perms.insert(perm).second) {
          warn(sink, "permission '" + perm +
                         "' is in no tier; coefficient 1 assumed");
        }
      }
    }
    return score_pair(av.source, av.target, sink, warned_ids) * coefficient;
  }

  ScoringCriterion criterion_ = ScoringCriterion::risk;
  double capability_score_ = kBinMax;
  double min_score_ = 0.0;
  bool unbinned_error_ = false;
  std::vector<Bin> bins_;
  std::map<std::string, std::size_t> bin_of_;
  std::map<std::string, double> coefficient_of_;
};

}  // namespace selint
