// Copyright (c) selint contributors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>

#include "selint/host.hpp"
#include "selint/plugins/parametrized_macros.hpp"
#include "selint/plugins/risky_rules.hpp"
#include "selint/plugins/simple_macros.hpp"
#include "selint/plugins/unnecessary_rules.hpp"
#include "selint/plugins/user_neverallows.hpp"

namespace selint {

inline PluginRegistry builtin_registry() {
  PluginRegistry registry;
  registry.add([] { return std::make_unique<SimpleMacrosPlugin>(); });
  registry.add([] { return std::make_unique<ParametrizedMacrosPlugin>(); });
  registry.add([] { return std::make_unique<RiskyRulesPlugin>(); });
  registry.add([] { return std::make_unique<UnnecessaryRulesPlugin>(); });
  registry.add([] { return std::make_unique<UserNeverallowsPlugin>(); });
  return registry;
}

}  // namespace selint
