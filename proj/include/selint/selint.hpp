// Copyright (c) selint contributors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "selint/config.hpp"
#include "selint/errors.hpp"
#include "selint/findings.hpp"
#include "selint/host.hpp"
#include "selint/m4.hpp"
#include "selint/model.hpp"
#include "selint/parse.hpp"
#include "selint/plugins/builtin.hpp"
#include "selint/statement.hpp"
