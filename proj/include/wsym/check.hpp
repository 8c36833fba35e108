// Copyright (c) the wsym contributors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "wsym/config.hpp"

namespace wsym {

struct CheckResult {
  std::string name;
  bool pass = false;
  double measured = 0.0;
  double threshold = 0.0;
  std::string detail;
};

/// Cross-module invariant suite: commuting diagram, hybrid/direct
/// equivalence, operator-path agreement, weak symmetry, Q2L scaling,
/// B(lambda) symmetry, quadrature saturation, the Alfeld negative control
/// and thread determinism. Failures are reported, not thrown.
std::vector<CheckResult> run_check_suite(const StudyConfig& cfg);

}  // namespace wsym
