// Copyright (c) the wsym contributors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "wsym/material.hpp"

namespace wsym {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Flat `key = value` study configuration ('#' comments). Every command is
/// reproducible from a config file alone; parsed configs are echoed with
/// defaults expanded.
struct StudyConfig {
  int k = 1;
  std::string mesh = "builtin:2";          // builtin:n or a mesh-file path
  std::string gamma1 = "none";             // none | csv of left,right,bottom,top
  MaterialParams material;
  std::string problem = "source";          // source | eigen
  std::string case_name = "smooth_sin";
  int num_eigs = 1;
  int multiplicity = 1;
  double newton_rtol = 1e-10;
  double residual_tol = 1e-10;
  std::vector<int> levels = {2, 4, 8, 16};
  std::string out_dir = "out";
  int threads = 1;
  std::uint64_t seed = 20240801u;
  bool postprocess = true;
  bool newton_use_derivative = true;
  std::vector<double> lambda_sweep = {1.0, 1e2, 1e4, 1e6};
  int kkt_cap = 20000;
  int operator_cap = 2000;
  int dense_pencil_cap = 1500;
  int quad_degree = -1;                    // -1: default 2k+8

  unsigned gamma1_sides() const;           // parsed side mask
  bool mesh_is_builtin() const;
  int builtin_cells() const;
};

StudyConfig parse_config_text(const std::string& text);
StudyConfig parse_config_file(const std::string& path);

/// Full config with defaults expanded, in the same key = value format.
std::string echo_config(const StudyConfig& cfg);

}  // namespace wsym
