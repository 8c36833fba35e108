// Copyright (c) the wsym contributors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#include "wsym/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace wsym {

unsigned StudyConfig::gamma1_sides() const {
  if (gamma1 == "none" || gamma1.empty()) return 0;
  unsigned mask = 0;
  std::stringstream ss(gamma1);
  std::string side;
  while (std::getline(ss, side, ',')) {
    if (side == "left")
      mask |= kSideLeft;
    else if (side == "right")
      mask |= kSideRight;
    else if (side == "bottom")
      mask |= kSideBottom;
    else if (side == "top")
      mask |= kSideTop;
    else
      throw ConfigError("gamma1: unknown side '" + side + "'");
  }
  return mask;
}

bool StudyConfig::mesh_is_builtin() const {
  return mesh.rfind("builtin:", 0) == 0;
}

int StudyConfig::builtin_cells() const {
  if (!mesh_is_builtin()) throw ConfigError("mesh is not builtin:n");
  const int n = std::atoi(mesh.c_str() + 8);
  if (n < 1) throw ConfigError("mesh: builtin cell count must be >= 1");
  return n;
}

namespace {

void validate(const StudyConfig& cfg) {
  if (cfg.k != 1 && cfg.k != 2) throw ConfigError("k must be 1 or 2");
  if (!(cfg.material.mu_s > 0) || !std::isfinite(cfg.material.mu_s))
    throw ConfigError("mu_s must be positive");
  if (!(cfg.material.lambda_s > 0) || !std::isfinite(cfg.material.lambda_s))
    throw ConfigError("lambda_s must be positive");
  if (!(cfg.material.rho_s > 0) || !std::isfinite(cfg.material.rho_s))
    throw ConfigError("rho_s must be positive");
  if (cfg.problem != "source" && cfg.problem != "eigen")
    throw ConfigError("problem must be source or eigen");
  if (cfg.num_eigs < 1) throw ConfigError("num_eigs must be >= 1");
  if (cfg.multiplicity < 1) throw ConfigError("multiplicity must be >= 1");
  if (!(cfg.newton_rtol > 0)) throw ConfigError("newton_rtol must be positive");
  if (!(cfg.residual_tol > 0)) throw ConfigError("residual_tol must be positive");
  if (cfg.levels.empty()) throw ConfigError("levels must be nonempty");
  for (int l : cfg.levels)
    if (l < 1) throw ConfigError("levels entries must be >= 1");
  const unsigned all = kSideLeft | kSideRight | kSideBottom | kSideTop;
  if (cfg.mesh_is_builtin() && cfg.gamma1_sides() == all)
    throw ConfigError("Gamma_0 must be nonempty (gamma1 covers every side)");
  if (!cfg.mesh_is_builtin() && cfg.gamma1_sides() != 0)
    throw ConfigError("gamma1 applies to builtin meshes only; tag mesh files directly");
  if (cfg.mesh_is_builtin()) cfg.builtin_cells();
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return x;
  } catch (...) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
}

int parse_int(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    const long x = std::stol(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return static_cast<int>(x);
  } catch (...) {
    throw ConfigError(key + ": expected an integer, got '" + v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": expected a boolean, got '" + v + "'");
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

StudyConfig parse_config_text(const std::string& text) {
  StudyConfig cfg;
  std::istringstream is(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(is, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    const std::string line = trim(raw);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(line_no) +
                        ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));

    if (key == "k")
      cfg.k = parse_int(key, val);
    else if (key == "mesh")
      cfg.mesh = val;
    else if (key == "gamma1")
      cfg.gamma1 = val;
    else if (key == "mu_s")
      cfg.material.mu_s = parse_double(key, val);
    else if (key == "lambda_s")
      cfg.material.lambda_s = parse_double(key, val);
    else if (key == "rho_s")
      cfg.material.rho_s = parse_double(key, val);
    else if (key == "problem")
      cfg.problem = val;
    else if (key == "case")
      cfg.case_name = val;
    else if (key == "num_eigs")
      cfg.num_eigs = parse_int(key, val);
    else if (key == "multiplicity")
      cfg.multiplicity = parse_int(key, val);
    else if (key == "newton_rtol")
      cfg.newton_rtol = parse_double(key, val);
    else if (key == "residual_tol")
      cfg.residual_tol = parse_double(key, val);
    else if (key == "levels") {
      cfg.levels.clear();
      std::stringstream ss(val);
      std::string tok;
      while (std::getline(ss, tok, ','))
        cfg.levels.push_back(parse_int(key, trim(tok)));
    } else if (key == "lambda_sweep") {
      cfg.lambda_sweep.clear();
      std::stringstream ss(val);
      std::string tok;
      while (std::getline(ss, tok, ','))
        cfg.lambda_sweep.push_back(parse_double(key, trim(tok)));
    } else if (key == "out_dir")
      cfg.out_dir = val;
    else if (key == "threads")
      cfg.threads = parse_int(key, val);
    else if (key == "seed")
      cfg.seed = static_cast<std::uint64_t>(std::stoull(val));
    else if (key == "postprocess")
      cfg.postprocess = parse_bool(key, val);
    else if (key == "newton_use_derivative")
      cfg.newton_use_derivative = parse_bool(key, val);
    else if (key == "kkt_cap")
      cfg.kkt_cap = parse_int(key, val);
    else if (key == "operator_cap")
      cfg.operator_cap = parse_int(key, val);
    else if (key == "dense_pencil_cap")
      cfg.dense_pencil_cap = parse_int(key, val);
    else if (key == "quad_degree")
      cfg.quad_degree = parse_int(key, val);
    else
      throw ConfigError("unknown config key '" + key + "'");
  }
  validate(cfg);
  return cfg;
}

StudyConfig parse_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config_text(ss.str());
}

std::string echo_config(const StudyConfig& cfg) {
  std::ostringstream os;
  os.precision(17);
  os << "k = " << cfg.k << "\n";
  os << "mesh = " << cfg.mesh << "\n";
  os << "gamma1 = " << cfg.gamma1 << "\n";
  os << "mu_s = " << cfg.material.mu_s << "\n";
  os << "lambda_s = " << cfg.material.lambda_s << "\n";
  os << "rho_s = " << cfg.material.rho_s << "\n";
  os << "problem = " << cfg.problem << "\n";
  os << "case = " << cfg.case_name << "\n";
  os << "num_eigs = " << cfg.num_eigs << "\n";
  os << "multiplicity = " << cfg.multiplicity << "\n";
  os << "newton_rtol = " << cfg.newton_rtol << "\n";
  os << "residual_tol = " << cfg.residual_tol << "\n";
  os << "levels = ";
  for (size_t i = 0; i < cfg.levels.size(); ++i)
    os << (i ? "," : "") << cfg.levels[i];
  os << "\n";
  os << "lambda_sweep = ";
  for (size_t i = 0; i < cfg.lambda_sweep.size(); ++i)
    os << (i ? "," : "") << cfg.lambda_sweep[i];
  os << "\n";
  os << "out_dir = " << cfg.out_dir << "\n";
  os << "threads = " << cfg.threads << "\n";
  os << "seed = " << cfg.seed << "\n";
  os << "postprocess = " << (cfg.postprocess ? "true" : "false") << "\n";
  os << "newton_use_derivative = " << (cfg.newton_use_derivative ? "true" : "false")
     << "\n";
  os << "kkt_cap = " << cfg.kkt_cap << "\n";
  os << "operator_cap = " << cfg.operator_cap << "\n";
  os << "dense_pencil_cap = " << cfg.dense_pencil_cap << "\n";
  os << "quad_degree = " << cfg.quad_degree << "\n";
  return os.str();
}

}  // namespace wsym
