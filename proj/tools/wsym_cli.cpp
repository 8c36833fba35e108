// Copyright (c) the wsym contributors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "wsym/analysis.hpp"
#include "wsym/check.hpp"
#include "wsym/parallel.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace wsym;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitSolver = 3;
constexpr int kExitCheck = 4;

Mesh load_mesh(const StudyConfig& cfg) {
  if (cfg.mesh_is_builtin())
    return generate_structured_alfeld(cfg.builtin_cells(), cfg.gamma1_sides());
  return read_mesh(cfg.mesh);
}

StudyConfig load_config(const std::string& path) {
  if (path.empty()) return parse_config_text("");
  return parse_config_file(path);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path.string());
  os << text;
}

json mesh_info(const Mesh& mesh) {
  return json{{"vertices", mesh.n_vertices()},
              {"elements", mesh.n_elements()},
              {"faces", mesh.n_faces()},
              {"boundary_faces", mesh.n_boundary_faces()},
              {"h_max", mesh.h_max()},
              {"h_min", mesh.h_min()},
              {"quasiuniformity", mesh.h_max() / mesh.h_min()}};
}

int cmd_mesh_gen(int cells, const std::string& gamma1, const std::string& out) {
  StudyConfig cfg;
  cfg.mesh = "builtin:" + std::to_string(cells);
  cfg.gamma1 = gamma1;
  const Mesh mesh = generate_structured_alfeld(cells, cfg.gamma1_sides());
  write_mesh(mesh, out);
  std::cout << mesh_info(mesh).dump(2) << "\n";
  return 0;
}

int cmd_solve_source(const StudyConfig& cfg, const std::string& dump_dir) {
  const Mesh mesh = load_mesh(cfg);
  const int threads = resolve_thread_count(cfg.threads);
  CondensedSolver solver(mesh, cfg.material, cfg.k,
                         {.quad_degree = cfg.quad_degree, .threads = threads,
                          .residual_tol = cfg.residual_tol});
  const ManufacturedCase& mc = find_case(cfg.case_name);
  const FieldSolution sol = solver.solve_source(mc.load(cfg.material));
  json summary;
  summary["mesh"] = mesh_info(mesh);
  summary["k"] = cfg.k;
  summary["condensed_dofs"] = solver.system().dofmap.n_dofs;
  summary["case"] = mc.name;
  summary["hybrid_residual"] = sol.max_local_residual;
  summary["jump_residual"] = sol.max_jump_residual;
  PostField post;
  const PostField* post_ptr = nullptr;
  if (cfg.postprocess) {
    post = postprocess_local(sol, solver.cache(), mesh, threads);
    post_ptr = &post;
  }
  const SourceErrors err = compute_source_errors(mesh, solver.cache(), sol,
                                                 post_ptr, mc, cfg.material,
                                                 cfg.quad_degree);
  summary["errors"] = {{"sigma_l2", err.sigma_l2}, {"rho_l2", err.rho_l2},
                       {"u_l2", err.u_l2},         {"Pu_1h", err.pu_1h},
                       {"post_h1", err.post_h1},   {"post_l2", err.post_l2}};
  summary["stability_ratio"] = err.stability_ratio;
  std::cout << summary.dump(2) << "\n";
  if (!dump_dir.empty()) {
    fs::create_directories(dump_dir);
    std::ofstream os(fs::path(dump_dir) / "coefficients.txt");
    os.precision(17);
    for (int e = 0; e < mesh.n_elements(); ++e) {
      os << "element " << e << "\nsigma " << sol.sigma[e].transpose() << "\nu "
         << sol.u[e].transpose() << "\nrho " << sol.rho[e].transpose() << "\n";
    }
    write_text(fs::path(dump_dir) / "config.echo", echo_config(cfg));
  }
  return 0;
}

int cmd_solve_eig(const StudyConfig& cfg, int num, const std::string& out_csv) {
  const Mesh mesh = load_mesh(cfg);
  const int threads = resolve_thread_count(cfg.threads);
  CondensedSolver solver(mesh, cfg.material, cfg.k,
                         {.quad_degree = cfg.quad_degree, .threads = threads,
                          .residual_tol = cfg.residual_tol});
  EigenOptions opt;
  opt.num = num > 0 ? num : cfg.num_eigs;
  opt.newton_rtol = cfg.newton_rtol;
  opt.use_derivative = cfg.newton_use_derivative;
  opt.dense_pencil_cap = cfg.dense_pencil_cap;
  opt.seed = cfg.seed;
  const auto results = solve_eigenproblem(solver, opt);
  std::ostringstream csv;
  csv << "index,lambda_tilde,lambda_h,newton_iters,residual,min_resolvent_sigma\n";
  csv.precision(12);
  for (const auto& r : results)
    csv << r.index << "," << r.lambda_tilde << "," << r.lambda_h << ","
        << r.iterations << "," << r.residual << "," << r.min_resolvent_sigma
        << "\n";
  std::cout << csv.str();
  if (!out_csv.empty()) write_text(out_csv, csv.str());
  for (const auto& r : results)
    if (r.tracking_overlap < 0.9)
      std::cerr << "warning: eigenpair " << r.index
                << " tracked with overlap " << r.tracking_overlap
                << " (cluster width " << r.cluster_width << ")\n";
  return 0;
}

int cmd_study(const std::string& kind, StudyConfig cfg, const std::string& out) {
  if (!out.empty()) cfg.out_dir = out;
  fs::create_directories(cfg.out_dir);
  write_text(fs::path(cfg.out_dir) / "config.echo", echo_config(cfg));
  StudyReport report;
  if (kind == "convergence")
    report = run_convergence_study(cfg);
  else if (kind == "locking")
    report = run_locking_study(cfg);
  else
    report = run_gap_study(cfg);
  const fs::path csv = fs::path(cfg.out_dir) / (kind + ".csv");
  write_study_csv(report, csv.string());
  json summary;
  summary["study"] = kind;
  summary["csv"] = csv.string();
  if (!std::isnan(report.lambda_ref)) summary["lambda_ref"] = report.lambda_ref;
  if (!std::isnan(report.lambda_ref_alt))
    summary["lambda_ref_alt"] = report.lambda_ref_alt;
  std::cout << summary.dump(2) << "\n";
  return 0;
}

int cmd_check(const StudyConfig& cfg) {
  const auto results = run_check_suite(cfg);
  json verdicts = json::array();
  bool all_pass = true;
  for (const auto& r : results) {
    verdicts.push_back(json{{"name", r.name},
                            {"pass", r.pass},
                            {"measured", r.measured},
                            {"threshold", r.threshold},
                            {"detail", r.detail}});
    all_pass = all_pass && r.pass;
  }
  std::cout << json{{"checks", verdicts}, {"all_pass", all_pass}}.dump(2) << "\n";
  return all_pass ? 0 : kExitCheck;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hybridized weakly-symmetric mixed elasticity solver"};
  app.require_subcommand(1);

  auto* mesh_cmd = app.add_subcommand("mesh", "mesh utilities");
  mesh_cmd->require_subcommand(1);
  auto* gen = mesh_cmd->add_subcommand("gen", "generate an Alfeld-split mesh");
  int cells = 2;
  std::string gamma1 = "none", mesh_out = "mesh.txt";
  gen->add_option("--cells", cells, "macro cells per side")->required();
  gen->add_option("--gamma1", gamma1, "traction sides (csv of left,right,bottom,top)");
  gen->add_option("--out", mesh_out, "output mesh file")->required();

  std::string config_path, dump_dir, out_dir, out_csv;
  int num_eigs = 0;

  auto* solve_cmd = app.add_subcommand("solve", "single solves");
  solve_cmd->require_subcommand(1);
  auto* src = solve_cmd->add_subcommand("source", "solve the source problem");
  src->add_option("--config", config_path, "config file");
  src->add_option("--dump", dump_dir, "write per-element coefficients here");
  auto* eig = solve_cmd->add_subcommand("eig", "solve the eigenproblem");
  eig->add_option("--config", config_path, "config file");
  eig->add_option("--num", num_eigs, "number of eigenpairs");
  eig->add_option("--out", out_csv, "CSV output path");

  auto* study_cmd = app.add_subcommand("study", "verification studies");
  study_cmd->require_subcommand(1);
  auto* conv = study_cmd->add_subcommand("convergence", "convergence study");
  auto* lock = study_cmd->add_subcommand("locking", "locking sweep");
  auto* gap = study_cmd->add_subcommand("gap", "initial-guess gap study");
  for (auto* s : {conv, lock, gap}) {
    s->add_option("--config", config_path, "config file");
    s->add_option("--out", out_dir, "output directory");
  }

  auto* check_cmd = app.add_subcommand("check", "run the invariant suite");
  check_cmd->add_option("--config", config_path, "config file");

  CLI11_PARSE(app, argc, argv);

  try {
    StudyConfig cfg;
    try {
      cfg = load_config(config_path);
    } catch (const ConfigError& e) {
      std::cerr << "config error: " << e.what() << "\n";
      return kExitConfig;
    }
    if (gen->parsed()) return cmd_mesh_gen(cells, gamma1, mesh_out);
    if (src->parsed()) return cmd_solve_source(cfg, dump_dir);
    if (eig->parsed()) return cmd_solve_eig(cfg, num_eigs, out_csv);
    if (conv->parsed()) return cmd_study("convergence", cfg, out_dir);
    if (lock->parsed()) return cmd_study("locking", cfg, out_dir);
    if (gap->parsed()) return cmd_study("gap", cfg, out_dir);
    if (check_cmd->parsed()) return cmd_check(cfg);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitSolver;
  }
  return 0;
}
