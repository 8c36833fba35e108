// Copyright (c) the wsym contributors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "wsym/config.hpp"
#include "wsym/eig_driver.hpp"
#include "wsym/fields.hpp"
#include "wsym/postprocess.hpp"
#include "wsym/source_driver.hpp"

namespace wsym {

using VecFn = std::function<Eigen::Vector2d(const Eigen::Vector2d&)>;
using MatFn = std::function<Eigen::Matrix2d(const Eigen::Vector2d&)>;

/// ||u||_{1,h}^2 = sum_K |grad u|^2 + sum_{interior + Gamma_0 faces}
/// h_F^{-1} ||[[u]]||^2 (the trace itself on Gamma_0; Gamma_1 excluded).
double discrete_h1_norm(const std::vector<Eigen::VectorXd>& u, const Mesh& mesh,
                        int k, int quad_degree = -1);

/// Elementwise L2 projections onto W^h and A^h.
std::vector<Eigen::VectorXd> l2_projection_W(const VecFn& u, const Mesh& mesh,
                                             int k, int quad_degree = -1);
std::vector<Eigen::VectorXd> l2_projection_A(const MatFn& rho, const Mesh& mesh,
                                             int k, int quad_degree = -1);

/// Tensorial BDM interpolant: per element and row, edge moments against
/// P^{k+1}(F) and interior moments against N^k; satisfies div Pi_h tau =
/// P div tau.
std::vector<Eigen::VectorXd> bdm_interpolant(const MatFn& tau, const Mesh& mesh,
                                             int k, int quad_degree = -1);

/// || div Pi_h tau - P div tau ||_0 over the mesh.
double commuting_residual(const std::vector<Eigen::VectorXd>& interp,
                          const VecFn& div_tau, const Mesh& mesh, int k,
                          int quad_degree = -1);

struct SourceErrors {
  double sigma_l2 = 0, rho_l2 = 0, u_l2 = 0, pu_1h = 0;
  double post_h1 = std::numeric_limits<double>::quiet_NaN();
  double post_l2 = std::numeric_limits<double>::quiet_NaN();
  double stability_ratio = 0;  // ||u_h||_{1,h}^2 / ||A sigma_h||_0^2
};

SourceErrors compute_source_errors(const Mesh& mesh, const LocalSolverCache& cache,
                                   const FieldSolution& sol, const PostField* post,
                                   const ManufacturedCase& mc,
                                   const MaterialParams& params,
                                   int quad_degree = -1);

/// Uniform-bin point location (deterministic tie-breaking).
class MeshLocator {
 public:
  explicit MeshLocator(const Mesh& mesh);
  /// element containing x (barycentric tolerance 1e-10); -1 if outside
  int locate(const Eigen::Vector2d& x) const;

 private:
  const Mesh& mesh_;
  int nx_ = 1, ny_ = 1;
  Eigen::Vector2d lo_, hi_;
  std::vector<std::vector<int>> bins_;
};

/// Value and Jacobian of a PostField at a physical point.
Eigen::Vector2d eval_post(const Mesh& mesh, const PostField& post,
                          const MeshLocator& loc, const Eigen::Vector2d& x);
Eigen::Matrix2d eval_post_gradient(const Mesh& mesh, const PostField& post,
                                   const MeshLocator& loc, const Eigen::Vector2d& x);

struct EigenspaceDistances {
  double h1 = 0, l2 = 0;
};

/// Subspace gaps, in broken H1 seminorm and L2, between coarse and fine
/// postprocessed eigenspaces; integrals on the coarse quadrature, fine
/// fields evaluated by point location.
EigenspaceDistances postprocessed_eigenspace_distance(
    const Mesh& coarse_mesh, const std::vector<PostField>& coarse,
    const Mesh& fine_mesh, const std::vector<PostField>& fine, int quad_degree);

/// lambda_ref = lam[n-1] + (lam[n-1]-lam[n-2]) / (2^order - 1), from the
/// three finest levels (assumes h halving between consecutive entries).
double richardson_reference(const std::vector<double>& lambdas, double order);

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct ErrorRow {
  int level = 0;
  double h = kNaN;
  int n_elem = 0;
  int n_dofs = 0;
  double err_sigma_l2 = kNaN, err_rho_l2 = kNaN, err_u_l2 = kNaN, err_pu_1h = kNaN;
  double err_post_h1 = kNaN, err_post_l2 = kNaN;
  double err_lambda = kNaN;
  double lambda_h = kNaN, lambda_tilde = kNaN;
  double gap = kNaN;
  int newton_iters = 0;
  double newton_residual = kNaN, min_resolvent_sigma = kNaN;
  double stability_ratio = kNaN;
  double lambda_s = kNaN;  // locking sweep value
};

struct StudyReport {
  std::string study;  // convergence | locking | gap
  std::vector<ErrorRow> rows;
  double lambda_ref = kNaN;             // eigen studies
  double lambda_ref_alt = kNaN;         // Richardson from the previous window
  std::vector<std::string> notes;

  /// log2(e_i / e_{i+1}) per consecutive pair; NaN when either error < 1e-13
  /// ("exact") or missing.
  std::vector<double> orders_of(const std::function<double(const ErrorRow&)>& get)
      const;
};

StudyReport run_convergence_study(const StudyConfig& cfg);
StudyReport run_locking_study(const StudyConfig& cfg);
StudyReport run_gap_study(const StudyConfig& cfg);

/// CSV with the study schema; order columns follow the error columns.
void write_study_csv(const StudyReport& report, const std::string& path);

}  // namespace wsym
