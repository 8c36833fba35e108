// Copyright (c) the wsym contributors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Sparse>
#include <functional>
#include <optional>
#include <vector>

#include "wsym/fields.hpp"
#include "wsym/local_solvers.hpp"
#include "wsym/mesh.hpp"

namespace wsym {

using LoadFn = std::function<Eigen::Vector2d(const Eigen::Vector2d&)>;

/// Global multiplier numbering: per non-Gamma_0 face, 2(k+2) modes
/// (component-major), faces in their global (lexicographic) order.
struct MultiplierDofMap {
  int k = 1;
  int modes_per_face = 0;  // 2(k+2)
  int n_dofs = 0;
  std::vector<int> face_offset;  // -1 on Gamma_0 faces

  static MultiplierDofMap build(const Mesh& mesh, int k);
};

/// Condensed operators on the multiplier space. a_h is symmetric positive
/// definite when Gamma_0 is nonempty; m0 = B(0) is the rho_S-weighted mass
/// (Q2 mu_i, rho_S Q2 mu_j).
struct CondensedSystem {
  MultiplierDofMap dofmap;
  Eigen::SparseMatrix<double> a_h;
  Eigen::SparseMatrix<double> m0;
};

CondensedSystem assemble_condensed(const LocalSolverCache& cache, const Mesh& mesh,
                                   int threads = 1);

/// b_h(mu) = (rho_S f, Q2 mu)
Eigen::VectorXd assemble_load(const LocalSolverCache& cache, const Mesh& mesh,
                              const MultiplierDofMap& dofmap, const LoadFn& f,
                              int threads = 1);

/// B(lambda)(mu, nu) = ((I - lambda Q2L)^{-1} Q2 mu, rho_S Q2 nu).
/// B(0) reproduces m0 bit-for-bit. min_resolvent_sigma, when non-null,
/// receives the smallest local resolvent singular value.
Eigen::SparseMatrix<double> assemble_mass_lambda(const LocalSolverCache& cache,
                                                 const Mesh& mesh,
                                                 const MultiplierDofMap& dofmap,
                                                 double lambda,
                                                 double* min_resolvent_sigma = nullptr,
                                                 int threads = 1);

/// d/dlambda of B(lambda) as a quadratic form at gamma (Newton derivative).
double mass_lambda_derivative_form(const LocalSolverCache& cache, const Mesh& mesh,
                                   const MultiplierDofMap& dofmap, double lambda,
                                   const Eigen::VectorXd& gamma);

struct RecoverSource {
  const LoadFn* f;
};
struct RecoverEigen {
  double lambda;
};

/// Element fields from a condensed solution. Source mode:
///   sigma = Q1 g + Q1L f, u = Q2 g + Q2L f, rho = Q3 g + Q3L f;
/// eigen mode: u = (I-lambda Q2L)^{-1} Q2 g, sigma = Q1 g + lambda Q1L u,
///   rho = Q3 g + lambda Q3L u.
/// Verifies the four hybrid equations; throws an internal-consistency error
/// when a scaled residual exceeds residual_tol.
FieldSolution recover_fields(const LocalSolverCache& cache, const Mesh& mesh,
                             const MultiplierDofMap& dofmap,
                             const Eigen::VectorXd& gamma,
                             const std::optional<RecoverSource>& source,
                             const std::optional<RecoverEigen>& eigen,
                             int threads = 1, double residual_tol = 1e-9);

/// One sparse symmetric-structured matrix over the broken unknowns
/// (sigma_e, u_e, rho_e)_e plus gamma; the direct-solve verification oracle.
struct FullKkt {
  Eigen::SparseMatrix<double> mat;
  std::vector<int> elem_offset;  // start of each element block
  int gamma_offset = 0;
  int n = 0;
  int k = 1;
};

/// Throws when the unknown count exceeds `cap` (the oracle exists for
/// verification at desk scale, not production).
FullKkt assemble_full_kkt(const LocalSolverCache& cache, const Mesh& mesh,
                          const MultiplierDofMap& dofmap, int cap = 20000);

Eigen::VectorXd kkt_rhs_source(const LocalSolverCache& cache, const Mesh& mesh,
                               const FullKkt& kkt, const LoadFn& f);

/// Unpacks a full-KKT solution vector into per-element fields.
FieldSolution unpack_kkt_solution(const LocalSolverCache& cache, const Mesh& mesh,
                                  const FullKkt& kkt, const Eigen::VectorXd& x);

/// Per-element projection coefficients of a load: c_a = (f, w_a)_K / det.
Eigen::VectorXd project_load_on_element(const ElementCache& entry,
                                        const FeTables& tables, const LoadFn& f);

}  // namespace wsym
