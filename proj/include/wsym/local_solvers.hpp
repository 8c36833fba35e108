// Copyright (c) the wsym contributors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>
#include <Eigen/LU>
#include <vector>

#include "wsym/basis.hpp"
#include "wsym/material.hpp"
#include "wsym/mesh.hpp"

namespace wsym {

/// Element block operators of the hybridized saddle system:
///   (A sigma, ups)      compliance
///   (B sigma, w)   = (w, div sigma)
///   (C sigma, eta) = (sigma, eta) against the skew basis
///   (D mu)_i       = <mu, sigma_i n> over the element's non-Gamma_0 faces
struct LocalBlocks {
  Eigen::MatrixXd A;  // NS x NS
  Eigen::MatrixXd B;  // NW x NS
  Eigen::MatrixXd C;  // NR x NS
  Eigen::MatrixXd D;  // NS x n_loc
  std::vector<int> mult_faces;  // local faces carrying multiplier columns
};

/// Solved local maps for one element. Column j of Q1/Q2/Q3 answers the j-th
/// local multiplier basis function; column a of Q1L/Q2L/Q3L answers the load
/// f = w_a. Q2L is self-adjoint on the element (symmetric matrix here).
///
/// The stress columns Q1/Q1L are stored in the Cholesky-scaled variable
/// s' = kron(R, I) s with compA = R^t R. Their raw L2 size grows like
/// lambda_S while the compliance energy stays bounded, so the scaled
/// variable keeps every magnitude O(1) across the incompressibility sweep:
/// a_h = det Q1'^t Q1' and recovered combinations are formed before
/// unpriming. unprime_stress maps back to physical stress coefficients.
struct ElementCache {
  ElementGeometry geom;
  MaterialParams params;
  LocalBlocks blocks;
  Eigen::Matrix4d stress_rinv = Eigen::Matrix4d::Identity();
  Eigen::MatrixXd Q1, Q2, Q3;
  Eigen::MatrixXd Q1L, Q2L, Q3L;
  std::vector<int> global_dofs;  // global multiplier dof per local column
  double solve_residual = 0.0;   // defining-system residual, relative

  int n_loc() const { return static_cast<int>(Q1.cols()); }
  Eigen::MatrixXd unprime_stress(const Eigen::MatrixXd& primed) const;
};

struct LocalSolverCache {
  int k = 1;
  int quad_degree = 0;
  std::vector<ElementCache> elements;
};

LocalBlocks build_local_blocks(const Mesh& mesh, int elem, const FeTables& tables,
                               const MaterialParams& params);

/// Factorizes the local saddle matrix [[A,B^t,C^t],[rho^-1 B,0,0],[C,0,0]]
/// (rows 2-3 scaled symmetric) and solves for all Q and Q^L columns.
/// Throws on a singular local matrix, naming the element and pivot.
ElementCache factorize_local(const Mesh& mesh, int elem, LocalBlocks blocks,
                             const FeTables& tables, const MaterialParams& params);

/// Builds the whole cache; parallel over elements, deterministic.
LocalSolverCache build_local_cache(const Mesh& mesh, int k,
                                   const MaterialParams& params,
                                   int quad_degree = -1, int threads = 1);

/// Piecewise-constant material: one record per element.
LocalSolverCache build_local_cache(const Mesh& mesh, int k,
                                   const std::vector<MaterialParams>& params,
                                   int quad_degree = -1, int threads = 1);

/// (I - lambda Q2L)^{-1} on one element's displacement coefficients.
class LocalResolvent {
 public:
  LocalResolvent(const ElementCache& entry, double lambda, int elem_index);

  Eigen::VectorXd apply(const Eigen::VectorXd& v) const;
  Eigen::MatrixXd apply(const Eigen::MatrixXd& m) const;
  double sigma_min() const { return sigma_min_; }
  bool is_identity() const { return identity_; }

 private:
  bool identity_ = true;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
  double sigma_min_ = 1.0;
};

/// Spectral norm of Q2L (scale-invariant diagnostic; the local lemma bound
/// gives norm <= C h_K^2).
double q2l_operator_norm(const ElementCache& entry);

}  // namespace wsym
