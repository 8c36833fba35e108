// Copyright (c) the wsym contributors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <memory>
#include <vector>

#include "wsym/source_driver.hpp"

namespace wsym {

/// Symmetric-definite reduction of the condensed pencil a_h g = theta B g
/// (a_h SPD, B PSD): Cholesky a_h = L L^t, then the largest eigenvalues
/// nu = 1/theta of L^{-1} B L^{-t}. Dense below `dense_cap`, Lanczos with
/// full reorthogonalization above it.
class PencilSolver {
 public:
  PencilSolver(const Eigen::SparseMatrix<double>& a, int dense_cap,
               std::uint64_t seed);

  struct Eigs {
    Eigen::VectorXd thetas;   // ascending; theta = 1/nu
    Eigen::MatrixXd gammas;   // columns, B-orthonormal
  };

  /// The `count` smallest finite generalized eigenvalues. Throws if count
  /// exceeds the number of finite eigenvalues of the pencil.
  Eigs smallest(const Eigen::SparseMatrix<double>& b, int count) const;

  int size() const { return n_; }
  bool dense() const { return dense_; }

 private:
  int n_ = 0;
  bool dense_ = true;
  std::uint64_t seed_ = 0;
  Eigen::MatrixXd dense_l_;
  std::unique_ptr<Eigen::SimplicialLLT<Eigen::SparseMatrix<double>>> sparse_;
};

struct EigenOptions {
  int num = 1;
  double newton_rtol = 1e-10;
  int max_iterations = 50;
  bool use_derivative = true;  // secant fallback otherwise
  int dense_pencil_cap = 1500;
  std::uint64_t seed = 20240801u;
  double cluster_rtol = 1e-6;
  double overlap_warn = 0.9;
};

struct EigenResult {
  int index = 0;
  double lambda_tilde = 0.0;  // linear condensed eigenvalue (initial guess)
  double lambda_h = 0.0;      // converged mixed eigenvalue
  Eigen::VectorXd gamma;      // M0-normalized multiplier eigenvector
  FieldSolution fields;
  int iterations = 0;
  double residual = 0.0;      // |theta(lambda)-lambda| / lambda at exit
  double min_resolvent_sigma = 1.0;
  double tracking_overlap = 1.0;
  bool cluster_flag = false;
  double cluster_width = 0.0;
};

struct LinearEigenPair {
  double lambda_tilde = 0.0;
  Eigen::VectorXd gamma;  // M0-orthonormal
};

/// The m smallest eigenpairs of a_h g = lambda~ M0 g.
std::vector<LinearEigenPair> solve_linear_condensed(const CondensedSolver& solver,
                                                    const PencilSolver& pencil,
                                                    int count);

/// Newton on g(lambda) = theta_j(lambda) - lambda, seeded at (lambda~, gamma~).
EigenResult solve_nonlinear(const CondensedSolver& solver,
                            const PencilSolver& pencil, int index,
                            const LinearEigenPair& init, const EigenOptions& opt);

/// Linear initial guesses + Newton for the first `num` eigenpairs.
std::vector<EigenResult> solve_eigenproblem(const CondensedSolver& solver,
                                            const EigenOptions& opt);

struct OperatorPath {
  Eigen::MatrixXd t_matrix;   // T_h on the W^h coefficient basis
  Eigen::VectorXd mu;         // eigenvalues of T_h, descending
  Eigen::VectorXd lambdas;    // 1/mu, ascending
  double asymmetry = 0.0;     // rho-weighted self-adjointness residual
};

/// Dense discrete solution operator: column i is the displacement of the
/// source solve with f = i-th W^h basis function. Throws if dim W^h exceeds
/// the cap.
OperatorPath operator_path(const CondensedSolver& solver, int cap = 2000);

}  // namespace wsym
