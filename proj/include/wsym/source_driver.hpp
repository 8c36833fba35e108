// Copyright (c) the wsym contributors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <memory>
#include <string>

#include "wsym/hybrid_system.hpp"

namespace wsym {

/// Closed-form verification case. sigma and f carry the material dependence;
/// f = -rho_S^{-1} div sigma by construction.
struct ManufacturedCase {
  std::string name;
  bool divergence_free = false;
  unsigned gamma1_sides = 0;  // boundary split the case is compatible with
  int min_k = 1;              // polynomial cases need the matching order
  std::function<Eigen::Vector2d(const Eigen::Vector2d&)> u;
  std::function<Eigen::Matrix2d(const Eigen::Vector2d&)> grad_u;
  std::function<Eigen::Vector2d(const Eigen::Vector2d&, const MaterialParams&)> f;

  Eigen::Matrix2d sigma(const Eigen::Vector2d& x, const MaterialParams& p) const;
  Eigen::Matrix2d rotation(const Eigen::Vector2d& x) const;  // skw grad u
  LoadFn load(const MaterialParams& p) const;
};

const std::vector<ManufacturedCase>& manufactured_catalog();
const ManufacturedCase& find_case(const std::string& name);

/// Condensed-path solver: local cache + a_h factorization, reused across
/// loads (operator path, eigen solves).
class CondensedSolver {
 public:
  struct Options {
    int quad_degree = -1;
    int threads = 1;
    double residual_tol = 1e-10;
  };

  CondensedSolver(const Mesh& mesh, const MaterialParams& params, int k,
                  Options opt);
  CondensedSolver(const Mesh& mesh, const MaterialParams& params, int k)
      : CondensedSolver(mesh, params, k, Options{-1, 1, 1e-10}) {}

  FieldSolution solve_source(const LoadFn& f) const;
  Eigen::VectorXd solve_condensed(const Eigen::VectorXd& b) const;

  const Mesh& mesh() const { return mesh_; }
  const MaterialParams& params() const { return params_; }
  const LocalSolverCache& cache() const { return cache_; }
  const CondensedSystem& system() const { return sys_; }
  const Eigen::SimplicialLLT<Eigen::SparseMatrix<double>>& llt() const {
    return *llt_;
  }
  int k() const { return k_; }
  int threads() const { return threads_; }
  double residual_tol() const { return residual_tol_; }

 private:
  const Mesh& mesh_;
  MaterialParams params_;
  int k_;
  int threads_;
  double residual_tol_ = 1e-10;
  LocalSolverCache cache_;
  CondensedSystem sys_;
  std::unique_ptr<Eigen::SimplicialLLT<Eigen::SparseMatrix<double>>> llt_;
};

/// One-call source solve (Gamma_0 must be nonempty; the mesh validator
/// guarantees that).
FieldSolution solve_source(const Mesh& mesh, const MaterialParams& params, int k,
                           const LoadFn& f, int threads = 1);

}  // namespace wsym
