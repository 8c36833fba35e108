// Copyright (c) the wsym contributors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>
#include <random>

#include "wsym/hybrid_system.hpp"
#include "wsym/source_driver.hpp"

using namespace wsym;

TEST_CASE("multiplier dof map dimension") {
  // cells=1, k=1, all-Gamma_0: 7 interior faces x 6 modes = 42
  const Mesh mesh = generate_structured_alfeld(1);
  const auto map = MultiplierDofMap::build(mesh, 1);
  CHECK(map.n_dofs == 42);
  CHECK(map.modes_per_face == 6);
}

TEST_CASE("a_h is SPD and M0 is PSD") {
  const MaterialParams p{1.0, 1.0, 1.0};
  for (int cells : {1, 2}) {
    const Mesh mesh = generate_structured_alfeld(cells);
    const LocalSolverCache cache = build_local_cache(mesh, 1, p);
    const CondensedSystem sys = assemble_condensed(cache, mesh);
    const Eigen::MatrixXd a(sys.a_h);
    CHECK((a - a.transpose()).norm() <= 1e-12 * a.norm());
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    CHECK(llt.info() == Eigen::Success);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(sys.m0));
    CHECK(es.eigenvalues().minCoeff() > -1e-12 * es.eigenvalues().maxCoeff());
  }
}

TEST_CASE("zero load gives zero b_h and zero solution") {
  const Mesh mesh = generate_structured_alfeld(1);
  const MaterialParams p{1.0, 1.0, 1.0};
  CondensedSolver solver(mesh, p, 1);
  const LoadFn zero = [](const Eigen::Vector2d&) { return Eigen::Vector2d::Zero(); };
  const Eigen::VectorXd b =
      assemble_load(solver.cache(), mesh, solver.system().dofmap, zero);
  CHECK(b.cwiseAbs().maxCoeff() == 0.0);
  const FieldSolution sol = solver.solve_source(zero);
  for (int e = 0; e < mesh.n_elements(); ++e) {
    CHECK(sol.sigma[e].cwiseAbs().maxCoeff() <= 1e-14);
    CHECK(sol.u[e].cwiseAbs().maxCoeff() <= 1e-14);
    CHECK(sol.rho[e].cwiseAbs().maxCoeff() <= 1e-14);
  }
}

TEST_CASE("B(0) equals M0 bit for bit; B(lambda) symmetric and close at small lambda") {
  const Mesh mesh = generate_structured_alfeld(2);
  const MaterialParams p{1.0, 1.0, 1.0};
  const LocalSolverCache cache = build_local_cache(mesh, 1, p);
  const CondensedSystem sys = assemble_condensed(cache, mesh);
  const Eigen::SparseMatrix<double> b0 =
      assemble_mass_lambda(cache, mesh, sys.dofmap, 0.0);
  const Eigen::MatrixXd b0d(b0), m0d(sys.m0);
  CHECK((b0d - m0d).cwiseAbs().maxCoeff() == 0.0);

  double sig = 0;
  const Eigen::SparseMatrix<double> bl =
      assemble_mass_lambda(cache, mesh, sys.dofmap, 1e-3, &sig);
  CHECK(sig > 0.99);
  const Eigen::MatrixXd bld(bl);
  CHECK((bld - bld.transpose()).norm() <= 1e-11 * bld.norm());
  // || B(lambda) - M0 || = O(lambda h^2): tiny at lambda = 1e-3
  CHECK((bld - m0d).norm() / m0d.norm() < 1e-3);
}

TEST_CASE("full KKT size and hybrid equivalence") {
  const MaterialParams p{1.0, 1.0, 1.0};
  const ManufacturedCase& mc = find_case("smooth_sin");
  for (int cells : {1, 2}) {
    const Mesh mesh = generate_structured_alfeld(cells);
    CondensedSolver solver(mesh, p, 1);
    const FullKkt kkt = assemble_full_kkt(solver.cache(), mesh, solver.system().dofmap);
    if (cells == 1) CHECK(kkt.n == 258);  // 6 (24+6+6) + 42
    const LoadFn f = mc.load(p);
    const FieldSolution condensed = solver.solve_source(f);
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu(kkt.mat);
    REQUIRE(lu.info() == Eigen::Success);
    const Eigen::VectorXd x = lu.solve(kkt_rhs_source(solver.cache(), mesh, kkt, f));
    const FieldSolution direct = unpack_kkt_solution(solver.cache(), mesh, kkt, x);
    double num = 0, den = 0;
    for (int e = 0; e < mesh.n_elements(); ++e) {
      num += (condensed.sigma[e] - direct.sigma[e]).squaredNorm() +
             (condensed.u[e] - direct.u[e]).squaredNorm() +
             (condensed.rho[e] - direct.rho[e]).squaredNorm();
      den += condensed.sigma[e].squaredNorm() + condensed.u[e].squaredNorm() +
             condensed.rho[e].squaredNorm();
    }
    num += (condensed.gamma - direct.gamma).squaredNorm();
    den += condensed.gamma.squaredNorm();
    CHECK(std::sqrt(num / den) <= 1e-10);
    // the KKT matrix applied to the condensed-path solution reproduces the rhs
    Eigen::VectorXd lifted(kkt.n);
    for (int e = 0; e < mesh.n_elements(); ++e) {
      const int NS = condensed.sigma[e].size(), NW = condensed.u[e].size(),
                NR = condensed.rho[e].size();
      lifted.segment(kkt.elem_offset[e], NS) = condensed.sigma[e];
      lifted.segment(kkt.elem_offset[e] + NS, NW) = condensed.u[e];
      lifted.segment(kkt.elem_offset[e] + NS + NW, NR) = condensed.rho[e];
    }
    lifted.tail(solver.system().dofmap.n_dofs) = condensed.gamma;
    const Eigen::VectorXd resid =
        kkt.mat * lifted - kkt_rhs_source(solver.cache(), mesh, kkt, f);
    CHECK(resid.cwiseAbs().maxCoeff() <= 1e-10 * (1.0 + lifted.norm()));
  }
}

TEST_CASE("recovered solution satisfies weak symmetry and jump moments") {
  const MaterialParams p{1.0, 1.0, 1.0};
  const ManufacturedCase& mc = find_case("smooth_sin");
  // include a traction side so the Gamma_1 moments are exercised
  const Mesh mesh = generate_structured_alfeld(2, kSideTop);
  CondensedSolver solver(mesh, p, 1);
  const FieldSolution sol = solver.solve_source(mc.load(p));
  CHECK(sol.max_local_residual <= 1e-10);
  CHECK(sol.max_jump_residual <= 1e-10);
}

TEST_CASE("Q2 boundedness constant is stable across refinement") {
  // ||Q2 mu||^2 <= C sum_K h_K ||mu||^2_{dK} sampled over random mu
  const MaterialParams p{1.0, 1.0, 1.0};
  std::mt19937_64 rng(5);
  std::normal_distribution<double> gauss;
  double clo = 1e300, chi = 0;
  for (int cells : {1, 2, 4}) {
    const Mesh mesh = generate_structured_alfeld(cells);
    const LocalSolverCache cache = build_local_cache(mesh, 1, p);
    const auto map = MultiplierDofMap::build(mesh, 1);
    double cmax = 0;
    for (int trial = 0; trial < 8; ++trial) {
      Eigen::VectorXd mu(map.n_dofs);
      for (int i = 0; i < mu.size(); ++i) mu[i] = gauss(rng);
      double lhs = 0, rhs = 0;
      for (int e = 0; e < mesh.n_elements(); ++e) {
        const auto& ec = cache.elements[e];
        Eigen::VectorXd gl(ec.n_loc());
        int c = 0;
        for (int lf : ec.blocks.mult_faces) {
          const int off = map.face_offset[mesh.element_to_faces[e][lf]];
          for (int m = 0; m < map.modes_per_face; ++m) gl[c++] = mu[off + m];
        }
        lhs += ec.geom.det * (ec.Q2 * gl).squaredNorm();
        rhs += ec.geom.diameter * gl.squaredNorm();
      }
      cmax = std::max(cmax, lhs / rhs);
    }
    clo = std::min(clo, cmax);
    chi = std::max(chi, cmax);
  }
  CHECK(chi / clo <= 3.0);
}

TEST_CASE("condensed assembly deterministic across thread counts") {
  const Mesh mesh = generate_structured_alfeld(2);
  const MaterialParams p{1.0, 1.0, 1.0};
  const LocalSolverCache c1 = build_local_cache(mesh, 1, p, -1, 1);
  const LocalSolverCache c4 = build_local_cache(mesh, 1, p, -1, 4);
  const CondensedSystem s1 = assemble_condensed(c1, mesh, 1);
  const CondensedSystem s4 = assemble_condensed(c4, mesh, 4);
  const Eigen::MatrixXd a1(s1.a_h), a4(s4.a_h);
  CHECK((a1 - a4).cwiseAbs().maxCoeff() == 0.0);
}
