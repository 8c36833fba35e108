// Copyright (c) the wsym contributors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <random>

#include "wsym/analysis.hpp"

using namespace wsym;

TEST_CASE("discrete H1 norm of a global constant (all-Gamma_0, one cell)") {
  // gradient part 0; each of the 4 boundary faces contributes |c|^2
  const Mesh mesh = generate_structured_alfeld(1);
  const int Dk = poly_space_dim(1);
  std::vector<Eigen::VectorXd> u(mesh.n_elements(),
                                 Eigen::VectorXd::Zero(2 * Dk));
  const Eigen::Vector2d c(0.3, -0.4);
  for (auto& ue : u) {
    ue[0] = c[0] / std::sqrt(2.0);  // constant basis function is sqrt(2)
    ue[Dk] = c[1] / std::sqrt(2.0);
  }
  const double norm = discrete_h1_norm(u, mesh, 1);
  CHECK(norm * norm == doctest::Approx(4.0 * c.squaredNorm()).epsilon(1e-12));
}

TEST_CASE("discrete H1 norm: continuous piecewise polynomial has no jumps") {
  // project a global linear field (degree <= k): jumps vanish and the norm
  // reduces to the broken H1 seminorm plus the Gamma_0 trace terms
  const Mesh mesh = generate_structured_alfeld(2);
  const VecFn u = [](const Eigen::Vector2d& x) {
    return Eigen::Vector2d(2 * x[0] - x[1], 0.5 * x[1]);
  };
  auto coeffs = l2_projection_W(u, mesh, 1);
  // subtract the Gamma_0 face contribution by tagging everything traction:
  // instead verify homogeneity and the interior-jump-free property via
  // comparing against the exact |grad u| and trace integrals
  const double norm = discrete_h1_norm(coeffs, mesh, 1);
  // grad part: |grad u|_F^2 = 4 + 1 + 0.25 over the unit square
  const double grad2 = 5.25;
  // Gamma_0 trace part: sum over boundary of |u|^2 weighted by 1/h_F
  double trace2 = 0;
  const auto& er = edge_rule(10);
  for (const auto& f : mesh.faces) {
    if (f.tag != FaceTag::Dirichlet) continue;
    const Eigen::Vector2d a = mesh.vertices[f.v0], b = mesh.vertices[f.v1];
    for (int q = 0; q < er.size(); ++q) {
      const Eigen::Vector2d x = a + er.points[q] * (b - a);
      trace2 += er.weights[q] * u(x).squaredNorm();  // 1/h_F cancels arclength
    }
  }
  CHECK(norm * norm == doctest::Approx(grad2 + trace2).epsilon(1e-10));
  // homogeneity
  for (auto& ce : coeffs) ce *= -2.5;
  CHECK(discrete_h1_norm(coeffs, mesh, 1) ==
        doctest::Approx(2.5 * norm).epsilon(1e-12));
}

TEST_CASE("norms satisfy the triangle inequality on random fields") {
  const Mesh mesh = generate_structured_alfeld(2);
  std::mt19937_64 rng(17);
  std::normal_distribution<double> gauss;
  const int Dk = poly_space_dim(1);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<Eigen::VectorXd> a(mesh.n_elements()), b(mesh.n_elements()),
        s(mesh.n_elements());
    for (int e = 0; e < mesh.n_elements(); ++e) {
      a[e].resize(2 * Dk);
      b[e].resize(2 * Dk);
      for (int i = 0; i < 2 * Dk; ++i) {
        a[e][i] = gauss(rng);
        b[e][i] = gauss(rng);
      }
      s[e] = a[e] + b[e];
    }
    const double na = discrete_h1_norm(a, mesh, 1);
    const double nb = discrete_h1_norm(b, mesh, 1);
    const double ns = discrete_h1_norm(s, mesh, 1);
    CHECK(ns <= na + nb + 1e-12);
  }
}

TEST_CASE("L2 projections reproduce their own spaces and converge at k+1") {
  const VecFn linear = [](const Eigen::Vector2d& x) {
    return Eigen::Vector2d(1 + 2 * x[0] - x[1], -3 + x[1]);
  };
  const Mesh mesh = generate_structured_alfeld(2);
  auto coeffs = l2_projection_W(linear, mesh, 1);
  const FeTables& T = fe_tables(1, default_quad_degree(1));
  for (int e = 0; e < mesh.n_elements(); ++e) {
    const ElementGeometry g = element_geometry(mesh, e);
    for (int q = 0; q < T.tri->size(); ++q) {
      const Eigen::Vector2d x = g.jac * T.tri->points.col(q) + g.shift;
      CHECK((vector_value(coeffs[e], T.Wk.col(q)) - linear(x)).norm() <= 1e-13);
    }
  }
  // smooth field: error decreases at order k+1 = 2
  const VecFn smooth = [](const Eigen::Vector2d& x) {
    return Eigen::Vector2d(std::sin(3 * x[0]) * x[1], std::cos(2 * x[1]));
  };
  double prev = -1;
  for (int cells : {2, 4, 8}) {
    const Mesh m = generate_structured_alfeld(cells);
    auto c = l2_projection_W(smooth, m, 1);
    const FeTables& TT = fe_tables(1, default_quad_degree(1));
    double err2 = 0;
    for (int e = 0; e < m.n_elements(); ++e) {
      const ElementGeometry g = element_geometry(m, e);
      for (int q = 0; q < TT.tri->size(); ++q) {
        const Eigen::Vector2d x = g.jac * TT.tri->points.col(q) + g.shift;
        err2 += g.det * TT.tri->weights[q] *
                (vector_value(c[e], TT.Wk.col(q)) - smooth(x)).squaredNorm();
      }
    }
    const double err = std::sqrt(err2);
    if (prev > 0) CHECK(std::log2(prev / err) > 1.7);
    prev = err;
  }
}

TEST_CASE("rotation projection annihilates the symmetric part") {
  const MatFn rho = [](const Eigen::Vector2d& x) {
    Eigen::Matrix2d m;
    m << 0, 1 + x[0], -(1 + x[0]), 0;
    return m;
  };
  const Mesh mesh = generate_structured_alfeld(1);
  auto coeffs = l2_projection_A(rho, mesh, 1);
  const FeTables& T = fe_tables(1, default_quad_degree(1));
  for (int e = 0; e < mesh.n_elements(); ++e) {
    const ElementGeometry g = element_geometry(mesh, e);
    for (int q = 0; q < T.tri->size(); ++q) {
      const Eigen::Vector2d x = g.jac * T.tri->points.col(q) + g.shift;
      const Eigen::Matrix2d val = rotation_value(coeffs[e], T.Vk1.col(q));
      CHECK((val - rho(x)).norm() <= 1e-13);  // rho is already in A^h
    }
  }
}

TEST_CASE("BDM interpolation reproduces matrix P^{k+1} and commutes") {
  const Mesh mesh = generate_structured_alfeld(1);
  const MatFn tau = [](const Eigen::Vector2d& x) {
    Eigen::Matrix2d m;
    m << x[0] * x[0], x[0] * x[1], x[0] * x[1], x[1] * x[1];
    return m;
  };
  auto interp = bdm_interpolant(tau, mesh, 1);
  const FeTables& T = fe_tables(1, default_quad_degree(1));
  for (int e = 0; e < mesh.n_elements(); ++e) {
    const ElementGeometry g = element_geometry(mesh, e);
    for (int q = 0; q < T.tri->size(); ++q) {
      const Eigen::Vector2d x = g.jac * T.tri->points.col(q) + g.shift;
      CHECK((stress_value(interp[e], T.Vk1.col(q)) - tau(x)).norm() <= 1e-12);
    }
  }
  // div tau = (3x, 3y) lies in W^h, so the commuting residual is exact zero
  const VecFn divtau = [](const Eigen::Vector2d& x) {
    return Eigen::Vector2d(3 * x[0], 3 * x[1]);
  };
  CHECK(commuting_residual(interp, divtau, mesh, 1) <= 1e-12);
  // smooth field: residual at quadrature accuracy
  const MatFn tau_s = [](const Eigen::Vector2d& x) {
    const double s = std::sin(x[0] + 2 * x[1]);
    Eigen::Matrix2d m;
    m << s, 2 * s, -s, s;
    return m;
  };
  const VecFn div_s = [](const Eigen::Vector2d& x) {
    const double c = std::cos(x[0] + 2 * x[1]);
    return Eigen::Vector2d(5 * c, c);
  };
  for (int cells : {1, 2}) {
    const Mesh m2 = generate_structured_alfeld(cells);
    CHECK(commuting_residual(bdm_interpolant(tau_s, m2, 1), div_s, m2, 1) <=
          1e-11);
  }
}

TEST_CASE("mesh locator finds containing elements") {
  const Mesh mesh = generate_structured_alfeld(3);
  const MeshLocator loc(mesh);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unif(0.001, 0.999);
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::Vector2d x(unif(rng), unif(rng));
    const int e = loc.locate(x);
    REQUIRE(e >= 0);
    const auto& t = mesh.triangles[e];
    const Eigen::Vector2d a = mesh.vertices[t[0]];
    Eigen::Matrix2d B;
    B.col(0) = mesh.vertices[t[1]] - a;
    B.col(1) = mesh.vertices[t[2]] - a;
    const Eigen::Vector2d lam = B.inverse() * (x - a);
    CHECK(lam.x() >= -1e-9);
    CHECK(lam.y() >= -1e-9);
    CHECK(lam.sum() <= 1 + 1e-9);
  }
}

TEST_CASE("richardson extrapolation and self-consistency") {
  // synthetic sequence lambda_h = lambda + C h^3
  const double lambda = 13.0, C = 2.0;
  std::vector<double> vals;
  for (double h : {0.5, 0.25, 0.125, 0.0625})
    vals.push_back(lambda + C * h * h * h);
  const double ref = richardson_reference(vals, 3.0);
  CHECK(ref == doctest::Approx(lambda).epsilon(1e-12));
  std::vector<double> prev(vals.begin(), vals.end() - 1);
  const double ref_alt = richardson_reference(prev, 3.0);
  CHECK(std::abs(ref - ref_alt) <= std::abs(vals.back() - lambda));
}

TEST_CASE("quadrature saturation of reported errors") {
  const MaterialParams p{1.0, 1.0, 1.0};
  const ManufacturedCase& mc = find_case("smooth_sin");
  const Mesh mesh = generate_structured_alfeld(2);
  CondensedSolver solver(mesh, p, 1);
  const FieldSolution sol = solver.solve_source(mc.load(p));
  // the default degree must already be saturated: doubling it (so that the
  // default is the halved rule of the comparison) moves errors by < 0.1%
  const SourceErrors full =
      compute_source_errors(mesh, solver.cache(), sol, nullptr, mc, p, -1);
  const SourceErrors dbl = compute_source_errors(
      mesh, solver.cache(), sol, nullptr, mc, p,
      std::min(2 * default_quad_degree(1), kMaxQuadratureDegree));
  CHECK(std::abs(full.sigma_l2 - dbl.sigma_l2) / full.sigma_l2 < 1e-3);
  CHECK(std::abs(full.u_l2 - dbl.u_l2) / full.u_l2 < 1e-3);
}
