// Copyright (c) the wsym contributors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <limits>
#include <random>

#include "wsym/basis.hpp"
#include "wsym/material.hpp"

using namespace wsym;

TEST_CASE("compliance on identity and skew inputs") {
  MaterialParams p{0.5, 0.5, 1.0};
  const Eigen::Matrix2d AI = compliance_apply(Eigen::Matrix2d::Identity(), p);
  CHECK((AI - 0.5 * Eigen::Matrix2d::Identity()).norm() < 1e-15);
  Eigen::Matrix2d J;
  J << 0, 1, -1, 0;
  const Eigen::Matrix2d AJ = compliance_apply(J, p);
  CHECK((AJ - J / (2 * p.mu_s)).norm() < 1e-15);
}

TEST_CASE("compliance splits trace and deviator") {
  MaterialParams p{1.3, 2.7, 1.0};
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> unif(-1, 1);
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::Matrix2d tau;
    tau << unif(rng), unif(rng), unif(rng), unif(rng);
    const Eigen::Matrix2d at = compliance_apply(tau, p);
    CHECK(at.trace() ==
          doctest::Approx(tau.trace() / (2 * p.lambda_s + 2 * p.mu_s))
              .epsilon(1e-13));
    const Eigen::Matrix2d dev_at =
        at - 0.5 * at.trace() * Eigen::Matrix2d::Identity();
    const Eigen::Matrix2d dev_tau =
        tau - 0.5 * tau.trace() * Eigen::Matrix2d::Identity();
    CHECK((dev_at - dev_tau / (2 * p.mu_s)).norm() < 1e-14);
  }
}

TEST_CASE("compliance is SPD and bounded below by the deviatoric part") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unif(-1, 1);
  for (double lam : {1.0, 1e2, 1e4, 1e8}) {
    MaterialParams p{1.0, lam, 1.0};
    for (int trial = 0; trial < 30; ++trial) {
      Eigen::Matrix2d tau;
      tau << unif(rng), unif(rng), unif(rng), unif(rng);
      if (tau.norm() < 1e-3) continue;
      const double energy =
          (compliance_apply(tau, p).array() * tau.array()).sum();
      CHECK(energy > 0);
      const Eigen::Matrix2d dev =
          tau - 0.5 * tau.trace() * Eigen::Matrix2d::Identity();
      CHECK(energy >= dev.squaredNorm() / (2 * p.mu_s) - 1e-14);
    }
  }
  // trace coefficient decreases monotonically in lambda_S
  double prev = 1e300;
  for (double lam : {1.0, 10.0, 1e3, 1e6}) {
    MaterialParams p{1.0, lam, 1.0};
    const double c = compliance_apply(Eigen::Matrix2d::Identity(), p).trace();
    CHECK(c < prev);
    prev = c;
  }
}

TEST_CASE("compliance matrix matches compliance_apply") {
  MaterialParams p{0.9, 3.1, 1.0};
  const Eigen::Matrix4d A = compliance_matrix(p);
  const Eigen::Matrix4d C = stiffness_matrix(p);
  CHECK((A * C - Eigen::Matrix4d::Identity()).norm() < 1e-13);
  for (int c = 0; c < 4; ++c) {
    Eigen::Matrix2d E = Eigen::Matrix2d::Zero();
    E(c / 2, c % 2) = 1.0;
    const Eigen::Matrix2d AE = compliance_apply(E, p);
    for (int cp = 0; cp < 4; ++cp)
      CHECK(A(cp, c) == doctest::Approx(AE(cp / 2, cp % 2)).epsilon(1e-15));
  }
}

TEST_CASE("compliance energy on constant fields") {
  // unit-area element: reference triangle scaled by sqrt(2)
  Mesh mesh;
  mesh.vertices = {{0, 0}, {std::sqrt(2.0), 0}, {0, std::sqrt(2.0)}};
  mesh.triangles = {{0, 1, 2}};
  const ElementGeometry g = element_geometry(mesh, 0);
  CHECK(g.det == doctest::Approx(2.0).epsilon(1e-15));
  MaterialParams p{0.5, 0.5, 1.0};
  const int D1 = poly_space_dim(2);
  // constant sigma = I: the constant scalar basis function is sqrt(2), so the
  // coefficient 1/sqrt(2) on E00 and E11 gives the identity field
  Eigen::VectorXd id = Eigen::VectorXd::Zero(4 * D1);
  id[0 * D1] = id[3 * D1] = 1.0 / std::sqrt(2.0);
  const double area = g.det / 2.0;
  CHECK(compliance_energy(id, id, g, p) == doctest::Approx(area).epsilon(1e-14));
  // sigma = J (skew) against tau = I: zero by orthogonality
  Eigen::VectorXd skew = Eigen::VectorXd::Zero(4 * D1);
  skew[1 * D1] = 1.0 / std::sqrt(2.0);
  skew[2 * D1] = -1.0 / std::sqrt(2.0);
  CHECK(std::abs(compliance_energy(skew, id, g, p)) < 1e-15);
  CHECK(compliance_energy(id, skew, g, p) ==
        doctest::Approx(compliance_energy(skew, id, g, p)).epsilon(1e-15));
}

TEST_CASE("compliance energy vs monomial integration oracle") {
  // random polynomial stress fields; the energy reduces to exact monomial
  // integrals through the orthonormal basis coefficients
  Mesh mesh;
  mesh.vertices = {{0.1, 0.2}, {1.3, 0.4}, {0.5, 1.6}};
  mesh.triangles = {{0, 1, 2}};
  const ElementGeometry g = element_geometry(mesh, 0);
  MaterialParams p{1.7, 0.6, 1.0};
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> unif(-1, 1);
  const int k = 1;
  const int D1 = poly_space_dim(k + 1);
  const auto& rule = triangle_rule(2 * (k + 1) + 2);
  const Eigen::MatrixXd vals = scalar_basis(k + 1).values(rule.points);
  for (int trial = 0; trial < 5; ++trial) {
    Eigen::VectorXd s(4 * D1), t(4 * D1);
    for (int i = 0; i < 4 * D1; ++i) {
      s[i] = unif(rng);
      t[i] = unif(rng);
    }
    // quadrature oracle on the reference element
    double oracle = 0;
    for (int q = 0; q < rule.size(); ++q) {
      Eigen::Matrix2d sm = Eigen::Matrix2d::Zero(), tm = sm;
      for (int c = 0; c < 4; ++c)
        for (int m = 0; m < D1; ++m) {
          sm(c / 2, c % 2) += s[c * D1 + m] * vals(m, q);
          tm(c / 2, c % 2) += t[c * D1 + m] * vals(m, q);
        }
      oracle += g.det * rule.weights[q] *
                (compliance_apply(sm, p).array() * tm.array()).sum();
    }
    CHECK(compliance_energy(s, t, g, p) ==
          doctest::Approx(oracle).epsilon(1e-12));
    CHECK(compliance_energy(s, t, g, p) ==
          doctest::Approx(compliance_energy(t, s, g, p)).epsilon(1e-13));
  }
}

TEST_CASE("parameter validation") {
  MaterialParams bad{1.0, -1.0, 1.0};
  CHECK_THROWS(bad.validate());
  MaterialParams inf{1.0, std::numeric_limits<double>::infinity(), 1.0};
  CHECK_THROWS(inf.validate());
}
