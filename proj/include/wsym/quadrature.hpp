// Copyright (c) the wsym contributors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>

namespace wsym {

/// Quadrature rule on the reference triangle (0,0),(1,0),(0,1).
/// Weights are positive and sum to 1/2; exact for polynomials up to `exactness`.
struct TriangleRule {
  Eigen::Matrix2Xd points;
  Eigen::VectorXd weights;
  int exactness = 0;
  int size() const { return static_cast<int>(weights.size()); }
};

/// Quadrature rule on the reference edge [0,1]. Weights sum to 1.
struct EdgeRule {
  Eigen::VectorXd points;
  Eigen::VectorXd weights;
  int exactness = 0;
  int size() const { return static_cast<int>(weights.size()); }
};

constexpr int kMaxQuadratureDegree = 20;

/// Conical-product rule (Gauss-Legendre x Gauss-Jacobi), exact to `degree`.
const TriangleRule& triangle_rule(int degree);

/// Gauss-Legendre rule on [0,1], exact to `degree`.
const EdgeRule& edge_rule(int degree);

/// Exact integral of x^a y^b over the reference triangle: a! b! / (a+b+2)!.
double monomial_integral_tri(int a, int b);

}  // namespace wsym
