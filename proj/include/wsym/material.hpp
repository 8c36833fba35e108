// Copyright (c) the wsym contributors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>

#include "wsym/mesh.hpp"
#include "wsym/quadrature.hpp"

namespace wsym {

/// Lame coefficients and density. lambda_s must be finite and positive; the
/// incompressible-limit operator is out of scope (the element-local saddle
/// systems of the hybridization become singular there).
struct MaterialParams {
  double mu_s = 1.0;
  double lambda_s = 1.0;
  double rho_s = 1.0;
  static constexpr int n = 2;

  void validate() const;
};

/// Compliance A tau = tau^D / (2 mu) + tr(tau) I / (n (n lambda + 2 mu)),
/// the inverse of the elasticity operator.
Eigen::Matrix2d compliance_apply(const Eigen::Matrix2d& tau,
                                 const MaterialParams& params);

/// Matrix of the compliance action on the component basis
/// (E00, E01, E10, E11); symmetric positive definite for finite lambda_s.
Eigen::Matrix4d compliance_matrix(const MaterialParams& params);

/// Inverse map (stiffness): sigma = 2 mu eps + lambda tr(eps) I.
Eigen::Matrix4d stiffness_matrix(const MaterialParams& params);

/// Integral of (A sigma) : tau over one element, both fields given as
/// stress-basis coefficient vectors (component-major over the orthonormal
/// degree-(k+1) scalar basis). Symmetric in its arguments.
double compliance_energy(const Eigen::VectorXd& sigma, const Eigen::VectorXd& tau,
                         const ElementGeometry& geom, const MaterialParams& params);

}  // namespace wsym
