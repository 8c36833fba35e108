// Copyright (c) the wsym contributors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#include "wsym/material.hpp"

#include <cmath>
#include <stdexcept>

namespace wsym {

void MaterialParams::validate() const {
  if (!(mu_s > 0) || !std::isfinite(mu_s))
    throw std::invalid_argument("mu_s must be positive");
  if (!(lambda_s > 0) || !std::isfinite(lambda_s))
    throw std::invalid_argument("lambda_s must be positive and finite");
  if (!(rho_s > 0) || !std::isfinite(rho_s))
    throw std::invalid_argument("rho_s must be positive");
}

Eigen::Matrix2d compliance_apply(const Eigen::Matrix2d& tau,
                                 const MaterialParams& p) {
  const double tr = tau.trace();
  const Eigen::Matrix2d dev = tau - 0.5 * tr * Eigen::Matrix2d::Identity();
  const double ctr = 1.0 / (2.0 * (2.0 * p.lambda_s + 2.0 * p.mu_s));
  return dev / (2.0 * p.mu_s) + ctr * tr * Eigen::Matrix2d::Identity();
}

Eigen::Matrix4d compliance_matrix(const MaterialParams& p) {
  const double a = 1.0 / (4.0 * p.mu_s);
  const double c = 1.0 / (2.0 * (2.0 * p.lambda_s + 2.0 * p.mu_s));
  Eigen::Matrix4d A = Eigen::Matrix4d::Zero();
  A(0, 0) = A(3, 3) = a + c;
  A(0, 3) = A(3, 0) = c - a;
  A(1, 1) = A(2, 2) = 2.0 * a;
  return A;
}

Eigen::Matrix4d stiffness_matrix(const MaterialParams& p) {
  Eigen::Matrix4d C = Eigen::Matrix4d::Zero();
  C(0, 0) = C(3, 3) = 2.0 * p.mu_s + p.lambda_s;
  C(0, 3) = C(3, 0) = p.lambda_s;
  C(1, 1) = C(2, 2) = 2.0 * p.mu_s;
  return C;
}

double compliance_energy(const Eigen::VectorXd& sigma, const Eigen::VectorXd& tau,
                         const ElementGeometry& geom, const MaterialParams& p) {
  if (sigma.size() != tau.size() || sigma.size() % 4 != 0)
    throw std::invalid_argument("compliance_energy: basis mismatch");
  const int d = static_cast<int>(sigma.size()) / 4;
  const Eigen::Matrix4d A = compliance_matrix(p);
  // orthonormal scalar factor: (A sigma, tau)_K = det * sum_m (A s_m) . t_m
  double acc = 0.0;
  for (int m = 0; m < d; ++m) {
    Eigen::Vector4d s, t;
    for (int c = 0; c < 4; ++c) {
      s[c] = sigma[c * d + m];
      t[c] = tau[c * d + m];
    }
    acc += t.dot(A * s);
  }
  return geom.det * acc;
}

}  // namespace wsym
