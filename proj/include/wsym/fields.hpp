// Copyright (c) the wsym contributors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>
#include <vector>

namespace wsym {

// Coefficient conventions (all scalar factors are the orthonormal reference
// bases from basis.hpp):
//   stress   : length 4*D_{k+1}, index c*D+m with c=0..3 over (E00,E01,E10,E11)
//   displ.   : length 2*D_k,     index r*D+m with r the vector component
//   rotation : length D_{k+1},   field = sum r_m p_m J/sqrt(2)
//   postproc : length 2*D_{k+2}, index r*D+m
//   multiplier (per face): length 2(k+2), index r*(k+2)+a,
//                          field = sum g_{r,a} L_a(t) e_r / sqrt(h_F)

/// Recovered element fields of one hybrid solve.
struct FieldSolution {
  int k = 1;
  std::vector<Eigen::VectorXd> sigma;  // per element
  std::vector<Eigen::VectorXd> u;
  std::vector<Eigen::VectorXd> rho;
  Eigen::VectorXd gamma;               // global multiplier coefficients
  double max_local_residual = 0.0;     // hybrid equations (a),(b),(c), scaled
  double max_jump_residual = 0.0;      // equation (d) moments, scaled
};

/// Element-local P^{k+2} displacement reconstruction.
struct PostField {
  int k = 1;
  std::vector<Eigen::VectorXd> coeffs;
};

/// 2x2 stress value from one column of a degree-(k+1) scalar value table.
inline Eigen::Matrix2d stress_value(const Eigen::VectorXd& coeffs,
                                    const Eigen::Ref<const Eigen::VectorXd>& p) {
  const int d = static_cast<int>(p.size());
  Eigen::Matrix2d M;
  for (int c = 0; c < 4; ++c)
    M(c / 2, c % 2) = coeffs.segment(c * d, d).dot(p);
  return M;
}

inline Eigen::Vector2d vector_value(const Eigen::VectorXd& coeffs,
                                    const Eigen::Ref<const Eigen::VectorXd>& p) {
  const int d = static_cast<int>(p.size());
  return {coeffs.head(d).dot(p), coeffs.tail(d).dot(p)};
}

/// scalar s(x) with rotation field = s * J / sqrt(2), J = [[0,1],[-1,0]]
inline double rotation_scalar(const Eigen::VectorXd& coeffs,
                              const Eigen::Ref<const Eigen::VectorXd>& p) {
  return coeffs.dot(p);
}

inline Eigen::Matrix2d rotation_value(const Eigen::VectorXd& coeffs,
                                      const Eigen::Ref<const Eigen::VectorXd>& p) {
  const double s = rotation_scalar(coeffs, p) / std::sqrt(2.0);
  Eigen::Matrix2d J;
  J << 0, s, -s, 0;
  return J;
}

/// Physical Jacobian of a vector field from reference-gradient table columns.
inline Eigen::Matrix2d vector_gradient(const Eigen::VectorXd& coeffs,
                                       const Eigen::Ref<const Eigen::VectorXd>& gx,
                                       const Eigen::Ref<const Eigen::VectorXd>& gy,
                                       const Eigen::Matrix2d& jac_inv_t) {
  const int d = static_cast<int>(gx.size());
  Eigen::Matrix2d G;  // G(r, :) = grad of component r
  for (int r = 0; r < 2; ++r) {
    const Eigen::Vector2d ref(coeffs.segment(r * d, d).dot(gx),
                              coeffs.segment(r * d, d).dot(gy));
    G.row(r) = (jac_inv_t * ref).transpose();
  }
  return G;
}

}  // namespace wsym
