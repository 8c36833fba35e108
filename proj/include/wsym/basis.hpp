// Copyright (c) the wsym contributors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>
#include <vector>

#include "wsym/quadrature.hpp"

namespace wsym {

/// dim P^d on a triangle: (d+1)(d+2)/2. degree -1 gives 0.
inline int poly_space_dim(int degree) {
  return degree < 0 ? 0 : (degree + 1) * (degree + 2) / 2;
}

struct Monomial {
  int px = 0, py = 0;
};

/// Monomials of total degree <= degree in graded-lex order
/// (by degree, then descending x power).
const std::vector<Monomial>& monomials_upto(int degree);

/// Integral over the reference triangle of the centered monomials
/// (x-1/3)^a (y-1/3)^b used by ScalarBasis (exact binomial expansion).
double centered_monomial_integral_tri(int a, int b);

/// L2-orthonormal polynomial basis on the reference triangle (0,0),(1,0),(0,1).
/// Column j of `coef` holds coefficients over the centroid-centered monomials
/// (x-1/3)^px (y-1/3)^py in graded-lex order; centering keeps the coefficient
/// magnitudes small enough for 1e-13-level evaluation accuracy. The graded
/// construction keeps span(b_0..b_{dim(P^d)-1}) = P^d for every d <= degree.
struct ScalarBasis {
  int degree = 0;
  Eigen::MatrixXd coef;

  int dim() const { return static_cast<int>(coef.cols()); }
  /// values of all basis functions at reference points (dim x npts)
  Eigen::MatrixXd values(const Eigen::Matrix2Xd& pts) const;
  /// reference gradients; gx, gy are dim x npts
  void gradients(const Eigen::Matrix2Xd& pts, Eigen::MatrixXd& gx,
                 Eigen::MatrixXd& gy) const;
};

const ScalarBasis& scalar_basis(int degree);

/// Orthonormal shifted-Legendre basis on [0,1] (closed-form coefficients).
struct EdgeBasis {
  int degree = 0;
  Eigen::MatrixXd coef;  // (degree+1) x (degree+1), monomials 1, t, t^2, ...

  int dim() const { return static_cast<int>(coef.cols()); }
  Eigen::MatrixXd values(const Eigen::VectorXd& ts) const;
};

const EdgeBasis& legendre_edge_basis(int degree);

/// Vector-valued moment space N^k = (P^{k-1})^2 + S^k on the reference element,
/// with S^k = span{ x^{k-1-j} y^j (-y, x) }. Used for the interior BDM moments.
/// Coefficients are over monomials_upto(k).
struct VectorMomentBasis {
  int k = 1;
  Eigen::MatrixXd coef_x, coef_y;  // n_monomials x n_funcs

  int dim() const { return static_cast<int>(coef_x.cols()); }
  void values(const Eigen::Matrix2Xd& pts, Eigen::MatrixXd& vx,
              Eigen::MatrixXd& vy) const;
};

const VectorMomentBasis& nedelec_moment_basis(int k);

enum class SpaceTag {
  Stress,         // full 2x2-matrix P^{k+1}
  Displacement,   // vector P^k
  Rotation,       // scalar P^{k+1} times J/sqrt(2), J = [[0,1],[-1,0]]
  Multiplier,     // vector P^{k+1} on an edge, scaled by 1/sqrt(h_F)
  NedelecMoment,  // N^k per row-vector field
  PostComplement  // vector (P^{k+2} orthogonal complement of P^k)
};

/// Descriptor for one reference space: dimension and an L2 Gram condition
/// number measured by quadrature (recorded, per the space invariants).
struct ReferenceBasis {
  SpaceTag space;
  int k = 1;
  int dim = 0;
  double gram_condition = 1.0;
};

/// k must be 1 or 2.
ReferenceBasis build_basis(SpaceTag space, int k);

/// Indices [dim P^k, dim P^{k+2}) of scalar_basis(k+2) span the scalar
/// complement; the vector complement is that set tensored with e_0, e_1.
struct PostComplement {
  int k = 1;
  int scalar_lo = 0, scalar_hi = 0;  // half-open range into scalar_basis(k+2)
  int dim() const { return 2 * (scalar_hi - scalar_lo); }
};

PostComplement post_complement(int k);

/// Precomputed basis/rule tables for one polynomial order, shared by all
/// elements. Wk/Vk1/Pk2 are values of the orthonormal scalar bases of degree
/// k, k+1, k+2 at the triangle-rule points; edge tables are evaluated at the
/// edge-rule points mapped onto each local reference edge for both global
/// orientations of the edge parameter.
struct FeTables {
  int k = 1;
  int quad_degree = 0;
  const TriangleRule* tri = nullptr;
  const EdgeRule* edge = nullptr;

  Eigen::MatrixXd Wk;                  // D_k x Q
  Eigen::MatrixXd Vk1;                 // D_{k+1} x Q
  Eigen::MatrixXd Pk2;                 // D_{k+2} x Q
  Eigen::MatrixXd Gx_k, Gy_k;          // gradients of degree-k basis
  Eigen::MatrixXd Gx_k1, Gy_k1;        // gradients of degree-(k+1) basis
  Eigen::MatrixXd Gx_k2, Gy_k2;        // gradients of degree-(k+2) basis
  Eigen::MatrixXd edge_mult;           // (k+2) x QE, Legendre values at edge rule

  // trace values on local reference edge lf (0,1,2), orientation o
  // (o=0: global param runs with the local edge; o=1: reversed)
  Eigen::MatrixXd trace_k[3][2];       // D_k x QE
  Eigen::MatrixXd trace_k1[3][2];      // D_{k+1} x QE
  Eigen::MatrixXd trace_k2[3][2];      // D_{k+2} x QE
};

/// Memoized per (k, quad_degree).
const FeTables& fe_tables(int k, int quad_degree);

/// Default assembly/error quadrature degree: 2k+8.
inline int default_quad_degree(int k) { return 2 * k + 8; }

}  // namespace wsym
