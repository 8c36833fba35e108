// Copyright (c) the wsym contributors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#include "wsym/postprocess.hpp"

#include <Eigen/LU>
#include <stdexcept>

#include "wsym/parallel.hpp"

namespace wsym {

PostField postprocess_local(const FieldSolution& field,
                            const LocalSolverCache& cache, const Mesh& mesh,
                            int threads) {
  const int k = cache.k;
  const FeTables& T = fe_tables(k, cache.quad_degree);
  const PostComplement pc = post_complement(k);
  const int D2 = poly_space_dim(k + 2);
  const int Dk = poly_space_dim(k);
  const int D1 = poly_space_dim(k + 1);
  const int nc = pc.scalar_hi - pc.scalar_lo;  // scalar complement size
  const int n_unknown = 2 * D2;
  const int Q = T.tri->size();
  const auto& w = T.tri->weights;

  PostField post;
  post.k = k;
  post.coeffs.resize(mesh.n_elements());

  parallel_for(mesh.n_elements(), threads, [&](int e) {
    const ElementCache& ec = cache.elements[e];
    const Eigen::Matrix2d jit = ec.geom.jac_inv_t;
    const double det = ec.geom.det;

    // physical gradients of the degree-(k+2) scalar basis at the rule points
    const Eigen::MatrixXd gpx = jit(0, 0) * T.Gx_k2 + jit(0, 1) * T.Gy_k2;
    const Eigen::MatrixXd gpy = jit(1, 0) * T.Gx_k2 + jit(1, 1) * T.Gy_k2;

    // stiffness of the scalar degree-(k+2) basis
    const Eigen::MatrixXd stiff =
        det * (gpx * w.asDiagonal() * gpx.transpose() +
               gpy * w.asDiagonal() * gpy.transpose());

    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n_unknown, n_unknown);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n_unknown);

    // gradient rows: complement functions tensored with e_r
    // (grad(q e_r), grad(p e_s)) couples only r == s
    for (int r = 0; r < 2; ++r)
      M.block(r * nc, r * D2, nc, D2) = stiff.middleRows(pc.scalar_lo, nc);

    // RHS: (A sigma_h + rho_h, grad(q e_r))_K = int (row r of G) . grad q
    const Eigen::Matrix4d compA = compliance_matrix(ec.params);
    for (int q = 0; q < Q; ++q) {
      Eigen::Matrix2d G = Eigen::Matrix2d::Zero();
      for (int c = 0; c < 4; ++c) {
        double v = 0.0;
        for (int cp = 0; cp < 4; ++cp)
          if (compA(c, cp) != 0.0)
            v += compA(c, cp) *
                 field.sigma[e].segment(cp * D1, D1).dot(T.Vk1.col(q));
        G(c / 2, c % 2) = v;
      }
      const double rs = field.rho[e].dot(T.Vk1.col(q)) / std::sqrt(2.0);
      G(0, 1) += rs;
      G(1, 0) -= rs;
      const double wq = det * w[q];
      for (int r = 0; r < 2; ++r)
        rhs.segment(r * nc, nc) +=
            wq * (G(r, 0) * gpx.col(q).segment(pc.scalar_lo, nc) +
                  G(r, 1) * gpy.col(q).segment(pc.scalar_lo, nc));
    }

    // moment rows: (u*, v)_K = (u_h, v)_K for v in vector P^k; the nested
    // orthonormal basis makes the mass block det * [I_Dk 0]
    const int mrow = 2 * nc;
    for (int r = 0; r < 2; ++r) {
      M.block(mrow + r * Dk, r * D2, Dk, Dk) =
          det * Eigen::MatrixXd::Identity(Dk, Dk);
      rhs.segment(mrow + r * Dk, Dk) = det * field.u[e].segment(r * Dk, Dk);
    }

    Eigen::PartialPivLU<Eigen::MatrixXd> lu(M);
    const Eigen::VectorXd sol = lu.solve(rhs);
    const double resid = (M * sol - rhs).norm() /
                         std::max(1e-300, rhs.norm() + M.norm() * sol.norm());
    if (resid > 1e-8)
      throw std::runtime_error(
          "postprocess_local: singular local system at element " +
          std::to_string(e));
    post.coeffs[e] = sol;
  });
  return post;
}

}  // namespace wsym
