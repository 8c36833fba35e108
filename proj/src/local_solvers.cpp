// Copyright (c) the wsym contributors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#include "wsym/local_solvers.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <mutex>
#include <stdexcept>

#include "wsym/parallel.hpp"

namespace wsym {

namespace {

// A^{-1} has the Kronecker structure kron(compA^{-1}, I_D) / det.
Eigen::MatrixXd apply_compliance_block_inverse(const Eigen::Matrix4d& comp_inv,
                                               double det,
                                               const Eigen::MatrixXd& rhs) {
  const int d = static_cast<int>(rhs.rows()) / 4;
  Eigen::MatrixXd out(rhs.rows(), rhs.cols());
  for (int c = 0; c < 4; ++c) {
    out.middleRows(c * d, d).setZero();
    for (int cp = 0; cp < 4; ++cp)
      if (comp_inv(c, cp) != 0.0)
        out.middleRows(c * d, d) += comp_inv(c, cp) * rhs.middleRows(cp * d, d);
  }
  return out / det;
}

}  // namespace

LocalBlocks build_local_blocks(const Mesh& mesh, int elem, const FeTables& tables,
                               const MaterialParams& params) {
  const int k = tables.k;
  const int D1 = poly_space_dim(k + 1);
  const int Dk = poly_space_dim(k);
  const int NS = 4 * D1;
  const int NW = 2 * Dk;
  const int NR = D1;
  const ElementGeometry geom = element_geometry(mesh, elem);
  const Eigen::Matrix2d jit = geom.jac_inv_t;
  const double det = geom.det;

  LocalBlocks blk;
  // (A sigma_j, sigma_i) = det * compA(c_i, c_j) delta_{m_i m_j}
  const Eigen::Matrix4d compA = compliance_matrix(params);
  blk.A = Eigen::MatrixXd::Zero(NS, NS);
  for (int c = 0; c < 4; ++c)
    for (int cp = 0; cp < 4; ++cp)
      if (compA(c, cp) != 0.0)
        blk.A.block(c * D1, cp * D1, D1, D1) =
            det * compA(c, cp) * Eigen::MatrixXd::Identity(D1, D1);

  // B(a, i): (w_a, div sigma_i); sigma_i = p_m E_{rc} gives e_r (grad p_m)_c
  const auto& w = tables.tri->weights;
  const int Q = tables.tri->size();
  Eigen::MatrixXd gpx(D1, Q), gpy(D1, Q);  // physical gradients of p_m
  gpx = jit(0, 0) * tables.Gx_k1 + jit(0, 1) * tables.Gy_k1;
  gpy = jit(1, 0) * tables.Gx_k1 + jit(1, 1) * tables.Gy_k1;
  blk.B = Eigen::MatrixXd::Zero(NW, NS);
  for (int r = 0; r < 2; ++r) {
    for (int c = 0; c < 2; ++c) {
      const auto& g = (c == 0) ? gpx : gpy;
      // (r*Dk + mk, (2r+c)*D1 + m) += det * sum_q w_q W(mk,q) g(m,q)
      blk.B.block(r * Dk, (2 * r + c) * D1, Dk, D1) =
          det * tables.Wk * w.asDiagonal() * g.transpose();
    }
  }

  // C(b, i): (sigma_i, p_b J/sqrt(2)) -- exact through orthonormality
  blk.C = Eigen::MatrixXd::Zero(NR, NS);
  const double s2 = det / std::sqrt(2.0);
  for (int b = 0; b < NR; ++b) {
    blk.C(b, 1 * D1 + b) = s2;   // E01 : J = 1
    blk.C(b, 2 * D1 + b) = -s2;  // E10 : J = -1
  }

  // D(i, col): <mu_col, sigma_i n>_F over non-Gamma_0 faces
  const int modes = k + 2;
  blk.mult_faces.clear();
  for (int lf = 0; lf < 3; ++lf) {
    const Face& f = mesh.faces[mesh.element_to_faces[elem][lf]];
    if (f.tag != FaceTag::Dirichlet) blk.mult_faces.push_back(lf);
  }
  const int n_loc = static_cast<int>(blk.mult_faces.size()) * 2 * modes;
  blk.D = Eigen::MatrixXd::Zero(NS, n_loc);
  const auto& ew = tables.edge->weights;
  int col0 = 0;
  for (int lf : blk.mult_faces) {
    const int o = mesh.element_face_sign[elem][lf] > 0 ? 0 : 1;
    const Eigen::MatrixXd& tr = tables.trace_k1[lf][o];  // D1 x QE
    const Eigen::Vector2d n = geom.normals[lf];
    const double hf = geom.face_lengths[lf];
    // over sqrt(h_F): multiplier normalization against the h_F arclength
    const double scale = std::sqrt(hf);
    // moments(m, a) = sum_q ew_q tr(m,q) L_a(q)
    const Eigen::MatrixXd moments =
        tr * ew.asDiagonal() * tables.edge_mult.transpose();
    for (int r = 0; r < 2; ++r)
      for (int c = 0; c < 2; ++c)
        blk.D.block((2 * r + c) * D1, col0 + r * modes, D1, modes) =
            scale * n[c] * moments;
    col0 += 2 * modes;
  }
  return blk;
}

ElementCache factorize_local(const Mesh& mesh, int elem, LocalBlocks blocks,
                             const FeTables& tables, const MaterialParams& params) {
  const int k = tables.k;
  const int D1 = poly_space_dim(k + 1);
  const int NW = 2 * poly_space_dim(k);
  const int NR = D1;
  const int NS = 4 * D1;
  const int NC = NW + NR;

  ElementCache entry;
  entry.geom = element_geometry(mesh, elem);
  entry.params = params;

  Eigen::MatrixXd G(NC, NS);
  G.topRows(NW) = blocks.B;
  G.bottomRows(NR) = blocks.C;

  // Change of stress variable s' = kron(R, I) s with compA = R^t R turns the
  // (1,1) block into det*I; the null-space solve below then sees only the
  // square root of the Schur conditioning, which keeps the columns accurate
  // uniformly in lambda_S (kappa ~ sqrt(lambda) instead of lambda).
  const Eigen::Matrix4d compA = compliance_matrix(params);
  const Eigen::Matrix4d R = Eigen::LLT<Eigen::Matrix4d>(compA).matrixU();
  const Eigen::Matrix4d Rinv = R.inverse();
  const double det = entry.geom.det;
  auto apply_kron = [D1](const Eigen::Matrix4d& M, const Eigen::MatrixXd& rhs) {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(rhs.rows(), rhs.cols());
    for (int c = 0; c < 4; ++c)
      for (int cp = 0; cp < 4; ++cp)
        if (M(c, cp) != 0.0)
          out.middleRows(c * D1, D1) += M(c, cp) * rhs.middleRows(cp * D1, D1);
    return out;
  };

  // G' = G kron(R^{-1}, I); thin QR of G'^t drives the null-space solve
  const Eigen::MatrixXd Gp =
      apply_kron(Rinv.transpose(), G.transpose()).transpose();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(Gp.transpose());
  const Eigen::MatrixXd Qthin =
      qr.householderQ() * Eigen::MatrixXd::Identity(NS, NC);
  const Eigen::MatrixXd Rhat =
      qr.matrixQR().topRows(NC).triangularView<Eigen::Upper>();
  {
    const double rmin = Rhat.diagonal().cwiseAbs().minCoeff();
    const double rmax = Rhat.diagonal().cwiseAbs().maxCoeff();
    if (!(rmin > 1e-13 * rmax))
      throw std::runtime_error(
          "factorize_local: singular local saddle matrix at element " +
          std::to_string(elem) + " (QR pivot " + std::to_string(rmin) + ")");
  }

  //   det s' + G'^t y = r1' ,  G' s' = r2   with  r1' = kron(R^{-t}, I) r1:
  //   w = R^{-t} r2 gives the range part Q w of s'; the complement is
  //   (I - QQ^t) r1' / det; then R y = Q^t r1' - det w.
  //   xp is returned in the scaled stress variable.
  auto solve = [&](const Eigen::MatrixXd& r1, const Eigen::MatrixXd& r2,
                   Eigen::MatrixXd& xp, Eigen::MatrixXd& y) {
    const Eigen::MatrixXd r1p = apply_kron(Rinv.transpose(), r1);
    const Eigen::MatrixXd w =
        Rhat.transpose().triangularView<Eigen::Lower>().solve(r2);
    const Eigen::MatrixXd qtr = Qthin.transpose() * r1p;
    xp = Qthin * w + (r1p - Qthin * qtr) / det;
    y = Rhat.triangularView<Eigen::Upper>().solve(qtr - det * w);
    // one refinement pass in the scaled variables
    const Eigen::MatrixXd res1p = r1p - det * xp - Gp.transpose() * y;
    const Eigen::MatrixXd res2 = r2 - Gp * xp;
    const Eigen::MatrixXd dw =
        Rhat.transpose().triangularView<Eigen::Lower>().solve(res2);
    const Eigen::MatrixXd qtres = Qthin.transpose() * res1p;
    xp += Qthin * dw + (res1p - Qthin * qtres) / det;
    y += Rhat.triangularView<Eigen::Upper>().solve(qtres - det * dw);
  };

  const int n_loc = static_cast<int>(blocks.D.cols());
  Eigen::MatrixXd xp, y;
  // multiplier-driven columns: rhs (-D mu, 0, 0)
  solve(-blocks.D, Eigen::MatrixXd::Zero(NC, n_loc), xp, y);
  entry.Q1 = xp;
  entry.Q2 = y.topRows(NW);
  entry.Q3 = y.bottomRows(NR);
  // load-driven columns: rhs (0, -rho det I, 0) after the symmetric scaling
  Eigen::MatrixXd r2 = Eigen::MatrixXd::Zero(NC, NW);
  r2.topRows(NW) = -params.rho_s * det * Eigen::MatrixXd::Identity(NW, NW);
  solve(Eigen::MatrixXd::Zero(NS, NW), r2, xp, y);
  entry.Q1L = xp;
  entry.Q2L = y.topRows(NW);
  entry.Q3L = y.bottomRows(NR);
  entry.stress_rinv = Rinv;

  // defining residuals in the scaled variables, relative to the block scales
  const double scale = Gp.norm() + blocks.D.norm() + det;
  double res = 0.0;
  {
    const Eigen::MatrixXd dprime = apply_kron(Rinv.transpose(), blocks.D);
    Eigen::MatrixXd gy(NC, n_loc);
    gy.topRows(NW) = entry.Q2;
    gy.bottomRows(NR) = entry.Q3;
    const Eigen::MatrixXd r1 =
        det * entry.Q1 + Gp.transpose() * gy + dprime;
    Eigen::MatrixXd rg = Gp * entry.Q1;
    res = std::max(res, std::max(r1.norm(), rg.norm()) /
                            (scale * std::max(1.0, entry.Q1.norm())));
    Eigen::MatrixXd ly(NC, NW);
    ly.topRows(NW) = entry.Q2L;
    ly.bottomRows(NR) = entry.Q3L;
    const Eigen::MatrixXd l1 = det * entry.Q1L + Gp.transpose() * ly;
    Eigen::MatrixXd lg = Gp * entry.Q1L +
                         [&] {
                           Eigen::MatrixXd m = Eigen::MatrixXd::Zero(NC, NW);
                           m.topRows(NW) = params.rho_s * det *
                                           Eigen::MatrixXd::Identity(NW, NW);
                           return m;
                         }();
    res = std::max(res, std::max(l1.norm(), lg.norm()) /
                            (scale * std::max(1.0, entry.Q1L.norm())));
  }
  entry.solve_residual = res;
  entry.blocks = std::move(blocks);
  return entry;
}

Eigen::MatrixXd ElementCache::unprime_stress(const Eigen::MatrixXd& primed) const {
  const int d = static_cast<int>(primed.rows()) / 4;
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(primed.rows(), primed.cols());
  for (int c = 0; c < 4; ++c)
    for (int cp = 0; cp < 4; ++cp)
      if (stress_rinv(c, cp) != 0.0)
        out.middleRows(c * d, d) += stress_rinv(c, cp) * primed.middleRows(cp * d, d);
  return out;
}

LocalSolverCache build_local_cache(const Mesh& mesh, int k,
                                   const std::vector<MaterialParams>& params,
                                   int quad_degree, int threads) {
  if (static_cast<int>(params.size()) != mesh.n_elements())
    throw std::invalid_argument("build_local_cache: one params record per element");
  for (const auto& p : params) p.validate();
  if (quad_degree < 0) quad_degree = default_quad_degree(k);
  const FeTables& tables = fe_tables(k, quad_degree);
  LocalSolverCache cache;
  cache.k = k;
  cache.quad_degree = quad_degree;
  cache.elements.resize(mesh.n_elements());
  parallel_for(mesh.n_elements(), threads, [&](int e) {
    cache.elements[e] =
        factorize_local(mesh, e, build_local_blocks(mesh, e, tables, params[e]),
                        tables, params[e]);
  });
  return cache;
}

LocalSolverCache build_local_cache(const Mesh& mesh, int k,
                                   const MaterialParams& params, int quad_degree,
                                   int threads) {
  return build_local_cache(
      mesh, k, std::vector<MaterialParams>(mesh.n_elements(), params),
      quad_degree, threads);
}

LocalResolvent::LocalResolvent(const ElementCache& entry, double lambda,
                               int elem_index) {
  if (lambda == 0.0) return;  // exact identity
  identity_ = false;
  const int n = static_cast<int>(entry.Q2L.rows());
  const Eigen::MatrixXd M =
      Eigen::MatrixXd::Identity(n, n) - lambda * entry.Q2L;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (M + M.transpose()));
  sigma_min_ = es.eigenvalues().cwiseAbs().minCoeff();
  if (sigma_min_ < 1e-10)
    throw std::runtime_error(
        "validity bound violated at element " + std::to_string(elem_index) +
        " (resolvent sigma_min " + std::to_string(sigma_min_) + ")");
  lu_.compute(M);
}

Eigen::VectorXd LocalResolvent::apply(const Eigen::VectorXd& v) const {
  return identity_ ? v : lu_.solve(v);
}

Eigen::MatrixXd LocalResolvent::apply(const Eigen::MatrixXd& m) const {
  return identity_ ? m : lu_.solve(m);
}

double q2l_operator_norm(const ElementCache& entry) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
      0.5 * (entry.Q2L + entry.Q2L.transpose()));
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace wsym
