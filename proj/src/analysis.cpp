// Copyright (c) the wsym contributors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#include "wsym/analysis.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <numbers>
#include <sstream>

namespace wsym {

namespace {

int resolve_qdeg(int k, int quad_degree) {
  return quad_degree < 0 ? default_quad_degree(k) : quad_degree;
}

// the BDM moments of non-polynomial fields want extra quadrature headroom;
// the commuting residual is checked at the 1e-11 level
int resolve_bdm_qdeg(int k, int quad_degree) {
  return quad_degree < 0 ? std::min(2 * k + 14, kMaxQuadratureDegree)
                         : quad_degree;
}

// local face index and orientation of global face `f` within element `e`
std::pair<int, int> local_face(const Mesh& mesh, int e, int f) {
  for (int lf = 0; lf < 3; ++lf)
    if (mesh.element_to_faces[e][lf] == f)
      return {lf, mesh.element_face_sign[e][lf] > 0 ? 0 : 1};
  throw std::logic_error("local_face: face not on element");
}

}  // namespace

double discrete_h1_norm(const std::vector<Eigen::VectorXd>& u, const Mesh& mesh,
                        int k, int quad_degree) {
  const FeTables& T = fe_tables(k, resolve_qdeg(k, quad_degree));
  const int Dk = poly_space_dim(k);
  const auto& w = T.tri->weights;
  double acc = 0.0;
  for (int e = 0; e < mesh.n_elements(); ++e) {
    const ElementGeometry g = element_geometry(mesh, e);
    for (int q = 0; q < T.tri->size(); ++q) {
      const Eigen::Matrix2d J = vector_gradient(u[e], T.Gx_k.col(q), T.Gy_k.col(q),
                                                g.jac_inv_t);
      acc += g.det * w[q] * J.squaredNorm();
    }
  }
  // jump terms: the 1/h_F weight cancels the face arclength
  const auto& ew = T.edge->weights;
  const int QE = T.edge->size();
  for (int f = 0; f < mesh.n_faces(); ++f) {
    const Face& face = mesh.faces[f];
    if (face.tag == FaceTag::Traction) continue;
    const bool interior = face.elems[1] >= 0;
    if (!interior && face.tag != FaceTag::Dirichlet) continue;
    for (int q = 0; q < QE; ++q) {
      Eigen::Vector2d jump = Eigen::Vector2d::Zero();
      for (int s = 0; s < (interior ? 2 : 1); ++s) {
        const int e = face.elems[s];
        const auto [lf, o] = local_face(mesh, e, f);
        const Eigen::Vector2d val(
            u[e].head(Dk).dot(T.trace_k[lf][o].col(q)),
            u[e].tail(Dk).dot(T.trace_k[lf][o].col(q)));
        jump += (s == 0 ? val : -val);
      }
      acc += ew[q] * jump.squaredNorm();
    }
  }
  return std::sqrt(acc);
}

std::vector<Eigen::VectorXd> l2_projection_W(const VecFn& u, const Mesh& mesh,
                                             int k, int quad_degree) {
  const FeTables& T = fe_tables(k, resolve_qdeg(k, quad_degree));
  const int Dk = poly_space_dim(k);
  std::vector<Eigen::VectorXd> out(mesh.n_elements());
  for (int e = 0; e < mesh.n_elements(); ++e) {
    const ElementGeometry g = element_geometry(mesh, e);
    Eigen::VectorXd c = Eigen::VectorXd::Zero(2 * Dk);
    for (int q = 0; q < T.tri->size(); ++q) {
      const Eigen::Vector2d x = g.jac * T.tri->points.col(q) + g.shift;
      const Eigen::Vector2d v = u(x);
      c.head(Dk) += T.tri->weights[q] * v[0] * T.Wk.col(q);
      c.tail(Dk) += T.tri->weights[q] * v[1] * T.Wk.col(q);
    }
    out[e] = c;
  }
  return out;
}

std::vector<Eigen::VectorXd> l2_projection_A(const MatFn& rho, const Mesh& mesh,
                                             int k, int quad_degree) {
  const FeTables& T = fe_tables(k, resolve_qdeg(k, quad_degree));
  const int D1 = poly_space_dim(k + 1);
  const double s2 = std::sqrt(2.0);
  std::vector<Eigen::VectorXd> out(mesh.n_elements());
  for (int e = 0; e < mesh.n_elements(); ++e) {
    const ElementGeometry g = element_geometry(mesh, e);
    Eigen::VectorXd c = Eigen::VectorXd::Zero(D1);
    for (int q = 0; q < T.tri->size(); ++q) {
      const Eigen::Vector2d x = g.jac * T.tri->points.col(q) + g.shift;
      // (rho : J)/sqrt(2) with J = [[0,1],[-1,0]]
      const Eigen::Matrix2d R = rho(x);
      c += T.tri->weights[q] * ((R(0, 1) - R(1, 0)) / s2) * T.Vk1.col(q);
    }
    out[e] = c;
  }
  return out;
}

namespace {

// reference vertices / edges (matching basis.cpp trace conventions)
const Eigen::Vector2d kRefV[3] = {{0, 0}, {1, 0}, {0, 1}};
const int kEnds[3][2] = {{0, 1}, {1, 2}, {2, 0}};
const Eigen::Vector2d kRefNormal[3] = {
    {0, -1}, {1.0 / std::numbers::sqrt2, 1.0 / std::numbers::sqrt2}, {-1, 0}};
const double kRefEdgeLen[3] = {1.0, std::numbers::sqrt2, 1.0};

struct BdmReference {
  Eigen::PartialPivLU<Eigen::MatrixXd> lu;
  Eigen::MatrixXd dof_matrix;
  int n = 0;
};

// DOF matrix of the reference vector P^{k+1} basis (columns r*D1+m):
// rows = 3(k+2) edge moments + k(k+2) interior moments against N^k.
const BdmReference& bdm_reference(int k, int qdeg) {
  static std::map<std::pair<int, int>, BdmReference> cache;
  static std::mutex mtx;
  std::lock_guard<std::mutex> lock(mtx);
  auto it = cache.find({k, qdeg});
  if (it != cache.end()) return it->second;

  const FeTables& T = fe_tables(k, qdeg);
  const int D1 = poly_space_dim(k + 1);
  const int modes = k + 2;
  const int n = 2 * D1;
  BdmReference ref;
  ref.n = n;
  ref.dof_matrix = Eigen::MatrixXd::Zero(n, n);
  const auto& ew = T.edge->weights;
  for (int le = 0; le < 3; ++le) {
    // trace_k1[le][0] follows the reference edge direction
    const Eigen::MatrixXd mom = kRefEdgeLen[le] *
                                (T.trace_k1[le][0] * ew.asDiagonal() *
                                 T.edge_mult.transpose());  // D1 x (k+2)
    for (int r = 0; r < 2; ++r)
      for (int m = 0; m < D1; ++m)
        for (int a = 0; a < modes; ++a)
          ref.dof_matrix(le * modes + a, r * D1 + m) +=
              kRefNormal[le][r] * mom(m, a);
  }
  const auto& nb = nedelec_moment_basis(k);
  Eigen::MatrixXd nx, ny;
  nb.values(T.tri->points, nx, ny);
  const int ni = nb.dim();
  const Eigen::MatrixXd mx =
      T.Vk1 * T.tri->weights.asDiagonal() * nx.transpose();  // D1 x ni
  const Eigen::MatrixXd my =
      T.Vk1 * T.tri->weights.asDiagonal() * ny.transpose();
  for (int m = 0; m < D1; ++m)
    for (int j = 0; j < ni; ++j) {
      ref.dof_matrix(3 * modes + j, 0 * D1 + m) = mx(m, j);
      ref.dof_matrix(3 * modes + j, 1 * D1 + m) = my(m, j);
    }
  ref.lu.compute(ref.dof_matrix);
  return cache.emplace(std::make_pair(k, qdeg), std::move(ref)).first->second;
}

}  // namespace

std::vector<Eigen::VectorXd> bdm_interpolant(const MatFn& tau, const Mesh& mesh,
                                             int k, int quad_degree) {
  const int qdeg = resolve_bdm_qdeg(k, quad_degree);
  const FeTables& T = fe_tables(k, qdeg);
  const BdmReference& ref = bdm_reference(k, qdeg);
  const int D1 = poly_space_dim(k + 1);
  const int modes = k + 2;
  const auto& nb = nedelec_moment_basis(k);
  Eigen::MatrixXd nx, ny;
  nb.values(T.tri->points, nx, ny);
  const auto& ets = T.edge->points;
  const auto& ew = T.edge->weights;
  const Eigen::MatrixXd mult_vals = T.edge_mult;  // (k+2) x QE

  std::vector<Eigen::VectorXd> out(mesh.n_elements());
  for (int e = 0; e < mesh.n_elements(); ++e) {
    const ElementGeometry g = element_geometry(mesh, e);
    const Eigen::Matrix2d binv = g.jac_inv;
    Eigen::MatrixXd dofs = Eigen::MatrixXd::Zero(ref.n, 2);  // per tau row
    for (int le = 0; le < 3; ++le) {
      for (int q = 0; q < T.edge->size(); ++q) {
        const Eigen::Vector2d xhat =
            kRefV[kEnds[le][0]] +
            ets[q] * (kRefV[kEnds[le][1]] - kRefV[kEnds[le][0]]);
        const Eigen::Vector2d x = g.jac * xhat + g.shift;
        // inverse Piola per row: tau_hat = det * tau * B^{-t}
        const Eigen::Matrix2d that = g.det * tau(x) * binv.transpose();
        const Eigen::Vector2d tn = that * kRefNormal[le];
        for (int row = 0; row < 2; ++row)
          for (int a = 0; a < modes; ++a)
            dofs(le * modes + a, row) +=
                kRefEdgeLen[le] * ew[q] * tn[row] * mult_vals(a, q);
      }
    }
    for (int q = 0; q < T.tri->size(); ++q) {
      const Eigen::Vector2d x = g.jac * T.tri->points.col(q) + g.shift;
      const Eigen::Matrix2d that = g.det * tau(x) * binv.transpose();
      for (int row = 0; row < 2; ++row)
        for (int j = 0; j < nb.dim(); ++j)
          dofs(3 * modes + j, row) +=
              T.tri->weights[q] *
              (that(row, 0) * nx(j, q) + that(row, 1) * ny(j, q));
    }
    const Eigen::MatrixXd chat = ref.lu.solve(dofs);  // (2 D1) x 2
    Eigen::VectorXd coeffs = Eigen::VectorXd::Zero(4 * D1);
    for (int row = 0; row < 2; ++row)
      for (int m = 0; m < D1; ++m) {
        const Eigen::Vector2d cm(chat(0 * D1 + m, row), chat(1 * D1 + m, row));
        const Eigen::Vector2d phys = g.jac * cm / g.det;  // forward Piola
        coeffs[(2 * row + 0) * D1 + m] = phys[0];
        coeffs[(2 * row + 1) * D1 + m] = phys[1];
      }
    out[e] = coeffs;
  }
  return out;
}

double commuting_residual(const std::vector<Eigen::VectorXd>& interp,
                          const VecFn& div_tau, const Mesh& mesh, int k,
                          int quad_degree) {
  const int qdeg = resolve_bdm_qdeg(k, quad_degree);
  const FeTables& T = fe_tables(k, qdeg);
  const int D1 = poly_space_dim(k + 1);
  const int Dk = poly_space_dim(k);
  const auto proj = l2_projection_W(div_tau, mesh, k, qdeg);
  double acc = 0.0;
  for (int e = 0; e < mesh.n_elements(); ++e) {
    const ElementGeometry g = element_geometry(mesh, e);
    const Eigen::Matrix2d jit = g.jac_inv_t;
    const Eigen::MatrixXd gpx = jit(0, 0) * T.Gx_k1 + jit(0, 1) * T.Gy_k1;
    const Eigen::MatrixXd gpy = jit(1, 0) * T.Gx_k1 + jit(1, 1) * T.Gy_k1;
    for (int q = 0; q < T.tri->size(); ++q) {
      Eigen::Vector2d div;
      for (int r = 0; r < 2; ++r)
        div[r] = interp[e].segment((2 * r) * D1, D1).dot(gpx.col(q)) +
                 interp[e].segment((2 * r + 1) * D1, D1).dot(gpy.col(q));
      const Eigen::Vector2d pv(proj[e].head(Dk).dot(T.Wk.col(q)),
                               proj[e].tail(Dk).dot(T.Wk.col(q)));
      acc += g.det * T.tri->weights[q] * (div - pv).squaredNorm();
    }
  }
  return std::sqrt(acc);
}

SourceErrors compute_source_errors(const Mesh& mesh, const LocalSolverCache& cache,
                                   const FieldSolution& sol, const PostField* post,
                                   const ManufacturedCase& mc,
                                   const MaterialParams& params, int quad_degree) {
  const int k = cache.k;
  const int qdeg = resolve_qdeg(k, quad_degree);
  const FeTables& T = fe_tables(k, qdeg);
  const int D2 = poly_space_dim(k + 2);
  const auto& w = T.tri->weights;
  const Eigen::Matrix4d compA = compliance_matrix(params);

  double e_sigma = 0, e_rho = 0, e_u = 0, e_ph1 = 0, e_pl2 = 0, a_sigma = 0;
  for (int e = 0; e < mesh.n_elements(); ++e) {
    const ElementGeometry& g = cache.elements[e].geom;
    for (int q = 0; q < T.tri->size(); ++q) {
      const Eigen::Vector2d x = g.jac * T.tri->points.col(q) + g.shift;
      const double wq = g.det * w[q];
      const Eigen::Matrix2d sig_h = stress_value(sol.sigma[e], T.Vk1.col(q));
      e_sigma += wq * (mc.sigma(x, params) - sig_h).squaredNorm();
      const Eigen::Matrix2d rot_h = rotation_value(sol.rho[e], T.Vk1.col(q));
      e_rho += wq * (mc.rotation(x) - rot_h).squaredNorm();
      const Eigen::Vector2d u_h = vector_value(sol.u[e], T.Wk.col(q));
      e_u += wq * (mc.u(x) - u_h).squaredNorm();
      // ||A sigma_h||^2 for the stability ratio
      Eigen::Vector4d sv;
      for (int c = 0; c < 4; ++c) sv[c] = sig_h(c / 2, c % 2);
      const Eigen::Vector4d asv = compA * sv;
      a_sigma += wq * asv.squaredNorm();
      if (post) {
        const Eigen::Vector2d us = vector_value(post->coeffs[e], T.Pk2.col(q));
        e_pl2 += wq * (mc.u(x) - us).squaredNorm();
        const Eigen::Matrix2d gs = vector_gradient(
            post->coeffs[e], T.Gx_k2.col(q), T.Gy_k2.col(q), g.jac_inv_t);
        e_ph1 += wq * (mc.grad_u(x) - gs).squaredNorm();
      }
    }
  }
  (void)D2;
  SourceErrors err;
  err.sigma_l2 = std::sqrt(e_sigma);
  err.rho_l2 = std::sqrt(e_rho);
  err.u_l2 = std::sqrt(e_u);
  if (post) {
    err.post_h1 = std::sqrt(e_ph1);
    err.post_l2 = std::sqrt(e_pl2);
  }
  // || P u - u_h ||_{1,h}
  auto pu = l2_projection_W([&](const Eigen::Vector2d& x) { return mc.u(x); },
                            mesh, k, qdeg);
  for (int e = 0; e < mesh.n_elements(); ++e) pu[e] -= sol.u[e];
  err.pu_1h = discrete_h1_norm(pu, mesh, k, qdeg);
  const double u1h = discrete_h1_norm(sol.u, mesh, k, qdeg);
  err.stability_ratio = (u1h * u1h) / std::max(a_sigma, 1e-300);
  return err;
}

MeshLocator::MeshLocator(const Mesh& mesh) : mesh_(mesh) {
  lo_ = Eigen::Vector2d(1e300, 1e300);
  hi_ = -lo_;
  for (const auto& v : mesh.vertices) {
    lo_ = lo_.cwiseMin(v);
    hi_ = hi_.cwiseMax(v);
  }
  const int target = std::max(1, static_cast<int>(std::sqrt(mesh.n_elements() / 2.0)));
  nx_ = ny_ = target;
  bins_.assign(static_cast<size_t>(nx_) * ny_, {});
  const Eigen::Vector2d span = (hi_ - lo_).cwiseMax(1e-12);
  for (int e = 0; e < mesh.n_elements(); ++e) {
    Eigen::Vector2d elo(1e300, 1e300), ehi = -elo;
    for (int v : mesh.triangles[e]) {
      elo = elo.cwiseMin(mesh.vertices[v]);
      ehi = ehi.cwiseMax(mesh.vertices[v]);
    }
    const int i0 = std::clamp(int((elo.x() - lo_.x()) / span.x() * nx_), 0, nx_ - 1);
    const int i1 = std::clamp(int((ehi.x() - lo_.x()) / span.x() * nx_), 0, nx_ - 1);
    const int j0 = std::clamp(int((elo.y() - lo_.y()) / span.y() * ny_), 0, ny_ - 1);
    const int j1 = std::clamp(int((ehi.y() - lo_.y()) / span.y() * ny_), 0, ny_ - 1);
    for (int j = j0; j <= j1; ++j)
      for (int i = i0; i <= i1; ++i)
        bins_[static_cast<size_t>(j) * nx_ + i].push_back(e);
  }
}

int MeshLocator::locate(const Eigen::Vector2d& x) const {
  const Eigen::Vector2d span = (hi_ - lo_).cwiseMax(1e-12);
  const int i = std::clamp(int((x.x() - lo_.x()) / span.x() * nx_), 0, nx_ - 1);
  const int j = std::clamp(int((x.y() - lo_.y()) / span.y() * ny_), 0, ny_ - 1);
  auto inside = [&](int e) {
    const auto& t = mesh_.triangles[e];
    const Eigen::Vector2d a = mesh_.vertices[t[0]];
    const Eigen::Matrix2d B = (Eigen::Matrix2d() << mesh_.vertices[t[1]] - a,
                               mesh_.vertices[t[2]] - a)
                                  .finished();
    const Eigen::Vector2d lam = B.inverse() * (x - a);
    return lam.x() >= -1e-10 && lam.y() >= -1e-10 && lam.sum() <= 1.0 + 1e-10;
  };
  for (int e : bins_[static_cast<size_t>(j) * nx_ + i])
    if (inside(e)) return e;
  for (int e = 0; e < mesh_.n_elements(); ++e)  // fallback sweep
    if (inside(e)) return e;
  return -1;
}

Eigen::Vector2d eval_post(const Mesh& mesh, const PostField& post,
                          const MeshLocator& loc, const Eigen::Vector2d& x) {
  const int e = loc.locate(x);
  if (e < 0) throw std::runtime_error("eval_post: point outside mesh");
  const ElementGeometry g = element_geometry(mesh, e);
  Eigen::Matrix2Xd xhat(2, 1);
  xhat.col(0) = g.jac_inv * (x - g.shift);
  const Eigen::MatrixXd vals = scalar_basis(post.k + 2).values(xhat);
  return vector_value(post.coeffs[e], vals.col(0));
}

Eigen::Matrix2d eval_post_gradient(const Mesh& mesh, const PostField& post,
                                   const MeshLocator& loc,
                                   const Eigen::Vector2d& x) {
  const int e = loc.locate(x);
  if (e < 0) throw std::runtime_error("eval_post_gradient: point outside mesh");
  const ElementGeometry g = element_geometry(mesh, e);
  Eigen::Matrix2Xd xhat(2, 1);
  xhat.col(0) = g.jac_inv * (x - g.shift);
  Eigen::MatrixXd gx, gy;
  scalar_basis(post.k + 2).gradients(xhat, gx, gy);
  return vector_gradient(post.coeffs[e], gx.col(0), gy.col(0), g.jac_inv_t);
}

EigenspaceDistances postprocessed_eigenspace_distance(
    const Mesh& coarse_mesh, const std::vector<PostField>& coarse,
    const Mesh& fine_mesh, const std::vector<PostField>& fine, int quad_degree) {
  const int k = coarse.at(0).k;
  const int qdeg = resolve_qdeg(k, quad_degree);
  const FeTables& T = fe_tables(k, qdeg);
  const MeshLocator locator(fine_mesh);
  const int m = static_cast<int>(coarse.size());
  const int mf = static_cast<int>(fine.size());

  // Gram matrices over the coarse quadrature, separately for L2 and the
  // broken H1 seminorm
  Eigen::MatrixXd Al2 = Eigen::MatrixXd::Zero(m, m), Ah1 = Al2;
  Eigen::MatrixXd Bl2 = Eigen::MatrixXd::Zero(m, mf), Bh1 = Bl2;
  Eigen::MatrixXd Cl2 = Eigen::MatrixXd::Zero(mf, mf), Ch1 = Cl2;

  for (int e = 0; e < coarse_mesh.n_elements(); ++e) {
    const ElementGeometry g = element_geometry(coarse_mesh, e);
    for (int q = 0; q < T.tri->size(); ++q) {
      const Eigen::Vector2d x = g.jac * T.tri->points.col(q) + g.shift;
      const double wq = g.det * T.tri->weights[q];
      std::vector<Eigen::Vector2d> cv(m), fv(mf);
      std::vector<Eigen::Matrix2d> cg(m), fg(mf);
      for (int i = 0; i < m; ++i) {
        cv[i] = vector_value(coarse[i].coeffs[e], T.Pk2.col(q));
        cg[i] = vector_gradient(coarse[i].coeffs[e], T.Gx_k2.col(q),
                                T.Gy_k2.col(q), g.jac_inv_t);
      }
      for (int i = 0; i < mf; ++i) {
        fv[i] = eval_post(fine_mesh, fine[i], locator, x);
        fg[i] = eval_post_gradient(fine_mesh, fine[i], locator, x);
      }
      for (int i = 0; i < m; ++i) {
        for (int j = 0; j < m; ++j) {
          Al2(i, j) += wq * cv[i].dot(cv[j]);
          Ah1(i, j) += wq * (cg[i].array() * cg[j].array()).sum();
        }
        for (int j = 0; j < mf; ++j) {
          Bl2(i, j) += wq * cv[i].dot(fv[j]);
          Bh1(i, j) += wq * (cg[i].array() * fg[j].array()).sum();
        }
      }
      for (int i = 0; i < mf; ++i)
        for (int j = 0; j < mf; ++j) {
          Cl2(i, j) += wq * fv[i].dot(fv[j]);
          Ch1(i, j) += wq * (fg[i].array() * fg[j].array()).sum();
        }
    }
  }

  auto gap = [](const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                const Eigen::MatrixXd& C) {
    // sup over unit v in span(coarse) of the best-approximation residual:
    // largest eigenvalue of (A - B C^{-1} B^t, A)
    const Eigen::MatrixXd S = A - B * C.ldlt().solve(B.transpose());
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(
        0.5 * (S + S.transpose()), A);
    const double v = es.eigenvalues().maxCoeff();
    return std::sqrt(std::max(0.0, v));
  };
  EigenspaceDistances d;
  d.l2 = gap(Al2, Bl2, Cl2);
  d.h1 = gap(Ah1, Bh1, Ch1);
  return d;
}

double richardson_reference(const std::vector<double>& lambdas, double order) {
  if (lambdas.size() < 2)
    throw std::invalid_argument("richardson_reference needs >= 2 levels");
  const double fine = lambdas.back();
  const double prev = lambdas[lambdas.size() - 2];
  return fine + (fine - prev) / (std::pow(2.0, order) - 1.0);
}

std::vector<double> StudyReport::orders_of(
    const std::function<double(const ErrorRow&)>& get) const {
  std::vector<double> orders;
  for (size_t i = 0; i + 1 < rows.size(); ++i) {
    const double e0 = get(rows[i]);
    const double e1 = get(rows[i + 1]);
    if (!(e0 > 1e-13) || !(e1 > 1e-13) || !(rows[i].h > 0) ||
        !(rows[i + 1].h > 0)) {
      orders.push_back(kNaN);
      continue;
    }
    orders.push_back(std::log(e0 / e1) / std::log(rows[i].h / rows[i + 1].h));
  }
  return orders;
}

namespace {

ErrorRow source_level_row(const StudyConfig& cfg, int cells,
                          const ManufacturedCase& mc) {
  const Mesh mesh = generate_structured_alfeld(cells, cfg.gamma1_sides());
  CondensedSolver solver(mesh, cfg.material, cfg.k,
                         {.quad_degree = cfg.quad_degree, .threads = cfg.threads,
                          .residual_tol = cfg.residual_tol});
  const LoadFn f = mc.load(cfg.material);
  const FieldSolution sol = solver.solve_source(f);
  PostField post;
  if (cfg.postprocess)
    post = postprocess_local(sol, solver.cache(), mesh, cfg.threads);
  const SourceErrors err = compute_source_errors(
      mesh, solver.cache(), sol, cfg.postprocess ? &post : nullptr, mc,
      cfg.material, cfg.quad_degree);
  ErrorRow row;
  row.level = cells;
  row.h = mesh.h_max();
  row.n_elem = mesh.n_elements();
  row.n_dofs = solver.system().dofmap.n_dofs;
  row.err_sigma_l2 = err.sigma_l2;
  row.err_rho_l2 = err.rho_l2;
  row.err_u_l2 = err.u_l2;
  row.err_pu_1h = err.pu_1h;
  row.err_post_h1 = err.post_h1;
  row.err_post_l2 = err.post_l2;
  row.stability_ratio = err.stability_ratio;
  row.lambda_s = cfg.material.lambda_s;
  return row;
}

}  // namespace

StudyReport run_convergence_study(const StudyConfig& cfg) {
  StudyReport report;
  report.study = "convergence";
  const bool eigen = cfg.problem == "eigen";

  if (!eigen) {
    const ManufacturedCase& mc = find_case(cfg.case_name);
    for (int cells : cfg.levels) report.rows.push_back(source_level_row(cfg, cells, mc));
    return report;
  }

  // eigen study: eigenvalues + postprocessed eigenspaces per level
  const int m = cfg.multiplicity;
  std::vector<Mesh> meshes;
  std::vector<std::vector<PostField>> posts;
  std::vector<double> lambda_avg;
  for (int cells : cfg.levels) {
    meshes.push_back(generate_structured_alfeld(cells, cfg.gamma1_sides()));
    const Mesh& mesh = meshes.back();
    CondensedSolver solver(mesh, cfg.material, cfg.k,
                           {.quad_degree = cfg.quad_degree, .threads = cfg.threads,
                          .residual_tol = cfg.residual_tol});
    EigenOptions opt;
    opt.num = m;
    opt.newton_rtol = cfg.newton_rtol;
    opt.use_derivative = cfg.newton_use_derivative;
    opt.dense_pencil_cap = cfg.dense_pencil_cap;
    opt.seed = cfg.seed;
    const auto results = solve_eigenproblem(solver, opt);
    double lam = 0, lamt = 0;
    int iters = 0;
    double resid = 0, sig = 1.0;
    std::vector<PostField> level_posts;
    for (const auto& r : results) {
      lam += r.lambda_h / m;
      lamt += r.lambda_tilde / m;
      iters = std::max(iters, r.iterations);
      resid = std::max(resid, r.residual);
      sig = std::min(sig, r.min_resolvent_sigma);
      level_posts.push_back(
          postprocess_local(r.fields, solver.cache(), mesh, cfg.threads));
    }
    posts.push_back(std::move(level_posts));
    lambda_avg.push_back(lam);
    ErrorRow row;
    row.level = cells;
    row.h = mesh.h_max();
    row.n_elem = mesh.n_elements();
    row.n_dofs = solver.system().dofmap.n_dofs;
    row.lambda_h = lam;
    row.lambda_tilde = lamt;
    row.gap = std::abs(lam - lamt);
    row.newton_iters = iters;
    row.newton_residual = resid;
    row.min_resolvent_sigma = sig;
    row.lambda_s = cfg.material.lambda_s;
    report.rows.push_back(row);
  }

  const double order = cfg.k + 2;
  if (lambda_avg.size() >= 2) {
    report.lambda_ref = richardson_reference(lambda_avg, order);
    if (lambda_avg.size() >= 3) {
      std::vector<double> prev(lambda_avg.begin(), lambda_avg.end() - 1);
      report.lambda_ref_alt = richardson_reference(prev, order);
    }
    for (auto& row : report.rows)
      row.err_lambda = std::abs(row.lambda_h - report.lambda_ref);
  }
  // postprocessed eigenspace distances against the finest level
  if (cfg.postprocess && meshes.size() >= 2) {
    const size_t fin = meshes.size() - 1;
    for (size_t l = 0; l + 1 <= fin && l < fin; ++l) {
      const auto d = postprocessed_eigenspace_distance(
          meshes[l], posts[l], meshes[fin], posts[fin], cfg.quad_degree);
      report.rows[l].err_post_h1 = d.h1;
      report.rows[l].err_post_l2 = d.l2;
    }
  }
  return report;
}

StudyReport run_locking_study(const StudyConfig& cfg) {
  const ManufacturedCase& mc = find_case(cfg.case_name);
  if (!mc.divergence_free)
    throw std::invalid_argument(
        "locking study requires a divergence_free manufactured case");
  StudyReport report;
  report.study = "locking";
  const int cells = cfg.mesh_is_builtin() ? cfg.builtin_cells() : 8;
  const Mesh mesh = generate_structured_alfeld(cells, cfg.gamma1_sides());
  for (double lam : cfg.lambda_sweep) {
    StudyConfig level_cfg = cfg;
    level_cfg.material.lambda_s = lam;
    CondensedSolver solver(mesh, level_cfg.material, cfg.k,
                           {.quad_degree = cfg.quad_degree, .threads = cfg.threads,
                          .residual_tol = cfg.residual_tol});
    const LoadFn f = mc.load(level_cfg.material);
    const FieldSolution sol = solver.solve_source(f);
    PostField post;
    if (cfg.postprocess)
      post = postprocess_local(sol, solver.cache(), mesh, cfg.threads);
    const SourceErrors err = compute_source_errors(
        mesh, solver.cache(), sol, cfg.postprocess ? &post : nullptr, mc,
        level_cfg.material, cfg.quad_degree);
    ErrorRow row;
    row.level = cells;
    row.h = mesh.h_max();
    row.n_elem = mesh.n_elements();
    row.n_dofs = solver.system().dofmap.n_dofs;
    row.err_sigma_l2 = err.sigma_l2;
    row.err_rho_l2 = err.rho_l2;
    row.err_u_l2 = err.u_l2;
    row.err_pu_1h = err.pu_1h;
    row.err_post_h1 = err.post_h1;
    row.err_post_l2 = err.post_l2;
    row.stability_ratio = err.stability_ratio;
    row.lambda_s = lam;
    if (cfg.problem == "eigen") {
      EigenOptions opt;
      opt.num = 1;
      opt.newton_rtol = cfg.newton_rtol;
      opt.dense_pencil_cap = cfg.dense_pencil_cap;
      opt.seed = cfg.seed;
      const auto res = solve_eigenproblem(solver, opt);
      row.lambda_h = res[0].lambda_h;
      row.lambda_tilde = res[0].lambda_tilde;
    }
    report.rows.push_back(row);
  }
  return report;
}

StudyReport run_gap_study(const StudyConfig& cfg) {
  StudyReport report;
  report.study = "gap";
  for (int cells : cfg.levels) {
    const Mesh mesh = generate_structured_alfeld(cells, cfg.gamma1_sides());
    CondensedSolver solver(mesh, cfg.material, cfg.k,
                           {.quad_degree = cfg.quad_degree, .threads = cfg.threads,
                          .residual_tol = cfg.residual_tol});
    EigenOptions opt;
    opt.num = 1;
    opt.newton_rtol = cfg.newton_rtol;
    opt.use_derivative = cfg.newton_use_derivative;
    opt.dense_pencil_cap = cfg.dense_pencil_cap;
    opt.seed = cfg.seed;
    const auto res = solve_eigenproblem(solver, opt);
    ErrorRow row;
    row.level = cells;
    row.h = mesh.h_max();
    row.n_elem = mesh.n_elements();
    row.n_dofs = solver.system().dofmap.n_dofs;
    row.lambda_h = res[0].lambda_h;
    row.lambda_tilde = res[0].lambda_tilde;
    row.gap = std::abs(res[0].lambda_h - res[0].lambda_tilde);
    row.newton_iters = res[0].iterations;
    row.newton_residual = res[0].residual;
    row.min_resolvent_sigma = res[0].min_resolvent_sigma;
    report.rows.push_back(row);
  }
  return report;
}

namespace {

std::string fmt(double v) {
  if (std::isnan(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::string fmt_order(double e0, double e1, double h0, double h1) {
  if (!(h0 > 0) || !(h1 > 0) || std::isnan(e0) || std::isnan(e1)) return "";
  if (!(e0 > 1e-13) || !(e1 > 1e-13)) return "exact";
  return fmt(std::log(e0 / e1) / std::log(h0 / h1));
}

}  // namespace

void write_study_csv(const StudyReport& report, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path);
  const auto& rows = report.rows;
  if (report.study == "gap") {
    os << "level,h,n_elem,n_dofs,lambda_tilde,lambda_h,gap,order_gap,"
          "newton_iters,residual,min_resolvent_sigma\n";
    for (size_t i = 0; i < rows.size(); ++i) {
      const auto& r = rows[i];
      os << r.level << "," << fmt(r.h) << "," << r.n_elem << "," << r.n_dofs << ","
         << fmt(r.lambda_tilde) << "," << fmt(r.lambda_h) << "," << fmt(r.gap)
         << ","
         << (i ? fmt_order(rows[i - 1].gap, r.gap, rows[i - 1].h, r.h) : "")
         << "," << r.newton_iters << "," << fmt(r.newton_residual) << ","
         << fmt(r.min_resolvent_sigma) << "\n";
    }
    return;
  }
  if (report.study == "locking") {
    os << "lambda_s,level,h,n_elem,n_dofs,err_sigma_l2,err_rho_l2,err_u_l2,"
          "err_Pu_1h,err_post_h1,err_post_l2,stability_ratio,lambda_h,"
          "lambda_tilde\n";
    for (const auto& r : rows)
      os << fmt(r.lambda_s) << "," << r.level << "," << fmt(r.h) << ","
         << r.n_elem << "," << r.n_dofs << "," << fmt(r.err_sigma_l2) << ","
         << fmt(r.err_rho_l2) << "," << fmt(r.err_u_l2) << ","
         << fmt(r.err_pu_1h) << "," << fmt(r.err_post_h1) << ","
         << fmt(r.err_post_l2) << "," << fmt(r.stability_ratio) << ","
         << fmt(r.lambda_h) << "," << fmt(r.lambda_tilde) << "\n";
    return;
  }
  os << "level,h,n_elem,n_dofs,err_sigma_l2,err_rho_l2,err_u_l2,err_Pu_1h,"
        "err_post_h1,err_post_l2,err_lambda,lambda_h,lambda_tilde,"
        "order_sigma_l2,order_rho_l2,order_u_l2,order_Pu_1h,order_post_h1,"
        "order_post_l2,order_lambda\n";
  for (size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    os << r.level << "," << fmt(r.h) << "," << r.n_elem << "," << r.n_dofs << ","
       << fmt(r.err_sigma_l2) << "," << fmt(r.err_rho_l2) << ","
       << fmt(r.err_u_l2) << "," << fmt(r.err_pu_1h) << ","
       << fmt(r.err_post_h1) << "," << fmt(r.err_post_l2) << ","
       << fmt(r.err_lambda) << "," << fmt(r.lambda_h) << ","
       << fmt(r.lambda_tilde) << ",";
    auto ord = [&](double ErrorRow::* field) {
      return i ? fmt_order(rows[i - 1].*field, r.*field, rows[i - 1].h, r.h)
               : std::string();
    };
    os << ord(&ErrorRow::err_sigma_l2) << "," << ord(&ErrorRow::err_rho_l2) << ","
       << ord(&ErrorRow::err_u_l2) << "," << ord(&ErrorRow::err_pu_1h) << ","
       << ord(&ErrorRow::err_post_h1) << "," << ord(&ErrorRow::err_post_l2) << ","
       << ord(&ErrorRow::err_lambda) << "\n";
  }
}

}  // namespace wsym
