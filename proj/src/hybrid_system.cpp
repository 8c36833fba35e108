// Copyright (c) the wsym contributors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#include "wsym/hybrid_system.hpp"

#include <stdexcept>

#include "wsym/parallel.hpp"

namespace wsym {

namespace {

std::vector<int> element_global_dofs(const Mesh& mesh, const MultiplierDofMap& map,
                                     int elem, const std::vector<int>& mult_faces) {
  std::vector<int> dofs;
  dofs.reserve(mult_faces.size() * map.modes_per_face);
  for (int lf : mult_faces) {
    const int face = mesh.element_to_faces[elem][lf];
    const int off = map.face_offset[face];
    for (int m = 0; m < map.modes_per_face; ++m) dofs.push_back(off + m);
  }
  return dofs;
}

}  // namespace

MultiplierDofMap MultiplierDofMap::build(const Mesh& mesh, int k) {
  MultiplierDofMap map;
  map.k = k;
  map.modes_per_face = 2 * (k + 2);
  map.face_offset.assign(mesh.n_faces(), -1);
  int next = 0;
  for (int f = 0; f < mesh.n_faces(); ++f) {
    if (mesh.faces[f].tag == FaceTag::Dirichlet) continue;
    map.face_offset[f] = next;
    next += map.modes_per_face;
  }
  map.n_dofs = next;
  return map;
}

CondensedSystem assemble_condensed(const LocalSolverCache& cache, const Mesh& mesh,
                                   int threads) {
  CondensedSystem sys;
  sys.dofmap = MultiplierDofMap::build(mesh, cache.k);

  const int ne = mesh.n_elements();
  std::vector<Eigen::MatrixXd> a_loc(ne), m_loc(ne);
  parallel_for(ne, threads, [&](int e) {
    const ElementCache& ec = cache.elements[e];
    // a_h = (A Q1 mu, Q1 nu): det Q1'^t Q1' in the scaled stress variable
    a_loc[e] = ec.geom.det * (ec.Q1.transpose() * ec.Q1);
    m_loc[e] = (ec.params.rho_s * ec.geom.det) * (ec.Q2.transpose() * ec.Q2);
  });

  std::vector<Eigen::Triplet<double>> ta, tm;
  for (int e = 0; e < ne; ++e) {
    const auto dofs =
        element_global_dofs(mesh, sys.dofmap, e, cache.elements[e].blocks.mult_faces);
    for (size_t i = 0; i < dofs.size(); ++i)
      for (size_t j = 0; j < dofs.size(); ++j) {
        ta.emplace_back(dofs[i], dofs[j], a_loc[e](i, j));
        tm.emplace_back(dofs[i], dofs[j], m_loc[e](i, j));
      }
  }
  sys.a_h.resize(sys.dofmap.n_dofs, sys.dofmap.n_dofs);
  sys.a_h.setFromTriplets(ta.begin(), ta.end());
  sys.m0.resize(sys.dofmap.n_dofs, sys.dofmap.n_dofs);
  sys.m0.setFromTriplets(tm.begin(), tm.end());
  return sys;
}

Eigen::VectorXd project_load_on_element(const ElementCache& entry,
                                        const FeTables& tables, const LoadFn& f) {
  const int Dk = poly_space_dim(tables.k);
  const int Q = tables.tri->size();
  Eigen::VectorXd c = Eigen::VectorXd::Zero(2 * Dk);
  for (int q = 0; q < Q; ++q) {
    const Eigen::Vector2d x =
        entry.geom.jac * tables.tri->points.col(q) + entry.geom.shift;
    const Eigen::Vector2d fv = f(x);
    const double w = tables.tri->weights[q];
    c.head(Dk) += w * fv[0] * tables.Wk.col(q);
    c.tail(Dk) += w * fv[1] * tables.Wk.col(q);
  }
  return c;  // (f, w_a)_K / det: the det from the map cancels the mass det
}

Eigen::VectorXd assemble_load(const LocalSolverCache& cache, const Mesh& mesh,
                              const MultiplierDofMap& dofmap, const LoadFn& f,
                              int threads) {
  const FeTables& tables = fe_tables(cache.k, cache.quad_degree);
  const int ne = mesh.n_elements();
  std::vector<Eigen::VectorXd> b_loc(ne);
  parallel_for(ne, threads, [&](int e) {
    const ElementCache& ec = cache.elements[e];
    const Eigen::VectorXd c = project_load_on_element(ec, tables, f);
    // b_h(mu) = (rho f, Q2 mu)_K = rho det (Q2 mu)^t c
    b_loc[e] = (ec.params.rho_s * ec.geom.det) * (ec.Q2.transpose() * c);
  });
  Eigen::VectorXd b = Eigen::VectorXd::Zero(dofmap.n_dofs);
  for (int e = 0; e < ne; ++e) {
    const auto dofs =
        element_global_dofs(mesh, dofmap, e, cache.elements[e].blocks.mult_faces);
    for (size_t i = 0; i < dofs.size(); ++i) b[dofs[i]] += b_loc[e][i];
  }
  return b;
}

Eigen::SparseMatrix<double> assemble_mass_lambda(const LocalSolverCache& cache,
                                                 const Mesh& mesh,
                                                 const MultiplierDofMap& dofmap,
                                                 double lambda,
                                                 double* min_resolvent_sigma,
                                                 int threads) {
  const int ne = mesh.n_elements();
  std::vector<Eigen::MatrixXd> m_loc(ne);
  std::vector<double> sig(ne, 1.0);
  parallel_for(ne, threads, [&](int e) {
    const ElementCache& ec = cache.elements[e];
    const LocalResolvent res(ec, lambda, e);
    sig[e] = res.sigma_min();
    m_loc[e] = (ec.params.rho_s * ec.geom.det) *
               (ec.Q2.transpose() * res.apply(Eigen::MatrixXd(ec.Q2)));
  });
  if (min_resolvent_sigma) {
    double s = 1.0;
    for (double v : sig) s = std::min(s, v);
    *min_resolvent_sigma = s;
  }
  std::vector<Eigen::Triplet<double>> tm;
  for (int e = 0; e < ne; ++e) {
    const auto dofs =
        element_global_dofs(mesh, dofmap, e, cache.elements[e].blocks.mult_faces);
    for (size_t i = 0; i < dofs.size(); ++i)
      for (size_t j = 0; j < dofs.size(); ++j)
        tm.emplace_back(dofs[i], dofs[j], m_loc[e](i, j));
  }
  Eigen::SparseMatrix<double> m(dofmap.n_dofs, dofmap.n_dofs);
  m.setFromTriplets(tm.begin(), tm.end());
  return m;
}

double mass_lambda_derivative_form(const LocalSolverCache& cache, const Mesh& mesh,
                                   const MultiplierDofMap& dofmap, double lambda,
                                   const Eigen::VectorXd& gamma) {
  // gamma^t B'(lambda) gamma with B' = Q2^t R Q2L R Q2 (rho det weighted)
  double acc = 0.0;
  for (int e = 0; e < mesh.n_elements(); ++e) {
    const ElementCache& ec = cache.elements[e];
    const auto dofs = element_global_dofs(mesh, dofmap, e, ec.blocks.mult_faces);
    Eigen::VectorXd gloc(dofs.size());
    for (size_t i = 0; i < dofs.size(); ++i) gloc[i] = gamma[dofs[i]];
    const LocalResolvent res(ec, lambda, e);
    const Eigen::VectorXd w = res.apply(Eigen::VectorXd(ec.Q2 * gloc));
    acc += ec.params.rho_s * ec.geom.det * w.dot(ec.Q2L * w);
  }
  return acc;
}

FieldSolution recover_fields(const LocalSolverCache& cache, const Mesh& mesh,
                             const MultiplierDofMap& dofmap,
                             const Eigen::VectorXd& gamma,
                             const std::optional<RecoverSource>& source,
                             const std::optional<RecoverEigen>& eigen,
                             int threads, double residual_tol) {
  if (source.has_value() == eigen.has_value())
    throw std::invalid_argument("recover_fields: choose source or eigen mode");
  const FeTables& tables = fe_tables(cache.k, cache.quad_degree);
  const int ne = mesh.n_elements();
  FieldSolution sol;
  sol.k = cache.k;
  sol.gamma = gamma;
  sol.sigma.resize(ne);
  sol.u.resize(ne);
  sol.rho.resize(ne);

  std::vector<double> local_res(ne, 0.0);
  Eigen::VectorXd jump = Eigen::VectorXd::Zero(dofmap.n_dofs);
  std::vector<Eigen::VectorXd> jump_loc(ne);
  double sigma_scale = 0.0;

  parallel_for(ne, threads, [&](int e) {
    const ElementCache& ec = cache.elements[e];
    const auto dofs = element_global_dofs(mesh, dofmap, e, ec.blocks.mult_faces);
    Eigen::VectorXd gloc(dofs.size());
    for (size_t i = 0; i < dofs.size(); ++i) gloc[i] = gamma[dofs[i]];

    Eigen::VectorXd s, u, r, rhs_b;
    if (source) {
      const Eigen::VectorXd c = project_load_on_element(ec, tables, *source->f);
      s = ec.unprime_stress(Eigen::VectorXd(ec.Q1 * gloc + ec.Q1L * c));
      u = ec.Q2 * gloc + ec.Q2L * c;
      r = ec.Q3 * gloc + ec.Q3L * c;
      rhs_b = -ec.params.rho_s * ec.geom.det * c;  // B s = -rho (f, w_a)
    } else {
      const double lambda = eigen->lambda;
      const LocalResolvent res(ec, lambda, e);
      u = res.apply(Eigen::VectorXd(ec.Q2 * gloc));
      s = ec.unprime_stress(
          Eigen::VectorXd(ec.Q1 * gloc + lambda * (ec.Q1L * u)));
      r = ec.Q3 * gloc + lambda * (ec.Q3L * u);
      rhs_b = -ec.params.rho_s * eigen->lambda * ec.geom.det * u;
    }

    // hybrid equations (a)-(c) on this element
    const Eigen::VectorXd res_a = ec.blocks.A * s + ec.blocks.B.transpose() * u +
                                  ec.blocks.C.transpose() * r + ec.blocks.D * gloc;
    const Eigen::VectorXd res_b = ec.blocks.B * s - rhs_b;
    const Eigen::VectorXd res_c = ec.blocks.C * s;
    const double scale =
        ec.blocks.A.norm() * std::max(1.0, s.norm()) + ec.geom.det;
    local_res[e] = std::max({res_a.norm(), res_b.norm(), res_c.norm()}) / scale;
    jump_loc[e] = ec.blocks.D.transpose() * s;  // equation (d) contribution

    sol.sigma[e] = std::move(s);
    sol.u[e] = std::move(u);
    sol.rho[e] = std::move(r);
  });

  for (int e = 0; e < ne; ++e) {
    const auto dofs =
        element_global_dofs(mesh, dofmap, e, cache.elements[e].blocks.mult_faces);
    for (size_t i = 0; i < dofs.size(); ++i) jump[dofs[i]] += jump_loc[e][i];
    sol.max_local_residual = std::max(sol.max_local_residual, local_res[e]);
    sigma_scale += cache.elements[e].geom.det * sol.sigma[e].squaredNorm();
  }
  sigma_scale = std::sqrt(sigma_scale);
  sol.max_jump_residual =
      dofmap.n_dofs == 0
          ? 0.0
          : jump.cwiseAbs().maxCoeff() / std::max(1e-300, sigma_scale);
  if (sol.max_local_residual > residual_tol || sol.max_jump_residual > residual_tol)
    throw std::runtime_error(
        "recover_fields: hybrid residual check failed (local " +
        std::to_string(sol.max_local_residual) + ", jump " +
        std::to_string(sol.max_jump_residual) + " vs tol " +
        std::to_string(residual_tol) + ")");
  return sol;
}

FullKkt assemble_full_kkt(const LocalSolverCache& cache, const Mesh& mesh,
                          const MultiplierDofMap& dofmap, int cap) {
  FullKkt kkt;
  kkt.k = cache.k;
  const int D1 = poly_space_dim(cache.k + 1);
  const int NS = 4 * D1, NW = 2 * poly_space_dim(cache.k), NR = D1;
  const int per_elem = NS + NW + NR;
  kkt.elem_offset.resize(mesh.n_elements());
  for (int e = 0; e < mesh.n_elements(); ++e) kkt.elem_offset[e] = e * per_elem;
  kkt.gamma_offset = mesh.n_elements() * per_elem;
  kkt.n = kkt.gamma_offset + dofmap.n_dofs;
  if (kkt.n > cap)
    throw std::runtime_error("assemble_full_kkt: " + std::to_string(kkt.n) +
                             " unknowns exceed the oracle cap " +
                             std::to_string(cap));

  std::vector<Eigen::Triplet<double>> trip;
  auto add_block = [&](int row0, int col0, const Eigen::MatrixXd& blk) {
    for (int i = 0; i < blk.rows(); ++i)
      for (int j = 0; j < blk.cols(); ++j)
        if (blk(i, j) != 0.0) trip.emplace_back(row0 + i, col0 + j, blk(i, j));
  };
  for (int e = 0; e < mesh.n_elements(); ++e) {
    const ElementCache& ec = cache.elements[e];
    const int so = kkt.elem_offset[e];
    const int uo = so + NS;
    const int ro = uo + NW;
    add_block(so, so, ec.blocks.A);
    add_block(so, uo, ec.blocks.B.transpose());
    add_block(so, ro, ec.blocks.C.transpose());
    add_block(uo, so, ec.blocks.B);
    add_block(ro, so, ec.blocks.C);
    const auto dofs = element_global_dofs(mesh, dofmap, e, ec.blocks.mult_faces);
    for (int i = 0; i < NS; ++i)
      for (size_t j = 0; j < dofs.size(); ++j)
        if (ec.blocks.D(i, j) != 0.0) {
          trip.emplace_back(so + i, kkt.gamma_offset + dofs[j], ec.blocks.D(i, j));
          trip.emplace_back(kkt.gamma_offset + dofs[j], so + i, ec.blocks.D(i, j));
        }
  }
  kkt.mat.resize(kkt.n, kkt.n);
  kkt.mat.setFromTriplets(trip.begin(), trip.end());
  return kkt;
}

Eigen::VectorXd kkt_rhs_source(const LocalSolverCache& cache, const Mesh& mesh,
                               const FullKkt& kkt, const LoadFn& f) {
  const FeTables& tables = fe_tables(cache.k, cache.quad_degree);
  const int D1 = poly_space_dim(cache.k + 1);
  const int NS = 4 * D1, NW = 2 * poly_space_dim(cache.k);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(kkt.n);
  for (int e = 0; e < mesh.n_elements(); ++e) {
    const ElementCache& ec = cache.elements[e];
    const Eigen::VectorXd c = project_load_on_element(ec, tables, f);
    rhs.segment(kkt.elem_offset[e] + NS, NW) = -ec.params.rho_s * ec.geom.det * c;
  }
  return rhs;
}

FieldSolution unpack_kkt_solution(const LocalSolverCache& cache, const Mesh& mesh,
                                  const FullKkt& kkt, const Eigen::VectorXd& x) {
  const int D1 = poly_space_dim(kkt.k);
  (void)D1;
  const int NS = 4 * poly_space_dim(kkt.k + 1);
  const int NW = 2 * poly_space_dim(kkt.k);
  const int NR = poly_space_dim(kkt.k + 1);
  FieldSolution sol;
  sol.k = kkt.k;
  sol.gamma = x.tail(kkt.n - kkt.gamma_offset);
  for (int e = 0; e < mesh.n_elements(); ++e) {
    const int so = kkt.elem_offset[e];
    sol.sigma.push_back(x.segment(so, NS));
    sol.u.push_back(x.segment(so + NS, NW));
    sol.rho.push_back(x.segment(so + NS + NW, NR));
  }
  (void)cache;
  return sol;
}

}  // namespace wsym
