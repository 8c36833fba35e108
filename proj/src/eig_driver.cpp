// Copyright (c) the wsym contributors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#include "wsym/eig_driver.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <random>
#include <stdexcept>

#include "wsym/parallel.hpp"

namespace wsym {

PencilSolver::PencilSolver(const Eigen::SparseMatrix<double>& a, int dense_cap,
                           std::uint64_t seed)
    : n_(static_cast<int>(a.rows())), seed_(seed) {
  dense_ = n_ <= dense_cap;
  if (dense_) {
    const Eigen::MatrixXd ad(a);
    Eigen::LLT<Eigen::MatrixXd> llt(ad);
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("pencil: a_h is not positive definite");
    dense_l_ = llt.matrixL();
  } else {
    sparse_ = std::make_unique<Eigen::SimplicialLLT<Eigen::SparseMatrix<double>>>();
    sparse_->compute(a);
    if (sparse_->info() != Eigen::Success)
      throw std::runtime_error("pencil: a_h is not positive definite");
  }
}

namespace {

// Lanczos with full reorthogonalization for the largest eigenvalues of a
// symmetric operator.
void lanczos_largest(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& op,
                     int n, int count, std::uint64_t seed,
                     Eigen::VectorXd& values, Eigen::MatrixXd& vectors) {
  const int want = count;
  const int max_iter = std::min(n, std::max(80, 8 * want + 60));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  Eigen::MatrixXd V(n, max_iter + 1);
  Eigen::VectorXd alpha(max_iter), beta(max_iter + 1);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = gauss(rng);
  v.normalize();
  V.col(0) = v;
  beta[0] = 0.0;
  int m = 0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  for (int j = 0; j < max_iter; ++j) {
    Eigen::VectorXd w = op(V.col(j));
    alpha[j] = V.col(j).dot(w);
    w -= alpha[j] * V.col(j);
    if (j > 0) w -= beta[j] * V.col(j - 1);
    // full reorthogonalization, twice
    for (int pass = 0; pass < 2; ++pass)
      w -= V.leftCols(j + 1) * (V.leftCols(j + 1).transpose() * w);
    beta[j + 1] = w.norm();
    m = j + 1;
    const bool breakdown = beta[j + 1] < 1e-14 * std::abs(alpha.head(m).cwiseAbs().maxCoeff());
    if (!breakdown && j + 1 < max_iter) V.col(j + 1) = w / beta[j + 1];

    const bool last = breakdown || j + 1 == max_iter;
    if (m >= want + 2 && (m % 10 == 0 || last)) {
      Eigen::MatrixXd T = Eigen::MatrixXd::Zero(m, m);
      for (int i = 0; i < m; ++i) {
        T(i, i) = alpha[i];
        if (i + 1 < m) T(i, i + 1) = T(i + 1, i) = beta[i + 1];
      }
      es.compute(T);
      const double scale = es.eigenvalues().cwiseAbs().maxCoeff();
      bool done = true;
      for (int t = 0; t < want; ++t) {
        const int col = m - 1 - t;  // largest Ritz values
        const double resid = std::abs(beta[m] * es.eigenvectors()(m - 1, col));
        if (resid > 1e-12 * std::max(scale, 1e-30)) {
          done = false;
          break;
        }
      }
      if (done || last) {
        values.resize(want);
        vectors.resize(n, want);
        for (int t = 0; t < want; ++t) {
          const int col = m - 1 - t;
          values[t] = es.eigenvalues()[col];
          vectors.col(t) = V.leftCols(m) * es.eigenvectors().col(col);
        }
        if (!done)
          throw std::runtime_error("lanczos: pencil eigensolve did not converge");
        return;
      }
    }
    if (breakdown) {
      // invariant subspace hit; deterministic restart direction
      Eigen::VectorXd r(n);
      for (int i = 0; i < n; ++i) r[i] = gauss(rng);
      for (int pass = 0; pass < 2; ++pass)
        r -= V.leftCols(m) * (V.leftCols(m).transpose() * r);
      const double rn = r.norm();
      if (rn < 1e-12) throw std::runtime_error("lanczos: space exhausted");
      V.col(j + 1) = r / rn;
      beta[j + 1] = 0.0;
    }
  }
  throw std::runtime_error("lanczos: iteration limit reached");
}

}  // namespace

PencilSolver::Eigs PencilSolver::smallest(const Eigen::SparseMatrix<double>& b,
                                          int count) const {
  Eigs out;
  if (dense_) {
    const Eigen::MatrixXd bd(b);
    // C = L^{-1} B L^{-t}
    Eigen::MatrixXd t1 = dense_l_.triangularView<Eigen::Lower>().solve(bd);
    Eigen::MatrixXd c = dense_l_.triangularView<Eigen::Lower>()
                            .solve(t1.transpose())
                            .transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (c + c.transpose()));
    const Eigen::VectorXd nu = es.eigenvalues();  // ascending
    const double numax = nu.cwiseAbs().maxCoeff();
    int finite = 0;
    for (int i = 0; i < nu.size(); ++i)
      if (nu[i] > 1e-12 * numax) ++finite;
    if (count > finite)
      throw std::runtime_error(
          "pencil: requested count exceeds the number of finite eigenvalues (" +
          std::to_string(finite) + ")");
    out.thetas.resize(count);
    out.gammas.resize(n_, count);
    for (int t = 0; t < count; ++t) {
      const int col = static_cast<int>(nu.size()) - 1 - t;
      const double v = nu[col];
      out.thetas[t] = 1.0 / v;
      // gamma = L^{-t} y / sqrt(nu): B-orthonormal
      Eigen::VectorXd g = dense_l_.transpose()
                              .triangularView<Eigen::Upper>()
                              .solve(es.eigenvectors().col(col));
      out.gammas.col(t) = g / std::sqrt(v);
    }
    return out;
  }

  // sparse path: P a P^t = L L^t
  const auto& llt = *sparse_;
  const Eigen::SparseMatrix<double> L = llt.matrixL();
  const auto& P = llt.permutationP();
  auto op = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    Eigen::VectorXd t = L.transpose().triangularView<Eigen::Upper>().solve(x);
    Eigen::VectorXd s = P * Eigen::VectorXd(b * (P.transpose() * t));
    return L.triangularView<Eigen::Lower>().solve(s);
  };
  Eigen::VectorXd nu;
  Eigen::MatrixXd y;
  lanczos_largest(op, n_, count, seed_, nu, y);
  out.thetas.resize(count);
  out.gammas.resize(n_, count);
  for (int t = 0; t < count; ++t) {
    if (nu[t] <= 0.0)
      throw std::runtime_error("pencil: nonpositive eigenvalue in Lanczos window");
    out.thetas[t] = 1.0 / nu[t];
    Eigen::VectorXd g =
        P.transpose() *
        Eigen::VectorXd(L.transpose().triangularView<Eigen::Upper>().solve(y.col(t)));
    out.gammas.col(t) = g / std::sqrt(nu[t]);
  }
  return out;
}

std::vector<LinearEigenPair> solve_linear_condensed(const CondensedSolver& solver,
                                                    const PencilSolver& pencil,
                                                    int count) {
  const auto eigs = pencil.smallest(solver.system().m0, count);
  std::vector<LinearEigenPair> out(count);
  for (int i = 0; i < count; ++i) {
    out[i].lambda_tilde = eigs.thetas[i];
    out[i].gamma = eigs.gammas.col(i);
  }
  return out;
}

namespace {

double m0_inner(const Eigen::SparseMatrix<double>& m0, const Eigen::VectorXd& a,
                const Eigen::VectorXd& b) {
  return a.dot(m0 * b);
}

}  // namespace

EigenResult solve_nonlinear(const CondensedSolver& solver,
                            const PencilSolver& pencil, int index,
                            const LinearEigenPair& init, const EigenOptions& opt) {
  const auto& cache = solver.cache();
  const auto& mesh = solver.mesh();
  const auto& dofmap = solver.system().dofmap;
  const auto& m0 = solver.system().m0;

  EigenResult res;
  res.index = index;
  res.lambda_tilde = init.lambda_tilde;

  double lambda = init.lambda_tilde;
  Eigen::VectorXd gamma_track = init.gamma;
  const int window = index + 3;  // tracked index plus a cluster buffer

  double prev_lambda = 0.0, prev_g = 0.0;
  bool have_prev = false;

  for (int it = 1; it <= opt.max_iterations; ++it) {
    double sigmin = 1.0;
    const Eigen::SparseMatrix<double> bl = assemble_mass_lambda(
        cache, mesh, dofmap, lambda, &sigmin, solver.threads());
    res.min_resolvent_sigma = std::min(res.min_resolvent_sigma, sigmin);
    const auto eigs = pencil.smallest(bl, window);

    // track the eigenbranch by maximal M0 overlap with the previous vector
    int best = index;
    double best_overlap = 0.0;
    const double tnorm = std::sqrt(m0_inner(m0, gamma_track, gamma_track));
    for (int j = 0; j < window; ++j) {
      const Eigen::VectorXd gj = eigs.gammas.col(j);
      const double ov = std::abs(m0_inner(m0, gamma_track, gj)) /
                        std::max(1e-300, tnorm * std::sqrt(m0_inner(m0, gj, gj)));
      if (ov > best_overlap) {
        best_overlap = ov;
        best = j;
      }
    }
    res.tracking_overlap = best_overlap;
    const double theta = eigs.thetas[best];
    // cluster diagnostics at this iterate
    res.cluster_width = 0.0;
    for (int j = 0; j < window; ++j) {
      if (j == best) continue;
      const double sep = std::abs(eigs.thetas[j] - theta) / std::max(theta, 1e-300);
      if (sep < opt.cluster_rtol) {
        res.cluster_flag = true;
        res.cluster_width = std::max(res.cluster_width, sep);
      }
    }

    const Eigen::VectorXd gamma = eigs.gammas.col(best);
    const double g = theta - lambda;
    res.iterations = it;
    res.residual = std::abs(g) / std::max(std::abs(lambda), 1e-300);
    gamma_track = gamma;

    if (res.residual <= opt.newton_rtol) {
      lambda = theta;
      // M0-normalize the reported eigenvector
      res.gamma = gamma / std::sqrt(m0_inner(m0, gamma, gamma));
      res.lambda_h = lambda;
      res.fields = recover_fields(cache, mesh, dofmap, res.gamma, std::nullopt,
                                  RecoverEigen{lambda}, solver.threads());
      return res;
    }

    double step;
    if (opt.use_derivative) {
      // theta'(lambda) = -theta (gamma^t B' gamma) / (gamma^t B gamma);
      // gamma is B-orthonormal, so the denominator is 1
      const double bprime =
          mass_lambda_derivative_form(cache, mesh, dofmap, lambda, gamma);
      const double gprime = -theta * bprime - 1.0;
      step = -g / gprime;
    } else if (have_prev && std::abs(g - prev_g) > 1e-300) {
      step = -g * (lambda - prev_lambda) / (g - prev_g);
    } else {
      step = g;  // fixed-point move theta - lambda
    }
    prev_lambda = lambda;
    prev_g = g;
    have_prev = true;
    lambda += step;
    if (!(lambda > 0.0))
      throw std::runtime_error("solve_nonlinear: iterate left the positive axis");
  }
  throw std::runtime_error("solve_nonlinear: no convergence for eigenvalue index " +
                           std::to_string(index));
}

std::vector<EigenResult> solve_eigenproblem(const CondensedSolver& solver,
                                            const EigenOptions& opt) {
  PencilSolver pencil(solver.system().a_h, opt.dense_pencil_cap, opt.seed);
  const auto inits = solve_linear_condensed(solver, pencil, opt.num);
  std::vector<EigenResult> out;
  out.reserve(opt.num);
  for (int j = 0; j < opt.num; ++j)
    out.push_back(solve_nonlinear(solver, pencil, j, inits[j], opt));
  // ascending by lambda_h; ties by M0 Rayleigh quotient of gamma, then index
  std::stable_sort(out.begin(), out.end(), [&](const EigenResult& a,
                                               const EigenResult& b) {
    if (a.lambda_h != b.lambda_h) return a.lambda_h < b.lambda_h;
    const auto& m0 = solver.system().m0;
    const double ra = a.gamma.dot(m0 * a.gamma);
    const double rb = b.gamma.dot(m0 * b.gamma);
    if (ra != rb) return ra < rb;
    return a.index < b.index;
  });
  return out;
}

OperatorPath operator_path(const CondensedSolver& solver, int cap) {
  const auto& mesh = solver.mesh();
  const auto& cache = solver.cache();
  const auto& dofmap = solver.system().dofmap;
  const int k = solver.k();
  const int NW = 2 * poly_space_dim(k);
  const int dim = NW * mesh.n_elements();
  if (dim > cap)
    throw std::runtime_error("operator_path: dim W^h = " + std::to_string(dim) +
                             " exceeds cap " + std::to_string(cap));

  OperatorPath path;
  path.t_matrix.resize(dim, dim);
  std::vector<std::vector<int>> dofs(mesh.n_elements());
  for (int e = 0; e < mesh.n_elements(); ++e) {
    const auto& mf = cache.elements[e].blocks.mult_faces;
    for (int lf : mf) {
      const int off = dofmap.face_offset[mesh.element_to_faces[e][lf]];
      for (int m = 0; m < dofmap.modes_per_face; ++m) dofs[e].push_back(off + m);
    }
  }

  parallel_for(dim, solver.threads(), [&](int col) {
    const int e = col / NW;
    const int a = col % NW;
    const ElementCache& ec = cache.elements[e];
    // b_h for f = w_{e,a}: only element e contributes
    Eigen::VectorXd b = Eigen::VectorXd::Zero(dofmap.n_dofs);
    const Eigen::VectorXd bloc =
        (ec.params.rho_s * ec.geom.det) * ec.Q2.transpose().col(a);
    for (size_t i = 0; i < dofs[e].size(); ++i) b[dofs[e][i]] += bloc[i];
    const Eigen::VectorXd gamma = solver.solve_condensed(b);
    // u = Q2 gamma + Q2L f
    for (int ep = 0; ep < mesh.n_elements(); ++ep) {
      const ElementCache& ecp = cache.elements[ep];
      Eigen::VectorXd gl(dofs[ep].size());
      for (size_t i = 0; i < dofs[ep].size(); ++i) gl[i] = gamma[dofs[ep][i]];
      Eigen::VectorXd u = ecp.Q2 * gl;
      if (ep == e) u += ecp.Q2L.col(a);
      path.t_matrix.block(ep * NW, col, NW, 1) = u;
    }
  });

  // self-adjointness in the rho_S-weighted product: G T symmetric with
  // G = diag(rho_e det_e)
  Eigen::VectorXd g(dim);
  for (int e = 0; e < mesh.n_elements(); ++e)
    g.segment(e * NW, NW).setConstant(cache.elements[e].params.rho_s *
                                      cache.elements[e].geom.det);
  const Eigen::MatrixXd gt = g.asDiagonal() * path.t_matrix;
  path.asymmetry = (gt - gt.transpose()).norm() / std::max(1e-300, gt.norm());

  const Eigen::VectorXd gsqrt = g.cwiseSqrt();
  const Eigen::MatrixXd sym = gsqrt.asDiagonal() * path.t_matrix *
                              gsqrt.cwiseInverse().asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (sym + sym.transpose()));
  path.mu = es.eigenvalues().reverse();  // descending
  path.lambdas = path.mu.cwiseInverse();
  return path;
}

}  // namespace wsym
