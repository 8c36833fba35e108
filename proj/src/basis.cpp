// Copyright (c) the wsym contributors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#include "wsym/basis.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <map>
#include <mutex>
#include <stdexcept>

namespace wsym {

namespace {

// registries may nest (fe_tables builds on scalar bases), so each memoizer
// computes outside the lock and inserts under it
std::mutex g_registry_mutex;

template <typename Key, typename Value, typename Fn>
const Value& memoized(std::map<Key, Value>& cache, const Key& key, Fn&& make) {
  {
    std::lock_guard<std::mutex> lock(g_registry_mutex);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
  }
  Value value = make();
  std::lock_guard<std::mutex> lock(g_registry_mutex);
  return cache.emplace(key, std::move(value)).first->second;
}

constexpr double kCenter = 1.0 / 3.0;

Eigen::MatrixXd monomial_values(const std::vector<Monomial>& mono,
                                const Eigen::Matrix2Xd& pts) {
  Eigen::MatrixXd vals(mono.size(), pts.cols());
  for (int q = 0; q < pts.cols(); ++q) {
    const double x = pts(0, q), y = pts(1, q);
    for (size_t i = 0; i < mono.size(); ++i)
      vals(i, q) = std::pow(x, mono[i].px) * std::pow(y, mono[i].py);
  }
  return vals;
}

Eigen::MatrixXd centered_monomial_values(const std::vector<Monomial>& mono,
                                         const Eigen::Matrix2Xd& pts) {
  Eigen::Matrix2Xd shifted = pts;
  shifted.row(0).array() -= kCenter;
  shifted.row(1).array() -= kCenter;
  return monomial_values(mono, shifted);
}

double binomial(int n, int k) {
  double v = 1;
  for (int i = 1; i <= k; ++i) v = v * (n - k + i) / i;
  return v;
}

long double centered_monomial_integral_ld(int a, int b) {
  long double acc = 0;
  for (int i = 0; i <= a; ++i)
    for (int j = 0; j <= b; ++j) {
      long double c = 1;
      for (int t = 1; t <= i; ++t) c = c * (a - i + t) / t;
      for (int t = 1; t <= j; ++t) c = c * (b - j + t) / t;
      c *= std::pow(-1.0L / 3.0L, a - i + b - j);
      long double m = 1;
      for (int t = 1; t <= j; ++t) m = m * t / (i + t);
      for (int t = i + j + 1; t <= i + j + 2; ++t) m /= t;
      acc += c * m;
    }
  return acc;
}

ScalarBasis make_scalar_basis(int degree) {
  using MatLD = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
  const auto& mono = monomials_upto(degree);
  const int n = static_cast<int>(mono.size());
  MatLD G(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      G(i, j) = centered_monomial_integral_ld(mono[i].px + mono[j].px,
                                              mono[i].py + mono[j].py);
  // Cholesky orthonormalization applied twice, in extended precision, so the
  // double-rounded coefficients keep the Gram residual near machine epsilon
  Eigen::LLT<MatLD> llt(G);
  MatLD C = llt.matrixL().transpose().solve(MatLD::Identity(n, n));
  MatLD G1 = C.transpose() * G * C;
  Eigen::LLT<MatLD> llt1(G1);
  C = C * llt1.matrixL().transpose().solve(MatLD::Identity(n, n));
  ScalarBasis basis;
  basis.degree = degree;
  basis.coef = C.cast<double>();
  return basis;
}

// orthonormal shifted Legendre sqrt(2n+1) * P_n(2t-1), monomial coefficients
EdgeBasis make_edge_basis(int degree) {
  static const double table[6][6] = {
      {1, 0, 0, 0, 0, 0},
      {-1, 2, 0, 0, 0, 0},
      {1, -6, 6, 0, 0, 0},
      {-1, 12, -30, 20, 0, 0},
      {1, -20, 90, -140, 70, 0},
      {-1, 30, -210, 560, -630, 252}};
  if (degree > 5) throw std::invalid_argument("edge basis degree > 5 unsupported");
  EdgeBasis basis;
  basis.degree = degree;
  basis.coef = Eigen::MatrixXd::Zero(degree + 1, degree + 1);
  for (int nfun = 0; nfun <= degree; ++nfun) {
    const double scale = std::sqrt(2.0 * nfun + 1.0);
    for (int m = 0; m <= nfun; ++m) basis.coef(m, nfun) = scale * table[nfun][m];
  }
  return basis;
}

VectorMomentBasis make_nedelec_basis(int k) {
  const auto& mono = monomials_upto(k);
  const int nm = static_cast<int>(mono.size());
  const int npoly = poly_space_dim(k - 1);
  const int nfun = 2 * npoly + k;  // = k(k+2)
  VectorMomentBasis basis;
  basis.k = k;
  basis.coef_x = Eigen::MatrixXd::Zero(nm, nfun);
  basis.coef_y = Eigen::MatrixXd::Zero(nm, nfun);
  auto mono_index = [&](int px, int py) {
    for (int i = 0; i < nm; ++i)
      if (mono[i].px == px && mono[i].py == py) return i;
    throw std::logic_error("monomial index");
  };
  int f = 0;
  for (int comp = 0; comp < 2; ++comp)
    for (int m = 0; m < npoly; ++m, ++f)
      (comp == 0 ? basis.coef_x : basis.coef_y)(m, f) = 1.0;
  // S^k: q (-y, x) with q = x^{k-1-j} y^j homogeneous of degree k-1
  for (int j = 0; j < k; ++j, ++f) {
    basis.coef_x(mono_index(k - 1 - j, j + 1), f) = -1.0;
    basis.coef_y(mono_index(k - j, j), f) = 1.0;
  }
  return basis;
}

void check_k(int k) {
  if (k != 1 && k != 2)
    throw std::invalid_argument("k must be 1 or 2");
}

double gram_condition_by_quadrature(const Eigen::MatrixXd& vals,
                                    const Eigen::VectorXd& w) {
  Eigen::MatrixXd G = vals * w.asDiagonal() * vals.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  if (lo <= 0.0) throw std::runtime_error("singular basis Gram matrix");
  return hi / lo;
}

}  // namespace

const std::vector<Monomial>& monomials_upto(int degree) {
  static std::map<int, std::vector<Monomial>> cache;
  return memoized(cache, degree, [degree] {
    std::vector<Monomial> mono;
    for (int g = 0; g <= degree; ++g)
      for (int px = g; px >= 0; --px) mono.push_back({px, g - px});
    return mono;
  });
}

double centered_monomial_integral_tri(int a, int b) {
  // binomial expansion of (x - 1/3)^a (y - 1/3)^b against the exact
  // plain-monomial integrals
  double acc = 0;
  for (int i = 0; i <= a; ++i)
    for (int j = 0; j <= b; ++j)
      acc += binomial(a, i) * binomial(b, j) *
             std::pow(-1.0 / 3.0, a - i + b - j) * monomial_integral_tri(i, j);
  return acc;
}

Eigen::MatrixXd ScalarBasis::values(const Eigen::Matrix2Xd& pts) const {
  return coef.transpose() * centered_monomial_values(monomials_upto(degree), pts);
}

void ScalarBasis::gradients(const Eigen::Matrix2Xd& pts, Eigen::MatrixXd& gx,
                            Eigen::MatrixXd& gy) const {
  const auto& mono = monomials_upto(degree);
  const int nm = static_cast<int>(mono.size());
  Eigen::MatrixXd mx(nm, pts.cols()), my(nm, pts.cols());
  for (int q = 0; q < pts.cols(); ++q) {
    const double x = pts(0, q) - kCenter, y = pts(1, q) - kCenter;
    for (int i = 0; i < nm; ++i) {
      const int a = mono[i].px, b = mono[i].py;
      mx(i, q) = a == 0 ? 0.0 : a * std::pow(x, a - 1) * std::pow(y, b);
      my(i, q) = b == 0 ? 0.0 : b * std::pow(x, a) * std::pow(y, b - 1);
    }
  }
  gx = coef.transpose() * mx;
  gy = coef.transpose() * my;
}

const ScalarBasis& scalar_basis(int degree) {
  static std::map<int, ScalarBasis> cache;
  return memoized(cache, degree, [degree] { return make_scalar_basis(degree); });
}

Eigen::MatrixXd EdgeBasis::values(const Eigen::VectorXd& ts) const {
  const int n = dim();
  Eigen::MatrixXd mono(n, ts.size());
  for (int q = 0; q < ts.size(); ++q)
    for (int m = 0; m < n; ++m) mono(m, q) = std::pow(ts[q], m);
  return coef.transpose() * mono;
}

const EdgeBasis& legendre_edge_basis(int degree) {
  static std::map<int, EdgeBasis> cache;
  return memoized(cache, degree, [degree] { return make_edge_basis(degree); });
}

void VectorMomentBasis::values(const Eigen::Matrix2Xd& pts, Eigen::MatrixXd& vx,
                               Eigen::MatrixXd& vy) const {
  const Eigen::MatrixXd mono = monomial_values(monomials_upto(k), pts);
  vx = coef_x.transpose() * mono;
  vy = coef_y.transpose() * mono;
}

const VectorMomentBasis& nedelec_moment_basis(int k) {
  check_k(k);
  static std::map<int, VectorMomentBasis> cache;
  return memoized(cache, k, [k] { return make_nedelec_basis(k); });
}

PostComplement post_complement(int k) {
  check_k(k);
  PostComplement pc;
  pc.k = k;
  pc.scalar_lo = poly_space_dim(k);
  pc.scalar_hi = poly_space_dim(k + 2);
  return pc;
}

ReferenceBasis build_basis(SpaceTag space, int k) {
  check_k(k);
  ReferenceBasis rb;
  rb.space = space;
  rb.k = k;
  const auto& rule = triangle_rule(2 * (k + 2));
  switch (space) {
    case SpaceTag::Stress: {
      rb.dim = 4 * poly_space_dim(k + 1);
      rb.gram_condition = gram_condition_by_quadrature(
          scalar_basis(k + 1).values(rule.points), rule.weights);
      break;
    }
    case SpaceTag::Displacement: {
      rb.dim = 2 * poly_space_dim(k);
      rb.gram_condition = gram_condition_by_quadrature(
          scalar_basis(k).values(rule.points), rule.weights);
      break;
    }
    case SpaceTag::Rotation: {
      rb.dim = poly_space_dim(k + 1);
      rb.gram_condition = gram_condition_by_quadrature(
          scalar_basis(k + 1).values(rule.points), rule.weights);
      break;
    }
    case SpaceTag::Multiplier: {
      rb.dim = 2 * (k + 2);
      const auto& er = edge_rule(2 * (k + 2));
      rb.gram_condition = gram_condition_by_quadrature(
          legendre_edge_basis(k + 1).values(er.points), er.weights);
      break;
    }
    case SpaceTag::NedelecMoment: {
      rb.dim = k * (k + 2);
      const auto& nb = nedelec_moment_basis(k);
      Eigen::MatrixXd vx, vy;
      nb.values(rule.points, vx, vy);
      Eigen::MatrixXd G = vx * rule.weights.asDiagonal() * vx.transpose() +
                          vy * rule.weights.asDiagonal() * vy.transpose();
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G);
      rb.gram_condition = es.eigenvalues().maxCoeff() / es.eigenvalues().minCoeff();
      break;
    }
    case SpaceTag::PostComplement: {
      const auto pc = post_complement(k);
      rb.dim = pc.dim();
      const auto& r2 = triangle_rule(2 * (k + 2));
      Eigen::MatrixXd vals = scalar_basis(k + 2).values(r2.points);
      rb.gram_condition = gram_condition_by_quadrature(
          vals.middleRows(pc.scalar_lo, pc.scalar_hi - pc.scalar_lo), r2.weights);
      break;
    }
  }
  return rb;
}

namespace {

// reference vertices and the local-edge endpoints (v0,v1),(v1,v2),(v2,v0)
const Eigen::Vector2d kRefVerts[3] = {{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}};
const int kEdgeEnds[3][2] = {{0, 1}, {1, 2}, {2, 0}};

FeTables make_fe_tables(int k, int qdeg) {
  FeTables T;
  T.k = k;
  T.quad_degree = qdeg;
  T.tri = &triangle_rule(qdeg);
  T.edge = &edge_rule(qdeg);
  const auto& Sk = scalar_basis(k);
  const auto& Sk1 = scalar_basis(k + 1);
  const auto& Sk2 = scalar_basis(k + 2);
  const auto& pts = T.tri->points;
  T.Wk = Sk.values(pts);
  T.Vk1 = Sk1.values(pts);
  T.Pk2 = Sk2.values(pts);
  Sk.gradients(pts, T.Gx_k, T.Gy_k);
  Sk1.gradients(pts, T.Gx_k1, T.Gy_k1);
  Sk2.gradients(pts, T.Gx_k2, T.Gy_k2);
  T.edge_mult = legendre_edge_basis(k + 1).values(T.edge->points);
  const auto& ts = T.edge->points;
  for (int lf = 0; lf < 3; ++lf) {
    for (int o = 0; o < 2; ++o) {
      Eigen::Matrix2Xd epts(2, ts.size());
      const Eigen::Vector2d a = kRefVerts[kEdgeEnds[lf][o == 0 ? 0 : 1]];
      const Eigen::Vector2d b = kRefVerts[kEdgeEnds[lf][o == 0 ? 1 : 0]];
      for (int q = 0; q < ts.size(); ++q)
        epts.col(q) = a + ts[q] * (b - a);
      T.trace_k[lf][o] = Sk.values(epts);
      T.trace_k1[lf][o] = Sk1.values(epts);
      T.trace_k2[lf][o] = Sk2.values(epts);
    }
  }
  return T;
}

}  // namespace

const FeTables& fe_tables(int k, int quad_degree) {
  check_k(k);
  static std::map<std::pair<int, int>, FeTables> cache;
  return memoized(cache, std::make_pair(k, quad_degree),
                  [&] { return make_fe_tables(k, quad_degree); });
}

}  // namespace wsym
