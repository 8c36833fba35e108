// Copyright (c) the wsym contributors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#include "wsym/quadrature.hpp"

#include <Eigen/Eigenvalues>
#include <map>
#include <mutex>
#include <stdexcept>

namespace wsym {

namespace {

// Gauss nodes/weights for the Jacobi weight (1-x)^alpha (1+x)^beta on [-1,1],
// via Golub-Welsch on the symmetric recurrence tridiagonal.
void gauss_jacobi(int n, double alpha, double beta, Eigen::VectorXd& nodes,
                  Eigen::VectorXd& weights) {
  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    const double k = i;
    const double den = (2 * k + alpha + beta) * (2 * k + alpha + beta + 2);
    T(i, i) = den == 0.0 ? (beta - alpha) / (alpha + beta + 2)
                         : (beta * beta - alpha * alpha) / den;
    if (i + 1 < n) {
      const double kk = i + 1;
      const double s = 2 * kk + alpha + beta;
      const double num = 4 * kk * (kk + alpha) * (kk + beta) * (kk + alpha + beta);
      const double b2 = num / (s * s * (s + 1) * (s - 1));
      T(i, i + 1) = T(i + 1, i) = std::sqrt(b2);
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
  nodes = es.eigenvalues();
  // mu0 = integral of the weight over [-1,1]
  const double mu0 = std::pow(2.0, alpha + beta + 1) * std::tgamma(alpha + 1) *
                     std::tgamma(beta + 1) / std::tgamma(alpha + beta + 2);
  weights.resize(n);
  for (int i = 0; i < n; ++i) {
    const double v0 = es.eigenvectors()(0, i);
    weights[i] = mu0 * v0 * v0;
  }
}

EdgeRule make_edge_rule(int degree) {
  const int n = degree / 2 + 1;  // 2n-1 >= degree
  Eigen::VectorXd t, w;
  gauss_jacobi(n, 0.0, 0.0, t, w);
  EdgeRule rule;
  rule.points = (t.array() + 1.0) / 2.0;
  rule.weights = w / 2.0;
  rule.exactness = 2 * n - 1;
  return rule;
}

TriangleRule make_triangle_rule(int degree) {
  const int n = degree / 2 + 1;
  Eigen::VectorXd tx, wx, ty, wy;
  gauss_jacobi(n, 1.0, 0.0, tx, wx);  // x-direction carries the (1-x) factor
  gauss_jacobi(n, 0.0, 0.0, ty, wy);
  TriangleRule rule;
  rule.points.resize(2, n * n);
  rule.weights.resize(n * n);
  int q = 0;
  for (int i = 0; i < n; ++i) {
    const double xi = (tx[i] + 1.0) / 2.0;
    const double wxi = wx[i] / 4.0;  // maps both the interval and the weight
    for (int j = 0; j < n; ++j, ++q) {
      const double eta = (ty[j] + 1.0) / 2.0;
      rule.points(0, q) = xi;
      rule.points(1, q) = eta * (1.0 - xi);
      rule.weights[q] = wxi * (wy[j] / 2.0);
    }
  }
  rule.exactness = 2 * n - 1;
  return rule;
}

}  // namespace

const TriangleRule& triangle_rule(int degree) {
  if (degree < 0 || degree > kMaxQuadratureDegree)
    throw std::invalid_argument("triangle_rule: degree out of range [0,20]");
  static std::mutex mtx;
  static std::map<int, TriangleRule> cache;
  std::lock_guard<std::mutex> lock(mtx);
  auto it = cache.find(degree);
  if (it == cache.end()) it = cache.emplace(degree, make_triangle_rule(degree)).first;
  return it->second;
}

const EdgeRule& edge_rule(int degree) {
  if (degree < 0 || degree > kMaxQuadratureDegree)
    throw std::invalid_argument("edge_rule: degree out of range [0,20]");
  static std::mutex mtx;
  static std::map<int, EdgeRule> cache;
  std::lock_guard<std::mutex> lock(mtx);
  auto it = cache.find(degree);
  if (it == cache.end()) it = cache.emplace(degree, make_edge_rule(degree)).first;
  return it->second;
}

double monomial_integral_tri(int a, int b) {
  // a! b! / (a+b+2)! computed as a stable product
  double v = 1.0;
  for (int i = 1; i <= b; ++i) v *= static_cast<double>(i) / (a + i);
  for (int i = a + b + 1; i <= a + b + 2; ++i) v /= i;
  return v;
}

}  // namespace wsym
