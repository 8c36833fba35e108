// Copyright (c) the wsym contributors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <random>

#include "wsym/quadrature.hpp"

using namespace wsym;

TEST_CASE("monomial reference integrals") {
  CHECK(monomial_integral_tri(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(monomial_integral_tri(1, 0) == doctest::Approx(1.0 / 6).epsilon(1e-15));
  CHECK(monomial_integral_tri(1, 1) == doctest::Approx(1.0 / 24).epsilon(1e-15));
}

TEST_CASE("triangle rule integrates monomials exactly") {
  for (int degree : {2, 5, 10, 15, 20}) {
    const auto& rule = triangle_rule(degree);
    CHECK(rule.weights.minCoeff() > 0.0);
    CHECK(rule.weights.sum() == doctest::Approx(0.5).epsilon(1e-14));
    for (int a = 0; a + 0 <= degree; ++a)
      for (int b = 0; a + b <= degree; ++b) {
        double acc = 0;
        for (int q = 0; q < rule.size(); ++q)
          acc += rule.weights[q] * std::pow(rule.points(0, q), a) *
                 std::pow(rule.points(1, q), b);
        const double exact = monomial_integral_tri(a, b);
        CHECK(acc == doctest::Approx(exact).epsilon(1e-13));
      }
  }
}

TEST_CASE("edge rule on [0,1]") {
  const auto& rule = edge_rule(6);
  CHECK(rule.weights.sum() == doctest::Approx(1.0).epsilon(1e-15));
  double t3 = 0;
  for (int q = 0; q < rule.size(); ++q)
    t3 += rule.weights[q] * std::pow(rule.points[q], 3);
  CHECK(t3 == doctest::Approx(0.25).epsilon(1e-14));
}

TEST_CASE("random polynomial vs exact monomial expansion") {
  // independent oracle: integrate a random degree-d polynomial by summing
  // exact monomial integrals
  std::mt19937_64 rng(1234);
  std::uniform_real_distribution<double> unif(-1, 1);
  for (int d : {4, 9, 13}) {
    const auto& rule = triangle_rule(d);
    std::vector<double> coefs;
    double exact = 0;
    for (int a = 0; a <= d; ++a)
      for (int b = 0; a + b <= d; ++b) {
        const double c = unif(rng);
        coefs.push_back(c);
        exact += c * monomial_integral_tri(a, b);
      }
    double quad = 0;
    for (int q = 0; q < rule.size(); ++q) {
      double val = 0;
      size_t i = 0;
      for (int a = 0; a <= d; ++a)
        for (int b = 0; a + b <= d; ++b)
          val += coefs[i++] * std::pow(rule.points(0, q), a) *
                 std::pow(rule.points(1, q), b);
      quad += rule.weights[q] * val;
    }
    CHECK(quad == doctest::Approx(exact).epsilon(1e-13));
  }
}

TEST_CASE("degree out of range") {
  CHECK_THROWS(triangle_rule(21));
  CHECK_THROWS(edge_rule(-1));
}
