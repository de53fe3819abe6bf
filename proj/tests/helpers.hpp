#pragma once

#include <random>

#include "graphsplit/solver.hpp"

namespace testing_helpers {

using namespace graphsplit;

inline Vector randn(std::mt19937& rng, Eigen::Index d, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Vector v(d);
  for (auto& a : v) a = g(rng);
  return v;
}

inline Matrix randn_matrix(std::mt19937& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Matrix A(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) A(i, j) = g(rng);
  return A;
}

inline BlockVector randn_blocks(std::mt19937& rng, const std::vector<Eigen::Index>& dims, double scale = 1.0) {
  BlockVector out = BlockVector::zeros(dims);
  for (std::size_t i = 0; i < dims.size(); ++i) out[i] = randn(rng, dims[i], scale);
  return out;
}

// Random scheme with the block-triangular sparsity that makes S explicit. Each
// column j of H/K (and of P/Q/R) gets split points so that every product that must
// vanish for k ≥ i does. No standing assumptions are imposed.
inline CoefficientScheme random_explicit_scheme(std::mt19937& rng, int n, int m, int r, int p) {
  std::uniform_real_distribution<double> u(-1.0, 1.0), pos(0.5, 2.0);
  std::uniform_int_distribution<int> split(0, n);
  CoefficientScheme s = blank_scheme(n, m, r, p, 0.3 + 0.7 * pos(rng) / 2.0, 1.0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) s.M(i, j) = u(rng);
    for (int j = 0; j < i; ++j) s.N(i, j) = u(rng);
    s.D[i] = pos(rng);
  }
  for (int k = 0; k < r; ++k) {
    s.E[k] = pos(rng);
    int c = split(rng);  // K uses columns < c, H uses rows ≥ c
    for (int i = 0; i < n; ++i) {
      if (i < c) s.K(k, i) = u(rng);
      if (i >= c) s.H(i, k) = u(rng);
    }
  }
  for (int j = 0; j < p; ++j) {
    int a = split(rng);
    int b = a + std::uniform_int_distribution<int>(0, n - a)(rng);
    for (int i = 0; i < n; ++i) {
      if (i < a) s.R(j, i) = u(rng);
      if (i >= a && i < b) s.P(i, j) = u(rng);
      if (i >= b) s.Q(i, j) = u(rng);
    }
  }
  return s;
}

// Monotone operators of mixed kinds: l1 and scaled-identity resolvents, random
// linear maps, least-squares gradients (cocoercive) and optionally skew maps.
inline ProblemInstance random_problem(std::mt19937& rng, int n, int r, int p, Eigen::Index d,
                                      bool allow_skew = false) {
  std::uniform_real_distribution<double> w(0.0, 1.5);
  std::uniform_int_distribution<int> kind(0, 2), gdim(1, 4);
  ProblemInstance prob;
  prob.d = d;
  for (int i = 0; i < n; ++i) {
    switch (kind(rng)) {
      case 0: prob.A.push_back(l1_resolvent(d, w(rng))); break;
      case 1: prob.A.push_back(scaled_identity_resolvent(d, w(rng))); break;
      default: prob.A.push_back(zero_resolvent(d));
    }
  }
  for (int k = 0; k < r; ++k) {
    int g = gdim(rng);
    auto L = std::make_shared<const LinearMap>(randn_matrix(rng, g, d, 0.7));
    prob.BL.push_back({kind(rng) == 1 ? scaled_identity_resolvent(g, w(rng)) : l1_resolvent(g, w(rng)), L});
  }
  for (int j = 0; j < p; ++j) {
    if (allow_skew && kind(rng) == 0) {
      Matrix S = randn_matrix(rng, d, d, 0.5);
      prob.C.push_back(skew_linear(Matrix(S - S.transpose()), randn(rng, d)));
    } else {
      int rows = gdim(rng);
      prob.C.push_back(least_squares_gradient(randn_matrix(rng, rows, d, 0.6), randn(rng, rows)));
    }
  }
  return prob;
}

}  // namespace testing_helpers
