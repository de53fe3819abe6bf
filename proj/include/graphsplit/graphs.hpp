#pragma once

#include <algorithm>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "graphsplit/scheme.hpp"

namespace graphsplit {

struct Edge {
  int i = 0, j = 0;  // 0-based, i < j
  double w = 1.0;
  auto key() const { return std::pair(i, j); }
};

struct GraphSpec {
  int n = 0;
  std::vector<Edge> edges;
  std::vector<Edge> subgraph_edges;
};

inline bool is_connected(int n, const std::vector<Edge>& edges) {
  if (n <= 1) return true;
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  };
  int comps = n;
  for (const auto& e : edges) {
    int a = find(e.i), b = find(e.j);
    if (a != b) {
      parent[a] = b;
      --comps;
    }
  }
  return comps == 1;
}

inline std::vector<Edge> sorted_edges(std::vector<Edge> e) {
  std::sort(e.begin(), e.end(), [](const Edge& a, const Edge& b) { return a.key() < b.key(); });
  return e;
}

inline void validate_graph(const GraphSpec& g) {
  if (g.n < 2) throw GraphError("graph needs at least 2 vertices");
  auto check_list = [&](const std::vector<Edge>& list, const char* name) {
    auto s = sorted_edges(list);
    for (std::size_t k = 0; k < s.size(); ++k) {
      const auto& e = s[k];
      if (e.i < 0 || e.j >= g.n || e.i >= e.j)
        throw GraphError(std::string(name) + ": edge endpoints must satisfy 1 <= i < j <= n");
      if (!(e.w > 0)) throw GraphError(std::string(name) + ": weights must be positive");
      if (k > 0 && s[k - 1].key() == e.key()) throw GraphError(std::string(name) + ": duplicate edge");
    }
  };
  check_list(g.edges, "edges");
  check_list(g.subgraph_edges, "subgraph_edges");
  if (!is_connected(g.n, g.edges)) throw GraphError("graph is disconnected");
  if (!is_connected(g.n, g.subgraph_edges)) throw GraphError("subgraph is disconnected");
  for (const auto& e : g.subgraph_edges) {
    auto it = std::find_if(g.edges.begin(), g.edges.end(),
                           [&](const Edge& f) { return f.key() == e.key(); });
    if (it == g.edges.end()) throw GraphError("subgraph edge is not an edge of the graph");
    if (e.w > it->w) throw GraphError("subgraph weight exceeds graph weight");
  }
}

inline Matrix laplacian(int n, const std::vector<Edge>& edges) {
  if (!is_connected(n, edges)) throw GraphError("laplacian: graph is disconnected");
  Matrix L = Matrix::Zero(n, n);
  for (const auto& e : edges) {
    L(e.i, e.i) += e.w;
    L(e.j, e.j) += e.w;
    L(e.i, e.j) -= e.w;
    L(e.j, e.i) -= e.w;
  }
  return L;
}

inline Matrix laplacian(const GraphSpec& g, bool use_subgraph_weights) {
  return laplacian(g.n, use_subgraph_weights ? g.subgraph_edges : g.edges);
}

enum class OntoSource { incidence, closed_form_complete, eigen_factor };

inline const char* to_string(OntoSource s) {
  switch (s) {
    case OntoSource::incidence: return "incidence";
    case OntoSource::closed_form_complete: return "closed_form_complete";
    default: return "eigen_factor";
  }
}

struct OntoDecomposition {
  Matrix M;
  OntoSource source;
};

inline bool is_tree(int n, const std::vector<Edge>& edges) {
  return static_cast<int>(edges.size()) == n - 1 && is_connected(n, edges);
}

inline bool is_unit_complete(int n, const std::vector<Edge>& edges) {
  if (static_cast<int>(edges.size()) != n * (n - 1) / 2) return false;
  for (const auto& e : edges)
    if (e.w != 1.0) return false;
  return true;
}

inline OntoDecomposition onto_decomposition(const GraphSpec& g) {
  const int n = g.n;
  const auto& sub = g.subgraph_edges;
  if (!is_connected(n, sub)) throw GraphError("onto_decomposition: subgraph is disconnected");
  if (is_tree(n, sub)) {
    // each edge leaves its lower-index endpoint; weighted edges scale by √w'
    auto es = sorted_edges(sub);
    Matrix M = Matrix::Zero(n, n - 1);
    for (int j = 0; j < n - 1; ++j) {
      double s = std::sqrt(es[j].w);
      M(es[j].i, j) = s;
      M(es[j].j, j) = -s;
    }
    return {M, OntoSource::incidence};
  }
  if (is_unit_complete(n, sub)) return {complete_onto(n), OntoSource::closed_form_complete};
  Matrix Lap = laplacian(n, sub);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Lap);
  Matrix M(n, n - 1);
  // eigenvalues ascend; drop index 0 (the zero eigenvalue), take the rest descending
  for (int c = 0; c < n - 1; ++c) {
    int idx = n - 1 - c;
    double lam = std::max(es.eigenvalues()(idx), 0.0);
    Vector v = es.eigenvectors().col(idx);
    for (int i = 0; i < n; ++i)
      if (std::abs(v[i]) > 1e-12) {
        if (v[i] < 0) v = -v;
        break;
      }
    M.col(c) = std::sqrt(lam) * v;
  }
  return {M, OntoSource::eigen_factor};
}

// General tree construction: N_ij = w_ji below the diagonal, D = Deg(G)/2, M the
// oriented incidence of G', H = P marks edges entering a vertex and K = R edges
// leaving one. With kappa set, weights are replaced by w = κ+1 on G and w' = 1 on G'.
inline CoefficientScheme scheme_from_graph(const GraphSpec& g_in, std::optional<double> kappa,
                                           double gamma, double eta, int r, int p) {
  GraphSpec g = g_in;
  if (kappa) {
    if (!(*kappa >= 0)) throw GraphError("kappa must be nonnegative");
    for (auto& e : g.edges) e.w = *kappa + 1.0;
    for (auto& e : g.subgraph_edges) e.w = 1.0;
  }
  validate_graph(g);
  const int n = g.n;
  if (!is_tree(n, g.subgraph_edges))
    throw GraphError("scheme_from_graph: H/P/K/R need a spanning-tree subgraph");
  require_family_sizes("scheme_from_graph", n, r, p);
  CoefficientScheme s = blank_scheme(n, n - 1, r, p, gamma, eta);
  s.M = onto_decomposition(g).M;
  Vector deg = Vector::Zero(n);
  for (const auto& e : g.edges) {
    s.N(e.j, e.i) = e.w;
    deg[e.i] += e.w;
    deg[e.j] += e.w;
  }
  s.D = 0.5 * deg;
  auto es = sorted_edges(g.subgraph_edges);
  Matrix enter = Matrix::Zero(n, n - 1), leave = Matrix::Zero(n - 1, n);
  for (int j = 0; j < n - 1; ++j) {
    enter(es[j].j, j) = 1.0;
    leave(j, es[j].i) = 1.0;
  }
  if (r > 0) {
    s.H = enter;
    s.K = leave;
  }
  if (p > 0) {
    s.P = enter;
    s.R = leave;
  }
  return s;
}

inline GraphSpec path_graph(int n, double w = 1.0) {
  GraphSpec g;
  g.n = n;
  for (int i = 0; i + 1 < n; ++i) g.edges.push_back({i, i + 1, w});
  g.subgraph_edges = g.edges;
  return g;
}

inline GraphSpec star_graph(int n, double w = 1.0) {
  GraphSpec g;
  g.n = n;
  for (int j = 1; j < n; ++j) g.edges.push_back({0, j, w});
  g.subgraph_edges = g.edges;
  return g;
}

inline GraphSpec complete_graph(int n, double w = 1.0) {
  GraphSpec g;
  g.n = n;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) g.edges.push_back({i, j, w});
  g.subgraph_edges = g.edges;
  return g;
}

enum class LiftPosition { first, last };

// n-operator problem → n+1 resolvent slots with an artificial zero operator.
inline ProblemInstance lift_with_artificial_zero(const ProblemInstance& prob, LiftPosition pos) {
  ProblemInstance out = prob;
  if (pos == LiftPosition::first)
    out.A.insert(out.A.begin(), zero_resolvent(prob.d));
  else
    out.A.push_back(zero_resolvent(prob.d));
  return out;
}

}  // namespace graphsplit
