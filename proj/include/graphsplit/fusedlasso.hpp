#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "graphsplit/graphs.hpp"
#include "graphsplit/solver.hpp"

namespace graphsplit {

inline double difference_norm(Eigen::Index d) {
  if (d < 2) throw DimensionError("difference_norm: need d >= 2");
  const double pi = std::acos(-1.0);
  return std::sqrt(2.0 - 2.0 * std::cos(double(d - 1) * pi / double(d)));
}

// (Lx)_i = x_{i+1} - x_i
inline LinearMap difference_matrix(Eigen::Index d) {
  if (d < 2) throw DimensionError("difference_matrix: need d >= 2");
  Matrix L = Matrix::Zero(d - 1, d);
  for (Eigen::Index i = 0; i + 1 < d; ++i) {
    L(i, i) = -1.0;
    L(i, i + 1) = 1.0;
  }
  return LinearMap(std::move(L), difference_norm(d));
}

struct FusedLassoInstance {
  int n_agents = 0;
  Eigen::Index d = 0;
  std::vector<Matrix> A_blocks;
  std::vector<Vector> b_blocks;
  std::vector<double> mu, nu;
  std::vector<std::vector<int>> partition;  // original row indices per agent
  Vector x_true;
  std::uint64_t seed = 0;
  double noise_var = 0.0;
  int k_nonzero = 0;

  int m() const {
    int s = 0;
    for (const auto& A : A_blocks) s += static_cast<int>(A.rows());
    return s;
  }

  void validate() const {
    if (n_agents < 1 || d < 2) throw DimensionError("fused lasso: need n >= 1 and d >= 2");
    if (static_cast<int>(A_blocks.size()) != n_agents || static_cast<int>(b_blocks.size()) != n_agents ||
        static_cast<int>(mu.size()) != n_agents || static_cast<int>(nu.size()) != n_agents)
      throw DimensionError("fused lasso: per-agent lists must have n entries");
    for (int i = 0; i < n_agents; ++i) {
      if (A_blocks[i].cols() != d || A_blocks[i].rows() != b_blocks[i].size() || A_blocks[i].rows() < 1)
        throw DimensionError("fused lasso: block " + std::to_string(i) + " has inconsistent shape");
      if (!(mu[i] >= 0) || !(nu[i] >= 0)) throw Error("fused lasso: weights must be nonnegative");
    }
  }

  // Stacked data in original row order.
  std::pair<Matrix, Vector> stacked() const {
    Matrix A(m(), d);
    Vector b(m());
    int row = 0;
    for (int i = 0; i < n_agents; ++i) {
      A.middleRows(row, A_blocks[i].rows()) = A_blocks[i];
      b.segment(row, b_blocks[i].size()) = b_blocks[i];
      row += static_cast<int>(A_blocks[i].rows());
    }
    return {A, b};
  }

  // (1/n)[Σ ½‖A_i x − b_i‖² + Σ μ_i‖x‖₁ + Σ ν_i‖Lx‖₁]
  double objective(const Vector& x) const {
    double f = 0.0;
    double l1 = x.lpNorm<1>();
    double tv = (x.tail(d - 1) - x.head(d - 1)).lpNorm<1>();
    for (int i = 0; i < n_agents; ++i)
      f += 0.5 * (A_blocks[i] * x - b_blocks[i]).squaredNorm() + mu[i] * l1 + nu[i] * tv;
    return f / n_agents;
  }
};

struct InstanceParams {
  std::uint64_t seed = 0;
  int n = 5;
  int m = 100;
  Eigen::Index d = 1000;
  int k_nonzero = 10;
  double noise_var = 1e-3;
  double mu = 15.0;
  double nu = 5.0;
};

// CI-sized instance used by the acceptance suite and the benchmark default.
inline InstanceParams desk_params(std::uint64_t seed = 0) {
  InstanceParams p;
  p.seed = seed;
  p.n = 5;
  p.m = 50;
  p.d = 200;
  return p;
}

inline FusedLassoInstance gen_instance(const InstanceParams& prm) {
  if (prm.d < 2 || prm.n < 1 || prm.n > prm.m || prm.k_nonzero < 0 || prm.k_nonzero > prm.d ||
      prm.noise_var < 0)
    throw DimensionError("gen_instance: infeasible sizes");
  std::mt19937_64 rng(prm.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  FusedLassoInstance inst;
  inst.n_agents = prm.n;
  inst.d = prm.d;
  inst.seed = prm.seed;
  inst.noise_var = prm.noise_var;
  inst.k_nonzero = prm.k_nonzero;

  Matrix A(prm.m, prm.d);
  for (Eigen::Index i = 0; i < A.rows(); ++i)
    for (Eigen::Index j = 0; j < A.cols(); ++j) A(i, j) = normal(rng);
  std::vector<int> pos(prm.d);
  std::iota(pos.begin(), pos.end(), 0);
  std::shuffle(pos.begin(), pos.end(), rng);
  inst.x_true = Vector::Zero(prm.d);
  for (int k = 0; k < prm.k_nonzero; ++k) inst.x_true[pos[k]] = normal(rng);
  Vector b = A * inst.x_true;
  const double sd = std::sqrt(prm.noise_var);
  for (Eigen::Index i = 0; i < b.size(); ++i) b[i] += sd * normal(rng);

  // partition stream: multinomial row counts with one row guaranteed per agent
  std::seed_seq partition_seed{static_cast<std::uint32_t>(prm.seed),
                              static_cast<std::uint32_t>(prm.seed >> 32), 0x5eedu};
  std::mt19937_64 prng(partition_seed);
  std::vector<int> counts(prm.n, 1);
  std::uniform_int_distribution<int> pick(0, prm.n - 1);
  for (int i = prm.n; i < prm.m; ++i) ++counts[pick(prng)];
  std::vector<int> rows(prm.m);
  std::iota(rows.begin(), rows.end(), 0);
  std::shuffle(rows.begin(), rows.end(), prng);
  int cursor = 0;
  for (int a = 0; a < prm.n; ++a) {
    std::vector<int> mine(rows.begin() + cursor, rows.begin() + cursor + counts[a]);
    std::sort(mine.begin(), mine.end());
    cursor += counts[a];
    Matrix Ai(mine.size(), prm.d);
    Vector bi(mine.size());
    for (std::size_t r = 0; r < mine.size(); ++r) {
      Ai.row(r) = A.row(mine[r]);
      bi[r] = b[mine[r]];
    }
    inst.A_blocks.push_back(std::move(Ai));
    inst.b_blocks.push_back(std::move(bi));
    inst.partition.push_back(std::move(mine));
  }
  inst.mu.assign(prm.n, prm.mu);
  inst.nu.assign(prm.n, prm.nu);
  return inst;
}

// n agents become n+1 resolvent slots (one artificial zero), n composed blocks
// sharing the difference matrix, and n least-squares gradients.
inline ProblemInstance to_problem(const FusedLassoInstance& inst,
                                  LiftPosition position = LiftPosition::last) {
  inst.validate();
  ProblemInstance prob;
  prob.d = inst.d;
  auto L = std::make_shared<const LinearMap>(difference_matrix(inst.d));
  for (int i = 0; i < inst.n_agents; ++i) {
    prob.A.push_back(l1_resolvent(inst.d, inst.mu[i]));
    prob.BL.push_back({l1_resolvent(inst.d - 1, inst.nu[i]), L});
    prob.C.push_back(least_squares_gradient(inst.A_blocks[i], inst.b_blocks[i]));
  }
  return lift_with_artificial_zero(prob, position);
}

struct ReferenceResult {
  Vector x;
  double objective = 0.0;  // (1/n)-scaled
  double gap = 0.0;        // relative duality gap at exit
  long iterations = 0;
};

// Aggregate problem min ½‖Ax−b‖² + μ‖x‖₁ + ν‖Lx‖₁ solved by a Condat–Vũ
// primal-dual iteration; stops on the relative duality gap.
inline ReferenceResult reference_solve(const FusedLassoInstance& inst, double tol = 1e-10,
                                       long max_iters = 5'000'000) {
  if (!(tol > 0)) throw Error("reference_solve: tol must be positive");
  inst.validate();
  auto [A, b] = inst.stacked();
  const Eigen::Index d = inst.d;
  double mu = 0.0, nu = 0.0;
  for (int i = 0; i < inst.n_agents; ++i) {
    mu += inst.mu[i];
    nu += inst.nu[i];
  }
  Matrix AtA = A.transpose() * A;
  Vector Atb = A.transpose() * b;
  const double ell = std::pow(matrix_two_norm(A), 2);
  const double L2 = 4.0;                         // ‖L‖² < 4 for every d
  auto Lop = [&](const Vector& x) { return Vector(x.tail(d - 1) - x.head(d - 1)); };
  auto Ltop = [&](const Vector& y) {
    Vector out = Vector::Zero(d);
    out.head(d - 1) -= y;
    out.tail(d - 1) += y;
    return out;
  };
  // 1/τ − σ‖L‖² ≥ ℓ/2 with a margin
  const double sigma = std::max(ell, 1e-3) / L2;
  const double tau = 0.99 / (ell / 2.0 + sigma * L2);
  auto primal = [&](const Vector& x) {
    return 0.5 * (A * x - b).squaredNorm() + mu * x.lpNorm<1>() + nu * Lop(x).lpNorm<1>();
  };
  auto gap_at = [&](const Vector& x, const Vector& y) {
    Vector res = A * x - b;
    Vector g = A.transpose() * res + Ltop(y);
    double ginf = g.lpNorm<Eigen::Infinity>();
    double s = ginf > mu ? mu / ginf : 1.0;
    Vector u = s * res;
    double dual = -0.5 * u.squaredNorm() - b.dot(u);
    double p = primal(x);
    return (p - dual) / std::max(1.0, std::abs(p));
  };

  Vector x = Vector::Zero(d), y = Vector::Zero(d - 1);
  ReferenceResult out;
  for (long it = 0; it < max_iters; ++it) {
    Vector grad = AtA * x - Atb + Ltop(y);
    Vector xn = prox_l1(x - tau * grad, tau * mu);
    Vector yn = (y + sigma * Lop(2.0 * xn - x)).cwiseMax(-nu).cwiseMin(nu);
    x.swap(xn);
    y.swap(yn);
    if (it % 25 == 0) {
      double g = gap_at(x, y);
      if (g <= tol) {
        out.x = x;
        out.gap = g;
        out.iterations = it + 1;
        out.objective = inst.objective(x);
        return out;
      }
    }
  }
  throw Error("reference_solve: duality gap did not reach tolerance within the iteration cap");
}

// ---- experiment grid -----------------------------------------------------

struct FamilyRun {
  CoefficientScheme scheme;
  double tau = 0.0, gamma = 0.0, eta = 0.0, lambda = 0.0;
};

// γ = γ̂·2/τ, η = η̂·η_max(γ), λ = λ̂·λ_max(γ) in the cocoercive regime.
inline FamilyRun configure_family(const std::string& family, const ProblemInstance& prob, double gamma_hat,
                                  double eta_hat, double lambda_hat) {
  const int ns = static_cast<int>(prob.n());
  const int r = static_cast<int>(prob.r()), p = static_cast<int>(prob.p());
  FamilyRun run;
  CoefficientScheme probe = scheme_by_name(family, ns, r, p, 1.0, 1.0);
  run.tau = compute_tau(compute_UW(probe), prob.lipschitz_constants(), Regime::cocoercive);
  StepBounds sb(run.tau, prob.L_norms(), Regime::cocoercive);
  run.gamma = gamma_hat * sb.gamma_max();
  run.eta = eta_hat * sb.eta_max(run.gamma);
  run.lambda = lambda_hat * sb.lambda_max(run.gamma);
  run.scheme = scheme_by_name(family, ns, r, p, run.gamma, run.eta);
  return run;
}

struct ExperimentConfig {
  std::vector<std::string> families{"complete", "sequential", "star"};
  std::vector<double> gamma_hats{0.1, 0.3, 0.5, 0.7, 0.9};
  std::vector<double> eta_hats{0.1, 0.5, 0.9};
  std::vector<double> lambda_hats{0.3, 0.6, 0.9};
  double base_gamma_hat = 0.5, base_eta_hat = 0.1, base_lambda_hat = 0.9;
  bool full_grid = false;  // otherwise vary one factor at a time around the base
  long max_iters = 20000;
  double tol = 1e-6;
  long record_every = 10;
  int threads = 0;  // 0: GRAPHSPLIT_THREADS or hardware concurrency

  void validate() const {
    auto in01 = [](const std::vector<double>& v) {
      for (double a : v)
        if (!(a > 0 && a < 1)) return false;
      return true;
    };
    if (!in01(gamma_hats) || !in01(eta_hats) || !in01(lambda_hats) ||
        !in01({base_gamma_hat, base_eta_hat, base_lambda_hat}))
      throw Error("experiment config: scaling factors must lie in (0, 1)");
    for (const auto& f : families)
      if (f != "sequential" && f != "star" && f != "complete")
        throw Error("experiment config: unknown family '" + f + "'");
    if (families.empty()) throw Error("experiment config: no families");
    if (max_iters < 1 || !(tol > 0)) throw Error("experiment config: bad max_iters or tol");
  }

  std::vector<std::tuple<std::string, double, double, double>> cells() const {
    std::set<std::tuple<std::string, double, double, double>> out;
    for (const auto& f : families) {
      if (full_grid) {
        for (double g : gamma_hats)
          for (double e : eta_hats)
            for (double l : lambda_hats) out.insert({f, g, e, l});
      } else {
        for (double g : gamma_hats) out.insert({f, g, base_eta_hat, base_lambda_hat});
        for (double e : eta_hats) out.insert({f, base_gamma_hat, e, base_lambda_hat});
        for (double l : lambda_hats) out.insert({f, base_gamma_hat, base_eta_hat, l});
      }
    }
    return {out.begin(), out.end()};
  }
};

struct CurvePoint {
  long iter;
  double residual, objective;
};

struct GridRow {
  std::string family;
  double gamma_hat = 0, eta_hat = 0, lambda_hat = 0;
  long iters_to_tol = -1;
  double final_residual = std::numeric_limits<double>::quiet_NaN();
  double final_objective = std::numeric_limits<double>::quiet_NaN();
  double wall_ms = 0;
  std::string status;  // converged | max_iters | error: ...
  Vector x_final;
  std::vector<CurvePoint> curve;
};

inline int worker_count(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("GRAPHSPLIT_THREADS")) {
    int v = std::atoi(env);
    if (v > 0) return v;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

inline GridRow run_cell(const FusedLassoInstance& inst, const ProblemInstance& prob,
                        const std::string& family, double gh, double eh, double lh,
                        const ExperimentConfig& cfg) {
  GridRow row;
  row.family = family;
  row.gamma_hat = gh;
  row.eta_hat = eh;
  row.lambda_hat = lh;
  auto t0 = std::chrono::steady_clock::now();
  try {
    FamilyRun fr = configure_family(family, prob, gh, eh, lh);
    Solver solver(fr.scheme, prob);
    SolveOptions opt;
    opt.max_iters = cfg.max_iters;
    opt.residual_tol = cfg.tol;
    opt.lambda = fr.lambda;
    opt.record_every = cfg.record_every;
    opt.objective = [&inst](const Vector& x) { return inst.objective(x); };
    SolveReport rep = solver.solve(opt);
    row.iters_to_tol = rep.converged ? rep.iters_run : -1;
    row.final_residual = rep.final_residual;
    row.x_final = rep.final.x[0];
    row.final_objective = inst.objective(row.x_final);
    row.status = rep.converged ? "converged" : "max_iters";
    for (const auto& h : rep.history) row.curve.push_back({h.iter, h.residual, h.objective});
  } catch (const std::exception& e) {
    row.status = std::string("error: ") + e.what();
  }
  row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return row;
}

// Rows come back in the sorted cell order whatever the completion order.
inline std::vector<GridRow> run_grid(const FusedLassoInstance& inst, const ExperimentConfig& cfg) {
  cfg.validate();
  ProblemInstance prob = to_problem(inst);
  auto cells = cfg.cells();
  std::vector<GridRow> rows(cells.size());
  std::atomic<std::size_t> next{0};
  auto work = [&]() {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      const auto& [f, g, e, l] = cells[i];
      rows[i] = run_cell(inst, prob, f, g, e, l, cfg);
    }
  };
  int nt = std::min<int>(worker_count(cfg.threads), static_cast<int>(cells.size()));
  if (nt <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < nt; ++t) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  return rows;
}

// ---- findings over a finished grid ----------------------------------------

struct TrendFindings {
  std::string family;
  double best_gamma_hat = 0.0;
  bool gamma_near_base = false;  // best γ̂ is the base value or a grid neighbour of it
  bool lambda_decreasing = false;
  bool small_eta_best = false;
  std::map<double, long> by_gamma, by_eta, by_lambda;  // iterations, -1 when not converged

  bool all() const { return gamma_near_base && lambda_decreasing && small_eta_best; }
};

inline TrendFindings trend_findings(const std::vector<GridRow>& rows, const ExperimentConfig& cfg,
                                    const std::string& family) {
  TrendFindings f;
  f.family = family;
  for (const auto& r : rows) {
    if (r.family != family) continue;
    bool base_g = r.gamma_hat == cfg.base_gamma_hat, base_e = r.eta_hat == cfg.base_eta_hat,
         base_l = r.lambda_hat == cfg.base_lambda_hat;
    if (base_e && base_l) f.by_gamma[r.gamma_hat] = r.iters_to_tol;
    if (base_g && base_l) f.by_eta[r.eta_hat] = r.iters_to_tol;
    if (base_g && base_e) f.by_lambda[r.lambda_hat] = r.iters_to_tol;
  }
  auto cost = [](long it) { return it < 0 ? std::numeric_limits<long>::max() : it; };

  std::vector<double> gs;
  for (const auto& [g, it] : f.by_gamma) gs.push_back(g);
  if (!gs.empty()) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < gs.size(); ++i)
      if (cost(f.by_gamma[gs[i]]) < cost(f.by_gamma[gs[best]])) best = i;
    f.best_gamma_hat = gs[best];
    auto base = std::find(gs.begin(), gs.end(), cfg.base_gamma_hat);
    if (base != gs.end() && cost(f.by_gamma[gs[best]]) != std::numeric_limits<long>::max()) {
      long gap = static_cast<long>(best) - static_cast<long>(base - gs.begin());
      f.gamma_near_base = std::abs(gap) <= 1;
    }
  }

  f.lambda_decreasing = f.by_lambda.size() >= 2;
  long prev = std::numeric_limits<long>::max();
  bool first = true;
  for (const auto& [l, it] : f.by_lambda) {
    if (it < 0 || (!first && !(it < prev))) f.lambda_decreasing = false;
    prev = it;
    first = false;
  }

  if (f.by_eta.size() >= 2) {
    long lo = f.by_eta.begin()->second, hi = f.by_eta.rbegin()->second;
    f.small_eta_best = lo >= 0 && cost(lo) < cost(hi);
  }
  return f;
}

// ---- parity against the reference solver ----------------------------------

struct ParityRow {
  std::string family;
  long iters = 0;
  bool converged = false;
  double final_residual = 0.0;
  double objective = 0.0, ref_objective = 0.0;
  double rel_objective_diff = 0.0;  // |F − F_ref| / (1 + |F_ref|)
  double x_inf_diff = 0.0;
  double consensus_gap = 0.0;       // max_{i,j} ‖x_i − x_j‖
  double dual_gap = 0.0;            // max_k ‖y_k − L_k x_n‖
  bool passed = false;
  Vector x;
};

struct ParityOptions {
  double gamma_hat = 0.5, eta_hat = 0.1, lambda_hat = 0.9;
  double tol = 1e-10;
  long max_iters = 200000;
  double objective_tol = 1e-4;
  double x_tol = 1e-3;
};

inline ParityRow parity_run(const FusedLassoInstance& inst, const ProblemInstance& prob,
                            const ReferenceResult& ref, const std::string& family,
                            const ParityOptions& opt) {
  ParityRow row;
  row.family = family;
  row.ref_objective = ref.objective;
  FamilyRun fr = configure_family(family, prob, opt.gamma_hat, opt.eta_hat, opt.lambda_hat);
  Solver solver(fr.scheme, prob);
  SolveOptions so;
  so.max_iters = opt.max_iters;
  so.residual_tol = opt.tol;
  so.lambda = fr.lambda;
  so.record_every = opt.max_iters;
  SolveReport rep = solver.solve(so);
  row.iters = rep.iters_run;
  row.converged = rep.converged;
  row.final_residual = rep.final_residual;
  row.x = rep.final.x[0];
  row.objective = inst.objective(row.x);
  row.rel_objective_diff = std::abs(row.objective - ref.objective) / (1.0 + std::abs(ref.objective));
  row.x_inf_diff = (row.x - ref.x).lpNorm<Eigen::Infinity>();
  row.consensus_gap = consensus_gap(rep.final.x);
  const Vector& xn = rep.final.x[rep.final.x.size() - 1];
  for (std::size_t k = 0; k < prob.r(); ++k)
    row.dual_gap = std::max(row.dual_gap, (rep.final.y[k] - prob.BL[k].L->apply(xn)).norm());
  row.passed = row.converged && row.rel_objective_diff <= opt.objective_tol && row.x_inf_diff <= opt.x_tol;
  return row;
}

}  // namespace graphsplit
