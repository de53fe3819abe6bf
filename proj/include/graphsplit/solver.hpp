#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "graphsplit/scheme.hpp"

namespace graphsplit {

// Output of one pass of the solution operator S together with the membership
// witnesses a_i ∈ A_i x_i and b_k ∈ B_k y_k it produces for free.
struct SEvaluation {
  BlockVector x, y;
  BlockVector a, b;
};

struct GammaEvaluation {
  BlockVector gz, gw;
  SEvaluation s;
};

struct IterateState {
  BlockVector z, w;
  BlockVector x, y;
};

inline void check_compatible(const CoefficientScheme& s, const ProblemInstance& prob) {
  s.check_shapes();
  prob.validate();
  if (static_cast<int>(prob.n()) != s.n) throw DimensionError("scheme n differs from number of A_i");
  if (static_cast<int>(prob.r()) != s.r) throw DimensionError("scheme r differs from number of B_k");
  if (static_cast<int>(prob.p()) != s.p) throw DimensionError("scheme p differs from number of C_j");
}

namespace detail {

inline void check_point(const CoefficientScheme& s, const ProblemInstance& prob, const BlockVector& z,
                        const BlockVector& w) {
  if (static_cast<int>(z.size()) != s.m) throw DimensionError("z must have m blocks");
  for (std::size_t j = 0; j < z.size(); ++j)
    if (z[j].size() != prob.d) throw DimensionError("z blocks must have dimension d");
  if (w.dims() != prob.dual_dims()) throw DimensionError("w blocks must match the ranges of L_k");
}

// Forward substitution; assumes the scheme has already been checked explicit.
inline SEvaluation eval_S_unchecked(const CoefficientScheme& s, const ProblemInstance& prob,
                                    const BlockVector& z, const BlockVector& w) {
  const Eigen::Index d = prob.d;
  const int n = s.n, r = s.r, p = s.p;
  const double gamma = s.gamma;
  SEvaluation out;
  out.x = BlockVector(n, d);
  out.a = BlockVector(n, d);

  // Quantities that depend on x only through already-computed blocks are built
  // on first use and reused for later rows.
  std::vector<std::optional<Vector>> Kx(r), dual_pull(r), c_R(p), c_P(p);
  auto get_Kx = [&](int k) -> const Vector& {
    if (!Kx[k]) {
      Vector v = Vector::Zero(d);
      for (int j = 0; j < n; ++j)
        if (s.K(k, j) != 0.0) v.noalias() += s.K(k, j) * out.x[j];
      Kx[k] = std::move(v);
    }
    return *Kx[k];
  };
  auto get_pull = [&](int k) -> const Vector& {
    if (!dual_pull[k]) {
      const auto& L = *prob.BL[k].L;
      dual_pull[k] = L.adjoint(s.E[k] * L.apply(get_Kx(k)) - w[k]);
    }
    return *dual_pull[k];
  };
  auto get_cR = [&](int j) -> const Vector& {
    if (!c_R[j]) {
      Vector v = Vector::Zero(d);
      for (int k = 0; k < n; ++k)
        if (s.R(j, k) != 0.0) v.noalias() += s.R(j, k) * out.x[k];
      c_R[j] = prob.C[j](v);
    }
    return *c_R[j];
  };
  auto get_cP = [&](int j) -> const Vector& {
    if (!c_P[j]) {
      Vector v = Vector::Zero(d);
      for (int k = 0; k < n; ++k)
        if (s.P(k, j) != 0.0) v.noalias() += s.P(k, j) * out.x[k];
      c_P[j] = prob.C[j](v);
    }
    return *c_P[j];
  };

  for (int i = 0; i < n; ++i) {
    Vector v = Vector::Zero(d);
    for (int j = 0; j < s.m; ++j)
      if (s.M(i, j) != 0.0) v.noalias() += s.M(i, j) * z[j];
    for (int j = 0; j < i; ++j)
      if (s.N(i, j) != 0.0) v.noalias() += s.N(i, j) * out.x[j];
    for (int j = 0; j < p; ++j) {
      double c = s.P(i, j) - s.Q(i, j);
      if (c != 0.0) v.noalias() -= gamma * c * get_cR(j);
      if (s.Q(i, j) != 0.0) v.noalias() -= gamma * s.Q(i, j) * get_cP(j);
    }
    for (int k = 0; k < r; ++k)
      if (s.H(i, k) != 0.0) v.noalias() -= gamma * s.H(i, k) * get_pull(k);
    v /= s.D[i];
    const double step = gamma / s.D[i];
    out.x[i] = prob.A[i](step, v);
    out.a[i] = (v - out.x[i]) / step;
  }

  out.y = BlockVector::zeros(prob.dual_dims());
  out.b = out.y;
  for (int k = 0; k < r; ++k) {
    const auto& L = *prob.BL[k].L;
    Vector Htx = Vector::Zero(d);
    for (int i = 0; i < n; ++i)
      if (s.H(i, k) != 0.0) Htx.noalias() += s.H(i, k) * out.x[i];
    Vector v = L.apply(get_Kx(k) + Htx) - w[k] / s.E[k];
    out.y[k] = prob.BL[k].B(1.0 / s.E[k], v);
    out.b[k] = s.E[k] * (v - out.y[k]);
  }
  return out;
}

inline GammaEvaluation gamma_from_S(const CoefficientScheme& s, const ProblemInstance& prob,
                                    SEvaluation ev) {
  GammaEvaluation g;
  g.gz = kron_apply(s.M.transpose(), ev.x);
  g.gw = BlockVector::zeros(prob.dual_dims());
  for (int k = 0; k < s.r; ++k) {
    Vector Htx = Vector::Zero(prob.d);
    for (int i = 0; i < s.n; ++i)
      if (s.H(i, k) != 0.0) Htx.noalias() += s.H(i, k) * ev.x[i];
    g.gw[k] = s.E[k] * (prob.BL[k].L->apply(Htx) - ev.y[k]);
  }
  g.s = std::move(ev);
  return g;
}

}  // namespace detail

inline void require_explicit(const CoefficientScheme& s) {
  if (!check_explicit(s).is_explicit)
    throw UnsupportedSchemeError(
        "scheme is implicit: N, (P-Q)R, QP^T or HK is not strictly lower triangular");
}

inline SEvaluation eval_S(const CoefficientScheme& s, const ProblemInstance& prob, const BlockVector& z,
                          const BlockVector& w) {
  check_compatible(s, prob);
  require_explicit(s);
  detail::check_point(s, prob, z, w);
  return detail::eval_S_unchecked(s, prob, z, w);
}

inline GammaEvaluation eval_Gamma(const CoefficientScheme& s, const ProblemInstance& prob,
                                  const BlockVector& z, const BlockVector& w) {
  return detail::gamma_from_S(s, prob, eval_S(s, prob, z, w));
}

// ⟨(z,w),(z̄,w̄)⟩⋆ = ⟨z,z̄⟩ + γ⟨E⁻¹w, w̄⟩
struct StarNormContext {
  double gamma;
  Vector E;

  explicit StarNormContext(const CoefficientScheme& s) : gamma(s.gamma), E(s.E) {}

  double dot(const BlockVector& z, const BlockVector& w, const BlockVector& zb,
             const BlockVector& wb) const {
    double out = z.dot(zb);
    for (std::size_t k = 0; k < w.size(); ++k) out += gamma * w[k].dot(wb[k]) / E[k];
    return out;
  }
  double squared_norm(const BlockVector& z, const BlockVector& w) const { return dot(z, w, z, w); }
};

inline double residual_star(const CoefficientScheme& s, const BlockVector& gz, const BlockVector& gw,
                            double lambda) {
  if (!(lambda > 0)) throw Error("residual_star: lambda must be positive");
  return s.theta * s.theta * StarNormContext(s).squared_norm(gz, gw) / lambda;
}

inline double consensus_gap(const BlockVector& x) {
  double g = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = i + 1; j < x.size(); ++j) g = std::max(g, (x[i] - x[j]).norm());
  return g;
}

inline Regime detect_regime(const CoefficientScheme& s, const ProblemInstance& prob) {
  for (const auto& c : prob.C)
    if (!c.cocoercive) return Regime::lipschitz;
  if (s.p > 0 && !s.Q.isZero(0.0)) return Regime::lipschitz;
  return Regime::cocoercive;
}

struct HistoryRow {
  long iter = 0;
  double residual = 0.0;
  double consensus_gap = 0.0;
  double objective = std::numeric_limits<double>::quiet_NaN();
  double time_ms = 0.0;
};

struct SolveOptions {
  long max_iters = 10000;
  double residual_tol = 1e-10;
  std::optional<double> lambda;                 // constant λ; default 0.9 λ_max
  std::function<double(long)> lambda_schedule;  // overrides lambda when set
  long record_every = 1;
  std::function<double(const Vector&)> objective;  // evaluated at x_1
  // called after every S evaluation (before the update); used by tests
  std::function<void(long, const IterateState&)> observer;
};

struct SolveReport {
  long iters_run = 0;
  bool converged = false;
  double final_residual = 0.0;
  std::vector<HistoryRow> history;
  IterateState final;
  SEvaluation final_eval;
  BlockVector dual_certificate;  // s̄ = E L K x - w at the final state
  bool residual_nonincreasing = true;
};

struct CertificateReport {
  double consensus_gap = 0.0;
  std::vector<double> dual_residuals;  // ‖L_k x - J_{B_k}(L_k x + s_k)‖
  double inclusion_residual = 0.0;     // ‖Σa_i + ΣL_k*s_k + ΣC_j x‖
  bool passed = false;
};

inline CertificateReport certify_solution(const ProblemInstance& prob, const SEvaluation& ev,
                                          const Vector& x_bar, const BlockVector& s_bar, double tol) {
  CertificateReport rep;
  rep.consensus_gap = consensus_gap(ev.x);
  Vector total = Vector::Zero(prob.d);
  for (std::size_t i = 0; i < ev.a.size(); ++i) total += ev.a[i];
  double worst = rep.consensus_gap;
  for (std::size_t k = 0; k < prob.r(); ++k) {
    const auto& L = *prob.BL[k].L;
    Vector Lx = L.apply(x_bar);
    double res = (Lx - prob.BL[k].B(1.0, Lx + s_bar[k])).norm();
    rep.dual_residuals.push_back(res);
    worst = std::max(worst, res);
    total += L.adjoint(s_bar[k]);
  }
  for (const auto& c : prob.C) total += c(x_bar);
  rep.inclusion_residual = total.norm();
  worst = std::max(worst, rep.inclusion_residual);
  rep.passed = worst <= tol;
  return rep;
}

class Solver {
 public:
  Solver(CoefficientScheme scheme, ProblemInstance problem)
      : s_(std::move(scheme)), prob_(std::move(problem)) {
    check_compatible(s_, prob_);
    require_explicit(s_);
    auto rep = validate_standing(s_, s_.r > 0, s_.p > 0);
    if (!rep.all()) {
      std::string msg = "standing assumptions fail:";
      for (const auto& m : rep.messages) msg += " " + m + ";";
      throw SchemeError(msg);
    }
    regime_ = detect_regime(s_, prob_);
    if (regime_ == Regime::lipschitz && s_.p > 0 && !rep.Q_sum)
      throw SchemeError("lipschitz regime requires Q^T 1 = 1");
    uw_ = compute_UW(s_);
    tau_ = compute_tau(uw_, prob_.lipschitz_constants(), regime_);
    bounds_.emplace(tau_, prob_.L_norms(), regime_);
    bounds_->check_gamma(s_.gamma);
    lambda_max_ = bounds_->lambda_max(s_.gamma);
  }

  const CoefficientScheme& scheme() const { return s_; }
  const ProblemInstance& problem() const { return prob_; }
  Regime regime() const { return regime_; }
  double tau() const { return tau_; }
  const UWPair& uw() const { return uw_; }
  const StepBounds& bounds() const { return *bounds_; }
  double lambda_max() const { return lambda_max_; }

  BlockVector zero_z() const { return BlockVector(static_cast<std::size_t>(s_.m), prob_.d); }
  BlockVector zero_w() const { return BlockVector::zeros(prob_.dual_dims()); }

  SEvaluation eval_S(const BlockVector& z, const BlockVector& w) const {
    detail::check_point(s_, prob_, z, w);
    return detail::eval_S_unchecked(s_, prob_, z, w);
  }
  GammaEvaluation eval_Gamma(const BlockVector& z, const BlockVector& w) const {
    return detail::gamma_from_S(s_, prob_, eval_S(z, w));
  }

  IterateState step(const IterateState& st, double lambda) const {
    check_lambda(lambda);
    auto g = eval_Gamma(st.z, st.w);
    IterateState next{st.z, st.w, g.s.x, g.s.y};
    next.z.axpy(-lambda, g.gz);
    next.w.axpy(-lambda, g.gw);
    return next;
  }

  BlockVector dual_certificate(const BlockVector& x, const BlockVector& w) const {
    BlockVector out = BlockVector::zeros(prob_.dual_dims());
    for (int k = 0; k < s_.r; ++k) {
      Vector Kx = Vector::Zero(prob_.d);
      for (int j = 0; j < s_.n; ++j)
        if (s_.K(k, j) != 0.0) Kx += s_.K(k, j) * x[j];
      out[k] = s_.E[k] * prob_.BL[k].L->apply(Kx) - w[k];
    }
    return out;
  }

  SolveReport solve(const SolveOptions& opt) const { return solve(zero_z(), zero_w(), opt); }

  SolveReport solve(BlockVector z, BlockVector w, const SolveOptions& opt) const {
    detail::check_point(s_, prob_, z, w);
    const double lam_const = opt.lambda ? *opt.lambda : 0.9 * lambda_max_;
    if (!opt.lambda_schedule) check_lambda(lam_const);
    const long every = std::max<long>(1, opt.record_every);
    const auto t0 = std::chrono::steady_clock::now();
    SolveReport rep;
    double prev = std::numeric_limits<double>::infinity();
    for (long t = 0;; ++t) {
      double lam = opt.lambda_schedule ? opt.lambda_schedule(t) : lam_const;
      if (opt.lambda_schedule) check_lambda(lam);
      GammaEvaluation g = eval_Gamma(z, w);
      if (!g.s.x.all_finite() || !g.s.y.all_finite())
        throw DivergenceError("non-finite iterate at t = " + std::to_string(t), t);
      double res = residual_star(s_, g.gz, g.gw, lam);
      if (res > prev * (1 + 1e-12) + 1e-300) rep.residual_nonincreasing = false;
      prev = res;
      bool done = res <= opt.residual_tol || t >= opt.max_iters;
      if (opt.observer) opt.observer(t, IterateState{z, w, g.s.x, g.s.y});
      if (t % every == 0 || done) {
        HistoryRow row;
        row.iter = t;
        row.residual = res;
        row.consensus_gap = consensus_gap(g.s.x);
        if (opt.objective) row.objective = opt.objective(g.s.x[0]);
        row.time_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                          .count();
        rep.history.push_back(row);
      }
      if (done) {
        rep.iters_run = t;
        rep.converged = res <= opt.residual_tol;
        rep.final_residual = res;
        rep.dual_certificate = dual_certificate(g.s.x, w);
        rep.final = IterateState{std::move(z), std::move(w), g.s.x, g.s.y};
        rep.final_eval = std::move(g.s);
        return rep;
      }
      z.axpy(-lam, g.gz);
      w.axpy(-lam, g.gw);
      if (!z.all_finite() || !w.all_finite())
        throw DivergenceError("non-finite iterate at t = " + std::to_string(t + 1), t + 1);
    }
  }

 private:
  void check_lambda(double lambda) const {
    if (!(lambda > 0) || lambda > lambda_max_ * (1 + 1e-12))
      throw StepSizeError("lambda = " + std::to_string(lambda) + " outside (0, " +
                              std::to_string(lambda_max_) + "]",
                          lambda_max_);
  }

  CoefficientScheme s_;
  ProblemInstance prob_;
  Regime regime_ = Regime::cocoercive;
  UWPair uw_;
  double tau_ = 0.0;
  std::optional<StepBounds> bounds_;
  double lambda_max_ = 1.0;
};

inline SolveReport solve(const CoefficientScheme& s, const ProblemInstance& prob, const BlockVector& z0,
                         const BlockVector& w0, const SolveOptions& opt) {
  return Solver(s, prob).solve(z0, w0, opt);
}

}  // namespace graphsplit
