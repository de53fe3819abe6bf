#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "graphsplit/linalg.hpp"
#include "graphsplit/operators.hpp"

namespace graphsplit {

enum class Regime { cocoercive, lipschitz };

inline const char* to_string(Regime r) { return r == Regime::cocoercive ? "cocoercive" : "lipschitz"; }

struct CoefficientScheme {
  int n = 0, m = 0, r = 0, p = 0;
  Matrix M, N;   // n×m, n×n
  Vector D;      // δ_i
  Vector E;      // η_k
  Matrix H, K;   // n×r, r×n
  Matrix P, Q;   // n×p
  Matrix R;      // p×n
  double gamma = 1.0;
  double theta = 1.0;
  std::optional<std::string> family;

  void check_shapes() const {
    auto req = [](bool ok, const char* what) {
      if (!ok) throw DimensionError(std::string("scheme: ") + what);
    };
    req(n >= 1 && m >= 1 && r >= 0 && p >= 0, "sizes must satisfy n, m >= 1 and r, p >= 0");
    req(M.rows() == n && M.cols() == m, "M must be n x m");
    req(N.rows() == n && N.cols() == n, "N must be n x n");
    req(D.size() == n, "D_diag must have n entries");
    req(E.size() == r, "E_diag must have r entries");
    req(H.rows() == n && H.cols() == r, "H must be n x r");
    req(K.rows() == r && K.cols() == n, "K must be r x n");
    req(P.rows() == n && P.cols() == p, "P must be n x p");
    req(Q.rows() == n && Q.cols() == p, "Q must be n x p");
    req(R.rows() == p && R.cols() == n, "R must be p x n");
    req((D.array() > 0).all(), "D must be a positive diagonal");
    req((E.array() > 0).all(), "E must be a positive diagonal");
    req(gamma > 0 && std::isfinite(gamma), "gamma must be positive");
    req(theta > 0 && std::isfinite(theta), "theta must be positive");
  }
};

// Empty scheme of the given sizes with D = I, E = ηI and every other matrix zero.
inline CoefficientScheme blank_scheme(int n, int m, int r, int p, double gamma, double eta) {
  CoefficientScheme s;
  s.n = n;
  s.m = m;
  s.r = r;
  s.p = p;
  s.M = Matrix::Zero(n, m);
  s.N = Matrix::Zero(n, n);
  s.D = Vector::Ones(n);
  s.E = Vector::Constant(r, eta);
  s.H = Matrix::Zero(n, r);
  s.K = Matrix::Zero(r, n);
  s.P = Matrix::Zero(n, p);
  s.Q = Matrix::Zero(n, p);
  s.R = Matrix::Zero(p, n);
  s.gamma = gamma;
  return s;
}

struct StandingReport {
  bool ker_M = false;        // (i)  Mᵀ1 = 0 and rank M = n-1
  bool sum_N = false;        // (ii) 1ᵀN1 = 1ᵀD1
  bool PR = false;           // (iii)
  bool HK = false;           // (iv)
  bool Q_sum = false;        // Qᵀ1 = 1, needed only in the lipschitz regime
  std::vector<std::string> messages;

  bool all() const { return ker_M && sum_N && PR && HK; }
};

inline StandingReport validate_standing(const CoefficientScheme& s, bool has_B, bool has_C,
                                        double tol = 1e-10) {
  s.check_shapes();
  StandingReport rep;
  const Vector one_n = Vector::Ones(s.n);

  double mt1 = (s.M.transpose() * one_n).cwiseAbs().maxCoeff();
  Eigen::Index rank = numerical_rank(s.M);
  rep.ker_M = mt1 <= tol && rank == s.n - 1;
  if (!rep.ker_M)
    rep.messages.push_back("(i) ker M^T != span{1}: |M^T 1|_inf = " + std::to_string(mt1) +
                           ", rank M = " + std::to_string(rank) + ", expected " +
                           std::to_string(s.n - 1));

  double sn = s.N.sum(), sd = s.D.sum();
  rep.sum_N = std::abs(sn - sd) <= tol;
  if (!rep.sum_N)
    rep.messages.push_back("(ii) 1^T N 1 = " + std::to_string(sn) + " but 1^T D 1 = " +
                           std::to_string(sd));

  auto max_dev = [](const Vector& v, double target) {
    return v.size() == 0 ? 0.0 : (v.array() - target).abs().maxCoeff();
  };
  auto max_abs = [](const Matrix& A) { return A.size() == 0 ? 0.0 : A.cwiseAbs().maxCoeff(); };

  if (has_C) {
    double dp = max_dev(s.P.transpose() * one_n, 1.0);
    double dr = max_dev(s.R * one_n, 1.0);
    rep.PR = dp <= tol && dr <= tol;
    if (!rep.PR) rep.messages.push_back("(iii) P^T 1 = R 1 = 1 fails");
  } else {
    rep.PR = max_abs(s.P) <= tol && max_abs(s.R) <= tol;
    if (!rep.PR) rep.messages.push_back("(iii) no C operators but P or R nonzero");
  }
  if (has_B) {
    rep.HK = max_dev(s.H.transpose() * one_n, 1.0) <= tol;
    if (!rep.HK) rep.messages.push_back("(iv) H^T 1 = 1 fails");
  } else {
    rep.HK = max_abs(s.H) <= tol && max_abs(s.K) <= tol;
    if (!rep.HK) rep.messages.push_back("(iv) no B operators but H or K nonzero");
  }
  rep.Q_sum = max_dev(s.Q.transpose() * one_n, 1.0) <= tol;
  return rep;
}

struct ExplicitReport {
  bool is_explicit = false;
  bool first_rows_zero = false;
};

// Strictly lower triangular dependence of x_i on x_{<i}; zero tests are exact.
inline ExplicitReport check_explicit(const CoefficientScheme& s) {
  s.check_shapes();
  ExplicitReport rep{true, true};
  for (int i = 0; i < s.n && rep.is_explicit; ++i) {
    for (int j = i; j < s.n; ++j)
      if (s.N(i, j) != 0.0) rep.is_explicit = false;
    for (int k = i; k < s.n && rep.is_explicit; ++k) {
      for (int j = 0; j < s.p; ++j) {
        if ((s.P(i, j) - s.Q(i, j)) * s.R(j, k) != 0.0) rep.is_explicit = false;
        if (s.Q(i, j) * s.P(k, j) != 0.0) rep.is_explicit = false;
      }
      for (int j = 0; j < s.r; ++j)
        if (s.H(i, j) * s.K(j, k) != 0.0) rep.is_explicit = false;
    }
  }
  auto row_zero = [](const Matrix& A) { return A.cols() == 0 || A.row(0).isZero(0.0); };
  rep.first_rows_zero = row_zero(s.N) && row_zero(s.P) && row_zero(s.Q) && row_zero(s.H);
  return rep;
}

struct UWPair {
  Matrix U;
  std::optional<Matrix> W;
};

inline UWPair compute_UW(const CoefficientScheme& s) {
  s.check_shapes();
  Matrix Mt = s.M.transpose();
  Matrix Mt_pinv = pinv(Mt);
  UWPair out;
  Matrix target = s.P.transpose() - s.R;
  out.U = target * Mt_pinv;
  if (s.p > 0) {
    double res = (out.U * Mt - target).cwiseAbs().maxCoeff();
    if (res > 1e-8)
      throw InconsistentSchemeError("P^T - R is not of the form U M^T (residual " +
                                    std::to_string(res) + ")");
    Vector qs = s.Q.transpose() * Vector::Ones(s.n);
    if ((qs.array() - 1.0).abs().maxCoeff() <= 1e-10) {
      Matrix tq = s.P.transpose() - s.Q.transpose();
      Matrix W = tq * Mt_pinv;
      if ((W * Mt - tq).cwiseAbs().maxCoeff() > 1e-8)
        throw InconsistentSchemeError("P^T - Q^T is not of the form W M^T");
      out.W = W;
    }
  }
  return out;
}

inline double compute_tau(const UWPair& uw, const std::vector<double>& ell, Regime regime) {
  if (static_cast<Eigen::Index>(ell.size()) != uw.U.rows())
    throw DimensionError("compute_tau: need one Lipschitz constant per row of U");
  Vector sq(ell.size());
  for (std::size_t j = 0; j < ell.size(); ++j) {
    if (!(ell[j] >= 0)) throw Error("compute_tau: Lipschitz constants must be nonnegative");
    sq[j] = std::sqrt(ell[j]);
  }
  double a = matrix_two_norm(sq.asDiagonal() * uw.U);
  double tau = a * a;
  if (regime == Regime::lipschitz) {
    if (!uw.W) throw SchemeError("lipschitz regime requires Q^T 1 = 1 so that W exists");
    double b = matrix_two_norm(sq.asDiagonal() * *uw.W);
    tau += b * b;
  }
  return tau;
}

constexpr std::size_t kDefaultOmegaCap = 2000;

inline Matrix omega_base(const CoefficientScheme& s) {
  Matrix base = 2.0 * Matrix(s.D.asDiagonal()) - s.N - s.N.transpose() - s.M * s.M.transpose();
  return base;
}

inline Matrix assemble_omega(const CoefficientScheme& s, const std::vector<LinearMap>& L,
                             Eigen::Index d, std::size_t cap = kDefaultOmegaCap) {
  s.check_shapes();
  if (static_cast<int>(L.size()) != s.r) throw DimensionError("assemble_omega: need r linear maps");
  for (const auto& l : L)
    if (l.in_dim() != d) throw DimensionError("assemble_omega: linear map input dimension != d");
  const std::size_t size = static_cast<std::size_t>(s.n) * static_cast<std::size_t>(d);
  if (size > cap)
    throw CapExceededError("Omega would be " + std::to_string(size) + " x " + std::to_string(size) +
                           " (cap " + std::to_string(cap) +
                           "); use the scalar sufficient conditions of the scheme family");
  Matrix base = omega_base(s);
  Matrix G = s.H - s.K.transpose();  // n×r
  std::vector<Matrix> LtL;
  for (const auto& l : L) LtL.push_back(l.matrix().transpose() * l.matrix());
  Matrix out = Matrix::Zero(size, size);
  for (int i = 0; i < s.n; ++i)
    for (int j = 0; j < s.n; ++j) {
      auto blk = out.block(i * d, j * d, d, d);
      blk.diagonal().array() += base(i, j);
      for (int k = 0; k < s.r; ++k) {
        double c = G(i, k) * G(j, k);
        if (c != 0.0) blk -= s.gamma * c * s.E[k] * LtL[k];
      }
    }
  return 0.5 * (out + out.transpose());
}

struct Upsilons {
  Matrix U1, U2;
};

inline Upsilons assemble_upsilons(const CoefficientScheme& s, const std::vector<double>& ell) {
  s.check_shapes();
  if (static_cast<int>(ell.size()) != s.p) throw DimensionError("assemble_upsilons: need p constants");
  Vector l = Eigen::Map<const Vector>(ell.data(), static_cast<Eigen::Index>(ell.size()));
  Matrix PQ = s.P - s.Q;
  Matrix PR = s.P - s.R.transpose();
  Matrix U2 = PR * l.asDiagonal() * PR.transpose();
  Matrix U1 = PQ * l.asDiagonal() * PQ.transpose() + U2;
  return {U1, U2};
}

inline Matrix kron_identity(const Matrix& A, Eigen::Index d) {
  Matrix out = Matrix::Zero(A.rows() * d, A.cols() * d);
  for (Eigen::Index i = 0; i < A.rows(); ++i)
    for (Eigen::Index j = 0; j < A.cols(); ++j)
      if (A(i, j) != 0.0) out.block(i * d, j * d, d, d).diagonal().setConstant(A(i, j));
  return out;
}

// Flags are empty when the condition could not be decided (above the cap and no
// family-specific sufficient condition is known).
struct PsdReport {
  std::optional<bool> A320, A321, A322;
  bool exact = false;  // decided by eigenvalues of the assembled matrices
  std::optional<double> min_eig_320, min_eig_321, min_eig_322;

  std::optional<bool> level(int k) const { return k == 0 ? A320 : k == 1 ? A321 : A322; }
};

// Scalar conditions from the worked examples, used above the assembly cap.
inline PsdReport psd_family_conditions(const CoefficientScheme& s, const std::vector<double>& L_norms,
                                       const std::vector<double>& ell) {
  PsdReport rep;
  if (!s.family) return rep;
  const std::string& f = *s.family;
  double max_l = 0.0;
  for (double v : ell) max_l = std::max(max_l, v);
  double sum_l = 0.0;
  for (double v : ell) sum_l += v;
  if (f == "sequential" || f == "star") {
    // Ω = M diag(I - γη_k L_k*L_k) Mᵀ with M of full column rank
    double worst = 0.0;
    for (int k = 0; k < s.r; ++k) worst = std::max(worst, s.gamma * s.E[k] * L_norms[k] * L_norms[k]);
    rep.A320 = worst <= 1.0;
    if (s.Q.isZero(0.0)) rep.A322 = worst + s.gamma * max_l / 2.0 <= 1.0;
  } else if (f == "ring") {
    double sum = 0.0;
    double eta = s.r > 0 ? s.E.maxCoeff() : 0.0;
    for (int k = 0; k < s.r; ++k) sum += L_norms[k] * L_norms[k];
    double lhs = s.gamma * eta * sum;
    if (lhs <= 1.0) rep.A320 = true;
    if (s.Q.isZero(0.0) && lhs + s.gamma * sum_l / 2.0 <= 1.0) rep.A322 = true;
  } else if (f == "complete") {
    double worst = 0.0;
    for (int k = 0; k < s.r; ++k) {
      double a2 = s.M(k, k) * s.M(k, k);
      worst = std::max(worst, s.gamma * (s.E[k] / a2) * L_norms[k] * L_norms[k]);
    }
    rep.A320 = worst <= 1.0;
  }
  return rep;
}

inline PsdReport validate_psd(const CoefficientScheme& s, const std::vector<LinearMap>& L,
                              const std::vector<double>& ell, Eigen::Index d,
                              std::size_t cap = kDefaultOmegaCap) {
  if (static_cast<std::size_t>(s.n) * static_cast<std::size_t>(d) > cap) {
    std::vector<double> norms;
    for (const auto& l : L) norms.push_back(l.norm());
    return psd_family_conditions(s, norms, ell);
  }
  Matrix omega = assemble_omega(s, L, d, cap);
  Upsilons ups = assemble_upsilons(s, ell);
  PsdReport rep;
  rep.exact = true;
  auto decide = [](const Matrix& S, std::optional<bool>& flag, std::optional<double>& eig) {
    eig = min_eigenvalue_sym(S);
    flag = *eig >= -default_psd_tol(S);
  };
  decide(omega, rep.A320, rep.min_eig_320);
  decide(Matrix(omega - s.gamma * kron_identity(ups.U1, d)), rep.A321, rep.min_eig_321);
  decide(Matrix(omega - 0.5 * s.gamma * kron_identity(ups.U2, d)), rep.A322, rep.min_eig_322);
  return rep;
}

class StepBounds {
 public:
  StepBounds(double tau, std::vector<double> L_norms, Regime regime)
      : tau_(tau), regime_(regime) {
    if (!(tau >= 0)) throw Error("step_bounds: tau must be nonnegative");
    for (double l : L_norms) {
      if (!(l >= 0)) throw Error("step_bounds: operator norms must be nonnegative");
      max_L2_ = std::max(max_L2_, l * l);
    }
  }

  double tau() const { return tau_; }
  Regime regime() const { return regime_; }

  double gamma_max() const {
    if (tau_ == 0.0) return std::numeric_limits<double>::infinity();
    return (regime_ == Regime::cocoercive ? 2.0 : 1.0) / tau_;
  }

  void check_gamma(double gamma) const {
    if (!(gamma > 0) || !(gamma < gamma_max()))
      throw StepSizeError("gamma = " + std::to_string(gamma) + " outside (0, " +
                              std::to_string(gamma_max()) + ")",
                          gamma_max());
  }

  double eta_max(double gamma) const {
    check_gamma(gamma);
    if (max_L2_ == 0.0) return std::numeric_limits<double>::infinity();
    return 1.0 / (gamma * max_L2_);
  }

  double lambda_max(double gamma) const {
    check_gamma(gamma);
    return regime_ == Regime::cocoercive ? (2.0 - gamma * tau_) / 2.0 : 1.0 - gamma * tau_;
  }

 private:
  double tau_;
  Regime regime_;
  double max_L2_ = 0.0;
};

inline StepBounds step_bounds(double tau, const std::vector<double>& L_norms, Regime regime) {
  return StepBounds(tau, L_norms, regime);
}

// ---- named families -------------------------------------------------------

inline void require_family_sizes(const char* name, int n, int r, int p) {
  if (n < 2) throw DimensionError(std::string(name) + ": need n >= 2");
  if ((r != 0 && r != n - 1) || (p != 0 && p != n - 1))
    throw DimensionError(std::string(name) + ": r and p must be 0 or n-1");
}

// Path-graph incidence: M_ii = 1, M_{i+1,i} = -1.
inline Matrix path_incidence(int n) {
  Matrix M = Matrix::Zero(n, n - 1);
  for (int i = 0; i < n - 1; ++i) {
    M(i, i) = 1.0;
    M(i + 1, i) = -1.0;
  }
  return M;
}

inline CoefficientScheme scheme_sequential(int n, int r, int p, double gamma, double eta) {
  require_family_sizes("scheme_sequential", n, r, p);
  CoefficientScheme s = blank_scheme(n, n - 1, r, p, gamma, eta);
  s.M = path_incidence(n);
  for (int i = 1; i < n; ++i) s.N(i, i - 1) = 2.0;
  s.D = Vector::Constant(n, 2.0);
  s.D[0] = 1.0;
  s.D[n - 1] = 1.0;
  Matrix enter = Matrix::Zero(n, n - 1), leave = Matrix::Zero(n - 1, n);
  for (int j = 0; j < n - 1; ++j) {
    enter(j + 1, j) = 1.0;
    leave(j, j) = 1.0;
  }
  if (r > 0) {
    s.H = enter;
    s.K = leave;
  }
  if (p > 0) {
    s.P = enter;
    s.R = leave;
  }
  s.family = "sequential";
  return s;
}

inline CoefficientScheme scheme_star(int n, int r, int p, double gamma, double eta) {
  require_family_sizes("scheme_star", n, r, p);
  CoefficientScheme s = blank_scheme(n, n - 1, r, p, gamma, eta);
  for (int j = 0; j < n - 1; ++j) {
    s.M(0, j) = 1.0;
    s.M(j + 1, j) = -1.0;
  }
  for (int i = 1; i < n; ++i) s.N(i, 0) = 2.0;
  s.D = Vector::Ones(n);
  s.D[0] = n - 1;
  Matrix enter = Matrix::Zero(n, n - 1), leave = Matrix::Zero(n - 1, n);
  for (int j = 0; j < n - 1; ++j) {
    enter(j + 1, j) = 1.0;
    leave(j, 0) = 1.0;
  }
  if (r > 0) {
    s.H = enter;
    s.K = leave;
  }
  if (p > 0) {
    s.P = enter;
    s.R = leave;
  }
  s.family = "star";
  return s;
}

inline double complete_a(int n, int i) {  // i is 1-based
  return std::sqrt(double(n - i) * n / double(n - i + 1));
}
inline double complete_t(int n, int j) {
  return -std::sqrt(double(n) / (double(n - j) * double(n - j + 1)));
}

// Closed-form onto decomposition of the complete-graph Laplacian nI - J.
inline Matrix complete_onto(int n) {
  Matrix M = Matrix::Zero(n, n - 1);
  for (int j = 1; j <= n - 1; ++j) {
    M(j - 1, j - 1) = complete_a(n, j);
    for (int i = j + 1; i <= n; ++i) M(i - 1, j - 1) = complete_t(n, j);
  }
  return M;
}

inline CoefficientScheme scheme_complete(int n, int r, int p, double gamma, double eta) {
  require_family_sizes("scheme_complete", n, r, p);
  CoefficientScheme s = blank_scheme(n, n - 1, r, p, gamma, eta);
  s.M = complete_onto(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < i; ++j) s.N(i, j) = 2.0;
  s.D = Vector::Constant(n, n - 1);
  Matrix HP = Matrix::Zero(n, n - 1), KR = Matrix::Zero(n - 1, n);
  for (int j = 1; j <= n - 1; ++j) {
    KR(j - 1, j - 1) = 1.0;
    for (int i = j + 1; i <= n; ++i) HP(i - 1, j - 1) = 1.0 / (n - j);
  }
  if (r > 0) {
    s.H = HP;
    s.K = KR;
    for (int k = 1; k <= r; ++k) s.E[k - 1] = eta * complete_a(n, k) * complete_a(n, k);
  }
  if (p > 0) {
    s.P = HP;
    s.R = KR;
  }
  s.family = "complete";
  return s;
}

// Ring graph G with sequential subgraph G'. Case 2 (lipschitz) needs n >= 3.
inline CoefficientScheme scheme_ring(int n, int r, int p, double gamma, double eta, Regime regime) {
  if (n < 2) throw DimensionError("scheme_ring: need n >= 2");
  if (regime == Regime::lipschitz && n < 3 && p > 0)
    throw DimensionError("scheme_ring: the lipschitz construction needs n >= 3");
  if (r < 0 || p < 0) throw DimensionError("scheme_ring: r, p must be nonnegative");
  CoefficientScheme s = blank_scheme(n, n - 1, r, p, gamma, eta);
  s.M = path_incidence(n);
  for (int i = 1; i < n; ++i) s.N(i, i - 1) = 1.0;
  s.N(n - 1, 0) += 1.0;
  for (int k = 0; k < r; ++k) {
    s.H(n - 1, k) = 1.0;
    s.K(k, 0) = 1.0;
  }
  for (int j = 0; j < p; ++j) {
    s.R(j, 0) = 1.0;
    if (regime == Regime::cocoercive) {
      s.P(n - 1, j) = 1.0;
    } else {
      s.P(n - 2, j) = 1.0;
      s.Q(n - 1, j) = 1.0;
    }
  }
  s.family = "ring";
  return s;
}

inline CoefficientScheme scheme_by_name(const std::string& family, int n, int r, int p, double gamma,
                                        double eta) {
  if (family == "sequential") return scheme_sequential(n, r, p, gamma, eta);
  if (family == "star") return scheme_star(n, r, p, gamma, eta);
  if (family == "complete") return scheme_complete(n, r, p, gamma, eta);
  if (family == "ring") return scheme_ring(n, r, p, gamma, eta, Regime::cocoercive);
  if (family == "ring-lipschitz") return scheme_ring(n, r, p, gamma, eta, Regime::lipschitz);
  throw Error("unknown scheme family '" + family + "'");
}

}  // namespace graphsplit
