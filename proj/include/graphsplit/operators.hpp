#pragma once

#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "graphsplit/linalg.hpp"

namespace graphsplit {

// Maximally monotone operator accessed through its resolvent J_{tA}(v).
struct ResolventOp {
  Eigen::Index dim = 0;
  std::function<Vector(double, const Vector&)> resolvent;
  std::string label;

  Vector operator()(double step, const Vector& v) const {
    if (!(step > 0)) throw Error("resolvent step must be positive");
    if (v.size() != dim) throw DimensionError("resolvent argument has wrong dimension");
    return resolvent(step, v);
  }
};

// Single-valued monotone operator with a Lipschitz constant. When cocoercive
// is set the operator is assumed (1/lipschitz)-cocoercive.
struct SingleValuedOp {
  Eigen::Index dim = 0;
  std::function<Vector(const Vector&)> apply;
  double lipschitz = 0.0;
  bool cocoercive = true;
  std::string label;

  Vector operator()(const Vector& x) const {
    if (x.size() != dim) throw DimensionError("operator argument has wrong dimension");
    return apply(x);
  }
};

// B_k composed with the linear map L_k.
struct ComposedBlock {
  ResolventOp B;
  std::shared_ptr<const LinearMap> L;
};

struct ProblemInstance {
  Eigen::Index d = 0;
  std::vector<ResolventOp> A;
  std::vector<ComposedBlock> BL;
  std::vector<SingleValuedOp> C;

  std::size_t n() const { return A.size(); }
  std::size_t r() const { return BL.size(); }
  std::size_t p() const { return C.size(); }

  std::vector<double> lipschitz_constants() const {
    std::vector<double> out;
    for (const auto& c : C) out.push_back(c.lipschitz);
    return out;
  }
  std::vector<double> L_norms() const {
    std::vector<double> out;
    for (const auto& b : BL) out.push_back(b.L->norm());
    return out;
  }
  std::vector<Eigen::Index> dual_dims() const {
    std::vector<Eigen::Index> out;
    for (const auto& b : BL) out.push_back(b.L->out_dim());
    return out;
  }

  void validate() const {
    if (A.empty()) throw DimensionError("problem needs at least one resolvent operator");
    for (const auto& a : A)
      if (a.dim != d) throw DimensionError("resolvent operator " + a.label + " has wrong dimension");
    for (const auto& b : BL) {
      if (!b.L) throw DimensionError("composed block without linear map");
      if (b.L->in_dim() != d) throw DimensionError("linear map has wrong input dimension");
      if (b.B.dim != b.L->out_dim()) throw DimensionError("B_k does not match the range of L_k");
    }
    for (const auto& c : C) {
      if (c.dim != d) throw DimensionError("single-valued operator has wrong dimension");
      if (!(c.lipschitz >= 0)) throw Error("Lipschitz constant must be nonnegative");
    }
  }
};

inline Vector prox_l1(const Vector& v, double t) {
  if (!(t >= 0)) throw Error("prox_l1: threshold must be nonnegative");
  return v.unaryExpr([t](double a) {
    if (a > t) return a - t;
    if (a < -t) return a + t;
    return 0.0;
  });
}

// ∂(weight ‖·‖₁)
inline ResolventOp l1_resolvent(Eigen::Index dim, double weight) {
  if (!(weight >= 0)) throw Error("l1 weight must be nonnegative");
  return {dim, [weight](double t, const Vector& v) { return prox_l1(v, t * weight); },
          "l1(" + std::to_string(weight) + ")"};
}

inline ResolventOp zero_resolvent(Eigen::Index dim) {
  return {dim, [](double, const Vector& v) { return v; }, "zero"};
}

// a * Id with a ≥ 0
inline ResolventOp scaled_identity_resolvent(Eigen::Index dim, double a) {
  return {dim, [a](double t, const Vector& v) { return Vector(v / (1.0 + t * a)); },
          "identity"};
}

// J_{ηB⁻¹}(u) = u - η J_{(1/η)B}(u/η)
inline Vector resolvent_of_inverse(const ResolventOp& B, double eta, const Vector& u) {
  if (!(eta > 0)) throw Error("resolvent_of_inverse: eta must be positive");
  return u - eta * B(1.0 / eta, u / eta);
}

// x ↦ Aᵀ(Ax - b), cocoercive with constant ‖A‖₂².
inline SingleValuedOp least_squares_gradient(const Matrix& A, const Vector& b) {
  if (A.rows() != b.size()) throw DimensionError("least_squares_gradient: A and b disagree");
  auto Ap = std::make_shared<const Matrix>(A);
  auto bp = std::make_shared<const Vector>(b);
  double nrm = spectral_norm(A);
  return {A.cols(), [Ap, bp](const Vector& x) { return Vector(Ap->transpose() * (*Ap * x - *bp)); },
          nrm * nrm, true, "least_squares"};
}

// x ↦ Sx + c for skew-symmetric S: monotone and Lipschitz but not cocoercive.
inline SingleValuedOp skew_linear(const Matrix& S, const Vector& c) {
  if (!(S + S.transpose()).isZero(1e-14)) throw Error("skew_linear: matrix is not skew-symmetric");
  auto Sp = std::make_shared<const Matrix>(S);
  auto cp = std::make_shared<const Vector>(c);
  return {S.cols(), [Sp, cp](const Vector& x) { return Vector(*Sp * x + *cp); },
          matrix_two_norm(S), false, "skew"};
}

// Empirical property checks on random sample pairs. Each returns the largest
// observed violation (≤ 0 means the property held on every sample).
struct PropertyCheck {
  double worst_violation = 0.0;
  bool passed(double tol = 1e-10) const { return worst_violation <= tol; }
};

inline PropertyCheck check_firmly_nonexpansive(const ResolventOp& op, double step, int samples,
                                               unsigned seed = 7, double scale = 3.0) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> normal(0.0, scale);
  PropertyCheck out{-1e300};
  for (int s = 0; s < samples; ++s) {
    Vector u(op.dim), v(op.dim);
    for (auto& a : u) a = normal(rng);
    for (auto& a : v) a = normal(rng);
    Vector ju = op(step, u), jv = op(step, v);
    // ‖Ju - Jv‖² ≤ ⟨Ju - Jv, u - v⟩
    double viol = (ju - jv).squaredNorm() - (ju - jv).dot(u - v);
    out.worst_violation = std::max(out.worst_violation, viol);
  }
  return out;
}

inline PropertyCheck check_lipschitz(const SingleValuedOp& op, int samples, unsigned seed = 7,
                                     double scale = 3.0) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> normal(0.0, scale);
  PropertyCheck out{-1e300};
  for (int s = 0; s < samples; ++s) {
    Vector u(op.dim), v(op.dim);
    for (auto& a : u) a = normal(rng);
    for (auto& a : v) a = normal(rng);
    double viol = (op(u) - op(v)).norm() - op.lipschitz * (u - v).norm();
    out.worst_violation = std::max(out.worst_violation, viol);
  }
  return out;
}

inline PropertyCheck check_cocoercive(const SingleValuedOp& op, int samples, unsigned seed = 7,
                                      double scale = 3.0) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> normal(0.0, scale);
  PropertyCheck out{-1e300};
  for (int s = 0; s < samples; ++s) {
    Vector u(op.dim), v(op.dim);
    for (auto& a : u) a = normal(rng);
    for (auto& a : v) a = normal(rng);
    Vector g = op(u) - op(v);
    // ℓ⟨Cu - Cv, u - v⟩ ≥ ‖Cu - Cv‖²
    double viol = g.squaredNorm() - op.lipschitz * g.dot(u - v);
    out.worst_violation = std::max(out.worst_violation, viol);
  }
  return out;
}

}  // namespace graphsplit
