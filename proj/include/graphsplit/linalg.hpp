#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "graphsplit/errors.hpp"

namespace graphsplit {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// An element of H^k stored as k blocks. Blocks may have different dimensions
// (the dual variable w lives in G_1 x ... x G_r).
class BlockVector {
 public:
  BlockVector() = default;
  explicit BlockVector(std::vector<Vector> blocks) : blocks_(std::move(blocks)) {}
  BlockVector(std::size_t count, Eigen::Index dim) : blocks_(count, Vector::Zero(dim)) {}

  static BlockVector zeros(const std::vector<Eigen::Index>& dims) {
    BlockVector out;
    out.blocks_.reserve(dims.size());
    for (auto d : dims) out.blocks_.push_back(Vector::Zero(d));
    return out;
  }

  std::size_t size() const { return blocks_.size(); }
  bool empty() const { return blocks_.empty(); }
  Vector& operator[](std::size_t i) { return blocks_[i]; }
  const Vector& operator[](std::size_t i) const { return blocks_[i]; }
  const std::vector<Vector>& blocks() const { return blocks_; }
  std::vector<Vector>& blocks() { return blocks_; }

  std::vector<Eigen::Index> dims() const {
    std::vector<Eigen::Index> out;
    out.reserve(blocks_.size());
    for (const auto& b : blocks_) out.push_back(b.size());
    return out;
  }

  bool same_shape(const BlockVector& o) const { return dims() == o.dims(); }

  BlockVector& operator+=(const BlockVector& o) {
    require_same(o);
    for (std::size_t i = 0; i < blocks_.size(); ++i) blocks_[i] += o.blocks_[i];
    return *this;
  }
  BlockVector& operator-=(const BlockVector& o) {
    require_same(o);
    for (std::size_t i = 0; i < blocks_.size(); ++i) blocks_[i] -= o.blocks_[i];
    return *this;
  }
  BlockVector& operator*=(double a) {
    for (auto& b : blocks_) b *= a;
    return *this;
  }
  // this += a * o
  BlockVector& axpy(double a, const BlockVector& o) {
    require_same(o);
    for (std::size_t i = 0; i < blocks_.size(); ++i) blocks_[i] += a * o.blocks_[i];
    return *this;
  }

  friend BlockVector operator+(BlockVector a, const BlockVector& b) { return a += b; }
  friend BlockVector operator-(BlockVector a, const BlockVector& b) { return a -= b; }
  friend BlockVector operator*(double s, BlockVector a) { return a *= s; }

  double dot(const BlockVector& o) const {
    require_same(o);
    double s = 0.0;
    for (std::size_t i = 0; i < blocks_.size(); ++i) s += blocks_[i].dot(o.blocks_[i]);
    return s;
  }
  double squared_norm() const {
    double s = 0.0;
    for (const auto& b : blocks_) s += b.squaredNorm();
    return s;
  }
  double norm() const { return std::sqrt(squared_norm()); }

  bool all_finite() const {
    for (const auto& b : blocks_)
      if (!b.allFinite()) return false;
    return true;
  }

 private:
  void require_same(const BlockVector& o) const {
    if (!same_shape(o)) throw DimensionError("block vectors have different shapes");
  }

  std::vector<Vector> blocks_;
};

// (M ⊗ Id) z without materialising the Kronecker product: block i = Σ_j M_ij z_j.
inline BlockVector kron_apply(const Matrix& M, const BlockVector& z) {
  if (static_cast<std::size_t>(M.cols()) != z.size())
    throw DimensionError("kron_apply: M has " + std::to_string(M.cols()) + " columns but z has " +
                         std::to_string(z.size()) + " blocks");
  Eigen::Index d = z.empty() ? 0 : z[0].size();
  for (std::size_t j = 0; j < z.size(); ++j)
    if (z[j].size() != d) throw DimensionError("kron_apply: blocks of z differ in dimension");
  BlockVector out(static_cast<std::size_t>(M.rows()), d);
  for (Eigen::Index i = 0; i < M.rows(); ++i)
    for (Eigen::Index j = 0; j < M.cols(); ++j) {
      double c = M(i, j);
      if (c != 0.0) out[i].noalias() += c * z[j];
    }
  return out;
}

struct PowerIterationOptions {
  int max_iters = 200000;
  double rel_tol = 1e-10;
  unsigned seed = 42;
};

// Largest eigenvalue of a symmetric PSD matrix by power iteration. Stops once
// ‖Gv − ρv‖ ≤ rel_tol·ρ, which puts an eigenvalue within rel_tol·ρ of ρ; a
// test on successive Rayleigh quotients stalls early when the top gap is small.
inline double power_iteration_psd(const Matrix& G, const PowerIterationOptions& opt = {}) {
  const Eigen::Index n = G.rows();
  if (n == 0) return 0.0;
  std::mt19937 rng(opt.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = normal(rng);
  v.normalize();
  double rho = 0.0;
  for (int it = 0; it < opt.max_iters; ++it) {
    Vector Gv = G * v;
    rho = v.dot(Gv);
    double nrm = Gv.norm();
    if (nrm == 0.0) return 0.0;
    if ((Gv - rho * v).norm() <= opt.rel_tol * std::abs(rho)) return rho;
    v = Gv / nrm;
  }
  return rho;
}

// ‖A‖₂ by power iteration on whichever Gram matrix (AᵀA or AAᵀ) is smaller.
inline double spectral_norm(const Matrix& A, const PowerIterationOptions& opt = {}) {
  if (A.size() == 0) return 0.0;
  Matrix G = A.rows() < A.cols() ? Matrix(A * A.transpose()) : Matrix(A.transpose() * A);
  double l = power_iteration_psd(G, opt);
  return std::sqrt(std::max(l, 0.0));
}

// Bounded linear operator between finite-dimensional spaces, stored densely.
// The operator norm is computed once; closed forms may be supplied instead.
class LinearMap {
 public:
  LinearMap() = default;
  explicit LinearMap(Matrix A, std::optional<double> norm = std::nullopt)
      : A_(std::move(A)), norm_(norm ? *norm : spectral_norm(A_)) {}

  Eigen::Index in_dim() const { return A_.cols(); }
  Eigen::Index out_dim() const { return A_.rows(); }
  const Matrix& matrix() const { return A_; }
  double norm() const { return norm_; }

  Vector apply(const Vector& x) const {
    if (x.size() != A_.cols()) throw DimensionError("LinearMap::apply: dimension mismatch");
    return A_ * x;
  }
  Vector adjoint(const Vector& y) const {
    if (y.size() != A_.rows()) throw DimensionError("LinearMap::adjoint: dimension mismatch");
    return A_.transpose() * y;
  }

 private:
  Matrix A_;
  double norm_ = 0.0;
};

inline double spectral_norm(const LinearMap& L, const PowerIterationOptions& opt = {}) {
  return spectral_norm(L.matrix(), opt);
}

// Exact 2-norm via SVD, for the small coefficient matrices.
inline double matrix_two_norm(const Matrix& A) {
  if (A.size() == 0) return 0.0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A);
  return svd.singularValues()(0);
}

inline double min_eigenvalue_sym(const Matrix& S) {
  if (S.rows() != S.cols()) throw DimensionError("min_eigenvalue_sym: matrix is not square");
  if (S.rows() == 0) return 0.0;
  Eigen::MatrixXd sym = 0.5 * (S + S.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

inline double default_psd_tol(const Matrix& S) {
  double inf_norm = S.size() == 0 ? 0.0 : S.cwiseAbs().rowwise().sum().maxCoeff();
  return 1e-10 * (1.0 + inf_norm);
}

inline bool is_psd(const Matrix& S, std::optional<double> tol = std::nullopt) {
  double t = tol ? *tol : default_psd_tol(S);
  return min_eigenvalue_sym(S) >= -t;
}

// Moore-Penrose pseudoinverse; singular values below cutoff * σ_max are dropped.
inline Matrix pinv(const Matrix& A, double cutoff = 1e-12) {
  if (!(cutoff > 0)) throw Error("pinv: cutoff must be positive");
  if (A.size() == 0) return Matrix::Zero(A.cols(), A.rows());
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  double thresh = cutoff * sv(0);
  Vector inv(sv.size());
  for (Eigen::Index i = 0; i < sv.size(); ++i) inv[i] = sv[i] > thresh ? 1.0 / sv[i] : 0.0;
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

inline Eigen::Index numerical_rank(const Matrix& A, double cutoff = 1e-12) {
  if (A.size() == 0) return 0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A);
  const auto& sv = svd.singularValues();
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv[i] > cutoff * sv(0)) ++r;
  return r;
}

inline Matrix make_matrix(std::initializer_list<std::initializer_list<double>> rows) {
  Eigen::Index nr = static_cast<Eigen::Index>(rows.size());
  Eigen::Index nc = nr == 0 ? 0 : static_cast<Eigen::Index>(rows.begin()->size());
  Matrix out(nr, nc);
  Eigen::Index i = 0;
  for (const auto& row : rows) {
    if (static_cast<Eigen::Index>(row.size()) != nc) throw DimensionError("ragged matrix literal");
    Eigen::Index j = 0;
    for (double v : row) out(i, j++) = v;
    ++i;
  }
  return out;
}

}  // namespace graphsplit
