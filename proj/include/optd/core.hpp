#pragma once

// Domain types and linear-algebra kernels shared by every solver: the point
// set, simplex weights, the ellipsoid shape matrix, the exact (integer)
// design with its incrementally maintained inverse, and the log-det kernels.
//
// Everything here is templated on the scalar type; solvers instantiate with
// double (see the *d aliases at the bottom).

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "optd/errors.hpp"

namespace optd {

using Index = Eigen::Index;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// ---------------------------------------------------------------------------
// SPD factorization

/// Relative pivot floor: an SPD matrix whose smallest squared Cholesky pivot
/// falls below this fraction of its mean eigenvalue is treated as singular.
template <typename Scalar>
constexpr Scalar singular_rtol() {
  return Scalar(100) * std::numeric_limits<Scalar>::epsilon();
}

template <typename Scalar>
struct SpdFactor {
  Matrix<Scalar> L;  // lower triangular, M = L L^T
  Scalar logdet;
};

/// Cholesky with a relative-pivot singularity test. Returns nullopt when M is
/// not numerically positive definite.
template <typename Scalar>
std::optional<SpdFactor<Scalar>> factor_spd(const Matrix<Scalar>& M) {
  const Index n = M.rows();
  if (n == 0 || M.cols() != n) return std::nullopt;
  const Scalar scale = M.trace() / Scalar(n);
  if (!(scale > Scalar(0)) || !std::isfinite(scale)) return std::nullopt;
  Eigen::LLT<Matrix<Scalar>> llt(M);
  if (llt.info() != Eigen::Success) return std::nullopt;
  Matrix<Scalar> L = llt.matrixL();
  const auto diag = L.diagonal();
  const Scalar minPivot = diag.minCoeff();
  if (!(minPivot * minPivot > singular_rtol<Scalar>() * scale)) return std::nullopt;
  const Scalar logdet = Scalar(2) * diag.array().log().sum();
  return SpdFactor<Scalar>{std::move(L), logdet};
}

template <typename Scalar>
SpdFactor<Scalar> factor_spd_or_throw(const Matrix<Scalar>& M, const char* what) {
  auto f = factor_spd(M);
  if (!f) throw SingularInformation(std::string(what) + ": matrix is numerically singular");
  return std::move(*f);
}

/// Inverse of an SPD matrix from its lower Cholesky factor; exactly symmetric.
template <typename Scalar>
Matrix<Scalar> spd_inverse(const Matrix<Scalar>& L) {
  const Index n = L.rows();
  Matrix<Scalar> Linv = L.template triangularView<Eigen::Lower>().solve(Matrix<Scalar>::Identity(n, n));
  Matrix<Scalar> inv = Linv.transpose() * Linv;
  return Scalar(0.5) * (inv + inv.transpose());
}

// ---------------------------------------------------------------------------
// DesignMatrix

/// n x m point set, one point per column (contiguous per point). The points
/// must be finite and span R^n.
template <typename Scalar>
class DesignMatrix {
 public:
  explicit DesignMatrix(Matrix<Scalar> points, std::string id = {})
      : points_(std::move(points)), id_(std::move(id)) {
    const Index n = points_.rows();
    const Index m = points_.cols();
    if (n < 2) throw DomainError("DesignMatrix: dimension must be at least 2");
    if (m < n) throw DomainError("DesignMatrix: need at least n points");
    if (!points_.allFinite()) throw DomainError("DesignMatrix: non-finite entry");
    // Rank via the eigenvalues of the n x n Gram matrix: O(m n^2), no m x n copy.
    Matrix<Scalar> gram = points_ * points_.transpose();
    Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> eig(gram, Eigen::EigenvaluesOnly);
    const Scalar hi = eig.eigenvalues().maxCoeff();
    const Scalar lo = eig.eigenvalues().minCoeff();
    if (!(hi > Scalar(0)) || !(lo > singular_rtol<Scalar>() * hi)) {
      throw RankDeficientData("DesignMatrix: points do not span R^n");
    }
  }

  Index dim() const { return points_.rows(); }
  Index size() const { return points_.cols(); }
  const Matrix<Scalar>& points() const { return points_; }
  auto point(Index i) const { return points_.col(i); }
  const std::string& id() const { return id_; }

 private:
  Matrix<Scalar> points_;
  std::string id_;
};

// ---------------------------------------------------------------------------
// DesignWeights

/// Sparse point of the probability simplex over m indices. Only strictly
/// positive entries are stored, sorted by index.
template <typename Scalar>
class DesignWeights {
 public:
  static constexpr double kSumTol = 1e-12;

  DesignWeights(Index m, std::vector<Index> support, Vector<Scalar> values) : m_(m) {
    if (static_cast<Index>(support.size()) != values.size()) {
      throw DimensionMismatch("DesignWeights: support and values differ in length");
    }
    std::vector<std::size_t> order(support.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return support[a] < support[b]; });
    support_.resize(support.size());
    values_.resize(values.size());
    for (std::size_t k = 0; k < order.size(); ++k) {
      support_[k] = support[order[k]];
      values_(static_cast<Index>(k)) = values(static_cast<Index>(order[k]));
    }
    for (std::size_t k = 0; k < support_.size(); ++k) {
      if (support_[k] < 0 || support_[k] >= m) throw DomainError("DesignWeights: index out of range");
      if (k > 0 && support_[k] == support_[k - 1]) throw DomainError("DesignWeights: duplicate index");
      const Scalar v = values_(static_cast<Index>(k));
      if (!(v > Scalar(0)) || !std::isfinite(v)) throw DomainError("DesignWeights: weights must be positive");
    }
    if (support_.empty() || std::abs(values_.sum() - Scalar(1)) > Scalar(kSumTol)) {
      throw DomainError("DesignWeights: weights must sum to one");
    }
  }

  static DesignWeights uniform(Index m, std::vector<Index> support) {
    const auto k = static_cast<Index>(support.size());
    return DesignWeights(m, std::move(support), Vector<Scalar>::Constant(k, Scalar(1) / Scalar(k)));
  }

  /// Keeps the entries of a dense vector strictly above `floor` and
  /// renormalizes them onto the simplex.
  static DesignWeights from_dense(const Vector<Scalar>& u, Scalar floor = Scalar(0)) {
    std::vector<Index> idx;
    for (Index i = 0; i < u.size(); ++i) {
      if (u(i) > floor) idx.push_back(i);
    }
    return from_entries(u.size(), idx, u(idx));
  }

  /// Same as from_dense but for entries already aligned with `support`.
  static DesignWeights from_entries(Index m, std::span<const Index> support, const Vector<Scalar>& values,
                                    Scalar floor = Scalar(0)) {
    std::vector<Index> idx;
    std::vector<Scalar> vals;
    for (std::size_t k = 0; k < support.size(); ++k) {
      if (values(static_cast<Index>(k)) > floor) {
        idx.push_back(support[k]);
        vals.push_back(values(static_cast<Index>(k)));
      }
    }
    if (idx.empty()) throw DomainError("DesignWeights: no weight above the floor");
    Vector<Scalar> v = Eigen::Map<const Vector<Scalar>>(vals.data(), static_cast<Index>(vals.size()));
    v /= v.sum();
    return DesignWeights(m, std::move(idx), std::move(v));
  }

  Index ambient_size() const { return m_; }
  Index support_size() const { return static_cast<Index>(support_.size()); }
  const std::vector<Index>& support() const { return support_; }
  const Vector<Scalar>& values() const { return values_; }

  Scalar weight(Index i) const {
    auto it = std::lower_bound(support_.begin(), support_.end(), i);
    if (it == support_.end() || *it != i) return Scalar(0);
    return values_(static_cast<Index>(it - support_.begin()));
  }

  Vector<Scalar> dense() const {
    Vector<Scalar> u = Vector<Scalar>::Zero(m_);
    u(support_) = values_;
    return u;
  }

 private:
  Index m_;
  std::vector<Index> support_;
  Vector<Scalar> values_;
};

// ---------------------------------------------------------------------------
// EllipsoidMatrix

/// SPD shape matrix H of the ellipsoid {x : x^T H x <= n}, carried with its
/// lower Cholesky factor and log-determinant.
template <typename Scalar>
class EllipsoidMatrix {
 public:
  explicit EllipsoidMatrix(Matrix<Scalar> H) : H_(std::move(H)) {
    if (H_.rows() != H_.cols()) throw DimensionMismatch("EllipsoidMatrix: H must be square");
    const Scalar scale = H_.cwiseAbs().maxCoeff();
    if (!((H_ - H_.transpose()).cwiseAbs().maxCoeff() <= Scalar(1e-12) * scale)) {
      throw DomainError("EllipsoidMatrix: H is not symmetric");
    }
    H_ = Scalar(0.5) * (H_ + H_.transpose()).eval();
    auto f = factor_spd(H_);
    if (!f) throw SingularInformation("EllipsoidMatrix: H is not positive definite");
    L_ = std::move(f->L);
    logdet_ = f->logdet;
  }

  /// H = M^{-1} for an information matrix M = X U X^T.
  static EllipsoidMatrix from_information(const Matrix<Scalar>& M) {
    const auto f = factor_spd_or_throw(M, "ellipsoid_from_weights");
    return EllipsoidMatrix(spd_inverse(f.L));
  }

  Index dim() const { return H_.rows(); }
  const Matrix<Scalar>& shape() const { return H_; }
  const Matrix<Scalar>& chol() const { return L_; }
  Scalar log_det() const { return logdet_; }

 private:
  Matrix<Scalar> H_;
  Matrix<Scalar> L_;
  Scalar logdet_ = 0;
};

// ---------------------------------------------------------------------------
// Kernels

/// X U X^T = sum over the support of u_i x_i x_i^T.
template <typename Scalar>
Matrix<Scalar> info_matrix(const DesignMatrix<Scalar>& X, const DesignWeights<Scalar>& u) {
  if (u.ambient_size() != X.size()) throw DimensionMismatch("info_matrix: weights/points size mismatch");
  const Matrix<Scalar> Xs = X.points()(Eigen::all, u.support());
  Matrix<Scalar> M = Xs * u.values().asDiagonal() * Xs.transpose();
  return Scalar(0.5) * (M + M.transpose());
}

/// g0(u) = ln det(X U X^T). Throws SingularInformation when the support does
/// not span R^n.
template <typename Scalar>
Scalar log_det_objective(const DesignMatrix<Scalar>& X, const DesignWeights<Scalar>& u) {
  return factor_spd_or_throw(info_matrix(X, u), "log_det_objective").logdet;
}

template <typename Scalar>
EllipsoidMatrix<Scalar> ellipsoid_from_weights(const DesignMatrix<Scalar>& X, const DesignWeights<Scalar>& u) {
  return EllipsoidMatrix<Scalar>::from_information(info_matrix(X, u));
}

/// x^T H x through the Cholesky factor: ||L^T x||^2.
template <typename Scalar, typename Derived>
Scalar mahalanobis(const EllipsoidMatrix<Scalar>& H, const Eigen::MatrixBase<Derived>& x) {
  return (H.chol().transpose() * x).squaredNorm();
}

/// x_i^T H x_i for every column of `points`.
template <typename Scalar, typename Derived>
Vector<Scalar> mahalanobis_columns(const EllipsoidMatrix<Scalar>& H, const Eigen::MatrixBase<Derived>& points) {
  return (H.chol().transpose() * points).colwise().squaredNorm().transpose();
}

struct GapCertificate {
  double gap;
  double kappaMax;
};

/// Duality gap of the pair (u, H n/kappaMax) with H = (X U X^T)^{-1}, evaluated
/// over `active` (all points when empty). Scaling H by n/kappaMax restores dual
/// feasibility; the gap of that pair is n ln(kappaMax / n).
template <typename Scalar>
GapCertificate duality_gap_certificate(const DesignMatrix<Scalar>& X, const DesignWeights<Scalar>& u,
                                       std::span<const Index> active = {}) {
  const auto H = ellipsoid_from_weights(X, u);
  const Scalar n = Scalar(X.dim());
  Scalar kmax = 0;
  constexpr Index kBlock = 4096;
  if (active.empty()) {
    for (Index b = 0; b < X.size(); b += kBlock) {
      const Index len = std::min(kBlock, X.size() - b);
      kmax = std::max(kmax, mahalanobis_columns(H, X.points().middleCols(b, len)).maxCoeff());
    }
  } else {
    for (std::size_t b = 0; b < active.size(); b += kBlock) {
      const auto chunk = active.subspan(b, std::min<std::size_t>(kBlock, active.size() - b));
      const Matrix<Scalar> pts = X.points()(Eigen::all, std::vector<Index>(chunk.begin(), chunk.end()));
      kmax = std::max(kmax, mahalanobis_columns(H, pts).maxCoeff());
    }
  }
  const double gap = std::max(0.0, static_cast<double>(n * std::log(kmax / n)));
  return {gap, static_cast<double>(kmax)};
}

// ---------------------------------------------------------------------------
// ExactDesign

/// Multiset of point indices with multiplicities summing to N, together with
/// G = sum n_i x_i x_i^T, its inverse and ln det G. Single writer.
template <typename Scalar>
class ExactDesign {
 public:
  static constexpr int kRefactorEvery = 50;
  static constexpr double kMinSwapRatio = 1e-14;
  /// Swaps that shrink det G by more than this factor refactorize at once.
  static constexpr double kRefactorBelowRatio = 1e-2;

  ExactDesign(const DesignMatrix<Scalar>& X, std::map<Index, int> counts) : counts_(std::move(counts)) {
    for (const auto& [i, c] : counts_) {
      if (i < 0 || i >= X.size()) throw DomainError("ExactDesign: index out of range");
      if (c < 1) throw DomainError("ExactDesign: multiplicities must be positive");
      total_ += c;
    }
    refactor(X);
  }

  const std::map<Index, int>& counts() const { return counts_; }
  int total() const { return total_; }
  int multiplicity(Index i) const {
    auto it = counts_.find(i);
    return it == counts_.end() ? 0 : it->second;
  }
  const Matrix<Scalar>& information() const { return G_; }
  const Matrix<Scalar>& inverse() const { return Ginv_; }
  Scalar log_det() const { return logdet_; }
  int swaps_since_refactor() const { return sinceRefactor_; }

  /// tau_i = x_i^T G^{-1} x_i.
  template <typename Derived>
  Scalar leverage(const Eigen::MatrixBase<Derived>& x) const {
    return x.dot(Ginv_ * x);
  }

  /// det(G - x_i x_i^T + x_j x_j^T) / det(G) = (1 + tau_j)(1 - tau_i) + tau_ij^2.
  Scalar swap_ratio(const DesignMatrix<Scalar>& X, Index out, Index in) const {
    if (out == in) return Scalar(1);
    const Vector<Scalar> gi = Ginv_ * X.point(out);
    const Scalar tauI = X.point(out).dot(gi);
    const Scalar tauIJ = X.point(in).dot(gi);
    const Scalar tauJ = leverage(X.point(in));
    return (Scalar(1) + tauJ) * (Scalar(1) - tauI) + tauIJ * tauIJ;
  }

  /// Replaces one copy of `out` by one copy of `in` using two Sherman-Morrison
  /// updates; refactorizes from the counts every kRefactorEvery swaps and
  /// after strongly shrinking swaps.
  /// Returns the determinant ratio.
  Scalar swap(const DesignMatrix<Scalar>& X, Index out, Index in) {
    auto it = counts_.find(out);
    if (it == counts_.end()) throw DomainError("swap_update: index not in design");
    if (out == in) return Scalar(1);
    const Scalar ratio = swap_ratio(X, out, in);
    if (!(ratio > Scalar(kMinSwapRatio))) throw SingularAfterSwap("swap_update: resulting G is singular");

    const auto xi = X.point(out);
    const auto xj = X.point(in);
    const Vector<Scalar> gj = Ginv_ * xj;
    Ginv_.noalias() -= (gj * gj.transpose()) / (Scalar(1) + xj.dot(gj));
    const Vector<Scalar> gi = Ginv_ * xi;
    Ginv_.noalias() += (gi * gi.transpose()) / (Scalar(1) - xi.dot(gi));
    Ginv_ = Scalar(0.5) * (Ginv_ + Ginv_.transpose()).eval();
    G_.noalias() += xj * xj.transpose() - xi * xi.transpose();
    const Scalar before = logdet_;
    logdet_ += std::log(ratio);

    if (--it->second == 0) counts_.erase(it);
    ++counts_[in];
    if (ratio < Scalar(kRefactorBelowRatio)) {
      // The closed form cancels badly here; take the ratio from the fresh factor.
      refactor(X);
      return std::exp(logdet_ - before);
    }
    if (++sinceRefactor_ >= kRefactorEvery) refactor(X);
    return ratio;
  }

  /// Rebuilds G, G^{-1} and ln det G from the multiplicities.
  void refactor(const DesignMatrix<Scalar>& X) {
    const Index n = X.dim();
    G_ = Matrix<Scalar>::Zero(n, n);
    for (const auto& [i, c] : counts_) G_.noalias() += Scalar(c) * X.point(i) * X.point(i).transpose();
    auto f = factor_spd(G_);
    if (!f) throw SingularInformation("ExactDesign: information matrix is singular");
    Ginv_ = spd_inverse(f->L);
    logdet_ = f->logdet;
    sinceRefactor_ = 0;
  }

 private:
  std::map<Index, int> counts_;
  int total_ = 0;
  Matrix<Scalar> G_;
  Matrix<Scalar> Ginv_;
  Scalar logdet_ = 0;
  int sinceRefactor_ = 0;
};

/// Value-semantics form of ExactDesign::swap.
template <typename Scalar>
ExactDesign<Scalar> swap_update(ExactDesign<Scalar> design, const DesignMatrix<Scalar>& X, Index out, Index in) {
  design.swap(X, out, in);
  return design;
}

// ---------------------------------------------------------------------------
// SolveReport

enum class Status { Converged, IterationLimit, Stalled };

inline const char* to_string(Status s) {
  switch (s) {
    case Status::Converged: return "converged";
    case Status::IterationLimit: return "iteration-limit";
    case Status::Stalled: return "stalled";
  }
  return "unknown";
}

struct SolveReport {
  std::string method;
  double objective = 0;
  double dualityGap = 0;
  long iterations = 0;
  long supportSize = 0;
  long eliminated = 0;
  double wallTime = 0;
  Status status = Status::Converged;
};

using DesignMatrixd = DesignMatrix<double>;
using DesignWeightsd = DesignWeights<double>;
using EllipsoidMatrixd = EllipsoidMatrix<double>;
using ExactDesignd = ExactDesign<double>;
using Matrixd = Matrix<double>;
using Vectord = Vector<double>;

}  // namespace optd
