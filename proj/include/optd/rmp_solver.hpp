#pragma once

// Interior-point solver for the D-optimal design problem restricted to a
// small subset of points:
//
//   max ln det(sum_{i in subset} u_i x_i x_i^T)   s.t.  sum u_i = 1, u >= 0.
//
// The dual ellipsoid is H = (X U X^T)^{-1}; solutions are certified by the
// gap n ln(max_i x_i^T H x_i / n) over the subset.

#include <span>
#include <vector>

#include "optd/core.hpp"

namespace optd {

struct RmpConfig {
  double gapTol = 1e-9;
  int maxNewton = 200;
  double barrierShrink = 0.2;
  /// Weights at or below this value are truncated to zero on extraction.
  double minWeight = 1e-9;

  void validate() const;
};

struct RmpSolution {
  std::vector<Index> subset;  // sorted, what was solved over
  DesignWeightsd weights;     // ambient size m, support within subset
  EllipsoidMatrixd ellipsoid;
  double objective = 0;  // ln det(X U X^T)
  double gap = 0;        // certificate over the subset
  int newtonIters = 0;
  Status status = Status::Converged;
};

/// One accepted Newton step: barrier parameter and barrier objective after it.
struct BarrierStep {
  double mu;
  double value;
};

RmpSolution solve_restricted(const DesignMatrixd& X, std::span<const Index> subset,
                             const DesignWeightsd* warmStart = nullptr, const RmpConfig& cfg = {},
                             std::vector<BarrierStep>* trace = nullptr);

/// Indices with weight strictly above minWeight, ascending.
std::vector<Index> extract_support(const DesignWeightsd& weights, double minWeight);
std::vector<Index> extract_support(const RmpSolution& sol, const RmpConfig& cfg = {});

/// Restricted objective and its derivatives with respect to the subset
/// weights, in subset order. Exposed for derivative checks.
class RestrictedModel {
 public:
  RestrictedModel(const DesignMatrixd& X, std::span<const Index> subset);

  Index size() const { return points_.cols(); }
  Index dim() const { return points_.rows(); }
  const Matrixd& points() const { return points_; }

  double value(const Vectord& u) const;
  /// d g0 / d u_i = x_i^T H x_i.
  Vectord gradient(const Vectord& u) const;
  /// d^2 g0 / d u_i d u_j = -(x_i^T H x_j)^2.
  Matrixd hessian(const Vectord& u) const;
  /// Cross products K_ij = x_i^T H x_j with H = (X U X^T)^{-1}.
  Matrixd cross(const Vectord& u) const;

 private:
  Matrixd points_;
};

}  // namespace optd
