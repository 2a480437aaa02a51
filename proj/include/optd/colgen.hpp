#pragma once

// Column generation for the limit D-optimal design problem: restricted
// master solves on a small working set, a pricing scan for points outside
// the current ellipsoid, and Harman-Pronzato elimination of points that can
// never enter the optimal support.

#include <cstdint>
#include <span>
#include <vector>

#include "optd/core.hpp"
#include "optd/progress.hpp"
#include "optd/rmp_solver.hpp"

namespace optd {

struct ColGenConfig {
  /// Most-violated points added per round; 0 selects 5 n.
  Index n0 = 0;
  double stopTol = 1e-5;
  RmpConfig rmp{};
  /// Never drop zero-weight points from the working set.
  bool keepAll = false;
  bool hpElimination = true;
  int maxOuter = 500;
  std::uint64_t seed = 0;
  ProgressSink progress{};

  void validate() const;
};

struct PricingResult {
  double z = 0;
  std::vector<Index> violated;
};

/// z = max(0, max_i kappa_i - n) over `active`, plus up to n0 violators
/// ordered by violation (descending), ties by ascending index.
PricingResult pricing(const DesignMatrixd& X, const EllipsoidMatrixd& H, std::span<const Index> active, Index n0);

/// Relative slack on kappa comparisons against n and h_n(eps): points within
/// rounding of the boundary are neither priced in nor eliminated.
inline constexpr double kKappaSlack = 1e-12;

/// h_n(eps) = n (1 + eps/2 - sqrt(eps (4 + eps - 4/n)) / 2). Points with
/// kappa below it cannot be support points of the optimal design.
double hp_constant(double epsilon, Index n);

/// Indices of `active` with kappa_i >= h_n(epsilon), in input order.
std::vector<Index> hp_filter(const DesignMatrixd& X, const EllipsoidMatrixd& H, double epsilon,
                             std::span<const Index> active);

struct ColGenResult {
  DesignWeightsd weights;  // full length, zero off the support
  EllipsoidMatrixd ellipsoid;
  SolveReport report;
  std::vector<IterationRecord> history;
  /// Every point ever removed by elimination, ascending.
  std::vector<Index> eliminatedPoints;
  Index finalWorkingSize = 0;
  Index maxWorkingSize = 0;
  /// max(0, max kappa - n) over all m points at exit.
  double fullSetZ = 0;
};

ColGenResult run_column_generation(const DesignMatrixd& X, const ColGenConfig& cfg = {});

}  // namespace optd
