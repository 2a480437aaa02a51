#pragma once

// Frank-Wolfe with Wolfe away steps for the limit D-optimal design problem,
// with closed-form step sizes and rank-one updates of H = (X U X^T)^{-1}.

#include <cstdint>
#include <span>
#include <vector>

#include "optd/core.hpp"
#include "optd/progress.hpp"

namespace optd {

struct FwConfig {
  /// Stopping tolerance on max kappa - n; 0 selects 1e-5 / n.
  double tol = 0;
  long maxIter = 1'000'000;
  bool awaySteps = true;
  /// Elimination checkpoint period in iterations; 0 disables.
  long hpCheckEvery = 500;
  long refactorEvery = 1000;
  std::uint64_t seed = 0;
  /// Emit a progress record every this many iterations (0: only at exit).
  long progressEvery = 0;
  ProgressSink progress{};
  bool recordObjective = false;

  double effective_tol(Index n) const { return tol > 0 ? tol : 1e-5 / static_cast<double>(n); }
};

/// Initial sparse design: for each new direction orthogonal to the span of
/// the points chosen so far, pick the two points with extreme projections.
/// Repeated selections collapse; every distinct point gets equal weight.
DesignWeightsd ky_init(const DesignMatrixd& X, std::uint64_t seed = 0);

/// Optimal forward step towards a vertex with kappa > n: (kappa - n) / (n (kappa - 1)).
double forward_step_size(double kappa, Index n);

/// Optimal away step from a support point with weight `weight`, capped at
/// the drop step weight / (1 - weight).
double away_step_size(double kappa, double weight, Index n);

struct FwResult {
  DesignWeightsd weights;
  EllipsoidMatrixd ellipsoid;
  SolveReport report;
  std::vector<Index> eliminatedPoints;
  long forwardSteps = 0;
  long awaySteps = 0;
  long dropSteps = 0;
  /// Largest relative drift of H against refactorization seen at a refresh.
  double maxDrift = 0;
  /// ln det after every iteration when recordObjective is set.
  std::vector<double> objectiveTrace;
};

FwResult fw_solve(const DesignMatrixd& X, const FwConfig& cfg = {}, const DesignWeightsd* init = nullptr);

/// Elimination checkpoint: keeps active points with kappa >= h_n(epsilon)
/// and every point currently carrying weight. `kappa` is aligned with
/// `active`; `weights` is dense over all m points.
std::vector<Index> fw_hp_checkpoint(std::span<const Index> active, std::span<const double> kappa,
                                    const Vectord& weights, double epsilon, Index n);

}  // namespace optd
