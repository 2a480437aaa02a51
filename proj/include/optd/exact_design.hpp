#pragma once

// Exact (integer) D-optimal designs built from the support of a limit
// solution: rounding, exchange local search, and the worst-case bound that
// ties the result back to the limit objective.

#include <map>
#include <span>
#include <vector>

#include "optd/core.hpp"

namespace optd {

enum class LocalSearchVariant { FirstImprovement, BestImprovement };
enum class RoundingVariant { LargestRemainder, TopN };

struct LocalSearchConfig {
  LocalSearchVariant variant = LocalSearchVariant::BestImprovement;
  long maxSwaps = 100'000;
  /// Smallest determinant ratio that counts as an improvement.
  double improveTol = 1.0 + 1e-10;

  void validate() const;
};

/// Integer design with sum n_i = N from limit weights. LargestRemainder uses
/// floor(N u_i) plus one unit for the largest remainders (ties by index);
/// TopN takes the N heaviest support points once each. A singular result is
/// repaired by moving units onto unused support points.
ExactDesignd round_to_exact(const DesignWeightsd& u, int N, const DesignMatrixd& X,
                            RoundingVariant variant = RoundingVariant::LargestRemainder);

struct LocalSearchResult {
  ExactDesignd design;
  long swaps = 0;
  Status status = Status::Converged;
};

/// Exchange local search over candidate set S until no single swap
/// (i in design, j in S) improves det G by a factor >= improveTol.
LocalSearchResult local_search(const DesignMatrixd& X, std::span<const Index> S, ExactDesignd init,
                               const LocalSearchConfig& cfg = {});

/// h(N, n) = n ln(N / (N - n + 1)).
double approx_bound(long N, Index n);

struct BoundReport {
  double phiRel = 0;      // ln det(X U* X^T)
  double hNn = 0;         // approx_bound(N, n)
  double lowerBound = 0;  // phiRel - hNn
  double achieved = 0;    // ln det(G / N)
  double gap = 0;         // (phiRel - achieved) / |phiRel|
  bool gapIsAbsolute = false;  // |phiRel| too small to normalize by
  bool corollarySatisfied = false;
};

BoundReport bound_report(const DesignMatrixd& X, const DesignWeightsd& limit, const ExactDesignd& design);

/// max over i in the design and j in S of tau_j - tau_i tau_j + tau_ij^2 - tau_i,
/// with G^{-1} refactorized from the multiplicities. Nonpositive (up to the
/// improvement tolerance) at any local-search optimum.
double verify_lemma_tau(const DesignMatrixd& X, std::span<const Index> S, const ExactDesignd& design);

struct BruteForceResult {
  double bestLogDet = 0;
  std::map<Index, int> bestCounts;
  long evaluated = 0;
};

/// Exhaustive maximum of ln det(sum n_i x_i x_i^T) over all size-N multisets
/// of `candidates`. Throws TooLarge beyond 10^6 multisets.
BruteForceResult brute_force_exact(const DesignMatrixd& X, std::span<const Index> candidates, int N);

}  // namespace optd
