#include "optd/exact_design.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "optd/parallel.hpp"

namespace optd {

namespace {

std::vector<Index> sorted_unique(std::span<const Index> s) {
  std::vector<Index> v(s.begin(), s.end());
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

Matrixd gram_of(const DesignMatrixd& X, const std::map<Index, int>& counts) {
  Matrixd G = Matrixd::Zero(X.dim(), X.dim());
  for (const auto& [i, c] : counts) G.noalias() += static_cast<double>(c) * X.point(i) * X.point(i).transpose();
  return G;
}

// Moves single units onto unused support points until G is nonsingular,
// each time picking the move with the best ratio under a small ridge.
void repair_rounding(const DesignMatrixd& X, const std::vector<Index>& support, std::map<Index, int>& counts) {
  const Index n = X.dim();
  for (std::size_t guard = 0; guard <= support.size() + 1; ++guard) {
    const Matrixd G = gram_of(X, counts);
    if (factor_spd(G)) return;
    std::vector<Index> unused;
    for (Index j : support) {
      if (!counts.contains(j)) unused.push_back(j);
    }
    if (unused.empty()) break;
    const double scale = G.trace() / static_cast<double>(n);
    const double ridge = 1e-8 * (scale > 0 ? scale : 1.0);
    const Matrixd Ginv = (G + ridge * Matrixd::Identity(n, n)).llt().solve(Matrixd::Identity(n, n));
    double bestRatio = -std::numeric_limits<double>::infinity();
    Index bestOut = -1;
    Index bestIn = -1;
    for (const auto& [i, c] : counts) {
      const Vectord gi = Ginv * X.point(i);
      const double tauI = X.point(i).dot(gi);
      for (Index j : unused) {
        const double tauIJ = X.point(j).dot(gi);
        const double ratio = (1.0 + X.point(j).dot(Ginv * X.point(j))) * (1.0 - tauI) + tauIJ * tauIJ;
        if (ratio > bestRatio) {
          bestRatio = ratio;
          bestOut = i;
          bestIn = j;
        }
      }
    }
    if (--counts[bestOut] == 0) counts.erase(bestOut);
    ++counts[bestIn];
  }
  throw InfeasibleRounding("round_to_exact: support cannot produce a nonsingular design");
}

struct SwapChoice {
  double ratio = -std::numeric_limits<double>::infinity();
  Index out = -1;
  Index in = -1;
};

}  // namespace

void LocalSearchConfig::validate() const {
  if (!(improveTol > 1.0)) throw DomainError("LocalSearchConfig: improveTol must exceed 1");
  if (maxSwaps < 0) throw DomainError("LocalSearchConfig: maxSwaps must be nonnegative");
}

ExactDesignd round_to_exact(const DesignWeightsd& u, int N, const DesignMatrixd& X, RoundingVariant variant) {
  if (u.ambient_size() != X.size()) throw DimensionMismatch("round_to_exact: weights/points size mismatch");
  if (N < X.dim()) throw DomainError("round_to_exact: N must be at least n");
  const auto& support = u.support();
  const Vectord& w = u.values();
  const auto k = support.size();
  std::map<Index, int> counts;

  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), std::size_t{0});

  if (variant == RoundingVariant::TopN) {
    if (k < static_cast<std::size_t>(N)) throw InfeasibleRounding("round_to_exact: support smaller than N");
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) {
      return w(static_cast<Index>(a)) > w(static_cast<Index>(b));
    });
    for (int t = 0; t < N; ++t) counts[support[order[static_cast<std::size_t>(t)]]] = 1;
  } else {
    std::vector<double> rem(k);
    long assigned = 0;
    for (std::size_t s = 0; s < k; ++s) {
      const double target = static_cast<double>(N) * w(static_cast<Index>(s));
      const double fl = std::floor(target);
      rem[s] = target - fl;
      if (fl > 0) counts[support[s]] = static_cast<int>(fl);
      assigned += static_cast<long>(fl);
    }
    // Remainders equal up to rounding noise are ties, broken by index.
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return rem[a] > rem[b] + 1e-12; });
    for (std::size_t t = 0; assigned < N; ++t, ++assigned) ++counts[support[order[t % k]]];
  }

  repair_rounding(X, support, counts);
  return ExactDesignd(X, std::move(counts));
}

LocalSearchResult local_search(const DesignMatrixd& X, std::span<const Index> Sin, ExactDesignd init,
                               const LocalSearchConfig& cfg) {
  cfg.validate();
  const std::vector<Index> S = sorted_unique(Sin);
  for (const auto& [i, c] : init.counts()) {
    if (!std::binary_search(S.begin(), S.end(), i)) throw DomainError("local_search: design index outside S");
  }
  const Matrixd XS = X.points()(Eigen::all, S);
  const auto sCount = static_cast<Index>(S.size());

  LocalSearchResult res{std::move(init), 0, Status::Converged};
  ExactDesignd& design = res.design;

  while (true) {
    const Matrixd GX = design.inverse() * XS;
    const Vectord tauS = XS.cwiseProduct(GX).colwise().sum().transpose();
    std::vector<Index> keys;
    for (const auto& [i, c] : design.counts()) keys.push_back(i);
    const auto keyCount = static_cast<Index>(keys.size());

    std::vector<SwapChoice> perOut(keys.size());
    const bool first = cfg.variant == LocalSearchVariant::FirstImprovement;
#pragma omp parallel for schedule(static) if (!first) num_threads(scan_threads())
    for (Index k = 0; k < keyCount; ++k) {
      const Index i = keys[static_cast<std::size_t>(k)];
      const Vectord gi = design.inverse() * X.point(i);
      const double tauI = X.point(i).dot(gi);
      const Vectord tauIJ = XS.transpose() * gi;
      SwapChoice& best = perOut[static_cast<std::size_t>(k)];
      for (Index s = 0; s < sCount; ++s) {
        const Index j = S[static_cast<std::size_t>(s)];
        if (j == i) continue;
        const double ratio = (1.0 + tauS(s)) * (1.0 - tauI) + tauIJ(s) * tauIJ(s);
        if (ratio > best.ratio) best = {ratio, i, j};
        if (first && ratio >= cfg.improveTol) {
          best = {ratio, i, j};
          break;
        }
      }
    }

    SwapChoice chosen;
    for (const SwapChoice& c : perOut) {
      if (first) {
        if (c.ratio >= cfg.improveTol) {
          chosen = c;
          break;
        }
      } else if (c.ratio > chosen.ratio) {
        chosen = c;
      }
    }
    if (!(chosen.ratio >= cfg.improveTol)) break;
    if (res.swaps >= cfg.maxSwaps) {
      res.status = Status::IterationLimit;
      break;
    }
    design.swap(X, chosen.out, chosen.in);
    ++res.swaps;
  }
  design.refactor(X);
  return res;
}

double approx_bound(long N, Index n) {
  if (n < 1 || N < n) throw DomainError("approx_bound: need N >= n >= 1");
  const double nd = static_cast<double>(n);
  const double Nd = static_cast<double>(N);
  return nd * std::log(Nd / (Nd - nd + 1.0));
}

BoundReport bound_report(const DesignMatrixd& X, const DesignWeightsd& limit, const ExactDesignd& design) {
  const Index n = X.dim();
  const ExactDesignd fresh(X, design.counts());
  BoundReport r;
  r.phiRel = log_det_objective(X, limit);
  r.hNn = approx_bound(fresh.total(), n);
  r.lowerBound = r.phiRel - r.hNn;
  r.achieved = fresh.log_det() - static_cast<double>(n) * std::log(static_cast<double>(fresh.total()));
  const double diff = r.phiRel - r.achieved;
  if (std::abs(r.phiRel) < 1e-8) {
    r.gap = diff;
    r.gapIsAbsolute = true;
  } else {
    r.gap = diff / std::abs(r.phiRel);
  }
  r.corollarySatisfied = r.achieved >= r.lowerBound - 1e-8;
  return r;
}

double verify_lemma_tau(const DesignMatrixd& X, std::span<const Index> S, const ExactDesignd& design) {
  const Matrixd G = gram_of(X, design.counts());
  const auto f = factor_spd_or_throw(G, "verify_lemma_tau");
  const Matrixd Ginv = spd_inverse(f.L);
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& [i, c] : design.counts()) {
    const Vectord gi = Ginv * X.point(i);
    const double tauI = X.point(i).dot(gi);
    for (Index j : S) {
      const double tauJ = X.point(j).dot(Ginv * X.point(j));
      const double tauIJ = X.point(j).dot(gi);
      worst = std::max(worst, tauJ - tauI * tauJ + tauIJ * tauIJ - tauI);
    }
  }
  return worst;
}

BruteForceResult brute_force_exact(const DesignMatrixd& X, std::span<const Index> candidatesIn, int N) {
  const std::vector<Index> cand = sorted_unique(candidatesIn);
  if (N < 1 || cand.empty()) throw DomainError("brute_force_exact: need N >= 1 and candidates");
  // C(k + N - 1, N) multisets.
  const auto k = static_cast<double>(cand.size());
  double total = 1;
  for (int t = 1; t <= N; ++t) {
    total = total * (k - 1.0 + t) / t;
    if (total > 1e6) throw TooLarge("brute_force_exact: more than 10^6 multisets");
  }

  const Index n = X.dim();
  BruteForceResult res;
  res.bestLogDet = -std::numeric_limits<double>::infinity();
  std::vector<std::size_t> pick(static_cast<std::size_t>(N));

  auto recurse = [&](auto&& self, int depth, std::size_t from, const Matrixd& G) -> void {
    if (depth == N) {
      ++res.evaluated;
      const auto f = factor_spd(G);
      if (f && f->logdet > res.bestLogDet) {
        res.bestLogDet = f->logdet;
        res.bestCounts.clear();
        for (std::size_t p : pick) ++res.bestCounts[cand[p]];
      }
      return;
    }
    for (std::size_t c = from; c < cand.size(); ++c) {
      pick[static_cast<std::size_t>(depth)] = c;
      const auto x = X.point(cand[c]);
      self(self, depth + 1, c, G + x * x.transpose());
    }
  };
  recurse(recurse, 0, 0, Matrixd::Zero(n, n));
  return res;
}

}  // namespace optd
