#include "optd/colgen.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "optd/frank_wolfe.hpp"
#include "optd/parallel.hpp"

namespace optd {

namespace {

struct Violator {
  double violation;
  Index index;
};

// Up to n0 indices with kappa - n > 0, largest violation first, ties by index.
std::vector<Index> top_violators(std::span<const Index> active, std::span<const double> kappa, double n, Index n0) {
  std::vector<Violator> cand;
  for (std::size_t k = 0; k < active.size(); ++k) {
    if (kappa[k] - n > kKappaSlack * n) cand.push_back({kappa[k] - n, active[k]});
  }
  const auto cmp = [](const Violator& a, const Violator& b) {
    return a.violation != b.violation ? a.violation > b.violation : a.index < b.index;
  };
  const auto take = std::min<std::size_t>(cand.size(), static_cast<std::size_t>(n0));
  std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(take), cand.end(), cmp);
  std::vector<Index> out(take);
  for (std::size_t k = 0; k < take; ++k) out[k] = cand[k].index;
  return out;
}

double max_violation(std::span<const double> kappa, double n) {
  double z = 0;
  for (double k : kappa) z = std::max(z, k - n);
  return z;
}

std::vector<Index> sorted_union(std::vector<Index> a, std::span<const Index> b) {
  a.insert(a.end(), b.begin(), b.end());
  std::sort(a.begin(), a.end());
  a.erase(std::unique(a.begin(), a.end()), a.end());
  return a;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

void ColGenConfig::validate() const {
  if (n0 < 0) throw DomainError("ColGenConfig: n0 must be positive");
  if (!(stopTol > 0)) throw DomainError("ColGenConfig: stopTol must be positive");
  if (maxOuter < 1) throw DomainError("ColGenConfig: maxOuter must be positive");
  rmp.validate();
}

PricingResult pricing(const DesignMatrixd& X, const EllipsoidMatrixd& H, std::span<const Index> active, Index n0) {
  if (active.empty()) throw DomainError("pricing: empty active set");
  const Vectord kappa = kappa_scan(X, H, active);
  const std::span<const double> ks(kappa.data(), active.size());
  const double n = static_cast<double>(X.dim());
  return {max_violation(ks, n), top_violators(active, ks, n, n0)};
}

double hp_constant(double epsilon, Index n) {
  if (!(epsilon >= 0)) throw DomainError("hp_constant: epsilon must be nonnegative");
  if (n < 2) throw DomainError("hp_constant: dimension must be at least 2");
  const double nd = static_cast<double>(n);
  return nd * (1.0 + epsilon / 2.0 - std::sqrt(epsilon * (4.0 + epsilon - 4.0 / nd)) / 2.0);
}

std::vector<Index> hp_filter(const DesignMatrixd& X, const EllipsoidMatrixd& H, double epsilon,
                             std::span<const Index> active) {
  const double h = hp_constant(epsilon, X.dim());
  const Vectord kappa = kappa_scan(X, H, active);
  std::vector<Index> kept;
  for (std::size_t k = 0; k < active.size(); ++k) {
    if (kappa(static_cast<Index>(k)) >= h * (1.0 - kKappaSlack)) kept.push_back(active[k]);
  }
  return kept;
}

ColGenResult run_column_generation(const DesignMatrixd& X, const ColGenConfig& cfg) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const Index n = X.dim();
  const Index m = X.size();
  const double nd = static_cast<double>(n);
  const Index n0 = cfg.n0 > 0 ? cfg.n0 : 5 * n;

  std::vector<Index> active(static_cast<std::size_t>(m));
  std::iota(active.begin(), active.end(), Index{0});
  std::vector<Index> eliminated;

  const DesignWeightsd init = ky_init(X, cfg.seed);
  std::vector<Index> working = init.support();
  std::optional<RmpSolution> sol;
  const DesignWeightsd* warm = &init;

  std::vector<IterationRecord> history;
  Index maxWorking = 0;
  Status status = Status::IterationLimit;
  double fullZ = 0;
  double fullKappaMax = 0;
  long outer = 0;
  Vectord kappa;

  while (outer < cfg.maxOuter) {
    ++outer;
    maxWorking = std::max(maxWorking, static_cast<Index>(working.size()));
    sol = solve_restricted(X, working, warm, cfg.rmp);
    const std::vector<Index> support = extract_support(*sol, cfg.rmp);

    // One scan over the surviving candidates serves pricing and elimination.
    kappa = kappa_scan(X, sol->ellipsoid, active);
    const std::span<const double> ks(kappa.data(), active.size());
    const double z = max_violation(ks, nd);
    const std::vector<Index> violated = top_violators(active, ks, nd, n0);
    std::vector<Index> next = cfg.keepAll ? sorted_union(working, violated) : sorted_union(support, violated);

    if (cfg.hpElimination) {
      const double h = hp_constant(z, n);
      std::vector<Index> kept;
      kept.reserve(active.size());
      for (std::size_t k = 0; k < active.size(); ++k) {
        const Index i = active[k];
        if (ks[k] >= h * (1.0 - kKappaSlack) || std::binary_search(next.begin(), next.end(), i)) {
          kept.push_back(i);
        } else {
          eliminated.push_back(i);
        }
      }
      active = std::move(kept);
    }

    IterationRecord rec{"colgen", outer, static_cast<Index>(active.size()), static_cast<Index>(working.size()),
                        z, sol->objective, nd * std::log1p(z / nd)};
    history.push_back(rec);
    if (cfg.progress) cfg.progress(rec);

    if (z <= cfg.stopTol) {
      if (sol->status != Status::Converged) {
        status = Status::Stalled;
        break;
      }
      // Elimination is exact only in exact arithmetic: confirm over all m points.
      const Vectord full = kappa_scan(X, sol->ellipsoid);
      fullKappaMax = full.maxCoeff();
      fullZ = std::max(0.0, fullKappaMax - nd);
      if (fullZ <= cfg.stopTol) {
        status = Status::Converged;
        break;
      }
      std::vector<Index> all(static_cast<std::size_t>(m));
      std::iota(all.begin(), all.end(), Index{0});
      next = sorted_union(support, top_violators(all, std::span<const double>(full.data(), all.size()), nd, n0));
      active = std::move(all);
    }
    working = std::move(next);
    warm = &sol->weights;
  }

  if (status != Status::Converged) {
    const Vectord full = kappa_scan(X, sol->ellipsoid);
    fullKappaMax = full.maxCoeff();
    fullZ = std::max(0.0, fullKappaMax - nd);
  }

  std::sort(eliminated.begin(), eliminated.end());
  eliminated.erase(std::unique(eliminated.begin(), eliminated.end()), eliminated.end());

  SolveReport report;
  report.method = cfg.keepAll ? "colgen-keepall" : "colgen";
  report.objective = sol->objective;
  report.dualityGap = std::max(0.0, nd * std::log(fullKappaMax / nd));
  report.iterations = outer;
  report.supportSize = sol->weights.support_size();
  report.eliminated = static_cast<long>(eliminated.size());
  report.status = status;
  report.wallTime = seconds_since(t0);

  return ColGenResult{sol->weights,        sol->ellipsoid, report, std::move(history), std::move(eliminated),
                      static_cast<Index>(working.size()), maxWorking, fullZ};
}

}  // namespace optd
