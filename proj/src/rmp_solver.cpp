#include "optd/rmp_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace optd {

namespace {

constexpr double kWarmFloor = 1e-6;
constexpr double kArmijoSlope = 1e-4;
constexpr double kBacktrack = 0.5;
constexpr int kMaxBacktracks = 60;
constexpr double kMinMu = 1e-300;
constexpr int kPolishSteps = 20000;

double neg_inf() { return -std::numeric_limits<double>::infinity(); }

Matrixd weighted_gram(const Matrixd& pts, const Vectord& u) {
  Matrixd M = pts * u.asDiagonal() * pts.transpose();
  return 0.5 * (M + M.transpose());
}

double log_det_or_neg_inf(const Matrixd& pts, const Vectord& u) {
  if ((u.array() <= 0.0).any()) return neg_inf();
  auto f = factor_spd(weighted_gram(pts, u));
  return f ? f->logdet : neg_inf();
}

// Everything the Newton step needs at one iterate.
struct Iterate {
  Vectord u;
  double logdet = 0;
  Matrixd K;  // x_i^T H x_j
  double gap = 0;
};

Iterate evaluate(const Matrixd& pts, Vectord u) {
  const auto f = factor_spd_or_throw(weighted_gram(pts, u), "solve_restricted");
  const Matrixd W = f.L.triangularView<Eigen::Lower>().solve(pts);
  Iterate it;
  it.u = std::move(u);
  it.logdet = f.logdet;
  it.K = W.transpose() * W;
  const double n = static_cast<double>(pts.rows());
  it.gap = std::max(0.0, n * std::log(it.K.diagonal().maxCoeff() / n));
  return it;
}

double barrier_value(double logdet, const Vectord& u, double mu) { return logdet + mu * u.array().log().sum(); }

// Away-step Frank-Wolfe on the subset, updating K = P^T H P by rank-one
// corrections. Used once the barrier iteration stops making progress; it has
// no trouble with degenerate points whose optimal weight is zero.
Iterate polish(const Matrixd& pts, Iterate cur, double target, int maxSteps) {
  const double n = static_cast<double>(pts.rows());
  const Index k = pts.cols();
  for (int step = 0; step < maxSteps; ++step) {
    if (step > 0 && step % 200 == 0) cur = evaluate(pts, std::move(cur.u));
    const Vectord kap = cur.K.diagonal();
    Index hi = 0;
    kap.maxCoeff(&hi);
    Index lo = -1;
    for (Index s = 0; s < k; ++s) {
      if (cur.u(s) > 0 && (lo < 0 || kap(s) < kap(lo))) lo = s;
    }
    if (n * std::log(kap(hi) / n) <= target) break;

    Index j = hi;
    double t = (kap(hi) - n) / (n * (kap(hi) - 1.0));
    bool drop = false;
    if (n - kap(lo) > kap(hi) - n) {
      const double w = cur.u(lo);
      const double cap = w / (1.0 - w);
      const double lam = kap(lo) <= 1.0 ? cap : std::min((n - kap(lo)) / (n * (kap(lo) - 1.0)), cap);
      j = lo;
      t = -lam;
      drop = lam >= cap;
    }
    const double denom = 1.0 - t + t * kap(j);
    if (!(denom > 0) || !(t < 1)) break;
    const Vectord col = cur.K.col(j);
    cur.K = (cur.K - (t / denom) * (col * col.transpose())) / (1.0 - t);
    cur.logdet += (n - 1.0) * std::log1p(-t) + std::log(denom);
    cur.u *= (1.0 - t);
    cur.u(j) += t;
    if (drop) cur.u(j) = 0;
  }
  Vectord u = cur.u.cwiseMax(0.0);
  return evaluate(pts, u / u.sum());
}

}  // namespace

void RmpConfig::validate() const {
  if (!(gapTol > 0)) throw DomainError("RmpConfig: gapTol must be positive");
  if (!(barrierShrink > 0 && barrierShrink < 1)) throw DomainError("RmpConfig: barrierShrink must lie in (0,1)");
  if (!(minWeight >= 0)) throw DomainError("RmpConfig: minWeight must be nonnegative");
  if (maxNewton < 1) throw DomainError("RmpConfig: maxNewton must be positive");
}

RestrictedModel::RestrictedModel(const DesignMatrixd& X, std::span<const Index> subset)
    : points_(X.points()(Eigen::all, std::vector<Index>(subset.begin(), subset.end()))) {}

double RestrictedModel::value(const Vectord& u) const {
  return factor_spd_or_throw(weighted_gram(points_, u), "RestrictedModel").logdet;
}

Matrixd RestrictedModel::cross(const Vectord& u) const { return evaluate(points_, u).K; }

Vectord RestrictedModel::gradient(const Vectord& u) const { return cross(u).diagonal(); }

Matrixd RestrictedModel::hessian(const Vectord& u) const { return -cross(u).array().square().matrix(); }

std::vector<Index> extract_support(const DesignWeightsd& weights, double minWeight) {
  std::vector<Index> out;
  for (std::size_t k = 0; k < weights.support().size(); ++k) {
    if (weights.values()(static_cast<Index>(k)) > minWeight) out.push_back(weights.support()[k]);
  }
  return out;
}

std::vector<Index> extract_support(const RmpSolution& sol, const RmpConfig& cfg) {
  return extract_support(sol.weights, cfg.minWeight);
}

RmpSolution solve_restricted(const DesignMatrixd& X, std::span<const Index> subsetIn, const DesignWeightsd* warmStart,
                             const RmpConfig& cfg, std::vector<BarrierStep>* trace) {
  cfg.validate();
  std::vector<Index> subset(subsetIn.begin(), subsetIn.end());
  std::sort(subset.begin(), subset.end());
  subset.erase(std::unique(subset.begin(), subset.end()), subset.end());
  for (Index i : subset) {
    if (i < 0 || i >= X.size()) throw DomainError("solve_restricted: index out of range");
  }
  const Index n = X.dim();
  const auto k = static_cast<Index>(subset.size());
  if (k < n) throw SubsetRankDeficient("solve_restricted: subset has fewer than n points");

  const Matrixd pts = X.points()(Eigen::all, subset);
  {
    Eigen::ColPivHouseholderQR<Matrixd> qr(pts);
    qr.setThreshold(1e-12);
    if (qr.rank() < n) throw SubsetRankDeficient("solve_restricted: subset does not span R^n");
  }

  Vectord u0(k);
  if (warmStart != nullptr) {
    for (Index s = 0; s < k; ++s) u0(s) = std::max(warmStart->weight(subset[static_cast<std::size_t>(s)]), kWarmFloor);
  } else {
    u0.setConstant(1.0);
  }
  u0 /= u0.sum();

  auto finalize = [&](const Vectord& u, int iters, Status status) {
    auto weights = DesignWeightsd::from_entries(X.size(), subset, u, cfg.minWeight);
    auto H = ellipsoid_from_weights(X, weights);
    const double objective = -H.log_det();
    const double kmax = mahalanobis_columns(H, pts).maxCoeff();
    const double gap = std::max(0.0, static_cast<double>(n) * std::log(kmax / static_cast<double>(n)));
    return RmpSolution{subset, std::move(weights), std::move(H), objective, gap, iters, status};
  };

  Iterate cur = evaluate(pts, std::move(u0));
  double mu = std::max(1e-4, cur.gap / static_cast<double>(k));
  double target = 0.1 * cfg.gapTol;
  int iters = 0;
  std::optional<RmpSolution> best;

  while (true) {
    if (cur.gap <= target) {
      RmpSolution sol = finalize(cur.u, iters, Status::Converged);
      if (sol.gap <= cfg.gapTol) return sol;
      // Truncation moved the certificate; tighten and keep going.
      if (!best || sol.gap < best->gap) best = std::move(sol);
      target *= 0.1;
      mu = std::min(mu, target / static_cast<double>(k));
    }
    if (iters >= cfg.maxNewton || mu < kMinMu) break;

    // Newton step on the barrier problem in the scaled variable d = diag(u) ds.
    const Vectord& u = cur.u;
    Matrixd Ps = (cur.K.array().square().matrix().array() * (u * u.transpose()).array()).matrix();
    Ps.diagonal().array() += mu;
    const Vectord gs = (u.array() * cur.K.diagonal().array()).matrix() + Vectord::Constant(k, mu);
    Eigen::LLT<Matrixd> llt(Ps);
    if (llt.info() != Eigen::Success) break;
    const Vectord a = llt.solve(gs);
    const Vectord b = llt.solve(u);
    const double nu = u.dot(a) / u.dot(b);
    const Vectord ds = a - nu * b;
    const double decrement2 = ds.dot(Ps * ds);
    if (!(decrement2 >= mu)) {
      mu *= cfg.barrierShrink;
      continue;
    }
    const Vectord d = u.cwiseProduct(ds);

    double t = 1.0;
    for (Index s = 0; s < k; ++s) {
      if (d(s) < 0) t = std::min(t, 0.99 * u(s) / -d(s));
    }
    const double phi0 = barrier_value(cur.logdet, u, mu);
    bool accepted = false;
    Vectord trial;
    for (int bt = 0; bt < kMaxBacktracks; ++bt, t *= kBacktrack) {
      trial = u + t * d;
      const double ld = log_det_or_neg_inf(pts, trial);
      if (std::isfinite(ld) && barrier_value(ld, trial, mu) >= phi0 + kArmijoSlope * t * decrement2) {
        accepted = true;
        break;
      }
    }
    ++iters;
    if (!accepted) {
      // Rounding dominates the model decrease: treat as centred.
      mu *= cfg.barrierShrink;
      continue;
    }
    cur = evaluate(pts, std::move(trial));
    if (trace != nullptr) trace->push_back({mu, barrier_value(cur.logdet, cur.u, mu)});
  }

  cur = polish(pts, std::move(cur), target, kPolishSteps);
  RmpSolution sol = finalize(cur.u, iters, Status::Stalled);
  if (sol.gap <= cfg.gapTol) sol.status = Status::Converged;
  if (best && best->gap < sol.gap) {
    best->status = Status::Stalled;
    best->newtonIters = iters;
    return std::move(*best);
  }
  return sol;
}

}  // namespace optd
