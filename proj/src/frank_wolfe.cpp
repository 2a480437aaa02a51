#include "optd/frank_wolfe.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>

#include "optd/colgen.hpp"
#include "optd/parallel.hpp"

namespace optd {

DesignWeightsd ky_init(const DesignMatrixd& X, std::uint64_t seed) {
  const Index n = X.dim();
  const Index m = X.size();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;

  Matrixd basis(n, 0);  // orthonormal basis of the span of chosen points
  std::vector<Index> picks;

  auto absorb = [&](Index i) {
    Vectord r = X.point(i);
    const double norm0 = r.norm();
    for (int pass = 0; pass < 2; ++pass) r -= basis * (basis.transpose() * r);
    if (r.norm() > 1e-10 * norm0) {
      basis.conservativeResize(Eigen::NoChange, basis.cols() + 1);
      basis.col(basis.cols() - 1) = r.normalized();
    }
  };

  for (int round = 0; basis.cols() < n; ++round) {
    if (round > 4 * n) throw RankDeficientData("ky_init: points do not span R^n");
    Vectord dir(n);
    for (Index d = 0; d < n; ++d) dir(d) = normal(rng);
    for (int pass = 0; pass < 2; ++pass) dir -= basis * (basis.transpose() * dir);
    if (dir.norm() < 1e-12) continue;
    dir.normalize();

    const Vectord proj = X.points().transpose() * dir;
    Index hi = 0;
    Index lo = 0;
    for (Index i = 1; i < m; ++i) {
      if (proj(i) > proj(hi)) hi = i;
      if (proj(i) < proj(lo)) lo = i;
    }
    picks.push_back(hi);
    absorb(hi);
    if (lo != hi) {
      picks.push_back(lo);
      absorb(lo);
    }
  }

  // Repeated picks collapse onto one point; every distinct pick gets equal weight.
  std::sort(picks.begin(), picks.end());
  picks.erase(std::unique(picks.begin(), picks.end()), picks.end());
  const auto k = static_cast<Index>(picks.size());
  std::vector<Index> support = std::move(picks);
  Vectord values = Vectord::Constant(k, 1.0 / static_cast<double>(k));
  return DesignWeightsd(m, std::move(support), std::move(values));
}

double forward_step_size(double kappa, Index n) {
  const double nd = static_cast<double>(n);
  return (kappa - nd) / (nd * (kappa - 1.0));
}

double away_step_size(double kappa, double weight, Index n) {
  const double nd = static_cast<double>(n);
  const double cap = weight / (1.0 - weight);
  if (kappa <= 1.0) return cap;  // objective increases along the whole segment
  return std::min((nd - kappa) / (nd * (kappa - 1.0)), cap);
}

std::vector<Index> fw_hp_checkpoint(std::span<const Index> active, std::span<const double> kappa,
                                    const Vectord& weights, double epsilon, Index n) {
  const double h = hp_constant(std::max(epsilon, 0.0), n);
  std::vector<Index> kept;
  kept.reserve(active.size());
  for (std::size_t k = 0; k < active.size(); ++k) {
    if (kappa[k] >= h * (1.0 - kKappaSlack) || weights(active[k]) > 0) kept.push_back(active[k]);
  }
  return kept;
}

namespace {

// Mutable solver state: dense weights, H, ln det(X U X^T) and kappa over the
// active candidates.
class FwState {
 public:
  FwState(const DesignMatrixd& X, const DesignWeightsd& init) : X_(X), u_(init.dense()) {
    active_.resize(static_cast<std::size_t>(X.size()));
    std::iota(active_.begin(), active_.end(), Index{0});
    support_ = init.support();
    refactor();
  }

  // Rebuilds H from the weights; returns the relative drift of the
  // incrementally updated H.
  double refactor() {
    const auto w = DesignWeightsd::from_entries(X_.size(), support_, u_(support_));
    const auto fresh = ellipsoid_from_weights(X_, w);
    double drift = 0;
    if (H_.size() > 0) drift = (H_ - fresh.shape()).norm() / fresh.shape().norm();
    H_ = fresh.shape();
    logdet_ = -fresh.log_det();
    kappa_.resize(active_.size());
    kappa_scan(X_, fresh, active_, kappa_);
    return drift;
  }

  // u <- (1 - s) u + s e_j for s in (-inf, 1); s < 0 is an away step.
  void step(Index j, double s, bool drop) {
    const double nd = static_cast<double>(X_.dim());
    const auto xj = X_.point(j);
    const Vectord hx = H_ * xj;
    const double kj = xj.dot(hx);
    const double denom = 1.0 - s + s * kj;
    project_scan(X_, hx, active_, cross_scratch(active_.size()));
    for (std::size_t k = 0; k < active_.size(); ++k) {
      kappa_[k] = (kappa_[k] - s * cross_[k] * cross_[k] / denom) / (1.0 - s);
    }
    H_ = (H_ - (s / denom) * (hx * hx.transpose())) / (1.0 - s);
    logdet_ += (nd - 1.0) * std::log1p(-s) + std::log(denom);

    const bool wasIn = u_(j) > 0;
    u_(support_) *= (1.0 - s);
    if (!wasIn) {
      support_.insert(std::lower_bound(support_.begin(), support_.end(), j), j);
      u_(j) = 0;
    }
    u_(j) += s;
    if (drop) {
      u_(j) = 0;
      support_.erase(std::lower_bound(support_.begin(), support_.end(), j));
    }
  }

  void restrict_active(std::vector<Index> kept) {
    std::vector<double> kap;
    kap.reserve(kept.size());
    std::size_t k = 0;
    for (Index i : kept) {
      while (active_[k] != i) ++k;
      kap.push_back(kappa_[k]);
    }
    active_ = std::move(kept);
    kappa_ = std::move(kap);
  }

  double kappa_of(Index i) const {
    const auto it = std::lower_bound(active_.begin(), active_.end(), i);
    return kappa_[static_cast<std::size_t>(it - active_.begin())];
  }

  const std::vector<Index>& active() const { return active_; }
  const std::vector<double>& kappa() const { return kappa_; }
  const std::vector<Index>& support() const { return support_; }
  const Vectord& weights() const { return u_; }
  double log_det() const { return logdet_; }

 private:
  std::span<double> cross_scratch(std::size_t len) {
    cross_.resize(len);
    return cross_;
  }

  const DesignMatrixd& X_;
  Vectord u_;
  std::vector<Index> support_;
  std::vector<Index> active_;
  std::vector<double> kappa_;
  std::vector<double> cross_;
  Matrixd H_;
  double logdet_ = 0;
};

}  // namespace

FwResult fw_solve(const DesignMatrixd& X, const FwConfig& cfg, const DesignWeightsd* init) {
  const auto t0 = std::chrono::steady_clock::now();
  const Index n = X.dim();
  const double nd = static_cast<double>(n);
  const double tol = cfg.effective_tol(n);
  if (!(tol > 0)) throw DomainError("FwConfig: tol must be positive");
  if (init != nullptr && init->ambient_size() != X.size()) throw DimensionMismatch("fw_solve: init size mismatch");

  FwState state(X, init != nullptr ? *init : ky_init(X, cfg.seed));
  FwResult out{DesignWeightsd::uniform(X.size(), {0}), EllipsoidMatrixd(Matrixd::Identity(n, n)), {}, {}, 0, 0, 0,
               0, {}};
  std::vector<Index> eliminated;
  Status status = Status::IterationLimit;
  long iter = 0;
  double kmax = 0;

  auto emit = [&](long it, double z) {
    if (!cfg.progress) return;
    cfg.progress({"fw", it, static_cast<Index>(state.active().size()), static_cast<Index>(state.support().size()),
                  std::max(z, 0.0), state.log_det(), nd * std::log1p(std::max(z, 0.0) / nd)});
  };

  for (;; ++iter) {
    const auto& active = state.active();
    const auto& kappa = state.kappa();
    std::size_t best = 0;
    for (std::size_t k = 1; k < kappa.size(); ++k) {
      if (kappa[k] > kappa[best]) best = k;
    }
    kmax = kappa[best];
    const double epsPlus = kmax - nd;

    Index awayIdx = -1;
    double kmin = 0;
    if (cfg.awaySteps) {
      for (Index j : state.support()) {
        const double kj = state.kappa_of(j);
        if (awayIdx < 0 || kj < kmin) {
          awayIdx = j;
          kmin = kj;
        }
      }
    }
    const double epsMinus = awayIdx >= 0 ? nd - kmin : 0.0;

    if (epsPlus <= tol && epsMinus <= tol) {
      status = Status::Converged;
      break;
    }
    if (iter >= cfg.maxIter) break;

    if (cfg.awaySteps && epsMinus > epsPlus) {
      const double w = state.weights()(awayIdx);
      const double cap = w / (1.0 - w);
      const double lambda = away_step_size(kmin, w, n);
      const bool drop = lambda >= cap;
      state.step(awayIdx, -lambda, drop);
      ++out.awaySteps;
      if (drop) ++out.dropSteps;
    } else {
      state.step(active[best], forward_step_size(kmax, n), false);
      ++out.forwardSteps;
    }
    if (cfg.recordObjective) out.objectiveTrace.push_back(state.log_det());

    const long done = iter + 1;
    if (cfg.refactorEvery > 0 && done % cfg.refactorEvery == 0) out.maxDrift = std::max(out.maxDrift, state.refactor());
    if (cfg.hpCheckEvery > 0 && done % cfg.hpCheckEvery == 0) {
      const auto& act = state.active();
      std::vector<Index> kept = fw_hp_checkpoint(act, state.kappa(), state.weights(), epsPlus, n);
      if (kept.size() < act.size()) {
        std::set_difference(act.begin(), act.end(), kept.begin(), kept.end(), std::back_inserter(eliminated));
        state.restrict_active(std::move(kept));
      }
    }
    if (cfg.progressEvery > 0 && done % cfg.progressEvery == 0) emit(done, epsPlus);
  }

  out.maxDrift = std::max(out.maxDrift, state.refactor());
  const auto& kap = state.kappa();
  kmax = *std::max_element(kap.begin(), kap.end());
  emit(iter, kmax - nd);

  out.weights = DesignWeightsd::from_entries(X.size(), state.support(), state.weights()(state.support()));
  out.ellipsoid = ellipsoid_from_weights(X, out.weights);
  std::sort(eliminated.begin(), eliminated.end());
  out.eliminatedPoints = std::move(eliminated);

  out.report.method = cfg.awaySteps ? "fw-away" : "fw";
  out.report.objective = -out.ellipsoid.log_det();
  out.report.dualityGap = std::max(0.0, nd * std::log(kmax / nd));
  out.report.iterations = iter;
  out.report.supportSize = out.weights.support_size();
  out.report.eliminated = static_cast<long>(out.eliminatedPoints.size());
  out.report.status = status;
  out.report.wallTime = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

}  // namespace optd
