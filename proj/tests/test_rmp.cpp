#include <gtest/gtest.h>

#include <numeric>
#include <random>

#include "optd/rmp_solver.hpp"
#include "oracles.hpp"

using namespace optd;

namespace {

std::vector<Index> iota_vec(Index k) {
  std::vector<Index> v(static_cast<std::size_t>(k));
  std::iota(v.begin(), v.end(), Index{0});
  return v;
}

}  // namespace

TEST(SolveRestricted, Orthonormal) {
  for (Index n : {2, 3, 7}) {
    const DesignMatrixd X(Matrixd::Identity(n, n));
    const auto sol = solve_restricted(X, iota_vec(n));
    EXPECT_EQ(sol.status, Status::Converged);
    EXPECT_NEAR(sol.objective, -n * std::log(static_cast<double>(n)), 1e-9);
    EXPECT_TRUE(sol.ellipsoid.shape().isApprox(n * Matrixd::Identity(n, n), 1e-8));
    for (Index i = 0; i < n; ++i) EXPECT_NEAR(sol.weights.weight(i), 1.0 / n, 1e-9);
    EXPECT_EQ(extract_support(sol).size(), static_cast<std::size_t>(n));
  }
}

TEST(SolveRestricted, Toy) {
  const DesignMatrixd X(oracle::toy_points());
  const auto sol = solve_restricted(X, iota_vec(3));
  EXPECT_NEAR(sol.objective, std::log(1.0 / 3), 1e-9);
  Matrixd H(2, 2);
  H << 2, -1, -1, 2;
  EXPECT_TRUE(sol.ellipsoid.shape().isApprox(H, 1e-8));
  const Vectord kappa = mahalanobis_columns(sol.ellipsoid, X.points());
  for (Index i = 0; i < 3; ++i) {
    EXPECT_NEAR(sol.weights.weight(i), 1.0 / 3, 1e-8);
    EXPECT_NEAR(kappa(i), 2.0, 1e-8);
  }
  EXPECT_EQ(extract_support(sol), (std::vector<Index>{0, 1, 2}));
}

TEST(SolveRestricted, InteriorPointGetsZeroWeight) {
  Matrixd P(2, 3);
  P << 1, 0, 0.1, 0, 1, 0.1;
  const DesignMatrixd X(P);
  const auto sol = solve_restricted(X, iota_vec(3));
  EXPECT_EQ(sol.weights.weight(2), 0.0);
  EXPECT_NEAR(sol.weights.weight(0), 0.5, 1e-9);
  EXPECT_NEAR(sol.weights.weight(1), 0.5, 1e-9);
  EXPECT_EQ(extract_support(sol), (std::vector<Index>{0, 1}));
}

TEST(SolveRestricted, Errors) {
  Matrixd P(2, 4);
  P << 1, 2, 0, 1, 0, 0, 1, 1;
  const DesignMatrixd X(P);
  EXPECT_THROW(solve_restricted(X, std::vector<Index>{0}), SubsetRankDeficient);
  EXPECT_THROW(solve_restricted(X, std::vector<Index>{0, 1}), SubsetRankDeficient);
  EXPECT_THROW(solve_restricted(X, std::vector<Index>{0, 7}), DomainError);
  RmpConfig bad;
  bad.gapTol = 0;
  EXPECT_THROW(solve_restricted(X, iota_vec(4), nullptr, bad), DomainError);
}

TEST(ExtractSupport, Threshold) {
  Vectord v(3);
  v << 0.5, 0.5 - 3e-10, 3e-10;
  const DesignWeightsd w(3, {0, 1, 2}, v);
  EXPECT_EQ(extract_support(w, 1e-9), (std::vector<Index>{0, 1}));
  EXPECT_EQ(extract_support(DesignWeightsd::uniform(3, {0, 1, 2}), 1e-9), (std::vector<Index>{0, 1, 2}));
}

TEST(RestrictedModel, GradientAndHessianFiniteDifferences) {
  std::mt19937_64 rng(21);
  for (int t = 0; t < 100; ++t) {
    const Index n = 2 + t % 9;
    const Index k = std::min<Index>(30, n + 1 + t % 20);
    const DesignMatrixd X(oracle::gaussian_points(n, k, 300 + t));
    const RestrictedModel model(X, iota_vec(k));
    const Vectord u = oracle::random_simplex(k, rng);
    const auto f = [&](const Vectord& w) { return model.value(w); };
    const Vectord g = model.gradient(u);
    const Vectord gfd = oracle::central_gradient(f, u, 1e-6);
    EXPECT_LE((g - gfd).norm(), 1e-5 * g.norm()) << "t=" << t;

    const Matrixd Hs = model.hessian(u);
    Matrixd Hfd(k, k);
    for (Index j = 0; j < k; ++j) {
      Vectord a = u, b = u;
      a(j) += 1e-6;
      b(j) -= 1e-6;
      Hfd.col(j) = (model.gradient(a) - model.gradient(b)) / 2e-6;
    }
    EXPECT_LE((Hs - Hfd).norm(), 1e-5 * Hs.norm()) << "t=" << t;
  }
}

TEST(SolveRestricted, BarrierMonotoneAndKkt) {
  for (int t = 0; t < 25; ++t) {
    const Index n = 2 + t % 8;
    const Index k = n + 3 + t % 15;
    const DesignMatrixd X(oracle::gaussian_points(n, k, 600 + t));
    std::vector<BarrierStep> trace;
    const auto sol = solve_restricted(X, iota_vec(k), nullptr, {}, &trace);
    ASSERT_EQ(sol.status, Status::Converged);
    for (std::size_t s = 1; s < trace.size(); ++s) {
      if (trace[s].mu == trace[s - 1].mu) {
        EXPECT_GE(trace[s].value, trace[s - 1].value - 1e-12 * std::abs(trace[s - 1].value));
      }
    }
    EXPECT_NEAR(sol.weights.values().sum(), 1.0, 1e-12);
    const Vectord kappa = mahalanobis_columns(sol.ellipsoid, X.points());
    const double nd = static_cast<double>(n);
    EXPECT_LE(kappa.maxCoeff() - nd, nd * std::expm1(sol.gap / nd) + 1e-8);
    EXPECT_LE(sol.gap, 1e-9);
  }
}

TEST(SolveRestricted, AgreesWithProjectedGradient) {
  for (int t = 0; t < 20; ++t) {
    const Index n = 2 + t % 4;
    const Index k = std::min<Index>(15, n + 2 + t % 11);
    const Matrixd P = oracle::gaussian_points(n, k, 800 + t);
    const DesignMatrixd X(P);
    const auto sol = solve_restricted(X, iota_vec(k));
    const auto pg = oracle::projected_gradient(P);
    EXPECT_LE(pg.stationarity, 1e-10) << "t=" << t;
    EXPECT_NEAR(sol.objective, pg.value, 1e-7) << "t=" << t;
  }
}

TEST(SolveRestricted, WarmStartSameOptimum) {
  const DesignMatrixd X(oracle::gaussian_points(4, 20, 77));
  const auto cold = solve_restricted(X, iota_vec(20));
  const auto warm = solve_restricted(X, iota_vec(20), &cold.weights);
  EXPECT_NEAR(cold.objective, warm.objective, 1e-9);
}
