#include <cmath>
#include <random>

#include "optd/bench.hpp"

namespace optd {

namespace {
constexpr int kComponents = 5;
}

void DatasetSpec::validate() const {
  if (!(p > 0)) throw DomainError("DatasetSpec: p must be positive");
  if (kind == Kind::SyntheticMixture) {
    if (n < 2) throw DomainError("DatasetSpec: n must be at least 2");
    if (m < n + 1) throw DomainError("DatasetSpec: m must be at least n + 1");
  } else if (path.empty()) {
    throw DomainError("DatasetSpec: file dataset needs a path");
  }
}

DesignMatrixd generate_mixture(Index n, Index m, std::uint64_t seed) {
  if (n < 2 || m < n + 1) throw DomainError("generate_mixture: need n >= 2 and m >= n + 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> meanDist(-5.0, 5.0);
  std::uniform_int_distribution<int> pick(0, kComponents - 1);

  std::vector<Vectord> means;
  std::vector<Matrixd> factors;
  for (int c = 0; c < kComponents; ++c) {
    Vectord mu(n);
    for (Index d = 0; d < n; ++d) mu(d) = meanDist(rng);
    Matrixd A(n, n);
    for (Index col = 0; col < n; ++col) {
      for (Index row = 0; row < n; ++row) A(row, col) = normal(rng);
    }
    Matrixd cov = A * A.transpose();
    cov.diagonal().array() += 0.1;
    means.push_back(std::move(mu));
    factors.push_back(cov.llt().matrixL());
  }

  Matrixd pts(n, m);
  Vectord z(n);
  for (Index i = 0; i < m; ++i) {
    const int c = pick(rng);
    for (Index d = 0; d < n; ++d) z(d) = normal(rng);
    pts.col(i).noalias() = means[static_cast<std::size_t>(c)] + factors[static_cast<std::size_t>(c)] * z;
  }
  return DesignMatrixd(std::move(pts), "mixture-n" + std::to_string(n) + "-m" + std::to_string(m) + "-s" +
                                           std::to_string(seed));
}

DesignMatrixd sinh_arcsinh_transform(const DesignMatrixd& X, double p) {
  if (!(p > 0)) throw DomainError("sinh_arcsinh_transform: p must be positive");
  if (p == 1.0) return X;
  Matrixd out = X.points().unaryExpr([p](double x) { return std::sinh(std::asinh(x) / p); });
  return DesignMatrixd(std::move(out), X.id());
}

double avg_log_kurtosis(const DesignMatrixd& X) {
  const auto m = static_cast<double>(X.size());
  double acc = 0;
  for (Index d = 0; d < X.dim(); ++d) {
    const auto row = X.points().row(d).array();
    const double mean = row.sum() / m;
    const auto centered = row - mean;
    const double m2 = centered.square().sum() / m;
    if (!(m2 > 1e-12)) throw DegenerateCoordinate("avg_log_kurtosis: coordinate " + std::to_string(d) + " is constant");
    const double m4 = centered.square().square().sum() / m;
    acc += std::log(m4 / (m2 * m2));
  }
  return acc / static_cast<double>(X.dim());
}

}  // namespace optd
