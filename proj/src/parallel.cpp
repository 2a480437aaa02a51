#include "optd/parallel.hpp"

#include <cstdlib>
#include <numeric>
#include <string>

#include <omp.h>

namespace optd {

namespace {
constexpr Index kBlock = 2048;
}

int scan_threads() {
  if (const char* env = std::getenv("OPTD_THREADS")) {
    try {
      const int t = std::stoi(env);
      if (t > 0) return t;
    } catch (const std::exception&) {
    }
  }
  return omp_get_max_threads();
}

void kappa_scan(const DesignMatrixd& X, const EllipsoidMatrixd& H, std::span<const Index> idx,
                std::span<double> out) {
  const Index total = static_cast<Index>(idx.size());
  const Index blocks = (total + kBlock - 1) / kBlock;
  const Matrixd Lt = H.chol().transpose();
  const Index n = X.dim();
#pragma omp parallel for schedule(static) num_threads(scan_threads())
  for (Index b = 0; b < blocks; ++b) {
    const Index begin = b * kBlock;
    const Index len = std::min(kBlock, total - begin);
    Matrixd pts(n, len);
    for (Index k = 0; k < len; ++k) pts.col(k) = X.point(idx[static_cast<std::size_t>(begin + k)]);
    const Vectord kap = (Lt * pts).colwise().squaredNorm().transpose();
    for (Index k = 0; k < len; ++k) out[static_cast<std::size_t>(begin + k)] = kap(k);
  }
}

Vectord kappa_scan(const DesignMatrixd& X, const EllipsoidMatrixd& H, std::span<const Index> idx) {
  Vectord out(static_cast<Index>(idx.size()));
  kappa_scan(X, H, idx, std::span<double>(out.data(), idx.size()));
  return out;
}

Vectord kappa_scan(const DesignMatrixd& X, const EllipsoidMatrixd& H) {
  std::vector<Index> all(static_cast<std::size_t>(X.size()));
  std::iota(all.begin(), all.end(), Index{0});
  return kappa_scan(X, H, all);
}

void project_scan(const DesignMatrixd& X, const Vectord& v, std::span<const Index> idx, std::span<double> out) {
  const auto total = static_cast<Index>(idx.size());
  const double* base = X.points().data();
  const Index n = X.dim();
#pragma omp parallel for schedule(static) num_threads(scan_threads())
  for (Index k = 0; k < total; ++k) {
    const Eigen::Map<const Vectord> x(base + idx[static_cast<std::size_t>(k)] * n, n);
    out[static_cast<std::size_t>(k)] = x.dot(v);
  }
}

}  // namespace optd
