#pragma once

// Data-parallel scans over point subsets. Each output entry is computed
// independently, so results do not depend on the thread count.

#include <span>

#include "optd/core.hpp"

namespace optd {

/// Thread cap for scans: OPTD_THREADS when set to a positive integer,
/// otherwise the OpenMP default.
int scan_threads();

/// out[k] = x_{idx[k]}^T H x_{idx[k]}.
void kappa_scan(const DesignMatrixd& X, const EllipsoidMatrixd& H, std::span<const Index> idx,
                std::span<double> out);

Vectord kappa_scan(const DesignMatrixd& X, const EllipsoidMatrixd& H, std::span<const Index> idx);

/// kappa over every point of X.
Vectord kappa_scan(const DesignMatrixd& X, const EllipsoidMatrixd& H);

/// out[k] = x_{idx[k]}^T v.
void project_scan(const DesignMatrixd& X, const Vectord& v, std::span<const Index> idx, std::span<double> out);

}  // namespace optd
