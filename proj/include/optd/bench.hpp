#pragma once

// Datasets, persistence and the end-to-end pipeline:
// generate/ingest -> limit solve -> rounding + local search -> bound report.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "optd/colgen.hpp"
#include "optd/core.hpp"
#include "optd/exact_design.hpp"
#include "optd/frank_wolfe.hpp"

namespace optd {

struct DatasetSpec {
  enum class Kind { SyntheticMixture, File };
  Kind kind = Kind::SyntheticMixture;
  Index n = 0;
  Index m = 0;
  std::uint64_t seed = 1;
  /// sinh-arcsinh parameter; 1 leaves the data untouched.
  double p = 1.0;
  std::string path;

  void validate() const;
};

/// m points from an equal-weight mixture of five Gaussians: means uniform in
/// [-5, 5]^n, covariances A A^T + 0.1 I with standard normal A.
DesignMatrixd generate_mixture(Index n, Index m, std::uint64_t seed);

/// Entrywise x -> sinh(asinh(x) / p).
DesignMatrixd sinh_arcsinh_transform(const DesignMatrixd& X, double p);

/// Mean over coordinates of ln(m4 / m2^2), with central moments.
double avg_log_kurtosis(const DesignMatrixd& X);

enum class DataFormat { Auto, Csv, Binary };

/// CSV: one point per row, optional header. Binary: "OPTD1", u32 n, u64 m,
/// then m n little-endian doubles, column-major. Auto picks by extension
/// (.bin / .optd are binary).
DesignMatrixd load_dataset(const std::string& path, DataFormat format = DataFormat::Auto);
void save_dataset(const DesignMatrixd& X, const std::string& path, DataFormat format = DataFormat::Auto);

DesignMatrixd parse_csv(const std::string& text, const std::string& id = {});

enum class LimitMethod { ColGen, FrankWolfe };

struct RunResult {
  DatasetSpec spec;
  std::string method;
  int N = 0;
  std::vector<SolveReport> reports;  // limit solve, then local search
  BoundReport bounds;
  double kurtosis = 0;
  std::vector<Index> support;  // limit-solution support used as S
  std::map<Index, int> design;
};

void save_result(const RunResult& r, const std::string& path);
RunResult load_result(const std::string& path);

/// Serialized form; `withTimes` false drops every wallTime field.
std::string result_to_json(const RunResult& r, bool withTimes = true);
RunResult result_from_json(const std::string& text);

struct PipelineConfig {
  int N = 0;
  LimitMethod method = LimitMethod::ColGen;
  ColGenConfig colgen{};
  FwConfig fw{};
  LocalSearchConfig search{};
  RoundingVariant rounding = RoundingVariant::LargestRemainder;
};

DesignMatrixd materialize(const DatasetSpec& spec);

RunResult run_pipeline(const DatasetSpec& spec, const PipelineConfig& cfg);

}  // namespace optd
