#include <chrono>
#include <cmath>
#include <limits>
#include <optional>

#include "optd/bench.hpp"

namespace optd {

DesignMatrixd materialize(const DatasetSpec& spec) {
  spec.validate();
  DesignMatrixd X = spec.kind == DatasetSpec::Kind::File ? load_dataset(spec.path)
                                                          : generate_mixture(spec.n, spec.m, spec.seed);
  return spec.p == 1.0 ? X : sinh_arcsinh_transform(X, spec.p);
}

RunResult run_pipeline(const DatasetSpec& spec, const PipelineConfig& cfg) {
  if (spec.kind == DatasetSpec::Kind::SyntheticMixture && cfg.N < spec.n) {
    throw DomainError("run_pipeline: N must be at least n");
  }
  const DesignMatrixd X = materialize(spec);
  if (cfg.N < X.dim()) throw DomainError("run_pipeline: N must be at least n");

  RunResult out;
  out.spec = spec;
  out.spec.n = X.dim();
  out.spec.m = X.size();
  out.N = cfg.N;
  try {
    out.kurtosis = avg_log_kurtosis(X);
  } catch (const DegenerateCoordinate&) {
    out.kurtosis = std::numeric_limits<double>::quiet_NaN();
  }

  std::optional<DesignWeightsd> limit;
  if (cfg.method == LimitMethod::ColGen) {
    auto res = run_column_generation(X, cfg.colgen);
    out.reports.push_back(res.report);
    limit = std::move(res.weights);
    out.method = "colgen";
  } else {
    auto res = fw_solve(X, cfg.fw);
    out.reports.push_back(res.report);
    limit = std::move(res.weights);
    out.method = "fw";
  }
  out.support = limit->support();

  const auto t0 = std::chrono::steady_clock::now();
  ExactDesignd start = round_to_exact(*limit, cfg.N, X, cfg.rounding);
  LocalSearchResult ls = local_search(X, out.support, std::move(start), cfg.search);
  out.bounds = bound_report(X, *limit, ls.design);
  out.design = ls.design.counts();

  SolveReport rep;
  rep.method = cfg.search.variant == LocalSearchVariant::BestImprovement ? "local-search-best" : "local-search-first";
  rep.objective = ls.design.log_det();
  rep.iterations = ls.swaps;
  rep.supportSize = static_cast<long>(out.support.size());
  rep.status = ls.status;
  rep.wallTime = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  out.reports.push_back(rep);
  return out;
}

}  // namespace optd
