// optd: command-line front end for D-optimal design / MVEE solving.
//
// Exit codes: 0 converged, 2 iteration limit or stall, 1 error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <cmath>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "optd/bench.hpp"

namespace {

using nlohmann::json;
using namespace optd;

constexpr int kExitConverged = 0;
constexpr int kExitError = 1;
constexpr int kExitLimit = 2;

int exit_code(Status s) { return s == Status::Converged ? kExitConverged : kExitLimit; }

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text << '\n';
    return;
  }
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path + "'");
  out << text << '\n';
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
}

json report_json(const SolveReport& r) {
  return {{"method", r.method},           {"objective", r.objective}, {"dualityGap", r.dualityGap},
          {"iterations", r.iterations},   {"supportSize", r.supportSize}, {"eliminated", r.eliminated},
          {"wallTime", r.wallTime},       {"status", to_string(r.status)}};
}

json limit_json(const DesignMatrixd& X, const DesignWeightsd& w, const SolveReport& r) {
  json j = report_json(r);
  j["n"] = X.dim();
  j["m"] = X.size();
  j["support"] = w.support();
  j["weights"] = std::vector<double>(w.values().begin(), w.values().end());
  return j;
}

DesignWeightsd limit_from_json(const json& j, Index m) {
  const auto support = j.at("support").get<std::vector<Index>>();
  const auto values = j.at("weights").get<std::vector<double>>();
  Vectord v = Eigen::Map<const Vectord>(values.data(), static_cast<Index>(values.size()));
  return DesignWeightsd::from_entries(m, support, v);
}

ProgressSink stderr_sink(bool verbose) {
  if (!verbose) return {};
  return [](const IterationRecord& rec) { std::cerr << to_json_line(rec) << '\n'; };
}

struct LimitOptions {
  std::string method = "colgen";
  double tol = -1;
  Index n0 = 0;
  double gaptol = 1e-9;
  double minWeight = 1e-9;
  int maxOuter = 500;
  long maxIter = 1'000'000;
  long hpEvery = 500;
  bool noHp = false;
  bool keepAll = false;
  bool noAway = false;
  std::uint64_t seed = 0;
  bool verbose = false;

  void attach(CLI::App* app) {
    app->add_option("--method", method, "Limit solver")->check(CLI::IsMember({"colgen", "fw"}));
    app->add_option("--tol", tol, "Stopping tolerance on max kappa - n (colgen default 1e-5, fw default 1e-5/n)");
    app->add_option("--n0", n0, "Violated points added per colgen round (default 5n)");
    app->add_option("--gaptol", gaptol, "Restricted master gap tolerance");
    app->add_option("--min-weight", minWeight, "Support truncation floor");
    app->add_option("--max-outer", maxOuter, "Colgen outer iteration cap");
    app->add_option("--max-iter", maxIter, "Frank-Wolfe iteration cap");
    app->add_option("--hp-every", hpEvery, "Frank-Wolfe elimination checkpoint period (0 disables)");
    app->add_flag("--no-hp", noHp, "Disable Harman-Pronzato elimination");
    app->add_flag("--keep-all", keepAll, "Colgen: never drop zero-weight points");
    app->add_flag("--no-away", noAway, "Frank-Wolfe: disable away steps");
    app->add_option("--seed", seed, "Seed for the initial design");
    app->add_flag("-v,--verbose", verbose, "Line-delimited JSON progress on stderr");
  }

  ColGenConfig colgen() const {
    ColGenConfig c;
    c.n0 = n0;
    if (tol > 0) c.stopTol = tol;
    c.rmp.gapTol = gaptol;
    c.rmp.minWeight = minWeight;
    c.keepAll = keepAll;
    c.hpElimination = !noHp;
    c.maxOuter = maxOuter;
    c.seed = seed;
    c.progress = stderr_sink(verbose);
    return c;
  }

  FwConfig fw() const {
    FwConfig c;
    if (tol > 0) c.tol = tol;
    c.maxIter = maxIter;
    c.awaySteps = !noAway;
    c.hpCheckEvery = noHp ? 0 : hpEvery;
    c.seed = seed;
    c.progressEvery = verbose ? 1000 : 0;
    c.progress = stderr_sink(verbose);
    return c;
  }

  LimitMethod limit_method() const { return method == "fw" ? LimitMethod::FrankWolfe : LimitMethod::ColGen; }
};

struct ExactOptions {
  int N = 0;
  std::string variant = "best";
  std::string round = "remainder";
  long maxSwaps = 100'000;

  void attach(CLI::App* app) {
    app->add_option("--N", N, "Number of experiments")->required();
    app->add_option("--variant", variant, "Local search variant")->check(CLI::IsMember({"first", "best"}));
    app->add_option("--round", round, "Rounding rule")->check(CLI::IsMember({"remainder", "topN"}));
    app->add_option("--max-swaps", maxSwaps, "Swap cap");
  }

  LocalSearchConfig search() const {
    LocalSearchConfig c;
    c.variant = variant == "first" ? LocalSearchVariant::FirstImprovement : LocalSearchVariant::BestImprovement;
    c.maxSwaps = maxSwaps;
    return c;
  }

  RoundingVariant rounding() const {
    return round == "topN" ? RoundingVariant::TopN : RoundingVariant::LargestRemainder;
  }
};

std::pair<DesignWeightsd, SolveReport> solve_limit(const DesignMatrixd& X, const LimitOptions& opt) {
  if (opt.limit_method() == LimitMethod::FrankWolfe) {
    auto r = fw_solve(X, opt.fw());
    return {std::move(r.weights), r.report};
  }
  auto r = run_column_generation(X, opt.colgen());
  return {std::move(r.weights), r.report};
}

DatasetSpec spec_from_json(const json& j) {
  DatasetSpec s;
  const std::string kind = j.value("kind", j.contains("path") ? "file" : "synthetic-mixture");
  s.kind = kind == "file" ? DatasetSpec::Kind::File : DatasetSpec::Kind::SyntheticMixture;
  s.n = j.value("n", Index{0});
  s.m = j.value("m", Index{0});
  s.seed = j.value("seed", std::uint64_t{1});
  s.p = j.value("p", 1.0);
  s.path = j.value("path", std::string{});
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"D-optimal design and minimum-volume enclosing ellipsoid solver"};
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "Generate a seeded Gaussian-mixture dataset");
  Index genN = 0, genM = 0;
  std::uint64_t genSeed = 1;
  double genP = 1.0;
  std::string genOut;
  gen->add_option("--n", genN, "Dimension")->required();
  gen->add_option("--m", genM, "Number of points")->required();
  gen->add_option("--seed", genSeed, "Seed");
  gen->add_option("--p", genP, "sinh-arcsinh parameter applied after generation");
  gen->add_option("--out", genOut, "Output file (.bin/.optd binary, otherwise CSV)")->required();

  // transform
  auto* tr = app.add_subcommand("transform", "Apply x -> sinh(asinh(x)/p) entrywise");
  double trP = 1.0;
  std::string trIn, trOut;
  tr->add_option("--p", trP, "Transform parameter (> 0)")->required();
  tr->add_option("--in", trIn, "Input dataset")->required();
  tr->add_option("--out", trOut, "Output dataset")->required();

  // mvee
  auto* mvee = app.add_subcommand("mvee", "Solve the limit (continuous) D-optimal design problem");
  std::string mveeIn, mveeOut;
  LimitOptions mveeOpt;
  mvee->add_option("--in", mveeIn, "Input dataset")->required();
  mvee->add_option("--out", mveeOut, "Output JSON (stdout when omitted)");
  mveeOpt.attach(mvee);

  // exact
  auto* exact = app.add_subcommand("exact", "Exact design by rounding + local search on the limit support");
  std::string exIn, exOut, exLimit;
  LimitOptions exLimitOpt;
  ExactOptions exOpt;
  exact->add_option("--in", exIn, "Input dataset")->required();
  exact->add_option("--limit", exLimit, "Limit solution from `mvee --out` (solved on the fly when omitted)");
  exact->add_option("--out", exOut, "Output JSON (stdout when omitted)");
  exOpt.attach(exact);
  exLimitOpt.attach(exact);

  // pipeline
  auto* pipe = app.add_subcommand("pipeline", "Dataset -> limit solve -> exact design -> bound report");
  std::string pipeSpec, pipeData, pipeOut;
  Index pipeN = 0, pipeM = 0;
  std::uint64_t pipeSeed = 1;
  double pipeP = 1.0;
  LimitOptions pipeOpt;
  ExactOptions pipeEx;
  pipe->add_option("--spec", pipeSpec, "DatasetSpec JSON file");
  pipe->add_option("--data", pipeData, "Dataset file (instead of --spec)");
  pipe->add_option("--n", pipeN, "Synthetic dimension (instead of --spec)");
  pipe->add_option("--m", pipeM, "Synthetic point count");
  pipe->add_option("--data-seed", pipeSeed, "Synthetic dataset seed");
  pipe->add_option("--p", pipeP, "sinh-arcsinh parameter");
  pipe->add_option("--out", pipeOut, "Result JSON (stdout when omitted)");
  pipeEx.attach(pipe);
  pipeOpt.attach(pipe);

  // oracle
  auto* oracle = app.add_subcommand("oracle", "Brute-force exact design over all points (small instances)");
  std::string orIn, orOut;
  int orN = 0;
  oracle->add_option("--in", orIn, "Input dataset")->required();
  oracle->add_option("--N", orN, "Number of experiments")->required();
  oracle->add_option("--out", orOut, "Output JSON (stdout when omitted)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      auto X = generate_mixture(genN, genM, genSeed);
      if (genP != 1.0) X = sinh_arcsinh_transform(X, genP);
      save_dataset(X, genOut);
      return kExitConverged;
    }
    if (*tr) {
      save_dataset(sinh_arcsinh_transform(load_dataset(trIn), trP), trOut);
      return kExitConverged;
    }
    if (*mvee) {
      const auto X = load_dataset(mveeIn);
      const auto [w, report] = solve_limit(X, mveeOpt);
      write_text(mveeOut, limit_json(X, w, report).dump(2));
      return exit_code(report.status);
    }
    if (*exact) {
      const auto X = load_dataset(exIn);
      if (exOpt.N < X.dim()) throw DomainError("N must be at least n");
      std::optional<DesignWeightsd> limit;
      Status status = Status::Converged;
      if (!exLimit.empty()) {
        limit = limit_from_json(read_json(exLimit), X.size());
      } else {
        auto solved = solve_limit(X, exLimitOpt);
        status = solved.second.status;
        limit = std::move(solved.first);
      }
      auto start = round_to_exact(*limit, exOpt.N, X, exOpt.rounding());
      const auto ls = local_search(X, limit->support(), std::move(start), exOpt.search());
      const auto b = bound_report(X, *limit, ls.design);
      json design = json::array();
      for (const auto& [i, c] : ls.design.counts()) design.push_back({i, c});
      json doc{{"N", exOpt.N},
               {"swaps", ls.swaps},
               {"status", to_string(ls.status)},
               {"logDetG", ls.design.log_det()},
               {"design", design},
               {"bounds",
                {{"phiRel", b.phiRel},
                 {"hNn", b.hNn},
                 {"lowerBound", b.lowerBound},
                 {"achieved", b.achieved},
                 {"gap", b.gap},
                 {"gapIsAbsolute", b.gapIsAbsolute},
                 {"corollarySatisfied", b.corollarySatisfied}}}};
      write_text(exOut, doc.dump(2));
      return ls.status == Status::Converged ? exit_code(status) : kExitLimit;
    }
    if (*pipe) {
      DatasetSpec spec;
      if (!pipeSpec.empty()) {
        spec = spec_from_json(read_json(pipeSpec));
      } else if (!pipeData.empty()) {
        spec.kind = DatasetSpec::Kind::File;
        spec.path = pipeData;
        spec.p = pipeP;
      } else {
        spec.n = pipeN;
        spec.m = pipeM;
        spec.seed = pipeSeed;
        spec.p = pipeP;
      }
      PipelineConfig cfg;
      cfg.N = pipeEx.N;
      cfg.method = pipeOpt.limit_method();
      cfg.colgen = pipeOpt.colgen();
      cfg.fw = pipeOpt.fw();
      cfg.search = pipeEx.search();
      cfg.rounding = pipeEx.rounding();
      const RunResult r = run_pipeline(spec, cfg);
      write_text(pipeOut, result_to_json(r));
      for (const auto& rep : r.reports) {
        if (rep.status != Status::Converged) return kExitLimit;
      }
      return kExitConverged;
    }
    if (*oracle) {
      const auto X = load_dataset(orIn);
      std::vector<Index> all(static_cast<std::size_t>(X.size()));
      for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<Index>(i);
      const auto r = brute_force_exact(X, all, orN);
      json design = json::array();
      for (const auto& [i, c] : r.bestCounts) design.push_back({i, c});
      json doc{{"N", orN}, {"evaluated", r.evaluated}, {"design", design}};
      doc["bestLogDet"] = std::isfinite(r.bestLogDet) ? json(r.bestLogDet) : json(nullptr);
      write_text(orOut, doc.dump(2));
      return kExitConverged;
    }
  } catch (const std::exception& e) {
    std::cerr << "optd: " << e.what() << '\n';
    return kExitError;
  }
  return kExitError;
}
