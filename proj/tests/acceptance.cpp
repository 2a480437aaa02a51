// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

#include <json.hpp>

#include "optd/bench.hpp"
#include "optd/rmp_solver.hpp"
#include "oracles.hpp"

#ifndef OPTD_CLI
#error "OPTD_CLI must name the optd executable"
#endif

using namespace optd;
using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::vector<Index> iota_vec(Index k) {
  std::vector<Index> v(static_cast<std::size_t>(k));
  std::iota(v.begin(), v.end(), Index{0});
  return v;
}

struct Outcome {
  bool pass = true;
  std::string detail;
};

int failures = 0;

void run(int id, const std::string& name, const std::function<Outcome()>& body) {
  const auto t0 = Clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, " (%.2fs)", seconds(t0));
  std::cout << (o.pass ? "PASS" : "FAIL") << " [" << id << "] " << name << ": " << o.detail << buf << std::endl;
  if (!o.pass) ++failures;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(3);
  os << v;
  return os.str();
}

// Residuals collected from every local-search termination in this suite.
double worstResidual = -INFINITY;
long residualChecks = 0;

void record_residual(const DesignMatrixd& X, std::span<const Index> S, const ExactDesignd& d) {
  worstResidual = std::max(worstResidual, verify_lemma_tau(X, S, d));
  ++residualChecks;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(OPTD_CLI) + " " + args;
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void strip_wall_time(json& j) {
  if (j.is_object()) {
    j.erase("wallTime");
    for (auto& [k, v] : j.items()) strip_wall_time(v);
  } else if (j.is_array()) {
    for (auto& v : j) strip_wall_time(v);
  }
}

std::filesystem::path workdir() {
  auto dir = std::filesystem::temp_directory_path() / "optd_acceptance";
  std::filesystem::create_directories(dir);
  return dir;
}

Outcome closed_form_optimum() {
  const auto t0 = Clock::now();
  const DesignMatrixd X(oracle::toy_points());
  const double target = std::log(1.0 / 3);
  const auto cg = run_column_generation(X);
  const auto fw = fw_solve(X);
  double worstObj = 0, worstKappa = 0;
  for (const auto* pair : {&cg.weights, &fw.weights}) {
    const auto H = ellipsoid_from_weights(X, *pair);
    for (Index i : pair->support()) worstKappa = std::max(worstKappa, std::abs(mahalanobis(H, X.point(i)) - 2.0));
  }
  worstObj = std::max(std::abs(cg.report.objective - target), std::abs(fw.report.objective - target));
  const double t = seconds(t0);
  return {worstObj <= 1e-6 && worstKappa <= 1e-5 && t < 1.0,
          "|obj - ln(1/3)| = " + fmt(worstObj) + ", max |kappa - 2| on support = " + fmt(worstKappa) +
              ", time " + fmt(t) + "s"};
}

Outcome cross_solver_agreement() {
  const auto t0 = Clock::now();
  double worst = 0;
  long maxOuter = 0;
  for (int k = 0; k < 20; ++k) {
    const Index n = k < 10 ? 5 : 10;
    const auto X = generate_mixture(n, 10000, 100 + static_cast<std::uint64_t>(k));
    const auto cg = run_column_generation(X);
    const auto fw = fw_solve(X);
    worst = std::max(worst, std::abs(cg.report.objective - fw.report.objective));
    maxOuter = std::max(maxOuter, cg.report.iterations);
  }
  const double t = seconds(t0);
  return {worst <= 1e-4 && maxOuter <= 50 && t < 120,
          "max |g0 diff| = " + fmt(worst) + ", max colgen outer = " + std::to_string(maxOuter) + ", time " + fmt(t) +
              "s"};
}

Outcome elimination_safety() {
  long eliminated = 0;
  double worst = 0;
  for (int k = 0; k < 10; ++k) {
    const Index n = 2 + k % 9;
    const Index m = 2000 + 300 * k;
    const auto X = generate_mixture(n, m, 200 + static_cast<std::uint64_t>(k));
    FwConfig ref;
    ref.tol = 1e-8 / static_cast<double>(n);
    ref.hpCheckEvery = 0;
    const auto full = fw_solve(X, ref);
    if (full.report.status != Status::Converged) return {false, "reference FW did not converge on instance " + std::to_string(k)};
    const auto cg = run_column_generation(X);
    const auto fw = fw_solve(X);
    for (const auto* list : {&cg.eliminatedPoints, &fw.eliminatedPoints}) {
      for (Index i : *list) {
        worst = std::max(worst, full.weights.weight(i));
        ++eliminated;
      }
    }
  }
  return {worst < 1e-7, std::to_string(eliminated) + " eliminations checked, max reference weight = " + fmt(worst)};
}

Outcome scale_behavior() {
  const Index n = 10;
  std::vector<double> times;
  Index worstWorking = 0;
  for (Index m : {10000, 100000, 1000000}) {
    const auto X = generate_mixture(n, m, 7);
    double best = INFINITY;
    const int reps = m <= 100000 ? 3 : 1;
    for (int r = 0; r < reps; ++r) {
      const auto res = run_column_generation(X);
      if (res.report.status != Status::Converged) return {false, "colgen did not converge at m = " + std::to_string(m)};
      best = std::min(best, res.report.wallTime);
      worstWorking = std::max({worstWorking, res.finalWorkingSize, res.maxWorkingSize});
    }
    times.push_back(best);
  }
  const double ratio = times[2] / times[0];
  return {ratio < 100 && worstWorking < 20 * n,
          "times " + fmt(times[0]) + "/" + fmt(times[1]) + "/" + fmt(times[2]) + "s, ratio 1e6:1e4 = " + fmt(ratio) +
              ", max |working set| = " + std::to_string(worstWorking)};
}

Outcome eq10_bound() {
  long runs = 0;
  double worstSlack = INFINITY;
  double worstNn = 0;
  for (Index n : {2, 3, 5, 8}) {
    for (int mult : {0, 1, 2}) {
      for (auto method : {LimitMethod::ColGen, LimitMethod::FrankWolfe}) {
        DatasetSpec spec;
        spec.n = n;
        spec.m = 2000;
        spec.seed = 300 + static_cast<std::uint64_t>(n * 10 + mult);
        const int N = mult == 0 ? static_cast<int>(n) : mult == 1 ? static_cast<int>(n) + 1 : 4 * static_cast<int>(n);
        PipelineConfig cfg;
        cfg.N = N;
        cfg.method = method;
        const auto r = run_pipeline(spec, cfg);
        const auto X = materialize(spec);
        const ExactDesignd d(X, r.design);
        record_residual(X, r.support, d);
        bool converged = true;
        for (const auto& rep : r.reports) converged = converged && rep.status == Status::Converged;
        if (!converged) continue;
        ++runs;
        const double lhs = d.log_det() - static_cast<double>(n) * std::log(static_cast<double>(N));
        worstSlack = std::min(worstSlack, lhs - (r.bounds.phiRel - approx_bound(N, n)));
        if (N == n) {
          worstNn = std::max(worstNn, std::abs(approx_bound(N, n) - static_cast<double>(n) * std::log(static_cast<double>(n))));
        }
      }
    }
  }
  return {runs > 0 && worstSlack >= -1e-8 && worstNn == 0.0,
          std::to_string(runs) + " converged runs, min slack = " + fmt(worstSlack) + ", h(n,n) - n ln n = " +
              fmt(worstNn)};
}

Outcome brute_force_proximity() {
  long cases = 0, matches = 0;
  double worstRatio = INFINITY;
  for (Index n : {2, 3}) {
    for (Index k = n + 2; k <= 8; ++k) {
      for (int rep = 0; rep < 3; ++rep) {
        const auto X = generate_mixture(n, k, 500 + static_cast<std::uint64_t>(100 * n + 10 * k + rep));
        const auto S = iota_vec(k);
        const auto limit = run_column_generation(X);
        for (int N = static_cast<int>(n); N <= static_cast<int>(n) + 2; ++N) {
          const auto ls = local_search(X, S, round_to_exact(limit.weights, N, X));
          record_residual(X, S, ls.design);
          const auto bf = brute_force_exact(X, S, N);
          const double nd = static_cast<double>(n);
          const double factor = nd * std::log((N - nd + 1) / static_cast<double>(N));
          worstRatio = std::min(worstRatio, ls.design.log_det() - (factor + bf.bestLogDet));
          if (std::abs(ls.design.log_det() - bf.bestLogDet) <= 1e-9) ++matches;
          ++cases;
        }
      }
    }
  }
  const double frac = static_cast<double>(matches) / static_cast<double>(cases);
  return {cases >= 50 && worstRatio >= -1e-12 && frac >= 0.8,
          std::to_string(cases) + " cases, min log margin over worst-case bound = " + fmt(worstRatio) +
              ", matched optimum in " + fmt(100 * frac) + "%"};
}

Outcome local_opt_residual() {
  // Extra terminations with both variants on mid-size supports.
  for (int k = 0; k < 10; ++k) {
    const Index n = 3 + k % 6;
    const auto X = generate_mixture(n, 3000, 700 + static_cast<std::uint64_t>(k));
    const auto limit = run_column_generation(X);
    for (auto variant : {LocalSearchVariant::FirstImprovement, LocalSearchVariant::BestImprovement}) {
      for (auto rounding : {RoundingVariant::LargestRemainder, RoundingVariant::TopN}) {
        const int N = rounding == RoundingVariant::TopN ? static_cast<int>(limit.weights.support_size())
                                                        : static_cast<int>(n) + 3 * k;
        LocalSearchConfig cfg;
        cfg.variant = variant;
        const auto ls = local_search(X, limit.weights.support(), round_to_exact(limit.weights, N, X, rounding), cfg);
        record_residual(X, limit.weights.support(), ls.design);
      }
    }
  }
  return {residualChecks > 0 && worstResidual <= 1e-8,
          std::to_string(residualChecks) + " terminations, max residual = " + fmt(worstResidual)};
}

Outcome finite_differences() {
  std::mt19937_64 rng(8);
  double worstG = 0, worstH = 0;
  for (int t = 0; t < 100; ++t) {
    const Index n = 2 + t % 9;
    const Index k = std::min<Index>(30, n + 1 + (t * 7) % 25);
    const DesignMatrixd X(oracle::gaussian_points(n, k, 900 + static_cast<std::uint64_t>(t)));
    const RestrictedModel model(X, iota_vec(k));
    const Vectord u = oracle::random_simplex(k, rng);
    const Vectord g = model.gradient(u);
    const Vectord gfd = oracle::central_gradient([&](const Vectord& w) { return model.value(w); }, u, 1e-6);
    worstG = std::max(worstG, (g - gfd).norm() / g.norm());
    const Matrixd H = model.hessian(u);
    Matrixd Hfd(k, k);
    for (Index j = 0; j < k; ++j) {
      Vectord a = u, b = u;
      a(j) += 1e-6;
      b(j) -= 1e-6;
      Hfd.col(j) = (model.gradient(a) - model.gradient(b)) / 2e-6;
    }
    worstH = std::max(worstH, (H - Hfd).norm() / H.norm());
  }
  return {worstG <= 1e-5 && worstH <= 1e-5,
          "max relative error gradient " + fmt(worstG) + ", Hessian " + fmt(worstH) + " over 100 states"};
}

Outcome step_size_oracle() {
  std::mt19937_64 rng(9);
  double worst = 0;
  int checked = 0;
  for (int t = 0; checked < 1000; ++t) {
    const Index n = 2 + t % 8;
    const Index m = n + 1 + t % 6;
    const Matrixd P = oracle::gaussian_points(n, m, 1200 + static_cast<std::uint64_t>(t));
    const Vectord u = oracle::random_simplex(m, rng);
    const Matrixd H = (P * u.asDiagonal() * P.transpose()).inverse();
    const Vectord kappa = (P.transpose() * H * P).diagonal();
    Index i = 0, j = 0;
    kappa.maxCoeff(&i);
    kappa.minCoeff(&j);
    const double nd = static_cast<double>(n);
    if (kappa(i) > nd) {
      const double ref = oracle::golden_section_max(
          [&](double l) {
            Vectord w = (1 - l) * u;
            w(i) += l;
            return oracle::weighted_logdet(P, w);
          },
          0.0, 1.0 - 1e-9);
      worst = std::max(worst, std::abs(forward_step_size(kappa(i), n) - ref));
      ++checked;
    }
    if (kappa(j) < nd && checked < 1000) {
      const double cap = u(j) / (1 - u(j));
      const double ref = oracle::golden_section_max(
          [&](double l) {
            Vectord w = (1 + l) * u;
            w(j) -= l;
            return oracle::weighted_logdet(P, w);
          },
          0.0, cap);
      worst = std::max(worst, std::abs(away_step_size(kappa(j), u(j), n) - ref));
      ++checked;
    }
  }
  return {worst <= 1e-6, std::to_string(checked) + " states, max |lambda - golden section| = " + fmt(worst)};
}

Outcome cli_determinism() {
  const auto dir = workdir();
  const std::string a = (dir / "run_a.json").string();
  const std::string b = (dir / "run_b.json").string();
  for (const auto& method : {"colgen", "fw"}) {
    const std::string args = std::string("pipeline --n 6 --m 20000 --data-seed 42 --p 3 --N 10 --method ") + method;
    const int ra = run_cli(args + " --out " + a);
    const int rb = run_cli(args + " --out " + b);
    if (ra != 0 || rb != 0) return {false, std::string(method) + ": exit codes " + std::to_string(ra) + "/" + std::to_string(rb)};
    json ja = json::parse(slurp(a));
    json jb = json::parse(slurp(b));
    strip_wall_time(ja);
    strip_wall_time(jb);
    if (ja != jb) return {false, std::string(method) + ": results differ"};
  }
  return {true, "colgen and fw pipeline documents identical modulo wallTime"};
}

Outcome exit_certificate() {
  const auto dir = workdir();
  long checked = 0;
  double worstExcess = -INFINITY;
  for (int k = 0; k < 6; ++k) {
    const Index n = 3 + 3 * (k % 3);
    const Index m = 5000 * (1 + k);
    const std::string data = (dir / ("cert" + std::to_string(k) + ".bin")).string();
    const std::string out = (dir / ("cert" + std::to_string(k) + ".json")).string();
    const auto X = generate_mixture(n, m, 900 + static_cast<std::uint64_t>(k));
    save_dataset(X, data);
    const int rc = run_cli("mvee --method colgen --in " + data + " --out " + out);
    if (rc == 1) return {false, "mvee failed on instance " + std::to_string(k)};
    if (rc != 0) continue;
    const json j = json::parse(slurp(out));
    const auto support = j.at("support").get<std::vector<Index>>();
    const auto w = j.at("weights").get<std::vector<double>>();
    const auto u = DesignWeightsd::from_entries(m, support, Eigen::Map<const Vectord>(w.data(), static_cast<Index>(w.size())));
    const double nd = static_cast<double>(n);
    const double gap = duality_gap_certificate(X, u).gap;
    worstExcess = std::max(worstExcess, gap - nd * std::log1p(1e-5 / nd));
    ++checked;
  }
  return {checked > 0 && worstExcess <= 1e-9,
          std::to_string(checked) + " exit-0 runs, max (gap - n ln(1 + 1e-5/n)) = " + fmt(worstExcess)};
}

}  // namespace

int main() {
  run(1, "closed-form optimum", closed_form_optimum);
  run(2, "cross-solver agreement", cross_solver_agreement);
  run(3, "elimination safety", elimination_safety);
  run(4, "scale behavior", scale_behavior);
  run(5, "approximation bound", eq10_bound);
  run(6, "brute-force proximity", brute_force_proximity);
  run(7, "local-optimality residual", local_opt_residual);
  run(8, "finite-difference derivatives", finite_differences);
  run(9, "step-size oracle", step_size_oracle);
  run(10, "pipeline determinism", cli_determinism);
  run(11, "certificate at exit", exit_certificate);
  std::cout << (failures == 0 ? "ALL PASS" : std::to_string(failures) + " FAILED") << std::endl;
  return failures == 0 ? 0 : 1;
}
