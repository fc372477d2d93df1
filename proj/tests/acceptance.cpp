// Acceptance gate. `acceptance` runs every criterion; `acceptance N...` runs
// the listed ones. One PASS/FAIL line per criterion; exit status 1 if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "optcon/cli.hpp"
#include "optcon/diagnostics.hpp"

using namespace optcon;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Tolerances.
constexpr double kOptimumTol = 0.01;          // criterion 1
constexpr double kSolveSeconds = 1.0;         // criterion 1
constexpr double kAgentTol = 0.05;            // criterion 2
constexpr double kResidualTol = 1e-2;         // criterion 2
constexpr double kRunSeconds = 10.0;          // criterion 2
constexpr double kSlackFactor = 10.0;         // criteria 3, 4
constexpr double kScalingRatio = 0.33;        // criterion 5
constexpr double kGridResolutions = 2.0;      // criterion 6
constexpr int kGridLevels = 6;                // criterion 6: finest spacing 12/40/4^5 < 1e-3
constexpr double kOracleResidualTol = 1e-8;   // criterion 6
constexpr double kCrossSeconds = 30.0;        // criterion 6
constexpr double kGradientTol = 1e-6;         // criterion 7
constexpr int kDualPairs = 100000;            // criterion 8
constexpr int kLocalityGraphs = 20;           // criterion 9

const Vec kReportedOptimum = (Vec(2) << 0.85, 0.53).finished();

struct Outcome {
  bool passed = false;
  std::string detail;
};

std::string scenario(const std::string& name) {
  return std::string(OPTCON_SCENARIO_DIR) + "/" + name;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult cli_call(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / "optcon_acceptance" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Vec json_vec(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

struct WorkedRun {
  Scenario s;
  Trajectory traj;
  KktSolution sol;
};

const WorkedRun& worked_run() {
  static const WorkedRun run = [] {
    auto s = load(scenario("worked_example.json"));
    auto traj = simulate(s);
    auto sol = solve_kkt(s);
    return WorkedRun{std::move(s), std::move(traj), std::move(sol)};
  }();
  return run;
}

Vec random_vec(std::mt19937_64& rng, Eigen::Index m, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vec v(m);
  for (Eigen::Index i = 0; i < m; ++i) v(i) = u(rng);
  return v;
}

Mat random_pd(std::mt19937_64& rng, Eigen::Index m, double shift) {
  Mat a(m, m);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j) a(i, j) = u(rng);
  Mat q = a.transpose() * a + shift * Mat::Identity(m, m);
  return 0.5 * (q + q.transpose());
}

Topology random_connected(std::mt19937_64& rng, std::size_t n) {
  std::vector<Edge> edges;
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (std::size_t v = 1; v < n; ++v) {
    const auto u = std::uniform_int_distribution<std::size_t>(0, v - 1)(rng);
    edges.push_back({u, v, 1.0});
    seen.insert({u, v});
  }
  std::bernoulli_distribution extra(0.3);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (!seen.contains({i, j}) && extra(rng)) edges.push_back({i, j, 1.0});
  return Topology(n, std::move(edges));
}

// ---------------------------------------------------------------------------

Outcome criterion_1() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = cli_call({"solve", scenario("worked_example.json")});
  const double wall = seconds_since(t0);
  if (r.code != cli::kOk) return {false, fmt::format("solve exited {}: {}", r.code, r.err)};
  const auto doc = json::parse(r.out);
  const Vec x = json_vec(doc["x_star"]);
  const double dist = (x - kReportedOptimum).norm();
  bool g3_active = false;
  for (const auto& a : doc["active_constraints"])
    g3_active = g3_active || (a["agent"] == 3 && a["constraint"] == 1);
  return {dist <= kOptimumTol && g3_active && wall < kSolveSeconds,
          fmt::format("x* = ({:.6f}, {:.6f}), distance {:.2e} (tol {}), g3 active: {}, {:.3f} s "
                      "(limit {} s)",
                      x(0), x(1), dist, kOptimumTol, g3_active, wall, kSolveSeconds)};
}

Outcome criterion_2() {
  const auto dir = scratch("criterion_2");
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = cli_call({"run", scenario("worked_example.json"), "--dt", "0.001", "--t-final", "20",
                           "--set", "alpha=0.1", "--set", "beta=10", "--out", dir.string()});
  const double wall = seconds_since(t0);
  if (r.code != cli::kOk) return {false, fmt::format("run exited {}: {}", r.code, r.err)};
  const auto doc = json::parse(r.out);
  const Vec x_star = json_vec(doc["oracle"]["x_star"]);
  double worst = 0.0;
  for (const auto& xi : doc["terminal_state"]["x"])
    worst = std::max(worst, (json_vec(xi) - x_star).norm());
  const auto& res = doc["terminal_kkt_residuals"];
  const double stat = res["stationarity"], comp = res["complementarity"],
               primal = res["primal_feasibility"], dual = res["dual_feasibility"];
  const bool ok = worst <= kAgentTol && stat < kResidualTol && comp < kResidualTol &&
                  primal < kResidualTol && dual < kResidualTol && wall < kRunSeconds;
  return {ok, fmt::format("max agent distance {:.4f} (tol {}), stationarity at mean {:.3g}, "
                          "complementarity {:.3g}, primal {:.3g}, dual {:.3g} (tol {}), {:.2f} s "
                          "(limit {} s)",
                          worst, kAgentTol, stat, comp, primal, dual, kResidualTol, wall,
                          kRunSeconds)};
}

Outcome certificate_criterion(const std::string& name) {
  const auto& run = worked_run();
  const auto rep = certify(run.s, run.traj, run.sol, {.slack_factor = kSlackFactor});
  const auto& c = rep.at(name);
  return {c.passed, c.detail};
}

Outcome criterion_3() { return certificate_criterion("lyapunov_W"); }
Outcome criterion_4() { return certificate_criterion("lyapunov_V"); }

Outcome criterion_5() {
  const auto dir = scratch("criterion_5");
  const auto r = cli_call({"sweep", scenario("worked_example.json"), "--param", "beta", "--values",
                           "1,10,100", "--out", dir.string()});
  if (r.code != cli::kOk) return {false, fmt::format("sweep exited {}: {}", r.code, r.err)};
  std::ifstream in(dir / "sweep.csv");
  std::string line;
  std::getline(in, line);
  std::map<double, std::vector<double>> per_coord;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() < 6 || cells[2] != "ok")
      return {false, fmt::format("variant failed: {}", line)};
    per_coord[std::stod(cells[1])] = {std::stod(cells[4]), std::stod(cells[5])};
  }
  if (per_coord.size() != 3) return {false, "expected three sweep variants"};
  const auto& e1 = per_coord[1.0];
  const auto& e10 = per_coord[10.0];
  const auto& e100 = per_coord[100.0];
  bool monotone = true;
  double ratio = 0.0;
  for (std::size_t d = 0; d < 2; ++d) {
    monotone = monotone && e1[d] > e10[d] && e10[d] > e100[d];
    ratio = std::max(ratio, e100[d] / e10[d]);
  }
  return {monotone && ratio <= kScalingRatio,
          fmt::format("per-coordinate error beta=1 ({:.3g}, {:.3g}), beta=10 ({:.3g}, {:.3g}), "
                      "beta=100 ({:.3g}, {:.3g}); monotone: {}, worst ratio {:.3f} (limit {})",
                      e1[0], e1[1], e10[0], e10[1], e100[0], e100[1], monotone, ratio,
                      kScalingRatio)};
}

// Strictly convex aggregate; every constraint holds with margin at p0.
Scenario random_small(std::mt19937_64& rng) {
  const auto n = std::uniform_int_distribution<std::size_t>(1, 4)(rng);
  const auto m = std::uniform_int_distribution<Eigen::Index>(1, 2)(rng);
  const auto k_total = std::uniform_int_distribution<std::size_t>(0, 4)(rng);
  const Vec p0 = random_vec(rng, m, -1, 1);
  Scenario s{.topology = random_connected(rng, n), .dim = m};
  std::vector<std::vector<ScalarField>> cons(n);
  for (std::size_t k = 0; k < k_total; ++k) {
    const auto owner = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
    if (std::bernoulli_distribution(0.5)(rng)) {
      const Vec c = p0 + random_vec(rng, m, -0.5, 0.5);
      const double r = (p0 - c).norm() + std::uniform_real_distribution<double>(0.3, 1.5)(rng);
      cons[owner].push_back(ScalarField::ball(c, r));
    } else {
      const Vec a = random_vec(rng, m, -1, 1);
      const double margin = std::uniform_real_distribution<double>(0.1, 1.0)(rng);
      cons[owner].push_back(ScalarField::affine(a, -a.dot(p0) - margin));
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto k = static_cast<Eigen::Index>(cons[i].size());
    s.agents.push_back({ScalarField::quadratic(random_pd(rng, m, 0.2), random_vec(rng, m, -3, 3)),
                        std::move(cons[i]), p0, Vec::Zero(k)});
  }
  return s;
}

Outcome criterion_6() {
  std::mt19937_64 rng(6);
  const auto t0 = std::chrono::steady_clock::now();
  int disagreements = 0, residual_failures = 0;
  double worst_ratio = 0.0, worst_residual = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const auto s = random_small(rng);
    const auto kkt = solve_kkt(s);
    const Vec p0 = s.agents[0].x0;
    const Box box{p0.array() - 6.0, p0.array() + 6.0};
    const auto grid = solve_grid(s, box, kGridLevels);
    const double ratio = ((grid.x - kkt.x_star).cwiseAbs().array() / grid.resolution.array())
                             .maxCoeff();
    worst_ratio = std::max(worst_ratio, ratio);
    if (ratio > kGridResolutions) ++disagreements;
    const auto r = kkt_residuals(s, replicate(s, kkt));
    const double res = std::max({r.stationarity, r.primal_feasibility, r.dual_feasibility,
                                 r.complementarity});
    worst_residual = std::max(worst_residual, res);
    if (!(res < kOracleResidualTol)) ++residual_failures;
  }
  const double wall = seconds_since(t0);
  return {disagreements == 0 && residual_failures == 0 && wall < kCrossSeconds,
          fmt::format("50 scenarios: {} grid disagreements (worst {:.2f} resolutions, limit {}), "
                      "{} residual failures (worst {:.2e}, limit {}), {:.2f} s (limit {} s)",
                      disagreements, worst_ratio, kGridResolutions, residual_failures,
                      worst_residual, kOracleResidualTol, wall, kCrossSeconds)};
}

Outcome criterion_7() {
  std::mt19937_64 rng(7);
  double worst = 0.0;
  int failures = 0, checks = 0;
  for (Eigen::Index m = 1; m <= 3; ++m) {
    const auto q = ScalarField::quadratic(random_pd(rng, m, 0.0), random_vec(rng, m, -2, 2),
                                          random_vec(rng, m, -1, 1), 0.4);
    const auto a = ScalarField::affine(random_vec(rng, m, -2, 2), 0.3);
    const auto b = ScalarField::ball(random_vec(rng, m, -1, 1), 1.2);
    const auto sum = ScalarField::sum({q, a, b});
    for (const auto* f : {&q, &a, &b, &sum})
      for (int k = 0; k < 100; ++k) {
        const double e = finite_diff_check(*f, random_vec(rng, m, -3, 3), 1e-5);
        worst = std::max(worst, e);
        ++checks;
        if (!(e < kGradientTol)) ++failures;
      }
  }
  return {failures == 0, fmt::format("{} field/point checks, worst relative error {:.2e} (limit "
                                     "{}), {} failures",
                                     checks, worst, kGradientTol, failures)};
}

Outcome criterion_8() {
  std::mt19937_64 rng(8);
  std::size_t pair_failures = 0;
  {
    std::uniform_real_distribution<double> g(-5, 5), lam(0, 5);
    std::bernoulli_distribution at_zero(0.5);
    for (int k = 0; k < kDualPairs; ++k) {
      const double gk = g(rng);
      const double lk = at_zero(rng) ? 0.0 : lam(rng);
      AgentSpec a{ScalarField::quadratic(Mat::Identity(1, 1), Vec::Zero(1)),
                  {ScalarField::affine(Vec::Ones(1), gk)},
                  Vec::Zero(1),
                  Vec::Zero(1)};
      const double rate = dual_rate(a, Vec::Zero(1), Vec::Constant(1, lk))(0);
      const bool expected_zero = lk == 0.0 && gk < 0.0;
      if (expected_zero ? rate != 0.0 : rate != gk) ++pair_failures;
      // One Euler step from here never leaves the orthant.
      if (std::max(0.0, lk + 0.5 * rate) < 0.0) ++pair_failures;
    }
  }

  std::vector<Scenario> runs;
  runs.push_back(load(scenario("worked_example.json")));
  {
    auto s = load(scenario("worked_example.json"));
    s.method = Method::rk4;
    s.dt = 5e-3;
    runs.push_back(s);
  }
  runs.push_back(load(scenario("path2.json")));
  runs.push_back(load(scenario("unconstrained.json")));
  for (int k = 0; k < 5; ++k) {
    auto s = random_small(rng);
    s.t_final = 5;
    for (auto& a : s.agents) a.x0 = random_vec(rng, s.dim, -3, 3);
    runs.push_back(s);
  }

  std::size_t samples = 0, clamped = 0, negative = 0, bad_clamp = 0, bad_sigma = 0;
  for (const auto& s : runs) {
    const auto traj = simulate(s);
    for (std::size_t t = 0; t < traj.size(); ++t) {
      const auto& st = traj.states[t];
      ++samples;
      for (std::size_t i = 0; i < s.agent_count(); ++i) {
        const Vec xi = st.position(i);
        const Vec rate = dual_rate(s.agents[i], xi, st.lam[i]);
        for (Eigen::Index k = 0; k < st.lam[i].size(); ++k) {
          if (st.lam[i](k) < 0.0) ++negative;
          const bool in_sigma = st.lam[i](k) == 0.0 && s.agents[i].constraints[k].eval(xi) < 0.0;
          if (in_sigma && rate(k) != 0.0) ++bad_sigma;
          // Clamped Euler update: the unprojected step would go negative.
          if (s.method == Method::euler && t + 1 < traj.size()) {
            const double h = traj.times[t + 1] - traj.times[t];
            if (st.lam[i](k) + h * rate(k) < 0.0) {
              ++clamped;
              if (traj.states[t + 1].lam[i](k) != 0.0) ++bad_clamp;
            }
          }
        }
      }
    }
  }
  const bool ok = pair_failures == 0 && negative == 0 && bad_clamp == 0 && bad_sigma == 0;
  return {ok, fmt::format("{} sampled pairs ({} failures); {} trajectories, {} samples: {} negative "
                          "multipliers, {} clamped steps ({} not exactly zero), {} nonzero rates in "
                          "sigma",
                          kDualPairs, pair_failures, runs.size(), samples, negative, clamped,
                          bad_clamp, bad_sigma)};
}

Outcome criterion_9() {
  std::mt19937_64 rng(9);
  std::size_t comparisons = 0, changed = 0;
  for (int g = 0; g < kLocalityGraphs; ++g) {
    const auto n = std::uniform_int_distribution<std::size_t>(4, 12)(rng);
    Scenario s{.topology = random_connected(rng, n), .dim = 2};
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<ScalarField> cons;
      if (i % 2 == 0) cons.push_back(ScalarField::ball(random_vec(rng, 2, -1, 1), 1.0));
      const auto k = static_cast<Eigen::Index>(cons.size());
      s.agents.push_back({ScalarField::quadratic(random_pd(rng, 2, 0.1), random_vec(rng, 2, -2, 2)),
                          std::move(cons), random_vec(rng, 2, -3, 3), random_vec(rng, k, 0, 2)});
    }
    const auto st = initial_state(s);
    for (std::size_t j = 0; j < n; ++j) {
      auto moved = st;
      moved.x.row(static_cast<Eigen::Index>(j)) = random_vec(rng, 2, -50, 50).transpose();
      for (std::size_t i = 0; i < n; ++i) {
        if (i == j) continue;
        const auto nb = s.topology.neighbors(i);
        if (std::find(nb.begin(), nb.end(), j) != nb.end()) continue;
        ++comparisons;
        if (control_input(s, moved, i) != control_input(s, st, i)) ++changed;
      }
    }
  }
  return {comparisons > 0 && changed == 0,
          fmt::format("{} random graphs, {} non-neighbor perturbations, {} changed controls",
                      kLocalityGraphs, comparisons, changed)};
}

const std::map<int, std::pair<std::string, std::function<Outcome()>>> kCriteria{
    {1, {"oracle reproduces the worked optimum", criterion_1}},
    {2, {"dynamics reach the worked optimum with small KKT residuals", criterion_2}},
    {3, {"W is non-increasing along the worked trajectory", criterion_3}},
    {4, {"V certificate holds along the worked trajectory", criterion_4}},
    {5, {"consensus error scales down with beta", criterion_5}},
    {6, {"KKT and grid oracles agree on random problems", criterion_6}},
    {7, {"analytic derivatives match central differences", criterion_7}},
    {8, {"dual multipliers stay in the non-negative orthant", criterion_8}},
    {9, {"control inputs depend only on neighbors", criterion_9}},
};

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) selected.push_back(std::atoi(argv[i]));
  if (selected.empty())
    for (const auto& [id, _] : kCriteria) selected.push_back(id);

  int failed = 0;
  for (int id : selected) {
    const auto it = kCriteria.find(id);
    if (it == kCriteria.end()) {
      std::cerr << "unknown criterion " << id << "\n";
      return 2;
    }
    Outcome o;
    try {
      o = it->second.second();
    } catch (const std::exception& e) {
      o = {false, fmt::format("exception: {}", e.what())};
    }
    if (!o.passed) ++failed;
    std::cout << fmt::format("criterion {} {}: {} ({})\n", id, o.passed ? "PASS" : "FAIL",
                             it->second.first, o.detail);
  }
  return failed == 0 ? 0 : 1;
}
