#include <doctest.h>

#include <cmath>
#include <map>
#include <random>

#include "optcon/diagnostics.hpp"
#include "support.hpp"

using namespace optcon;
using namespace optcon::testing;

namespace {

struct Run {
  Scenario s;
  Trajectory traj;
  KktSolution sol;
};

const Run& worked_run(double t_final) {
  static std::map<double, Run> cache;
  auto it = cache.find(t_final);
  if (it == cache.end()) {
    auto s = worked_example();
    s.t_final = t_final;
    auto traj = simulate(s);
    auto sol = solve_kkt(s);
    it = cache.emplace(t_final, Run{std::move(s), std::move(traj), std::move(sol)}).first;
  }
  return it->second;
}

}  // namespace

TEST_CASE("consensus error examples") {
  NetworkState st{.x = Mat(2, 1), .lam = {Vec(0), Vec(0)}};
  st.x << 0, 2;
  const auto e = consensus_error(st);
  CHECK(e.norm == doctest::Approx(std::sqrt(2.0)));
  CHECK(e.max_pairwise == doctest::Approx(2.0));
  CHECK(e.per_coordinate(0) == doctest::Approx(std::sqrt(2.0)));

  st.x = Mat::Constant(5, 3, 1.7);
  st.lam.assign(5, Vec(0));
  CHECK(consensus_error(st).norm == doctest::Approx(0.0));
}

TEST_CASE("Lyapunov function examples") {
  const auto s = worked_example();
  const auto sol = solve_kkt(s);
  auto st = replicate(s, sol);
  CHECK(lyapunov_W(s, st, sol) == 0.0);
  st.x(0, 0) += 1.0;
  // (1 / (2 * 0.1)) * 1
  CHECK(lyapunov_W(s, st, sol) == doctest::Approx(5.0));
  st = replicate(s, sol);
  st.lam[2](0) += 2.0;
  CHECK(lyapunov_W(s, st, sol) == doctest::Approx(2.0));

  // Rest point of the two-agent path: V vanishes.
  auto p = load(scenario_path("path2.json"));
  NetworkState rest{.x = Mat(2, 1), .lam = {Vec(0), Vec(0)}};
  rest.x << 2.0 - 1.0 / 11.0, 2.0 + 1.0 / 11.0;
  CHECK(lyapunov_V(p, rest).value == doctest::Approx(0.0).scale(1.0));

  // Single agent f = x^2, g = 1 - x, alpha = 1 at (0, 0): u = 0, lamdot = 1.
  const auto one = single_agent(ScalarField::quadratic(Mat::Identity(1, 1), Vec::Zero(1)),
                                {ScalarField::affine(vec({-1}), 1)}, vec({0}));
  CHECK(lyapunov_V(one, initial_state(one)).value == doctest::Approx(0.5));
  // At x = 3 the constraint is slack with lambda = 0: in sigma, excluded.
  NetworkState slack{.x = Mat::Constant(1, 1, 3.0), .lam = {vec({0})}};
  const auto v = lyapunov_V(one, slack);
  CHECK(v.sigma.contains({0, 0}));
  CHECK(v.value == doctest::Approx(36.0 / 2.0));
}

TEST_CASE("ultimate bound formula") {
  CHECK(ultimate_bound(2.0, 0.1, 10.0, 2.0, 0.5) == doctest::Approx(0.02));
}

TEST_CASE("discrete slack") {
  const std::vector<double> quad{0, 1, 4, 9, 16};
  CHECK(discrete_slack(quad, 10.0) == doctest::Approx(20.0));
  const std::vector<ActiveSet> modes{{}, {}, {{{0, 0}}}, {{{0, 0}}}, {{{0, 0}}}};
  const std::vector<double> kink{0, 0, 5, 5, 5};
  CHECK(discrete_slack(kink, 1.0) == doctest::Approx(5.0));
  CHECK(discrete_slack(kink, 1.0, &modes) == 0.0);
}

TEST_CASE("certificates on the worked example at t = 20") {
  const auto& run = worked_run(20.0);
  const auto rep = certify(run.s, run.traj, run.sol);
  REQUIRE(rep.checks.size() == 4);
  CHECK(rep.at("consensus_bound").passed);
  CHECK(rep.at("lyapunov_W").passed);
  CHECK(rep.at("lyapunov_V").passed);
  // Stationarity at own positions is still about 0.1 at t = 20.
  CHECK_FALSE(rep.at("kkt_terminal").passed);
  CHECK_FALSE(rep.all_passed());
  CHECK_THROWS_AS(rep.at("nope"), std::out_of_range);
  const auto j = report_to_json(rep);
  CHECK(j["checks"].size() == 4);
  CHECK(j["all_passed"] == false);
}

TEST_CASE("certificates on the worked example at t = 60") {
  const auto& run = worked_run(60.0);
  const auto rep = certify(run.s, run.traj, run.sol);
  for (const auto& c : rep.checks) {
    CAPTURE(c.detail);
    CHECK_MESSAGE(c.passed, c.name);
  }
  CHECK(rep.all_passed());
}

TEST_CASE("property: sample-level consensus boundedness") {
  const auto& run = worked_run(20.0);
  const auto series = certificate_series(run.s, run.traj, &run.sol);
  CHECK(series.v2 == doctest::Approx(2.0));
  std::vector<double> norms;
  for (const auto& c : series.consensus) norms.push_back(c.norm);
  CHECK(consensus_boundedness_violations(run.s, series, discrete_slack(norms, 10.0)) == 0);
  CHECK(series.consensus.back().norm <= series.ultimate_bound);
}

TEST_CASE("property: consensus error scales like 1/beta") {
  auto s = worked_example();
  s.t_final = 20;
  auto terminal = [&](double beta) {
    auto v = s;
    v.beta = beta;
    return consensus_error(simulate(v).back()).norm;
  };
  const double e10 = terminal(10.0);
  const double e100 = terminal(100.0);
  const double ratio = e10 / e100;
  CHECK(ratio >= 10.0 / 3.0);
  CHECK(ratio <= 30.0);
}

TEST_CASE("property: summed local gradients vanish at a network rest point") {
  // Let the network settle; the aggregate stationarity at own positions then
  // tracks the largest control input.
  const auto& run = worked_run(60.0);
  const auto r = kkt_residuals(run.s, run.traj.back());
  const auto rs = run.traj.rates.back();
  CHECK(r.aggregate_stationarity <= 4.0 * rs.max_control / run.s.alpha + 1e-9);
  CHECK(r.aggregate_stationarity < 1e-3);
}
