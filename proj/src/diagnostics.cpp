#include "optcon/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <fmt/format.h>

namespace optcon {

ConsensusError consensus_error(const NetworkState& state) {
  ConsensusError e;
  const Mat centered = state.x.rowwise() - state.x.colwise().mean();
  e.per_coordinate = centered.colwise().norm().transpose();
  e.norm = centered.norm();
  for (Eigen::Index i = 0; i < state.x.rows(); ++i)
    for (Eigen::Index j = i + 1; j < state.x.rows(); ++j)
      e.max_pairwise = std::max(e.max_pairwise, (state.x.row(i) - state.x.row(j)).norm());
  return e;
}

double lyapunov_W(const Scenario& s, const NetworkState& state, const KktSolution& sol) {
  const Mat dx = state.x.rowwise() - sol.x_star.transpose();
  double dual = 0.0;
  for (std::size_t i = 0; i < state.lam.size(); ++i)
    dual += (state.lam[i] - sol.lambda_star[i]).squaredNorm();
  return dx.squaredNorm() / (2.0 * s.alpha) + 0.5 * dual;
}

LyapunovV lyapunov_V(const Scenario& s, const NetworkState& state) {
  LyapunovV out;
  out.sigma = active_set(s, state);
  const Rates r = network_rates(s, state);
  double dual = 0.0;
  for (std::size_t i = 0; i < r.lamdot.size(); ++i)
    for (Eigen::Index k = 0; k < r.lamdot[i].size(); ++k)
      if (!out.sigma.contains({i, static_cast<std::size_t>(k)})) dual += r.lamdot[i](k) * r.lamdot[i](k);
  out.value = r.xdot.squaredNorm() / (2.0 * s.alpha) + 0.5 * dual;
  return out;
}

double omega_empirical(const Scenario& s, const NetworkState& state) {
  std::vector<Vec> grads;
  grads.reserve(s.agent_count());
  for (std::size_t i = 0; i < s.agent_count(); ++i)
    grads.push_back(node_lagrangian_grad(s.agents[i], state.position(i), state.lam[i]));
  double w = 0.0;
  for (std::size_t i = 0; i < grads.size(); ++i)
    for (std::size_t j = i + 1; j < grads.size(); ++j) w = std::max(w, (grads[i] - grads[j]).norm());
  return w;
}

double ultimate_bound(double omega0, double alpha, double beta, double v2, double theta) {
  return omega0 * alpha / (beta * v2 * theta);
}

CertificateSeries certificate_series(const Scenario& s, const Trajectory& traj,
                                     const KktSolution* sol, double theta) {
  CertificateSeries out;
  out.theta = theta;
  out.times = traj.times;
  out.sigma = traj.sigma;
  out.v2 = s.topology.node_count() >= 2 && s.topology.is_connected()
               ? algebraic_connectivity(s.topology)
               : 0.0;
  const auto n = traj.size();
  out.consensus.reserve(n);
  out.V.reserve(n);
  out.omega.reserve(n);
  out.omega_running.reserve(n);
  if (sol) out.W.reserve(n);
  double running = 0.0;
  for (const auto& st : traj.states) {
    out.consensus.push_back(consensus_error(st));
    out.V.push_back(lyapunov_V(s, st).value);
    const double w = omega_empirical(s, st);
    out.omega.push_back(w);
    running = std::max(running, w);
    out.omega_running.push_back(running);
    if (sol) out.W.push_back(lyapunov_W(s, st, *sol));
  }
  out.ultimate_bound = out.v2 > 0.0 ? ultimate_bound(running, s.alpha, s.beta, out.v2, theta)
                                    : std::numeric_limits<double>::infinity();
  return out;
}

double discrete_slack(const std::vector<double>& values, double factor,
                      const std::vector<ActiveSet>* modes) {
  double worst = 0.0;
  for (std::size_t k = 1; k + 1 < values.size(); ++k) {
    if (modes && !((*modes)[k - 1] == (*modes)[k] && (*modes)[k] == (*modes)[k + 1])) continue;
    worst = std::max(worst, std::abs(values[k + 1] - 2.0 * values[k] + values[k - 1]));
  }
  return factor * worst;
}

bool CertificateReport::all_passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
}

const CertificateCheck& CertificateReport::at(const std::string& name) const {
  for (const auto& c : checks)
    if (c.name == name) return c;
  throw std::out_of_range("no certificate named " + name);
}

namespace {

CertificateCheck monotone_check(std::string name, const std::vector<double>& values,
                                double slack) {
  CertificateCheck c{.name = std::move(name), .threshold = slack};
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k + 1 < values.size(); ++k) {
    const double rise = values[k + 1] - values[k];
    worst = std::max(worst, rise);
    if (rise > slack) ++c.violations;
  }
  c.measured = values.size() > 1 ? worst : 0.0;
  c.passed = c.violations == 0;
  c.detail = fmt::format("largest per-step increase {:.6g}, slack {:.6g}, {} violations",
                         c.measured, slack, c.violations);
  return c;
}

}  // namespace

CertificateReport certify(const Scenario& s, const Trajectory& traj, const KktSolution& sol,
                          const CertifyOptions& opts) {
  CertificateReport rep;
  const auto series = certificate_series(s, traj, &sol, opts.theta);

  {
    CertificateCheck c{.name = "consensus_bound"};
    c.measured = series.consensus.back().norm;
    c.threshold = series.ultimate_bound;
    c.passed = c.measured <= c.threshold;
    c.violations = c.passed ? 0 : 1;
    c.detail = fmt::format("terminal ||Pi x|| = {:.6g}, bound omega0*alpha/(beta*v2*theta) = {:.6g} "
                           "(omega0 = {:.6g}, v2 = {:.6g}, theta = {})",
                           c.measured, c.threshold, series.omega_running.back(), series.v2,
                           opts.theta);
    rep.checks.push_back(std::move(c));
  }

  rep.checks.push_back(
      monotone_check("lyapunov_W", series.W, discrete_slack(series.W, opts.slack_factor)));

  {
    const double slack = discrete_slack(series.V, opts.slack_factor, &series.sigma);
    CertificateCheck c{.name = "lyapunov_V", .threshold = slack};
    double worst = 0.0;
    std::size_t fixed = 0, grow = 0, shrink = 0;
    for (std::size_t k = 0; k + 1 < series.V.size(); ++k) {
      const double dv = series.V[k + 1] - series.V[k];
      const auto& before = series.sigma[k].members;
      const auto& after = series.sigma[k + 1].members;
      bool bad = false;
      if (before == after) {
        bad = dv > slack;
        if (bad) ++fixed;
      } else {
        const bool grew = std::any_of(after.begin(), after.end(),
                                      [&](const auto& r) { return !before.contains(r); });
        if (grew) {
          bad = dv > slack;
          if (bad) ++grow;
        } else {
          bad = std::abs(dv) > slack;
          if (bad) ++shrink;
        }
      }
      worst = std::max(worst, dv);
      if (bad) ++c.violations;
    }
    c.measured = worst;
    c.passed = c.violations == 0;
    c.detail = fmt::format(
        "largest per-step increase {:.6g}, slack {:.6g}; violations: {} fixed-sigma, {} at "
        "sigma growth, {} at sigma shrink",
        worst, slack, fixed, grow, shrink);
    rep.checks.push_back(std::move(c));
  }

  {
    const auto r = kkt_residuals(s, traj.back());
    CertificateCheck c{.name = "kkt_terminal", .threshold = opts.kkt_tolerance};
    c.measured = std::max({r.aggregate_stationarity, r.primal_feasibility, r.dual_feasibility,
                           r.complementarity});
    c.passed = c.measured <= c.threshold;
    c.violations = c.passed ? 0 : 1;
    c.detail = fmt::format(
        "stationarity (own positions) {:.3g}, primal {:.3g}, dual {:.3g}, complementarity "
        "{:.3g}; stationarity at mean {:.3g} (reported only)",
        r.aggregate_stationarity, r.primal_feasibility, r.dual_feasibility, r.complementarity,
        r.stationarity);
    rep.checks.push_back(std::move(c));
  }
  return rep;
}

std::size_t consensus_boundedness_violations(const Scenario& s, const CertificateSeries& series,
                                             double slack) {
  std::size_t bad = 0;
  if (series.v2 <= 0.0) return 0;
  for (std::size_t k = 0; k + 1 < series.consensus.size(); ++k) {
    const double e = series.consensus[k].norm;
    const double radius = ultimate_bound(series.omega[k], s.alpha, s.beta, series.v2, series.theta);
    if (e >= radius && series.consensus[k + 1].norm > e + slack) ++bad;
  }
  return bad;
}

nlohmann::json report_to_json(const CertificateReport& report) {
  nlohmann::json checks = nlohmann::json::array();
  for (const auto& c : report.checks)
    checks.push_back({{"name", c.name},
                      {"passed", c.passed},
                      {"measured", c.measured},
                      {"threshold", c.threshold},
                      {"violations", c.violations},
                      {"detail", c.detail}});
  return {{"all_passed", report.all_passed()}, {"checks", std::move(checks)}};
}

}  // namespace optcon
