#include "optcon/integrator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

#include "optcon/error.hpp"

namespace optcon {

namespace {

Rates checked_rates(const Scenario& s, const NetworkState& st) {
  Rates r = network_rates(s, st);
  for (std::size_t i = 0; i < s.agent_count(); ++i) {
    if (!r.xdot.row(static_cast<Eigen::Index>(i)).allFinite())
      throw IntegrationError(st.t, i, "u",
                             fmt::format("non-finite control input for agent {} at t = {}",
                                         i + 1, st.t));
    if (!r.lamdot[i].allFinite())
      throw IntegrationError(st.t, i, "lambda_dot",
                             fmt::format("non-finite dual rate for agent {} at t = {}", i + 1,
                                         st.t));
  }
  return r;
}

// state + h * rates, multipliers clamped at zero.
NetworkState advance(const NetworkState& st, const Rates& r, double h) {
  NetworkState out;
  out.x = st.x + h * r.xdot;
  out.lam.resize(st.lam.size());
  for (std::size_t i = 0; i < st.lam.size(); ++i)
    out.lam[i] = (st.lam[i] + h * r.lamdot[i]).cwiseMax(0.0);
  out.t = st.t + h;
  return out;
}

}  // namespace

RateSample rate_sample(const Rates& r) {
  RateSample out;
  for (Eigen::Index i = 0; i < r.xdot.rows(); ++i)
    out.max_control = std::max(out.max_control, r.xdot.row(i).norm());
  for (const auto& l : r.lamdot)
    if (l.size() > 0) out.max_dual_rate = std::max(out.max_dual_rate, l.cwiseAbs().maxCoeff());
  return out;
}

NetworkState step(const Scenario& s, const NetworkState& state, double h) {
  if (s.method == Method::euler) return advance(state, checked_rates(s, state), h);

  const Rates k1 = checked_rates(s, state);
  const Rates k2 = checked_rates(s, advance(state, k1, 0.5 * h));
  const Rates k3 = checked_rates(s, advance(state, k2, 0.5 * h));
  const Rates k4 = checked_rates(s, advance(state, k3, h));

  Rates combined;
  combined.xdot = (k1.xdot + 2.0 * k2.xdot + 2.0 * k3.xdot + k4.xdot) / 6.0;
  combined.lamdot.resize(k1.lamdot.size());
  for (std::size_t i = 0; i < k1.lamdot.size(); ++i)
    combined.lamdot[i] =
        (k1.lamdot[i] + 2.0 * k2.lamdot[i] + 2.0 * k3.lamdot[i] + k4.lamdot[i]) / 6.0;
  return advance(state, combined, h);
}

Trajectory simulate(const Scenario& s) { return simulate(s, initial_state(s)); }

Trajectory simulate(const Scenario& s, NetworkState initial) {
  if (!(s.dt > 0.0)) throw std::invalid_argument("simulate: dt must be positive");
  Trajectory traj;
  const double t0 = initial.t;
  const double t_end = t0 + std::max(0.0, s.t_final);
  const auto full_steps = static_cast<std::size_t>(std::floor(s.t_final / s.dt + 1e-9));
  const bool partial = s.t_final - static_cast<double>(full_steps) * s.dt > 1e-9 * s.dt;
  const std::size_t total = full_steps + (partial ? 1 : 0);

  traj.times.reserve(total + 1);
  traj.states.reserve(total + 1);
  traj.sigma.reserve(total + 1);
  traj.rates.reserve(total + 1);

  auto record = [&](NetworkState st) {
    traj.rates.push_back(rate_sample(checked_rates(s, st)));
    traj.sigma.push_back(active_set(s, st));
    if (traj.sigma.size() >= 2) {
      const auto& before = traj.sigma[traj.sigma.size() - 2].members;
      const auto& after = traj.sigma.back().members;
      for (const auto& r : after)
        if (!before.contains(r)) traj.events.push_back({st.t, r, EventKind::sigma_entry});
      for (const auto& r : before)
        if (!after.contains(r)) traj.events.push_back({st.t, r, EventKind::sigma_exit});
    }
    traj.times.push_back(st.t);
    traj.states.push_back(std::move(st));
  };

  record(std::move(initial));
  for (std::size_t k = 1; k <= total; ++k) {
    const double t_next = k <= full_steps ? t0 + static_cast<double>(k) * s.dt : t_end;
    const auto& prev = traj.states.back();
    NetworkState next = step(s, prev, t_next - prev.t);
    next.t = t_next;
    record(std::move(next));
  }
  return traj;
}

bool has_settled(const Trajectory& traj, double tol, double window) {
  if (traj.size() == 0) throw std::invalid_argument("has_settled: empty trajectory");
  const double t_end = traj.times.back();
  const double duration = t_end - traj.times.front();
  if (window > duration + 1e-12)
    throw std::invalid_argument(fmt::format(
        "has_settled: window {} is longer than the trajectory ({})", window, duration));
  for (std::size_t k = traj.size(); k-- > 0;) {
    if (traj.times[k] < t_end - window - 1e-12) break;
    if (!(traj.rates[k].max_control < tol) || !(traj.rates[k].max_dual_rate < tol)) return false;
  }
  return true;
}

}  // namespace optcon
