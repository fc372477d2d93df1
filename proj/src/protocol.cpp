#include "optcon/protocol.hpp"

#include <stdexcept>

#include <fmt/format.h>

namespace optcon {

NetworkState initial_state(const Scenario& s) {
  NetworkState st;
  st.x.resize(static_cast<Eigen::Index>(s.agent_count()), s.dim);
  st.lam.reserve(s.agent_count());
  for (std::size_t i = 0; i < s.agent_count(); ++i) {
    st.x.row(static_cast<Eigen::Index>(i)) = s.agents[i].x0.transpose();
    st.lam.push_back(s.agents[i].lambda0);
  }
  st.t = 0.0;
  return st;
}

LocalView local_view(const Scenario& s, const NetworkState& state, std::size_t i) {
  LocalView view;
  view.spec = &s.agents.at(i);
  view.xi = state.position(i);
  view.lami = state.lam.at(i);
  for (auto j : s.topology.neighbors(i))
    view.neighbors.push_back({s.topology.weight(i, j), state.position(j)});
  return view;
}

Vec consensus_term(double beta, const Vec& xi, std::span<const NeighborSample> neighbors) {
  Vec h = Vec::Zero(xi.size());
  for (const auto& nb : neighbors) h -= nb.weight * (xi - nb.position);
  return beta * h;
}

Vec consensus_term(const Scenario& s, const NetworkState& state, std::size_t i) {
  const auto view = local_view(s, state, i);
  return consensus_term(s.beta, view.xi, view.neighbors);
}

Vec node_lagrangian_grad(const AgentSpec& a, const Vec& xi, const Vec& lami) {
  if (static_cast<std::size_t>(lami.size()) != a.constraints.size())
    throw std::invalid_argument(fmt::format("{} multipliers given for {} constraints",
                                            lami.size(), a.constraints.size()));
  Vec g = a.objective.grad(xi);
  for (std::size_t k = 0; k < a.constraints.size(); ++k)
    g += lami(static_cast<Eigen::Index>(k)) * a.constraints[k].grad(xi);
  return g;
}

Vec control_input(double alpha, double beta, const LocalView& view) {
  return -alpha * node_lagrangian_grad(*view.spec, view.xi, view.lami) +
         consensus_term(beta, view.xi, view.neighbors);
}

Vec control_input(const Scenario& s, const NetworkState& state, std::size_t i) {
  return control_input(s.alpha, s.beta, local_view(s, state, i));
}

Vec dual_rate(const AgentSpec& a, const Vec& xi, const Vec& lami) {
  Vec rate(static_cast<Eigen::Index>(a.constraints.size()));
  for (std::size_t k = 0; k < a.constraints.size(); ++k) {
    const auto ki = static_cast<Eigen::Index>(k);
    rate(ki) = positive_projection(a.constraints[k].eval(xi), lami(ki));
  }
  return rate;
}

ActiveSet active_set(const Scenario& s, const NetworkState& state) {
  ActiveSet sigma;
  for (std::size_t i = 0; i < s.agent_count(); ++i) {
    const auto& a = s.agents[i];
    if (a.constraints.empty()) continue;
    const Vec xi = state.position(i);
    for (std::size_t k = 0; k < a.constraints.size(); ++k)
      if (state.lam[i](static_cast<Eigen::Index>(k)) == 0.0 && a.constraints[k].eval(xi) < 0.0)
        sigma.members.insert({i, k});
  }
  return sigma;
}

std::vector<std::size_t> constraint_offsets(const Scenario& s) {
  std::vector<std::size_t> off(s.agent_count() + 1, 0);
  for (std::size_t i = 0; i < s.agent_count(); ++i)
    off[i + 1] = off[i] + s.agents[i].constraint_count();
  return off;
}

std::uint64_t sigma_bitmask(const Scenario& s, const ActiveSet& sigma) {
  const auto off = constraint_offsets(s);
  if (off.back() > 64) throw std::length_error("sigma bitmask supports at most 64 constraints");
  std::uint64_t mask = 0;
  for (const auto& r : sigma.members) mask |= std::uint64_t{1} << (off[r.agent] + r.constraint);
  return mask;
}

Rates network_rates(const Scenario& s, const NetworkState& state) {
  Rates r;
  r.xdot.resize(state.x.rows(), state.x.cols());
  r.lamdot.reserve(s.agent_count());
  for (std::size_t i = 0; i < s.agent_count(); ++i) {
    const auto view = local_view(s, state, i);
    r.xdot.row(static_cast<Eigen::Index>(i)) = control_input(s.alpha, s.beta, view).transpose();
    r.lamdot.push_back(dual_rate(s.agents[i], view.xi, view.lami));
  }
  return r;
}

}  // namespace optcon
