#pragma once

#include <compare>
#include <cstdint>
#include <set>
#include <span>
#include <vector>

#include "optcon/problem.hpp"

namespace optcon {

/// Stacked primal positions (row i = agent i) and per-agent multipliers.
struct NetworkState {
  Mat x;                 // N x m
  std::vector<Vec> lam;  // lam[i].size() == agents[i].constraint_count()
  double t = 0.0;

  Vec position(std::size_t i) const { return x.row(static_cast<Eigen::Index>(i)).transpose(); }

  friend bool operator==(const NetworkState&, const NetworkState&) = default;
};

NetworkState initial_state(const Scenario& s);

/// Identifies constraint `constraint` of agent `agent` (both zero-based).
struct ConstraintRef {
  std::size_t agent = 0;
  std::size_t constraint = 0;
  auto operator<=>(const ConstraintRef&) const = default;
};

/// sigma: constraints whose multiplier is exactly zero while the constraint
/// is strictly satisfied, i.e. where the dual projection clips the flow.
struct ActiveSet {
  std::set<ConstraintRef> members;

  bool contains(ConstraintRef r) const { return members.contains(r); }
  bool empty() const { return members.empty(); }

  friend bool operator==(const ActiveSet&, const ActiveSet&) = default;
};

/// What one agent may see when computing its control: its own spec and
/// state plus weighted neighbor positions. Nothing about neighbor
/// objectives, constraints or multipliers is reachable from here.
struct NeighborSample {
  double weight = 1.0;
  Vec position;
};

struct LocalView {
  const AgentSpec* spec = nullptr;
  Vec xi;
  Vec lami;
  std::vector<NeighborSample> neighbors;
};

LocalView local_view(const Scenario& s, const NetworkState& state, std::size_t i);

/// h_i = -beta * sum_j w_ij (x_i - x_j).
Vec consensus_term(double beta, const Vec& xi, std::span<const NeighborSample> neighbors);
Vec consensus_term(const Scenario& s, const NetworkState& state, std::size_t i);

/// grad_x L_i = grad f_i + sum_k lam_k grad g_ik.
Vec node_lagrangian_grad(const AgentSpec& a, const Vec& xi, const Vec& lami);

/// u_i = -alpha * grad_x L_i + h_i, from the local view only.
Vec control_input(double alpha, double beta, const LocalView& view);
Vec control_input(const Scenario& s, const NetworkState& state, std::size_t i);

/// Projected dual rate: g_ik(x_i) when g_ik(x_i) > 0 or lam_k > 0, else 0.
Vec dual_rate(const AgentSpec& a, const Vec& xi, const Vec& lami);

/// Scalar form of the projection [p]^+_q.
inline double positive_projection(double p, double q) { return (p > 0.0 || q > 0.0) ? p : 0.0; }

ActiveSet active_set(const Scenario& s, const NetworkState& state);

/// Flattened index of each agent's first constraint; size N + 1.
std::vector<std::size_t> constraint_offsets(const Scenario& s);

/// Active set encoded as a bitmask over flattened constraint indices.
/// Throws std::length_error when the scenario has more than 64 constraints.
std::uint64_t sigma_bitmask(const Scenario& s, const ActiveSet& sigma);

/// All rates at once: row i of `xdot` is u_i, `lamdot[i]` the dual rates.
struct Rates {
  Mat xdot;
  std::vector<Vec> lamdot;
};

Rates network_rates(const Scenario& s, const NetworkState& state);

}  // namespace optcon
