#pragma once

#include <vector>

#include "optcon/protocol.hpp"

namespace optcon {

enum class EventKind { sigma_entry, sigma_exit };

/// A constraint entering or leaving the active projection set at time t.
struct SigmaEvent {
  double t = 0.0;
  ConstraintRef ref;
  EventKind kind = EventKind::sigma_entry;

  friend bool operator==(const SigmaEvent&, const SigmaEvent&) = default;
};

/// Largest control and dual-rate magnitudes at one sample.
struct RateSample {
  double max_control = 0.0;    // max_i ||u_i||
  double max_dual_rate = 0.0;  // max_ik |lamdot_ik|

  friend bool operator==(const RateSample&, const RateSample&) = default;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<NetworkState> states;
  std::vector<ActiveSet> sigma;
  std::vector<RateSample> rates;
  std::vector<SigmaEvent> events;

  std::size_t size() const { return states.size(); }
  const NetworkState& back() const { return states.back(); }

  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

/// One explicit step of `s.method` with step `h`. The dual projection is
/// applied inside every stage; stage and final multipliers are clamped at
/// zero. Throws IntegrationError on a non-finite rate.
NetworkState step(const Scenario& s, const NetworkState& state, double h);
inline NetworkState step(const Scenario& s, const NetworkState& state) {
  return step(s, state, s.dt);
}

/// Integrates from the scenario's initial state to t_final on the grid
/// k * dt (the last step may be shorter).
Trajectory simulate(const Scenario& s);
/// Same, from an explicit initial state.
Trajectory simulate(const Scenario& s, NetworkState initial);

/// True iff every sample within the trailing `window` has all controls and
/// dual rates below `tol`. Throws std::invalid_argument when the window is
/// longer than the trajectory.
bool has_settled(const Trajectory& traj, double tol, double window);

RateSample rate_sample(const Rates& r);

}  // namespace optcon
