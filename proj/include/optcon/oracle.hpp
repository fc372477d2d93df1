#pragma once

#include <vector>

#include "optcon/protocol.hpp"

namespace optcon {

/// Centralized optimum of min sum_i f_i(x) s.t. g_ik(x) <= 0.
struct KktSolution {
  Vec x_star;
  std::vector<Vec> lambda_star;  // per agent, per constraint, >= 0
  std::vector<ConstraintRef> active_constraints;
  double objective_value = 0.0;
};

struct KktResiduals {
  /// ||sum_i grad f_i(m) + sum_ik lam_ik grad g_ik(m)|| at the network mean m.
  double stationarity = 0.0;
  /// ||sum_i grad_x L_i(x_i, lam_i)|| with every agent at its own position.
  double aggregate_stationarity = 0.0;
  /// max(0, max_ik g_ik(x_i)).
  double primal_feasibility = 0.0;
  /// max(0, -min lam).
  double dual_feasibility = 0.0;
  /// max_ik |lam_ik g_ik(x_i)|.
  double complementarity = 0.0;
  /// max_ij ||x_i - x_j||.
  double consensus = 0.0;
};

struct KktOptions {
  double tol = 1e-9;
  std::size_t max_constraints = 20;
  int max_newton_iterations = 60;
};

/// Exhaustive active-set enumeration. For every candidate set the
/// stationarity system is solved by damped Newton from the unconstrained
/// optimum; feasible candidates compete on objective value.
/// Throws OracleError when the enumeration bound is exceeded, no candidate
/// is feasible, or Newton fails on every candidate.
KktSolution solve_kkt(const Scenario& s, const KktOptions& opts = {});

struct Box {
  Vec lower;
  Vec upper;
};

struct GridSolution {
  Vec x;
  Vec resolution;  // grid spacing per axis at the finest level
};

inline constexpr int kGridPointsPerAxis = 41;

/// Multilevel grid search over feasible points (m <= 3). Each level
/// re-centres the box on the incumbent and shrinks it 4x.
/// Throws OracleError when the coarsest grid contains no feasible point.
GridSolution solve_grid(const Scenario& s, const Box& bounds, int levels);

KktResiduals kkt_residuals(const Scenario& s, const NetworkState& state);

/// Network state with every agent at x* and the oracle multipliers.
NetworkState replicate(const Scenario& s, const KktSolution& sol);

/// L(x, lam) = sum_i f_i(x_i) + sum_ik lam_ik g_ik(x_i).
double lagrangian(const Scenario& s, const Mat& x, const std::vector<Vec>& lam);

/// sum_i f_i(x).
double aggregate_objective(const Scenario& s, const Vec& x);

}  // namespace optcon
